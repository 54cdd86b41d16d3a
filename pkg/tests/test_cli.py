import csv
import io
import json
import shutil
import subprocess

import pytest

from kdcode.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    return {r["bound_name"]: r for r in csv.DictReader(io.StringIO(text))}


class TestBounds:
    def test_nmf_csv(self, capsys):
        code, out, _ = run(capsys, "bounds", "--scheme", "nmf", "--m", "1000", "--k", "50", "--n", "1000000", "--delta", "0.01")
        assert code == 0
        assert float(_rows(out)["nmf_covering"]["value"]) == pytest.approx(0.803, rel=0.01)

    def test_kmeans_three_scheme_rows(self, capsys):
        code, out, _ = run(capsys, "bounds", "--scheme", "kmeans", "--m", "100", "--k", "100", "--n", "1e6", "--delta", "0.01")
        rows = _rows(out)
        own = [n for n, r in rows.items() if n.startswith("kmeans_") and r["applicable"] == "true"]
        assert code == 0 and sorted(own) == ["kmeans_covering", "kmeans_lipschitz", "kmeans_rademacher"]

    @pytest.mark.parametrize("delta", ["1.5", "0", "1", "abc"])
    def test_bad_delta(self, capsys, delta):
        code, _, err = run(capsys, "bounds", "--scheme", "nmf", "--m", "2", "--k", "2", "--n", "100", "--delta", delta)
        assert code == 2 and "--delta" in err

    def test_json_with_optional_inputs(self, capsys):
        code, out, _ = run(
            capsys, "bounds", "--scheme", "nmf", "--m", "2", "--k", "2", "--n", "1e5", "--delta", "0.05",
            "--rn", "0.1", "--lam", "1", "--V", "0.1", "--format", "json",
        )
        entries = {e["bound_name"]: e for e in json.loads(out)["entries"]}
        assert code == 0 and entries["covering_bennett"]["applicable"]

    def test_tiny_radii_still_evaluate(self, capsys):
        code, _, _ = run(capsys, "bounds", "--scheme", "nmf", "--m", "1", "--k", "1", "--n", "1", "--delta", "0.5", "--r", "1e-9", "--c", "1e-9")
        assert code == 0

    def test_non_integer_dimension(self, capsys):
        code, _, err = run(capsys, "bounds", "--scheme", "nmf", "--m", "2.5", "--k", "2", "--n", "10", "--delta", "0.1")
        assert code == 2 and "--m" in err

    def test_out_file(self, capsys, tmp_path):
        out = tmp_path / "b.csv"
        code, stdout, _ = run(capsys, "bounds", "--scheme", "sparse", "--m", "100", "--k", "50", "--s", "10", "--p", "1", "--n", "1e6", "--delta", "0.01", "--out", str(out))
        assert code == 0 and stdout == ""
        assert float(_rows(out.read_text())["sparse_covering"]["value"]) == pytest.approx(0.236, rel=0.01)


class TestFigure:
    def test_writes_three_curves(self, capsys, tmp_path):
        path = tmp_path / "fig1b.csv"
        code, _, _ = run(capsys, "figure", "--id", "1b", "--out", str(path))
        rows = list(csv.DictReader(path.open()))
        assert code == 0 and {r["bound_name"] for r in rows} == {"nmf_covering", "nmf_rademacher", "nmf_lipschitz"}
        assert {r["sweep_var"] for r in rows} == {"n"}
        assert b"\r" not in path.read_bytes()

    def test_unknown_id(self, capsys):
        code, _, err = run(capsys, "figure", "--id", "9z")
        assert code == 2 and "9z" in err

    def test_k_max(self, capsys):
        code, out, _ = run(capsys, "figure", "--id", "3d", "--k-max", "300")
        assert code == 0
        assert max(float(r["sweep_value"]) for r in csv.DictReader(io.StringIO(out))) == 300


class TestVerify:
    def test_tails(self, capsys):
        code, out, _ = run(capsys, "verify", "tails", "--points", "2000")
        assert code == 0 and "PASS" in out

    def test_cover(self, capsys):
        code, out, _ = run(capsys, "verify", "cover", "--m", "1", "--k", "1", "--xi", "0.25")
        assert code == 0 and out.count("PASS") == 2

    def test_gap(self, capsys, tmp_path):
        report = tmp_path / "gap.json"
        argv = ["verify", "gap", "--scheme", "kmeans", "--n", "100", "--trials", "200", "--seed", "7", "--jobs", "1", "--json", str(report)]
        code, out, _ = run(capsys, *argv)
        assert code == 0 and "0/200 violations" in out
        first = report.read_text()
        run(capsys, *argv)
        assert report.read_text() == first

    def test_encoders_small(self, capsys):
        code, out, _ = run(capsys, "verify", "encoders", "--instances", "5")
        assert code == 0 and "FAIL" not in out

    def test_cover_guard(self, capsys):
        code, _, err = run(capsys, "verify", "cover", "--m", "3", "--k", "3", "--xi", "0.01")
        assert code == 2 and "guard" in err

    def test_failure_exit_code(self, capsys, monkeypatch):
        from kdcode import checks

        monkeypatch.setattr(checks, "check_tails", lambda points, seed: [checks.CheckRow("forced", False, "")])
        code, out, _ = run(capsys, "verify", "tails")
        assert code == 1 and "FAIL" in out

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("KDIM_SEED", "not-a-seed")
        code, _, err = run(capsys, "verify", "tails", "--points", "10")
        assert code == 2 and "KDIM_SEED" in err


@pytest.fixture
def data(tmp_path):
    (tmp_path / "two.csv").write_text("x1\n0.9\n-0.9\n")
    (tmp_path / "nmf.csv").write_text("x1\n0.5\n1.0\n")
    (tmp_path / "bad.csv").write_text("x1\n0.5\nabc\n")
    (tmp_path / "T.csv").write_text("t1,t2\n0,1\n0,0\n")
    (tmp_path / "pts.csv").write_text("x1,x2\n0.6,0\n")
    (tmp_path / "dist.json").write_text('{"kind": "uniform_ball", "m": 2, "r": 1}')
    return tmp_path


class TestTrainEncode:
    def test_train_kmeans(self, capsys, data):
        code, out, _ = run(capsys, "train", "--scheme", "kmeans", "--k", "2", "--data", str(data / "two.csv"), "--seed", "1")
        assert code == 0 and json.loads(out)["empirical_risk"] == 0.0

    def test_train_nmf(self, capsys, data):
        code, out, _ = run(capsys, "train", "--scheme", "nmf", "--k", "1", "--data", str(data / "nmf.csv"))
        rep = json.loads(out)
        assert code == 0 and rep["T"] == [[1.0]] and rep["empirical_risk"] == pytest.approx(0.0, abs=1e-15)

    def test_malformed_csv(self, capsys, data):
        code, _, err = run(capsys, "train", "--scheme", "nmf", "--k", "1", "--data", str(data / "bad.csv"))
        assert code == 2 and "line 3" in err

    def test_missing_file(self, capsys, data):
        code, _, _ = run(capsys, "train", "--scheme", "nmf", "--k", "1", "--data", str(data / "nope.csv"))
        assert code == 2

    def test_train_from_distribution_is_reproducible(self, capsys, data, monkeypatch):
        argv = ["train", "--scheme", "dictionary", "--k", "2", "--dist", str(data / "dist.json"), "--count", "40"]
        _, a, _ = run(capsys, *argv, "--seed", "3")
        monkeypatch.setenv("KDIM_SEED", "3")
        _, b, _ = run(capsys, *argv)
        _, c, _ = run(capsys, *argv, "--seed", "4")
        assert a == b and a != c

    def test_encode(self, capsys, data):
        code, out, _ = run(capsys, "encode", "--scheme", "kmeans", "--T", str(data / "T.csv"), "--data", str(data / "pts.csv"))
        rec = json.loads(out)[0]
        assert code == 0 and rec["loss"] == pytest.approx(0.16) and rec["code"] == [0.0, 1.0]

    def test_encode_csv(self, capsys, data):
        code, out, _ = run(capsys, "encode", "--scheme", "kmeans", "--T", str(data / "T.csv"), "--data", str(data / "pts.csv"), "--format", "csv")
        row = next(csv.DictReader(io.StringIO(out)))
        assert code == 0 and float(row["loss"]) == pytest.approx(0.16)
        assert row["converged"] == "true" and row["iterations"].isdigit()

    def test_encode_shape_mismatch(self, capsys, data):
        code, _, err = run(capsys, "encode", "--scheme", "kmeans", "--T", str(data / "T.csv"), "--data", str(data / "nmf.csv"))
        assert code == 2 and "columns" in err


class TestConfig:
    def test_config_supplies_options(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"subcommand": "bounds", "scheme": "kmeans", "m": 100, "k": 100, "n": 1e6, "delta": 0.01}))
        code, out, _ = run(capsys, "--config", str(cfg))
        assert code == 0 and float(_rows(out)["kmeans_covering"]["value"]) == pytest.approx(0.302, rel=0.01)

    def test_command_line_overrides_config(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"scheme": "kmeans", "m": 100, "k": 100, "n": 1e6, "delta": 0.01}))
        code, out, _ = run(capsys, "bounds", "--config", str(cfg), "--k", "50")
        assert code == 0
        assert float(_rows(out)["kmeans_rademacher"]["value"]) < 0.5

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"subcommand": "bounds", "bogus": 1}))
        code, _, err = run(capsys, "--config", str(cfg))
        assert code == 2 and "bogus" in err

    def test_config_validates_delta(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"scheme": "nmf", "m": 2, "k": 2, "n": 10, "delta": 2}))
        code, _, err = run(capsys, "bounds", "--config", str(cfg))
        assert code == 2 and "--delta" in err

    @pytest.mark.parametrize("key", ["k-max", "k_max"])
    def test_keys_are_flag_names(self, capsys, tmp_path, key):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"subcommand": "figure", "id": "3d", key: 300, "points": 5}))
        code, out, _ = run(capsys, "--config", str(cfg))
        assert code == 0
        assert max(float(r["sweep_value"]) for r in csv.DictReader(io.StringIO(out))) == 300

    def test_verify_target_from_config(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"subcommand": "verify", "target": "tails", "points": 100}))
        code, out, _ = run(capsys, "--config", str(cfg))
        assert code == 0 and "PASS" in out


def test_no_subcommand(capsys):
    assert main([]) == 2


@pytest.mark.skipif(shutil.which("kdcode") is None, reason="console script not installed")
def test_console_script_exit_code():
    proc = subprocess.run(["kdcode", "figure", "--id", "9z"], capture_output=True, text=True)
    assert proc.returncode == 2
