"""Command-line interface: ``kdcode {bounds,figure,verify,train,encode}``.

Exit codes: 0 success, 1 a verification suite failed, 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import checks
from .bounds import scheme_bounds
from .csvio import CSVFormatError, parse_numeric_csv
from .encoders import encode_batch
from .erm import train
from .experiments import FIGURES, figure_data, figure_rows_to_csv, sample
from .model import DistributionSpec, Scheme, SchemeSpec, constraint_for, parse_p

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SCHEMES = [s.value for s in Scheme] + ["general"]


class UsageError(Exception):
    pass


# --------------------------------------------------------------- arg types


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if math.isnan(value):
        raise argparse.ArgumentTypeError("NaN is not allowed")
    return value


def _positive(text: str) -> float:
    value = _number(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _count(text: str) -> int:
    value = _number(text)
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return int(value)


def _non_negative_count(text: str) -> int:
    value = _number(text)
    if value != int(value) or value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return int(value)


def _delta(text: str) -> float:
    value = _number(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"delta must lie strictly between 0 and 1, got {text}")
    return value


def _p_index(text: str) -> float:
    try:
        return parse_p(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


# ------------------------------------------------------------------ parser


def _add_scheme_args(p, need_mk=True):
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    if need_mk:
        p.add_argument("--m", type=_count, required=True, help="data dimension")
        p.add_argument("--k", type=_count, required=True, help="number of columns of T")
    p.add_argument("--r", type=_positive, default=1.0, help="data radius")
    p.add_argument("--c", type=_positive, default=1.0, help="column-norm bound on T")
    p.add_argument("--s", type=_positive, default=1.0, help="lp-ball radius for sparse coding")
    p.add_argument("--p", type=_p_index, default=math.inf, help="lp-ball index: 1, 2 or inf")


def _add_output_args(p, formats=("csv", "json"), default="csv"):
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--out", help="write here instead of stdout")


def _add_seed(p):
    p.add_argument("--seed", type=_seed, default=None, help="master seed (falls back to $KDIM_SEED, then 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kdcode", description="Generalization bounds for k-dimensional coding schemes.")
    parser.add_argument("--config", help="JSON file of option values for the chosen subcommand")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    b = sub.add_parser("bounds", help="evaluate every bound at one parameter point")
    _add_scheme_args(b)
    b.add_argument("--n", type=_positive, required=True, help="sample size")
    b.add_argument("--delta", type=_delta, required=True, help="confidence parameter in (0, 1)")
    b.add_argument("--rn", type=_number, default=None, help="empirical risk, enables the variance-sensitive bounds")
    b.add_argument("--lam", type=_positive, default=None, help="lambda for the relative risk bound")
    b.add_argument("--V", dest="V", type=_positive, default=None, help="variance proxy for the Bennett bound")
    b.add_argument("--beta", type=_positive, default=2.0)
    _add_output_args(b)

    f = sub.add_parser("figure", help="write the bound curves of one comparison figure as CSV")
    f.add_argument("--id", dest="figure_id", required=True, help=f"one of {', '.join(FIGURES)}")
    for var in ("n", "m", "k"):
        f.add_argument(f"--{var}-min", type=_positive, default=None)
        f.add_argument(f"--{var}-max", type=_positive, default=None)
    f.add_argument("--points", type=_count, default=None, help="sweep points before integer rounding")
    f.add_argument("--delta", type=_delta, default=None)
    f.add_argument("--out", help="CSV path (stdout if omitted)")

    v = sub.add_parser("verify", help="run a verification suite and print a pass/fail table")
    vs = v.add_subparsers(dest="target", required=True)
    vc = vs.add_parser("cover", help="empirical cover of the grid net versus the closed form")
    vc.add_argument("--scheme", choices=SCHEMES, action="append", default=None, help="repeatable; default dictionary and kmeans")
    vc.add_argument("--m", type=_count, default=1)
    vc.add_argument("--k", type=_count, default=1)
    vc.add_argument("--xi", type=_positive, nargs="+", default=[1.0, 0.5, 0.25])
    vc.add_argument("--n", type=_count, default=8, help="sample points")
    vc.add_argument("--r", type=_positive, default=1.0)
    vc.add_argument("--c", type=_positive, default=1.0)
    _add_seed(vc)
    vg = vs.add_parser("gap", help="Monte Carlo generalization gap versus the covering bound")
    vg.add_argument("--scheme", choices=SCHEMES, default="kmeans")
    vg.add_argument("--m", type=_count, default=1)
    vg.add_argument("--k", type=_count, default=1)
    vg.add_argument("--n", type=_count, default=100)
    vg.add_argument("--trials", type=_non_negative_count, default=200)
    vg.add_argument("--delta", type=_delta, default=0.05)
    vg.add_argument("--r", type=_positive, default=1.0)
    vg.add_argument("--c", type=_positive, default=1.0)
    vg.add_argument("--candidates", type=_non_negative_count, default=0, help="random candidates besides T = 0")
    vg.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel trial workers")
    vg.add_argument("--json", dest="report_json", help="also write the full gap report here")
    _add_seed(vg)
    vt = vs.add_parser("tails", help="Bennett tail <= Bernstein tail on a random grid")
    vt.add_argument("--points", type=_count, default=10_000)
    _add_seed(vt)
    ve = vs.add_parser("encoders", help="solvers versus exhaustive grid search")
    ve.add_argument("--instances", type=_count, default=200)
    _add_seed(ve)

    t = sub.add_parser("train", help="fit T by alternating minimization")
    _add_scheme_args(t, need_mk=False)
    t.add_argument("--k", type=_count, required=True)
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV of points, one per row, header required")
    src.add_argument("--dist", help="JSON distribution spec to sample from")
    t.add_argument("--count", type=_count, default=100, help="points drawn with --dist")
    t.add_argument("--outer-iters", type=_count, default=100)
    t.add_argument("--tol", type=_positive, default=1e-8)
    t.add_argument("--out")
    _add_seed(t)

    e = sub.add_parser("encode", help="encode points against a given T")
    _add_scheme_args(e, need_mk=False)
    e.add_argument("--T", dest="T", required=True, help="CSV of T, m rows by k columns, header required")
    e.add_argument("--data", required=True, help="CSV of points, one per row, header required")
    e.add_argument("--tol", type=_positive, default=1e-8)
    _add_output_args(e, default="json")
    return parser


# ------------------------------------------------------------------ config


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(name)
    return None


def _config_tokens(parser, argv, config_path):
    """Translate a JSON RunConfig into command-line tokens placed before ``argv``'s own flags."""
    try:
        config = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--config: cannot read {config_path}: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError("--config: top level must be a JSON object")
    config = dict(config)
    # leading positional tokens name the subcommand (and verify target)
    lead = []
    for arg in argv[:2]:
        if arg.startswith("-"):
            break
        lead.append(arg)
    command = config.pop("subcommand", None)
    if lead and command and lead[0] != command:
        raise UsageError(f"--config is for {command!r} but the command line says {lead[0]!r}")
    command = command or (lead[0] if lead else None)
    if command is None:
        raise UsageError("--config needs a subcommand, on the command line or as 'subcommand'")
    sp = _subparser(parser, command)
    if sp is None:
        raise UsageError(f"unknown subcommand {command!r}")
    chain = [command]
    if command != "verify":
        lead = lead[:1]
    else:
        target = config.pop("target", None)
        given = lead[1] if len(lead) > 1 else None
        if target and given and target != given:
            raise UsageError(f"--config is for verify {target!r} but the command line says {given!r}")
        target = target or given
        if target is None:
            raise UsageError("--config for verify needs 'target'")
        chain.append(target)
        sp = _subparser(sp, target)
        if sp is None:
            raise UsageError(f"unknown verify target {target!r}")
    # keys are flag names without the leading dashes; "_" may stand in for "-"
    flags = {
        a.option_strings[0].lstrip("-"): a.option_strings[0]
        for a in sp._actions
        if a.option_strings and a.dest != "help"
    }
    unknown = sorted(key for key in config if key.replace("_", "-") not in flags)
    if unknown:
        raise UsageError(f"--config: unknown keys {unknown}")
    tokens = []
    for key, value in config.items():
        for item in value if isinstance(value, list) else [value]:
            tokens += [flags[key.replace("_", "-")], str(item)]
    return chain + tokens + argv[len(lead):]


def _split_config(argv):
    out, path = [], None
    it = iter(argv)
    for arg in it:
        if arg == "--config":
            path = next(it, None)
            if path is None:
                raise UsageError("--config needs a path")
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
        else:
            out.append(arg)
    return out, path


# ----------------------------------------------------------------- helpers


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("KDIM_SEED")
    if env is None or env == "":
        return 0
    try:
        return _seed(env)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"KDIM_SEED: {exc}") from None


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _read_csv(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    try:
        return parse_numeric_csv(text)
    except CSVFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _spec(args, m, k) -> SchemeSpec:
    return SchemeSpec(Scheme.parse(args.scheme), m, k, r=args.r, c=args.c, s=args.s, p=args.p)


# ---------------------------------------------------------------- commands


def cmd_bounds(args) -> int:
    spec = _spec(args, args.m, args.k)
    report = scheme_bounds(spec, args.n, args.delta, empirical_risk=args.rn, lam=args.lam, V=args.V, beta=args.beta)
    if not report.applicable():
        raise UsageError("no bound could be evaluated at these parameters")
    _emit(report.to_csv() if args.format == "csv" else report.to_json(), args.out)
    return EXIT_OK


def cmd_figure(args) -> int:
    if args.figure_id not in FIGURES:
        raise UsageError(f"--id: unknown figure {args.figure_id!r}; known ids: {', '.join(FIGURES)}")
    overrides = {}
    for key in ("n_min", "n_max", "m_min", "m_max", "k_min", "k_max", "points", "delta"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    rows = figure_data(args.figure_id, overrides)
    _emit(figure_rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = _resolve_seed(args)
    if args.target == "tails":
        rows = checks.check_tails(args.points, seed)
    elif args.target == "encoders":
        rows = checks.check_encoders(args.instances, seed)
    elif args.target == "cover":
        schemes = args.scheme or ["dictionary", "kmeans"]
        rows = checks.check_cover(schemes, args.m, args.k, args.xi, args.n, seed, r=args.r, c=args.c)
    else:
        rows, report = checks.check_gap(
            args.scheme,
            args.m,
            args.k,
            args.n,
            args.trials,
            seed,
            args.delta,
            r=args.r,
            c=args.c,
            extra_candidates=args.candidates,
            n_jobs=max(1, args.jobs),
        )
        if args.report_json:
            Path(args.report_json).write_text(report.to_json() + "\n", encoding="utf-8")
    print(checks.rows_table(rows))
    return EXIT_OK if checks.all_passed(rows) else EXIT_FAIL


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    if args.data:
        X = _read_csv(args.data)
    else:
        try:
            dist = DistributionSpec.from_dict(json.loads(Path(args.dist).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise UsageError(f"--dist: {exc}") from None
        X = sample(dist, args.count, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,))))
    spec = _spec(args, X.shape[1], args.k)
    report = train(spec, X, outer_iters=args.outer_iters, tol=args.tol, random_state=seed)
    _emit(report.to_json(), args.out)
    return EXIT_OK


def cmd_encode(args) -> int:
    T = _read_csv(args.T)
    X = _read_csv(args.data)
    if X.shape[1] != T.shape[0]:
        raise UsageError(f"--data has {X.shape[1]} columns but --T has {T.shape[0]} rows")
    spec = _spec(args, T.shape[0], T.shape[1])
    enc = encode_batch(X, T, constraint_for(spec), tol=args.tol)
    if args.format == "json":
        records = [
            {"code": enc.codes[i].tolist(), "loss": float(enc.losses[i]), "iterations": int(enc.iterations[i]), "converged": bool(enc.converged[i])}
            for i in range(len(X))
        ]
        text = json.dumps(records, indent=2)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"y{j + 1}" for j in range(T.shape[1])] + ["loss", "iterations", "converged"])
        for code, loss, its, ok in zip(enc.codes, enc.losses, enc.iterations, enc.converged):
            w.writerow([repr(float(v)) for v in code] + [repr(float(loss)), int(its), str(bool(ok)).lower()])
        text = buf.getvalue()
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {"bounds": cmd_bounds, "figure": cmd_figure, "verify": cmd_verify, "train": cmd_train, "encode": cmd_encode}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, config_path = _split_config(argv)
        if config_path:
            argv = _config_tokens(parser, argv, config_path)
    except UsageError as exc:
        print(f"kdcode: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with exit code 2
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(f"kdcode: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"kdcode: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
