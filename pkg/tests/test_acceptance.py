"""The ten acceptance criteria, at their stated tolerances.

A one-line PASS/FAIL per criterion is printed in the terminal summary
(see ``conftest.py``).
"""

import math
import time

import numpy as np
import pytest

from kdcode.bounds import (
    BoundParams,
    bennett_exponent,
    bennett_tail,
    bernstein_tail,
    covering_bernstein_bound,
    covering_hoeffding_bound,
    scheme_bounds,
)
from kdcode.checks import all_passed, check_cover, check_encoders, check_tails
from kdcode.experiments import crossover_scan, gap_experiment
from kdcode.model import DistributionSpec, Scheme, SchemeSpec


def _values(spec, n=1e6, delta=0.01):
    report = scheme_bounds(spec, n, delta)
    return {e.bound_name: e.value for e in report.applicable()}


# Independent transcriptions of the printed scheme formulas.
def _hoeffding_form(log_arg, m, k, n, delta):
    return 2 / n + math.sqrt((m * k * math.log(log_arg) + math.log(2 / delta)) / (2 * n))


def _lipschitz_form(m, k, n, delta, lc):
    return 3 / math.sqrt(8) * math.sqrt(m * k * lc * math.log(n) / n) + 1 / math.sqrt(8) * math.sqrt(
        (m * k * lc + math.log(2 / delta)) / n
    )


def test_criterion_01_nmf_ordering():
    """criterion 1: NMF covering < Lipschitz < Rademacher at m=1000, k=50, n=1e6 (+-2%, exact formulas, < 1 s)"""
    t0 = time.perf_counter()
    m, k, n, d = 1000, 50, 1e6, 0.01
    v = _values(SchemeSpec(Scheme.NMF, m, k), n, d)
    elapsed = time.perf_counter() - t0
    cov, rad, lip = v["nmf_covering"], v["nmf_rademacher"], v["nmf_lipschitz"]
    assert cov < lip < rad
    assert cov == pytest.approx(0.803, rel=0.02)
    assert lip == pytest.approx(2.87, rel=0.02)
    assert rad == pytest.approx(5.06, rel=0.02)
    exact_cov = _hoeffding_form(2 * (1 + k) * math.sqrt(m) * k * n, m, k, n, d)
    exact_rad = k / math.sqrt(n) * (14 * math.sqrt(k) + 0.5 * math.sqrt(math.log(16 * n * k))) + math.sqrt(
        math.log(2 / d) / (2 * n)
    )
    exact_lip = _lipschitz_form(m, k, n, d, math.log(12 * math.sqrt(8 * m * k)))
    assert cov == pytest.approx(exact_cov, rel=1e-14)
    assert rad == pytest.approx(exact_rad, rel=1e-14)
    assert lip == pytest.approx(exact_lip, rel=1e-14)
    assert elapsed < 1.0


def test_criterion_02_nmf_crossover_in_k():
    """criterion 2: exactly one sign change of NMF covering - Rademacher for k in [2, 50]"""
    found = crossover_scan("nmf_covering", "nmf_rademacher", "k", 2, 50, {"m": 1000, "n": 1e6, "delta": 0.01})
    assert len(found) == 1
    assert 5 < found[0] < 50


def test_criterion_03_sparse_ordering():
    """criterion 3: sparse covering < Lipschitz < Rademacher at m=100, k=50, p=1, s=10 (+-2%)"""
    m, k, n, d, s = 100, 50, 1e6, 0.01, 10.0
    v = _values(SchemeSpec(Scheme.SPARSE, m, k, s=s, p=1.0), n, d)
    cov, rad, lip = v["sparse_covering"], v["sparse_rademacher"], v["sparse_lipschitz"]
    assert cov < lip < rad
    assert cov == pytest.approx(0.236, rel=0.02)
    assert lip == pytest.approx(0.688, rel=0.02)
    assert rad == pytest.approx(2.67, rel=0.02)
    # p = 1 makes every k^(1 - 1/p) factor equal to 1
    exact_cov = _hoeffding_form(4 * (s + s * s) * math.sqrt(m) * n, m, k, n, d)
    exact_rad = (
        k / 2 * math.sqrt(math.log(16 * n * s * s * 2) / n)
        + math.sqrt(math.log(2 / d) / (2 * n))
        + (4 + 4 * s + math.sqrt(8 * math.pi) * s * k) / math.sqrt(n)
    )
    exact_lip = _lipschitz_form(m, k, n, d, max(math.log(6 * math.sqrt(8) * s), 1.0))
    assert cov == pytest.approx(exact_cov, rel=1e-14)
    assert rad == pytest.approx(exact_rad, rel=1e-14)
    assert lip == pytest.approx(exact_lip, rel=1e-14)


def test_criterion_04_kmeans_ordering():
    """criterion 4: k-means covering < Rademacher < Lipschitz at k=m=100, r=1 (+-2%)"""
    m, k, n, d = 100, 100, 1e6, 0.01
    v = _values(SchemeSpec(Scheme.KMEANS, m, k), n, d)
    cov, rad, lip = v["kmeans_covering"], v["kmeans_rademacher"], v["kmeans_lipschitz"]
    assert cov < rad < lip
    assert cov == pytest.approx(0.302, rel=0.02)
    assert rad == pytest.approx(0.758, rel=0.02)
    assert lip == pytest.approx(0.806, rel=0.02)
    assert cov == pytest.approx(_hoeffding_form(8 * math.sqrt(m) * n, m, k, n, d), rel=1e-14)
    exact_rad = 3 * math.sqrt(2 * math.pi) * k / math.sqrt(n) + math.sqrt(8 * math.log(1 / d) / n)
    assert rad == pytest.approx(exact_rad, rel=1e-14)
    assert lip == pytest.approx(_lipschitz_form(m, k, n, d, math.log(12 * math.sqrt(8))), rel=1e-14)


def test_criterion_05_covering_soundness():
    """criterion 5: empirical grid-net cover <= closed-form cover for m=k=1 (general and k-means, < 10 s)"""
    t0 = time.perf_counter()
    rows = []
    for seed in range(5):
        rows += check_cover((Scheme.DICTIONARY, Scheme.KMEANS), 1, 1, (1.0, 0.5, 0.25), n=8, seed=seed)
    assert all_passed(rows), [r for r in rows if not r.passed]
    assert time.perf_counter() - t0 < 10.0


def test_criterion_06_encoder_oracle():
    """criterion 6: 200 random instances per scheme agree with brute-force grid search (< 60 s)"""
    t0 = time.perf_counter()
    rows = check_encoders(instances=200, seed=2024)
    assert all_passed(rows), [r for r in rows if not r.passed]
    assert time.perf_counter() - t0 < 60.0


def test_criterion_07_tail_ordering():
    """criterion 7: Bennett tail <= Bernstein tail on a 1e4-point random grid, zero violations"""
    rows = check_tails(points=10_000, seed=11)
    assert all_passed(rows), rows
    # direct spot check independent of the suite's sampler
    assert bennett_tail(1, 1, 1, 1) == pytest.approx(2 * math.exp(-(2 * math.log(2) - 1)))
    assert bennett_tail(1, 1, 1, 1) <= bernstein_tail(1, 1, 1, 1)


def test_criterion_08_gap_soundness():
    """criterion 8: k-means gap experiment (m=k=1, n=100, 200 trials, delta=0.05) has zero violations, seed-deterministic"""
    t0 = time.perf_counter()
    spec = SchemeSpec(Scheme.KMEANS, 1, 1)
    dist = DistributionSpec.uniform_ball(1, 1.0)
    kwargs = dict(n=100, trials=200, seed=7, bounds_to_check=("covering_hoeffding",), delta=0.05)
    first = gap_experiment(spec, dist, [np.zeros((1, 1))], **kwargs)
    second = gap_experiment(spec, dist, [np.zeros((1, 1))], **kwargs)
    assert first.violations == 0
    assert first.to_dict() == second.to_dict()
    assert len(first.gap_sup_per_trial) == 200
    assert time.perf_counter() - t0 < 60.0


def test_criterion_09_bernstein_vs_hoeffding_regimes():
    """criterion 9: variance-sensitive bound beats Hoeffding at R_n=0.01 and loses at R_n=0.9 (m=k=r=c=1, n=1e3)"""
    base = BoundParams(m=1, k=1, n=1000, delta=2 / math.e)
    hoeffding = covering_hoeffding_bound(base)
    assert covering_bernstein_bound(base.replace(empirical_risk=0.01)) < hoeffding
    assert covering_bernstein_bound(base.replace(empirical_risk=0.9)) > hoeffding


def test_criterion_10_bennett_exponent_limit():
    """criterion 10: Bennett exponent is exactly 1/2 at 8 beta V / 3 = 1 and tends to 1/2 as the gap vanishes"""
    for g in (0.1, 0.01, 1e-5, 0.18):
        assert bennett_exponent(g, V=3 / 16, beta=2.0) == 0.5
    gaps = [10.0**-e for e in (1, 2, 4, 8, 16, 64, 256)]
    dist = [abs(bennett_exponent(g, V=0.1, beta=2.0) - 0.5) for g in gaps]
    assert all(a > b for a, b in zip(dist, dist[1:]))
    assert dist[-1] < 1e-3
