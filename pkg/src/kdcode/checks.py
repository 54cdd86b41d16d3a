"""Desk-scale verification suites shared by ``kdcode verify`` and the tests.

Each suite returns a list of `CheckRow`; a suite passes when every row does.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .bounds import bennett_tail, bernstein_tail
from .covering import verify_cover
from .encoders import _nonneg_box, brute_force_encode, encode
from .erm import random_implementation
from .experiments import gap_experiment
from .model import ConstraintSet, DistributionSpec, Scheme, SchemeSpec

__all__ = ["CheckRow", "check_tails", "check_encoders", "check_cover", "check_gap", "rows_table", "all_passed"]


@dataclass(frozen=True)
class CheckRow:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return asdict(self)


def all_passed(rows) -> bool:
    return all(row.passed for row in rows)


def rows_table(rows) -> str:
    width = max((len(r.name) for r in rows), default=4)
    lines = [f"{'check'.ljust(width)}  result  detail"]
    lines += [f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL':6}  {r.detail}" for r in rows]
    return "\n".join(lines)


def check_tails(points: int = 10_000, seed: int = 0) -> list[CheckRow]:
    """Bennett tail never exceeds the Bernstein tail on a random parameter grid.

    Draws ``n <= 1e4``, ``B`` log-uniform in ``[1e-2, 10]``, ``eps`` in ``(0, B]``
    and ``V`` in ``(0, B^2]``.
    """
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 10_001, points)
    B = 10.0 ** rng.uniform(-2, 1, points)
    eps = B * (1.0 - rng.random(points))
    V = B * B * (1.0 - rng.random(points))
    violations = 0
    worst = 0.0
    for i in range(points):
        ben = bennett_tail(n[i], eps[i], V[i], B[i])
        ber = bernstein_tail(n[i], eps[i], V[i], B[i])
        if ben > ber:
            violations += 1
            worst = max(worst, ben - ber)
    detail = f"{violations} violations in {points} points"
    if violations:
        detail += f", worst excess {worst:.3g}"
    return [CheckRow("bennett <= bernstein", violations == 0, detail)]


def _encoder_cases():
    yield "nmf", ConstraintSet.nonneg(), Scheme.NMF
    yield "dictionary", ConstraintSet.l2_ball(1.0), Scheme.DICTIONARY
    for p in (1.0, 2.0, math.inf):
        yield f"sparse p={p:g}", ConstraintSet.lp_ball(1.0, p), Scheme.SPARSE
    yield "kmeans", ConstraintSet.standard_basis(), Scheme.KMEANS


def _random_instance(rng, scheme, max_box=3.0):
    m, k = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    while True:
        D = rng.standard_normal((m, k))
        T = D / np.linalg.norm(D, axis=0) * rng.uniform(0.2, 1.0, k)
        x = rng.standard_normal(m)
        x *= rng.random() ** (1.0 / m) / np.linalg.norm(x)
        if scheme is Scheme.NMF:
            T, x = np.abs(T), np.abs(x)
            # keep the brute-force box small enough to enumerate quickly
            if _nonneg_box(x, T) > max_box:
                continue
        return T, x


def check_encoders(instances: int = 200, seed: int = 0, c: float = 1.0) -> list[CheckRow]:
    """Compare the solvers with exhaustive grid search on small random instances.

    Tolerance per instance is ``5 * step * (1 + ||x|| + c k)`` with step
    1e-3, or 1e-4 when ``k = 1``.  The grid only contains feasible codes, so
    the solver must also never be worse than the grid minimum by more than
    the same tolerance.
    """
    rows = []
    rng = np.random.default_rng(seed)
    for name, constraint, scheme in _encoder_cases():
        worst, failures = 0.0, 0
        for _ in range(instances):
            T, x = _random_instance(rng, scheme)
            k = T.shape[1]
            step = 1e-4 if k == 1 else 1e-3
            tol = 5.0 * step * (1.0 + np.linalg.norm(x) + c * k)
            solved = encode(x, T, constraint, tol=1e-10).loss
            grid = brute_force_encode(x, T, constraint, step)
            err = abs(solved - grid)
            worst = max(worst, err / tol)
            failures += err > tol
        rows.append(
            CheckRow(f"encoder {name}", failures == 0, f"{failures}/{instances} outside tolerance, worst {worst:.3f} x tol")
        )
    return rows


def check_cover(
    schemes=(Scheme.DICTIONARY, Scheme.KMEANS),
    m: int = 1,
    k: int = 1,
    xis=(1.0, 0.5, 0.25),
    n: int = 8,
    seed: int = 0,
    r: float = 1.0,
    c: float = 1.0,
) -> list[CheckRow]:
    """Empirical log cover of the grid-net loss class against the closed form."""
    rows = []
    for scheme in schemes:
        spec = SchemeSpec(Scheme.parse(scheme), m, k, r=r, c=c)
        for xi in xis:
            rep = verify_cover(spec, xi, n=n, seed=seed)
            ln_emp = math.log(rep.empirical_size)
            how = "exact" if rep.exact else "greedy"
            rows.append(
                CheckRow(
                    f"cover {spec.scheme.value} xi={xi:g}",
                    rep.sound,
                    f"ln N ({how}) = {ln_emp:.4f} <= {rep.ln_theoretical:.4f}, net of {rep.net_size}",
                )
            )
    return rows


def check_gap(
    scheme="kmeans",
    m: int = 1,
    k: int = 1,
    n: int = 100,
    trials: int = 200,
    seed: int = 0,
    delta: float = 0.05,
    r: float = 1.0,
    c: float = 1.0,
    extra_candidates: int = 0,
    n_jobs: int = 1,
):
    """Gap experiment against the covering + Hoeffding bound.

    Candidates are the zero matrix plus ``extra_candidates`` random feasible
    implementations.  Passes when the violation rate is at most ``delta``.
    Returns ``(rows, report)``.
    """
    spec = SchemeSpec(Scheme.parse(scheme), m, k, r=r, c=c)
    dist = DistributionSpec.uniform_positive_ball(m, r) if spec.scheme is Scheme.NMF else DistributionSpec.uniform_ball(m, r)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    candidates = [np.zeros((m, k))] + [random_implementation(spec, rng) for _ in range(extra_candidates)]
    report = gap_experiment(spec, dist, candidates, n, trials, seed=seed, delta=delta, n_jobs=n_jobs)
    bound = report.bound_values["covering_hoeffding"]
    worst = max(report.gap_sup_per_trial, default=0.0)
    passed = report.violations <= delta * trials
    row = CheckRow(
        f"gap {spec.scheme.value} m={m} k={k} n={n}",
        passed,
        f"{report.violations}/{trials} violations, max gap {worst:.4g}, bound {bound:.4g}",
    )
    return [row], report
