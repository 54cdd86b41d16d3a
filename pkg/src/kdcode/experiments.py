"""Monte Carlo validation of the bounds and the data behind the comparison figures.

Randomness is always derived from an integer master seed through
`numpy.random.SeedSequence` spawn keys, so each trial owns an independent
stream and a run is reproducible bit for bit regardless of ``n_jobs``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .bounds import SCHEME_TRIPLES, RegimeError, scheme_bound_value, scheme_bounds
from .encoders import encode_batch
from .model import (
    ConstraintSet,
    DistributionKind,
    DistributionSpec,
    ImplementationMatrix,
    Scheme,
    SchemeSpec,
    constraint_for,
)

__all__ = [
    "GapReport",
    "FigureRow",
    "FIGURES",
    "sample",
    "estimate_expected_risk",
    "gap_experiment",
    "figure_data",
    "figure_rows_to_csv",
    "crossover_scan",
    "bound_curve",
    "OmittedRowWarning",
]

Z99 = 2.5758293035489004  # two-sided 99% normal quantile
REFERENCE_FACTOR = 100  # reference risks use at least this many draws per sample point


class OmittedRowWarning(UserWarning):
    """A figure point fell outside a formula's valid regime and was dropped."""


def _rng(seed, *key):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def sample(dist: DistributionSpec, count: int, seed=0) -> np.ndarray:
    """Draw ``count`` i.i.d. points as rows of a ``(count, m)`` array."""
    rng = _rng(seed)
    m, r = dist.m, dist.r
    if dist.kind is DistributionKind.POINT_MIXTURE:
        idx = rng.choice(len(dist.atoms), size=count, p=dist.weights)
        return np.array(dist.atoms[idx])
    G = rng.standard_normal((count, m))
    G /= np.maximum(np.linalg.norm(G, axis=1, keepdims=True), 1e-300)
    X = G * (r * rng.random(count) ** (1.0 / m))[:, None]
    if dist.kind is DistributionKind.UNIFORM_POSITIVE_BALL:
        X = np.abs(X)
    return X


def _risk(T, X, constraint) -> tuple[float, float]:
    losses = encode_batch(X, T, constraint).losses
    return float(losses.mean()), float(losses.std(ddof=1)) if len(losses) > 1 else 0.0


def estimate_expected_risk(T, dist: DistributionSpec, constraint: ConstraintSet, n_mc: int = 10_000, seed=0):
    """Return ``(estimate, half_width)`` of ``R(T)``; half width is a 99% normal interval.

    Point mixtures are integrated exactly (half width 0).
    """
    if dist.kind is DistributionKind.POINT_MIXTURE:
        losses = encode_batch(dist.atoms, T, constraint).losses
        return float(dist.weights @ losses), 0.0
    if n_mc < 100:
        raise ValueError("n_mc must be at least 100")
    X = sample(dist, n_mc, seed)
    mean, std = _risk(T, X, constraint)
    return mean, Z99 * std / math.sqrt(n_mc)


@dataclass
class GapReport:
    candidate_count: int
    trials: int
    n: int
    delta: float
    seed: int
    gap_sup_per_trial: list[float] = field(default_factory=list)
    bound_values: dict[str, float] = field(default_factory=dict)
    violation_flags: list[bool] = field(default_factory=list)
    violations_per_bound: dict[str, int] = field(default_factory=dict)
    reference_risks: list[float] = field(default_factory=list)
    reference_half_widths: list[float] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return int(sum(self.violation_flags))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = self.violations
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _trial_gap(seed, index, dist, candidates, constraint, n, references) -> float:
    X = sample(dist, n, _rng(seed, 1, index))
    gaps = [abs(ref - float(encode_batch(X, T, constraint).losses.mean())) for T, ref in zip(candidates, references)]
    return max(gaps)


def gap_experiment(
    spec: SchemeSpec,
    dist: DistributionSpec,
    candidates,
    n: int,
    trials: int,
    seed: int = 0,
    bounds_to_check=("covering_hoeffding",),
    delta: float = 0.05,
    n_mc: int | None = None,
    n_jobs: int = 1,
) -> GapReport:
    """Measure ``max_T |R(T) - R_n(T)|`` over a finite candidate set, per trial.

    The candidate set only approximates the class, so the measured sup is a
    lower bound on the true one.  Reference risks use ``n_mc`` (default
    ``100 * n``) fresh draws unless the distribution is a point mixture.
    """
    candidates = [c if isinstance(c, ImplementationMatrix) else ImplementationMatrix(c) for c in candidates]
    if not candidates:
        raise ValueError("need at least one candidate implementation")
    if n < 1 or trials < 0:
        raise ValueError("n must be positive and trials non-negative")
    if n_mc is None:
        n_mc = REFERENCE_FACTOR * n
    if dist.kind is not DistributionKind.POINT_MIXTURE and n_mc < REFERENCE_FACTOR * n:
        raise ValueError(f"reference needs n_mc >= {REFERENCE_FACTOR} * n = {REFERENCE_FACTOR * n}, got {n_mc}")
    constraint = constraint_for(spec)

    report_bounds = scheme_bounds(spec, n, delta)
    bound_values = {name: report_bounds.value(name) for name in bounds_to_check}

    refs = [estimate_expected_risk(T, dist, constraint, n_mc=n_mc, seed=_rng(seed, 0, j)) for j, T in enumerate(candidates)]
    references = [r for r, _ in refs]

    report = GapReport(
        candidate_count=len(candidates),
        trials=trials,
        n=n,
        delta=delta,
        seed=int(seed),
        bound_values=bound_values,
        reference_risks=references,
        reference_half_widths=[h for _, h in refs],
    )
    if trials == 0:
        report.violations_per_bound = {name: 0 for name in bound_values}
        return report

    if n_jobs == 1:
        gaps = [_trial_gap(seed, i, dist, candidates, constraint, n, references) for i in range(trials)]
    else:
        gaps = Parallel(n_jobs=n_jobs)(
            delayed(_trial_gap)(seed, i, dist, candidates, constraint, n, references) for i in range(trials)
        )
    report.gap_sup_per_trial = [float(g) for g in gaps]
    report.violations_per_bound = {name: sum(g > v for g in gaps) for name, v in bound_values.items()}
    report.violation_flags = [any(g > v for v in bound_values.values()) for g in gaps]
    return report


# ------------------------------------------------------------- figure data


@dataclass(frozen=True)
class FigureRow:
    sweep_var: str
    sweep_value: float
    bound_name: str
    value: float


_NMF = {"scheme": Scheme.NMF, "m": 1000, "k": 50, "n": 1e6}
_SPARSE = {"scheme": Scheme.SPARSE, "m": 100, "k": 50, "n": 1e6, "s": 10.0, "p": 1.0}
_KMEANS = {"scheme": Scheme.KMEANS, "m": 100, "k": 100, "n": 1e6, "r": 1.0}

# figure id -> (fixed parameters, swept variable, curves)
FIGURES: dict[str, tuple[dict, str, tuple[str, ...]]] = {
    "1a": (_NMF, "n", ("nmf_covering",)),
    "1b": (_NMF, "n", SCHEME_TRIPLES[Scheme.NMF]),
    "1c": (_NMF, "m", SCHEME_TRIPLES[Scheme.NMF]),
    "1d": (_NMF, "k", SCHEME_TRIPLES[Scheme.NMF]),
    "2a": (_SPARSE, "n", ("sparse_covering",)),
    "2b": (_SPARSE, "n", SCHEME_TRIPLES[Scheme.SPARSE]),
    "2c": (_SPARSE, "m", SCHEME_TRIPLES[Scheme.SPARSE]),
    "2d": (_SPARSE, "k", SCHEME_TRIPLES[Scheme.SPARSE]),
    "3a": (_KMEANS, "n", ("kmeans_covering",)),
    "3b": (_KMEANS, "n", SCHEME_TRIPLES[Scheme.KMEANS]),
    "3c": (_KMEANS, "m", SCHEME_TRIPLES[Scheme.KMEANS]),
    "3d": (_KMEANS, "k", SCHEME_TRIPLES[Scheme.KMEANS]),
}

SWEEP_DEFAULTS = {"n": (1e2, 1e8), "m": (10, 1e4), "k": (2, 500)}
DEFAULT_POINTS = 25
_OVERRIDE_KEYS = {"n_min", "n_max", "m_min", "m_max", "k_min", "k_max", "points", "m", "k", "n", "delta", "s", "p", "r", "values"}


def _sweep_values(var, lo, hi, points):
    vals = np.geomspace(lo, hi, points)
    if var in ("m", "k"):
        vals = np.unique(np.round(vals))
    return [float(v) for v in vals]


def figure_data(figure_id: str, overrides: dict | None = None) -> list[FigureRow]:
    """Bound curves for one comparison figure, delta = 0.01 unless overridden.

    ``overrides`` may move the sweep range (``n_min``, ``k_max``, ...),
    set ``points``, give explicit ``values``, or change fixed parameters.
    """
    if figure_id not in FIGURES:
        raise KeyError(f"unknown figure id {figure_id!r}; known: {sorted(FIGURES)}")
    overrides = dict(overrides or {})
    unknown = set(overrides) - _OVERRIDE_KEYS
    if unknown:
        raise ValueError(f"unknown overrides {sorted(unknown)}")
    fixed, var, curves = FIGURES[figure_id]
    params = {"delta": 0.01, "r": 1.0, "s": 1.0, "p": math.inf, **fixed}
    for key in ("m", "k", "n", "delta", "s", "p", "r"):
        if key in overrides:
            params[key] = float(overrides[key])
    if "values" in overrides:
        values = sorted(float(v) for v in overrides["values"])
    else:
        lo, hi = SWEEP_DEFAULTS[var]
        lo = float(overrides.get(f"{var}_min", lo))
        hi = float(overrides.get(f"{var}_max", hi))
        if not 0 < lo <= hi:
            raise ValueError(f"bad sweep range [{lo}, {hi}] for {var}")
        values = _sweep_values(var, lo, hi, int(overrides.get("points", DEFAULT_POINTS)))

    rows = []
    for name in curves:
        for v in values:
            point = dict(params, **{var: v})
            try:
                value = scheme_bound_value(
                    name, point["m"], point["k"], point["n"], point["delta"], r=point["r"], s=point["s"], p=point["p"]
                )
            except (RegimeError, ValueError) as exc:
                warnings.warn(f"{name} at {var}={v:g} omitted: {exc}", OmittedRowWarning, stacklevel=2)
                continue
            rows.append(FigureRow(var, v, name, value))
    rows.sort(key=lambda row: (row.bound_name, row.sweep_value))
    return rows


def figure_rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sweep_var", "sweep_value", "bound_name", "value"])
    for row in rows:
        w.writerow([row.sweep_var, repr(row.sweep_value), row.bound_name, repr(row.value)])
    return buf.getvalue()


# ---------------------------------------------------------------- crossover


def bound_curve(name: str, var: str, fixed: dict):
    """Callable ``v -> bound value`` with ``var`` free and other parameters from ``fixed``."""
    base = {"delta": 0.01, "r": 1.0, "s": 1.0, "p": math.inf, **fixed}

    def curve(v):
        point = dict(base, **{var: v})
        return scheme_bound_value(
            name, point["m"], point["k"], point["n"], point["delta"], r=point["r"], s=point["s"], p=point["p"]
        )

    return curve


def crossover_scan(bound_a, bound_b, var: str, lo: float, hi: float, fixed: dict | None = None, points: int = 256, rtol: float = 1e-6) -> list[float]:
    """Locate sign changes of ``a - b`` on ``[lo, hi]``.

    ``bound_a`` / ``bound_b`` are registry names (evaluated with ``fixed``)
    or callables of the swept variable.  A log-spaced grid brackets each
    crossing, then bisection narrows it to relative width ``rtol``.
    """
    fixed = fixed or {}
    fa = bound_curve(bound_a, var, fixed) if isinstance(bound_a, str) else bound_a
    fb = bound_curve(bound_b, var, fixed) if isinstance(bound_b, str) else bound_b

    def diff(v):
        return fa(v) - fb(v)

    grid = np.geomspace(lo, hi, points) if lo > 0 else np.linspace(lo, hi, points)
    d = np.array([diff(v) for v in grid])
    found = []
    for i in range(len(grid) - 1):
        if d[i] == 0.0:
            if 0 < i and d[i - 1] * d[i + 1] < 0:
                found.append(float(grid[i]))
            continue
        if d[i] * d[i + 1] >= 0:
            continue
        a, b, da = grid[i], grid[i + 1], d[i]
        while b - a > rtol * max(abs(a), abs(b)):
            mid = 0.5 * (a + b)
            dm = diff(mid)
            if dm == 0.0:
                a = b = mid
                break
            if (dm < 0) == (da < 0):
                a, da = mid, dm
            else:
                b = mid
        found.append(float(0.5 * (a + b)))
    return found
