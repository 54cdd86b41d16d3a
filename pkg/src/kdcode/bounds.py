"""Closed-form generalization bounds for k-dimensional coding schemes.

Every bound controls ``sup_T |R(T) - R_n(T)|`` with probability at least
``1 - delta``.  Three families appear:

* covering-number bounds, built from ``ln N_1(F, 1/n, n)`` and one of the
  Hoeffding, Bernstein or Bennett tails (dimension dependent, scale with
  ``m * k``);
* Rademacher-complexity bounds (dimension free, scale with ``k`` or ``k^2``);
* bounds from a Lipschitz property in the ``1 -> 2`` operator norm.

The generic formulas take a `BoundParams`; the scheme-specific curves take
plain floats so that sweeps can run over non-integer m, k.  Values are
returned uncapped; `BoundReport` carries a ``min(value, b)`` column too.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

from .covering import (
    cover_argument,
    general_cover_argument,
    kmeans_cover_argument,
    nmf_cover_argument,
    sparse_cover_argument,
)
from .model import Scheme, SchemeSpec, operator_norm_on_Y, parse_p

__all__ = [
    "RegimeError",
    "HypothesisWarning",
    "BoundParams",
    "BoundEntry",
    "BoundReport",
    "FixedPoint",
    "BOUND_REGISTRY",
    "bennett_h",
    "hoeffding_tail",
    "bernstein_tail",
    "bennett_tail",
    "hoeffding_cover_bound",
    "bernstein_cover_bound",
    "bennett_cover_bound",
    "bennett_exponent",
    "rademacher_column_bound",
    "rademacher_operator_bound",
    "covering_log_term",
    "covering_hoeffding_bound",
    "covering_bernstein_bound",
    "covering_risk_bound",
    "covering_bennett_bound",
    "covering_bennett_fixed_point",
    "nmf_covering_bound",
    "nmf_rademacher_bound",
    "nmf_lipschitz_bound",
    "sparse_covering_bound",
    "sparse_rademacher_bound",
    "sparse_lipschitz_bound",
    "kmeans_covering_bound",
    "kmeans_rademacher_bound",
    "kmeans_lipschitz_bound",
    "scheme_bounds",
    "scheme_bound_value",
    "covering_bound_for",
]


class RegimeError(ValueError):
    """The formula is evaluated outside the range where it is defined."""


class HypothesisWarning(UserWarning):
    """A theorem hypothesis is violated; the value is still computed."""


# ------------------------------------------------------------------- tails


def _h_series(x: float) -> float:
    # h(x) = sum_{j>=2} (-1)^j x^j / (j (j-1)); avoids cancellation near 0
    total, term = 0.0, x
    for j in range(2, 12):
        term *= x
        total += (term if j % 2 == 0 else -term) / (j * (j - 1))
    return total


def bennett_h(x: float) -> float:
    """``h(x) = (1 + x) ln(1 + x) - x`` for ``x >= 0``."""
    if x < 0:
        raise ValueError(f"bennett_h needs x >= 0, got {x!r}")
    if x < 1e-2:
        return _h_series(x)
    return (1.0 + x) * math.log1p(x) - x


def hoeffding_tail(n: float, eps: float, B: float) -> float:
    """``2 exp(-2 n eps^2 / B^2)``; can exceed 1 (vacuous)."""
    return 2.0 * math.exp(-2.0 * n * eps * eps / (B * B))


def bernstein_tail(n: float, eps: float, V: float, B: float) -> float:
    """``2 exp(-n eps^2 / (2 (V + B eps / 3)))``."""
    return 2.0 * math.exp(-n * eps * eps / (2.0 * (V + B * eps / 3.0)))


def bennett_tail(n: float, eps: float, V: float, B: float) -> float:
    """``2 exp(-(n V / B^2) h(B eps / V))``."""
    return 2.0 * math.exp(-(n * V / (B * B)) * bennett_h(B * eps / V))


# --------------------------------------------------------------- parameters


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")


@dataclass(frozen=True)
class BoundParams:
    """Inputs shared by the generic bounds.

    ``lam`` is the trade-off constant of the relative risk bound; ``V`` and
    ``beta`` parameterize the Bennett-type bound and must satisfy
    ``8 beta V <= 3``.
    """

    m: float
    k: float
    n: float
    delta: float
    r: float = 1.0
    c: float = 1.0
    b: float = 1.0
    s: float = 1.0
    p: float = math.inf
    empirical_risk: float | None = None
    lam: float | None = None
    V: float | None = None
    beta: float = 2.0

    def __post_init__(self):
        if self.m < 1 or self.k < 1 or self.n < 1:
            raise ValueError("m, k and n must be at least 1")
        _check_delta(self.delta)
        for name in ("r", "c", "b", "s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        object.__setattr__(self, "p", parse_p(self.p))
        if self.empirical_risk is not None and self.empirical_risk < 0:
            raise ValueError("empirical_risk must be non-negative")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.V is not None:
            if not (self.V > 0 and self.beta > 0):
                raise ValueError("V and beta must be positive")
            if 8.0 * self.beta * self.V > 3.0:
                raise ValueError(f"need 8*beta*V <= 3, got {8 * self.beta * self.V:.6g}")

    @classmethod
    def from_spec(cls, spec: SchemeSpec, n: float, delta: float, **extra) -> "BoundParams":
        return cls(m=spec.m, k=spec.k, n=n, delta=delta, r=spec.r, c=spec.c, b=spec.b, s=spec.s, p=spec.p, **extra)

    def replace(self, **changes) -> "BoundParams":
        d = dict(self.__dict__)
        d.update(changes)
        return BoundParams(**d)


# ------------------------------------------------- covering + tail templates


def _log_cover(m, k, argument) -> float:
    if not argument > 1.0:
        raise RegimeError(f"covering log argument {argument:.6g} <= 1; formula outside valid regime")
    return m * k * math.log(argument)


def hoeffding_cover_bound(ln_cover: float, n: float, delta: float, b: float = 1.0) -> float:
    """``2/n + b sqrt((ln N + ln(2/delta)) / (2n))`` with N the cover at radius 1/n."""
    _check_delta(delta)
    return 2.0 / n + b * math.sqrt((ln_cover + math.log(2.0 / delta)) / (2.0 * n))


def bernstein_cover_bound(ln_cover: float, n: float, delta: float, empirical_risk: float) -> float:
    """Empirical-risk-adaptive version; the square-root term vanishes at zero risk."""
    _check_delta(delta)
    if not 0.0 <= empirical_risk <= 1.0:
        warnings.warn(
            f"empirical risk {empirical_risk} outside [0, 1]; losses are assumed to lie in [0, 1]",
            HypothesisWarning,
            stacklevel=2,
        )
    cx = ln_cover + math.log(2.0 / delta)
    return 2.0 / n + 5.0 * cx / n + math.sqrt(2.0 * empirical_risk * cx / n)


def bennett_exponent(gap: float, V: float, beta: float = 2.0) -> float:
    """Rate exponent ``1 / (2 - ln(8 beta V / 3) / ln gap)``.

    Equals 1/2 when ``8 beta V = 3`` and tends to 1/2 as ``gap -> 0``.
    """
    if not (V > 0 and beta > 0):
        raise ValueError("V and beta must be positive")
    if 8.0 * beta * V > 3.0:
        raise RegimeError(f"need 8*beta*V <= 3, got {8 * beta * V:.6g}")
    if not 0.0 < gap < 1.0:
        raise RegimeError(f"gap must lie in (0, 1), got {gap!r}")
    if gap > V:
        raise RegimeError(f"gap {gap:.6g} exceeds V={V:.6g}")
    return 1.0 / (2.0 - math.log(8.0 * beta * V / 3.0) / math.log(gap))


def bennett_cover_bound(ln_cover: float, n: float, delta: float, gap: float, V: float, beta: float = 2.0) -> float:
    _check_delta(delta)
    e = bennett_exponent(gap, V, beta)
    return 2.0 / n + ((ln_cover + math.log(2.0 / delta)) / (beta * n)) ** e


# ---------------------------------------------------------- generic bounds


def rademacher_column_bound(params: BoundParams) -> float:
    """Dimension-free bound for column norms at most c and codes in the unit ball.

    ``(4 c r k + 2 c^2 k^2) sqrt(pi / n) + b sqrt(8 ln(2/delta) / n)``
    """
    P = params
    return (4 * P.c * P.r * P.k + 2 * P.c**2 * P.k**2) * math.sqrt(math.pi / P.n) + P.b * math.sqrt(
        8.0 * math.log(2.0 / P.delta) / P.n
    )


def rademacher_operator_bound(params: BoundParams, norm_Y: float, finite_dim: bool = False) -> float:
    """Bound driven by ``sup_T sup_{y in Y} ||T y||``.

    The finite-dimensional form replaces ``k`` in the middle term with
    ``sqrt(m k)``.
    """
    P = params
    inner = 16.0 * P.n * norm_Y**2
    if not inner > 1.0:
        raise RegimeError(f"16 n ||T||_Y^2 = {inner:.6g} <= 1; formula outside valid regime")
    first = P.b * math.sqrt(math.log(2.0 / P.delta) / (2.0 * P.n))
    if finite_dim:
        middle = P.b / 2.0 * math.sqrt(P.m * P.k * math.log(inner) / P.n)
    else:
        middle = P.b * P.k / 2.0 * math.sqrt(math.log(inner) / P.n)
    last = (4.0 + 4.0 * norm_Y + math.sqrt(8.0 * math.pi) * P.r * P.k * norm_Y) / math.sqrt(P.n)
    return first + middle + last


def covering_log_term(params: BoundParams) -> float:
    """``m k ln(4 (r + c k) sqrt(m) c k n)``: log cover of the general class at radius 1/n."""
    P = params
    return _log_cover(P.m, P.k, general_cover_argument(P.m, P.k, P.r, P.c, 1.0 / P.n))


def covering_hoeffding_bound(params: BoundParams) -> float:
    return hoeffding_cover_bound(covering_log_term(params), params.n, params.delta, params.b)


def covering_bernstein_bound(params: BoundParams) -> float:
    if params.empirical_risk is None:
        raise ValueError("the Bernstein-type bound needs empirical_risk")
    return bernstein_cover_bound(covering_log_term(params), params.n, params.delta, params.empirical_risk)


def covering_risk_bound(params: BoundParams) -> float:
    """Upper bound on the risk ``R(T)`` itself (not the gap).

    ``(1 + lam) R_n + 2/n + (1/(4 lam) + 5) (A + ln(2/delta)) / n``
    """
    P = params
    if P.lam is None:
        raise ValueError("the relative risk bound needs lam > 0")
    if P.empirical_risk is None:
        raise ValueError("the relative risk bound needs empirical_risk")
    cx = covering_log_term(P) + math.log(2.0 / P.delta)
    return (1.0 + P.lam) * P.empirical_risk + 2.0 / P.n + (1.0 / (4.0 * P.lam) + 5.0) * cx / P.n


def covering_bennett_bound(params: BoundParams, gap: float) -> float:
    """Bennett-type bound evaluated at a given gap ``|R(T) - R_n(T)|``."""
    if params.V is None:
        raise ValueError("the Bennett-type bound needs V")
    return bennett_cover_bound(covering_log_term(params), params.n, params.delta, gap, params.V, params.beta)


class FixedPoint(NamedTuple):
    value: float
    converged: bool
    iterations: int


def covering_bennett_fixed_point(params: BoundParams, tol: float = 1e-10, max_iter: int = 100) -> FixedPoint:
    """Solve ``g = bound(g)`` by fixed-point iteration.

    Starts from the Hoeffding-type value (clipped to V, where the
    Bennett form is defined).  Leaving the valid regime stops the iteration
    with ``converged=False``.
    """
    if params.V is None:
        raise ValueError("the Bennett-type bound needs V")
    g = min(covering_hoeffding_bound(params), params.V)
    for it in range(1, max_iter + 1):
        try:
            nxt = covering_bennett_bound(params, g)
        except RegimeError:
            return FixedPoint(g, False, it)
        if abs(nxt - g) < tol:
            return FixedPoint(nxt, True, it)
        g = nxt
    return FixedPoint(g, False, max_iter)


# ------------------------------------------------- scheme-specific curves
# Each of these mirrors one printed formula, constants included.


def nmf_covering_bound(m, k, n, delta, r=1.0, c=1.0, b=1.0):
    """Covering/Hoeffding bound for NMF with normalized T and data in the unit ball."""
    return hoeffding_cover_bound(_log_cover(m, k, nmf_cover_argument(m, k, r, c, 1.0 / n)), n, delta, b)


def nmf_rademacher_bound(m, k, n, delta):
    """``(k / sqrt(n)) (14 sqrt(k) + sqrt(ln(16 n k)) / 2) + sqrt(ln(2/delta) / (2n))``."""
    _check_delta(delta)
    return k / math.sqrt(n) * (14.0 * math.sqrt(k) + 0.5 * math.sqrt(math.log(16.0 * n * k))) + math.sqrt(
        math.log(2.0 / delta) / (2.0 * n)
    )


def _lipschitz_form(mk, log_const, n, delta):
    return 3.0 / math.sqrt(8.0) * math.sqrt(mk * log_const * math.log(n) / n) + 1.0 / math.sqrt(8.0) * math.sqrt(
        (mk * log_const + math.log(2.0 / delta)) / n
    )


def nmf_lipschitz_bound(m, k, n, delta):
    """Operator-norm Lipschitz bound with constant ``ln(12 sqrt(8 m k))``."""
    _check_delta(delta)
    return _lipschitz_form(m * k, math.log(12.0 * math.sqrt(8.0 * m * k)), n, delta)


def sparse_covering_bound(m, k, n, delta, s, p, r=1.0, c=1.0, b=1.0):
    return hoeffding_cover_bound(_log_cover(m, k, sparse_cover_argument(m, k, r, c, s, p, 1.0 / n)), n, delta, b)


def sparse_rademacher_bound(m, k, n, delta, s, p):
    """Dimension-free sparse coding bound; note the ``16 n s^2 2 k^(2-2/p)`` log argument."""
    _check_delta(delta)
    q = k ** (1.0 - 1.0 / p)
    return (
        k / 2.0 * math.sqrt(math.log(16.0 * n * s * s * 2.0 * k ** (2.0 - 2.0 / p)) / n)
        + math.sqrt(math.log(2.0 / delta) / (2.0 * n))
        + (4.0 + 4.0 * s * q + math.sqrt(8.0 * math.pi) * s * k ** (2.0 - 1.0 / p)) / math.sqrt(n)
    )


def sparse_lipschitz_bound(m, k, n, delta, s, p):
    _check_delta(delta)
    q = k ** (1.0 - 1.0 / p)
    log_const = max(math.log(6.0 * math.sqrt(8.0) * s * q), 1.0)
    return 1.0 / math.sqrt(8.0) * (
        3.0 * math.sqrt(m * k * log_const * math.log(n) / n)
        + math.sqrt((m * k * log_const + math.log(2.0 / delta)) / n)
    )


def kmeans_covering_bound(m, k, n, delta, r=1.0, b=1.0):
    return hoeffding_cover_bound(_log_cover(m, k, kmeans_cover_argument(m, r, 1.0 / n)), n, delta, b)


def kmeans_rademacher_bound(m, k, n, delta, r=1.0):
    """``3 sqrt(2 pi) k r^2 / sqrt(n) + r^2 sqrt(8 ln(1/delta) / n)``."""
    _check_delta(delta)
    return 3.0 * math.sqrt(2.0 * math.pi) * k * r * r / math.sqrt(n) + r * r * math.sqrt(
        8.0 * math.log(1.0 / delta) / n
    )


def kmeans_lipschitz_bound(m, k, n, delta):
    _check_delta(delta)
    return _lipschitz_form(m * k, math.log(12.0 * math.sqrt(8.0)), n, delta)


# ------------------------------------------------------------------ report

# name -> (scheme it belongs to, or None for generic; one-line description)
BOUND_REGISTRY: dict[str, tuple[Scheme | None, str]] = {
    "covering_hoeffding": (None, "covering number + Hoeffding, general class"),
    "covering_bernstein": (None, "covering number + Bernstein, needs empirical risk"),
    "covering_risk": (None, "relative risk bound on R(T), needs empirical risk and lambda"),
    "covering_bennett": (None, "covering number + Bennett, self-consistent gap, needs V"),
    "rademacher_column": (None, "Rademacher bound with column-norm constant c"),
    "rademacher_operator": (None, "Rademacher bound with ||T||_Y, infinite-dimensional form"),
    "rademacher_operator_finite": (None, "Rademacher bound with ||T||_Y, finite-dimensional form"),
    "nmf_covering": (Scheme.NMF, "NMF covering + Hoeffding"),
    "nmf_rademacher": (Scheme.NMF, "NMF Rademacher (dimension free)"),
    "nmf_lipschitz": (Scheme.NMF, "NMF 1->2 Lipschitz"),
    "sparse_covering": (Scheme.SPARSE, "sparse coding covering + Hoeffding"),
    "sparse_rademacher": (Scheme.SPARSE, "sparse coding Rademacher (dimension free)"),
    "sparse_lipschitz": (Scheme.SPARSE, "sparse coding 1->2 Lipschitz"),
    "kmeans_covering": (Scheme.KMEANS, "k-means covering + Hoeffding"),
    "kmeans_rademacher": (Scheme.KMEANS, "k-means Rademacher (dimension free)"),
    "kmeans_lipschitz": (Scheme.KMEANS, "k-means 1->2 Lipschitz"),
}

# bound triples compared in the figures: (ours, dimension free, 1->2 Lipschitz)
SCHEME_TRIPLES = {
    Scheme.NMF: ("nmf_covering", "nmf_rademacher", "nmf_lipschitz"),
    Scheme.SPARSE: ("sparse_covering", "sparse_rademacher", "sparse_lipschitz"),
    Scheme.KMEANS: ("kmeans_covering", "kmeans_rademacher", "kmeans_lipschitz"),
}


def scheme_bound_value(name: str, m, k, n, delta, r=1.0, c=1.0, s=1.0, p=math.inf) -> float:
    """Evaluate one scheme-specific formula at (possibly non-integer) m, k, n."""
    if name == "nmf_covering":
        return nmf_covering_bound(m, k, n, delta)
    if name == "nmf_rademacher":
        return nmf_rademacher_bound(m, k, n, delta)
    if name == "nmf_lipschitz":
        return nmf_lipschitz_bound(m, k, n, delta)
    if name == "sparse_covering":
        return sparse_covering_bound(m, k, n, delta, s, p)
    if name == "sparse_rademacher":
        return sparse_rademacher_bound(m, k, n, delta, s, p)
    if name == "sparse_lipschitz":
        return sparse_lipschitz_bound(m, k, n, delta, s, p)
    if name == "kmeans_covering":
        return kmeans_covering_bound(m, k, n, delta, r)
    if name == "kmeans_rademacher":
        return kmeans_rademacher_bound(m, k, n, delta, r)
    if name == "kmeans_lipschitz":
        return kmeans_lipschitz_bound(m, k, n, delta)
    raise KeyError(f"unknown scheme bound {name!r}")


@dataclass
class BoundEntry:
    bound_name: str
    value: float
    applicable: bool
    notes: str = ""
    capped: float = math.nan


@dataclass
class BoundReport:
    """Named bound values for one (scheme, m, k, n, delta) point."""

    spec: SchemeSpec
    n: float
    delta: float
    entries: list[BoundEntry] = field(default_factory=list)

    def __getitem__(self, name: str) -> BoundEntry:
        for e in self.entries:
            if e.bound_name == name:
                return e
        raise KeyError(name)

    def value(self, name: str) -> float:
        e = self[name]
        if not e.applicable:
            raise ValueError(f"bound {name} not applicable: {e.notes}")
        return e.value

    def applicable(self) -> list[BoundEntry]:
        return [e for e in self.entries if e.applicable]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bound_name", "value", "applicable", "notes", "capped"])
        for e in self.entries:
            w.writerow(
                [
                    e.bound_name,
                    repr(e.value) if e.applicable else "",
                    "true" if e.applicable else "false",
                    e.notes,
                    repr(e.capped) if e.applicable else "",
                ]
            )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "n": self.n,
            "delta": self.delta,
            "entries": [
                {
                    "bound_name": e.bound_name,
                    "value": e.value if e.applicable else None,
                    "applicable": e.applicable,
                    "notes": e.notes,
                    "capped": e.capped if e.applicable else None,
                }
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def scheme_bounds(
    spec: SchemeSpec,
    n: float,
    delta: float,
    empirical_risk: float | None = None,
    lam: float | None = None,
    V: float | None = None,
    beta: float = 2.0,
) -> BoundReport:
    """Evaluate every registered bound at one point, marking inapplicable ones.

    A regime error in one formula is recorded on that entry and never stops
    the rest of the report.
    """
    _check_delta(delta)
    if n < 1:
        raise ValueError("n must be at least 1")
    params = BoundParams.from_spec(spec, n, delta, empirical_risk=empirical_risk, lam=lam, V=V, beta=beta)
    report = BoundReport(spec=spec, n=n, delta=delta)
    m, k = spec.m, spec.k
    unit_data = spec.r == 1.0 and spec.c == 1.0

    def generic(name):
        if name == "covering_hoeffding":
            return covering_hoeffding_bound(params), ""
        if name == "covering_bernstein":
            if empirical_risk is None:
                return None, "needs empirical risk"
            return covering_bernstein_bound(params), ""
        if name == "covering_risk":
            if empirical_risk is None or lam is None:
                return None, "needs empirical risk and lambda"
            return covering_risk_bound(params), "bounds R(T), not the gap"
        if name == "covering_bennett":
            if V is None:
                return None, "needs V"
            fp = covering_bennett_fixed_point(params)
            return fp.value, f"fixed point, converged={str(fp.converged).lower()}, iterations={fp.iterations}"
        norm_Y = operator_norm_on_Y(spec)
        if name == "rademacher_column":
            return rademacher_column_bound(params), ""
        if name == "rademacher_operator":
            return rademacher_operator_bound(params, norm_Y, finite_dim=False), f"||T||_Y={norm_Y:.6g}"
        if name == "rademacher_operator_finite":
            return rademacher_operator_bound(params, norm_Y, finite_dim=True), f"||T||_Y={norm_Y:.6g}"
        raise KeyError(name)

    for name, (owner, _) in BOUND_REGISTRY.items():
        if owner is not None and owner is not spec.scheme:
            report.entries.append(BoundEntry(name, math.nan, False, f"applies to {owner.value} only"))
            continue
        try:
            if owner is None:
                value, note = generic(name)
            else:
                value = scheme_bound_value(name, m, k, n, delta, r=spec.r, c=spec.c, s=spec.s, p=spec.p)
                note = ""
                if owner is not Scheme.KMEANS and not unit_data:
                    note = "formula assumes r = c = 1"
                elif owner is Scheme.KMEANS and spec.r != 1.0 and name != "kmeans_rademacher":
                    note = "formula assumes r = 1"
        except (RegimeError, ValueError) as exc:
            report.entries.append(BoundEntry(name, math.nan, False, f"regime error: {exc}"))
            continue
        if value is None:
            report.entries.append(BoundEntry(name, math.nan, False, note))
            continue
        report.entries.append(BoundEntry(name, value, True, note, min(value, spec.b)))
    return report


def covering_bound_for(spec: SchemeSpec, n: float, delta: float) -> float:
    """Hoeffding bound using the scheme's own log cover at radius 1/n."""
    return hoeffding_cover_bound(_log_cover(spec.m, spec.k, cover_argument(spec, 1.0 / n)), n, delta, spec.b)
