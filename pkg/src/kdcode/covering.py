"""Covering numbers of the loss class ``{f_T : T in 𝒯}``.

Three pieces live here:

* closed-form upper bounds on ``ln N_1(F, xi', n)`` for each scheme,
* the explicit grid net over implementations whose cell centers induce a
  ``xi'``-cover of the loss class, and
* an empirical cover estimator (greedy, with an exact fallback for small
  inputs) used to sanity-check the closed forms on tiny instances.

Distances between loss vectors use the normalized l1 metric
``(1/n) * sum_i |f(x_i) - g(x_i)|``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .csvio import format_numeric_csv, parse_numeric_csv
from .encoders import encode_batch
from .model import ConstraintSet, ImplementationMatrix, Scheme, SchemeSpec, constraint_for

__all__ = [
    "CoverReport",
    "general_cover_argument",
    "nmf_cover_argument",
    "sparse_cover_argument",
    "kmeans_cover_argument",
    "cover_argument",
    "ln_cover_bound",
    "lipschitz_xi_factor",
    "grid_axis",
    "grid_net_size",
    "build_grid_net",
    "nearest_net_member",
    "loss_rows",
    "empirical_cover_number",
    "exact_cover_number",
    "verify_cover",
    "read_loss_rows_csv",
    "write_loss_rows_csv",
    "MAX_NET_SIZE",
]

MAX_NET_SIZE = 1_000_000
EXACT_COVER_LIMIT = 20


# ------------------------------------------------------------- closed forms
# Each *_cover_argument returns the quantity inside the logarithm; the log
# covering number is then m * k * ln(argument).  They accept floats so the
# bound curves can be evaluated at non-integer m, k.


def general_cover_argument(m, k, r, c, xi_prime):
    """Any codebook inside the unit ball: ``4 (r + c k) sqrt(m) c k / xi'``."""
    return 4.0 * (r + c * k) * math.sqrt(m) * c * k / xi_prime


def nmf_cover_argument(m, k, r, c, xi_prime):
    """Non-negative T, so the grid only spans ``[0, c]``: ``2 c (r + c k) sqrt(m) k / xi'``."""
    return 2.0 * c * (r + c * k) * math.sqrt(m) * k / xi_prime


def sparse_cover_argument(m, k, r, c, s, p, xi_prime):
    """lp-ball codebook: ``4 c (r s + c s^2 q) sqrt(m) q / xi'`` with ``q = k^(1 - 1/p)``."""
    q = k ** (1.0 - 1.0 / p)
    return 4.0 * c * (r * s + c * s * s * q) * math.sqrt(m) * q / xi_prime


def kmeans_cover_argument(m, r, xi_prime):
    """Centers stay inside the data ball: ``8 r^2 sqrt(m) / xi'``."""
    return 8.0 * r * r * math.sqrt(m) / xi_prime


def cover_argument(spec: SchemeSpec, xi_prime: float) -> float:
    if spec.scheme is Scheme.NMF:
        return nmf_cover_argument(spec.m, spec.k, spec.r, spec.c, xi_prime)
    if spec.scheme is Scheme.SPARSE:
        return sparse_cover_argument(spec.m, spec.k, spec.r, spec.c, spec.s, spec.p, xi_prime)
    if spec.scheme is Scheme.KMEANS:
        return kmeans_cover_argument(spec.m, spec.r, xi_prime)
    return general_cover_argument(spec.m, spec.k, spec.r, spec.c, xi_prime)


def ln_cover_bound(spec: SchemeSpec, xi_prime: float) -> float:
    """Upper bound on ``ln N_1(F, xi', n)`` (independent of n).

    When the logarithm's argument is at most 1 the bound is clamped to 0:
    a bounded class always admits a cover of size one at large radius.
    """
    if not xi_prime > 0:
        raise ValueError("xi_prime must be positive")
    arg = cover_argument(spec, xi_prime)
    if arg <= 1.0:
        return 0.0
    return spec.m * spec.k * math.log(arg)


def lipschitz_xi_factor(spec: SchemeSpec) -> float:
    """Ratio ``xi' / xi`` turning a parameter-space grid width into a loss-space radius."""
    m, k, r, c = spec.m, spec.k, spec.r, spec.c
    if spec.scheme is Scheme.SPARSE:
        q = k ** spec.code_norm_exponent
        return (r * spec.s + c * spec.s**2 * q) * math.sqrt(m) * q
    if spec.scheme is Scheme.KMEANS:
        return 2.0 * r * math.sqrt(m)
    return (r + c * k) * math.sqrt(m) * k


# ------------------------------------------------------------------ grid net


def grid_axis(c: float, xi: float) -> np.ndarray:
    """Centers ``-c + xi/2 + i*xi`` of the width-xi cells tiling ``[-c, c]``."""
    if not xi > 0:
        raise ValueError("xi must be positive")
    cells = max(1, math.ceil(2.0 * c / xi - 1e-12))
    return -c + xi / 2.0 + xi * np.arange(cells)


def grid_net_size(m: int, k: int, c: float, xi: float) -> int:
    return len(grid_axis(c, xi)) ** (m * k)


def build_grid_net(m: int, k: int, c: float, xi: float):
    """Yield every m-by-k matrix whose entries are grid-cell centers.

    Raises ``ValueError`` up front when the net would exceed
    ``MAX_NET_SIZE`` matrices.
    """
    axis = grid_axis(c, xi)
    size = len(axis) ** (m * k)
    if size > MAX_NET_SIZE:
        raise ValueError(
            f"grid net needs {size} matrices (ceil(2c/xi)^(mk) = {len(axis)}^{m * k}), "
            f"above the {MAX_NET_SIZE} guard"
        )
    return _iter_net(axis, m, k)


def _iter_net(axis, m, k):
    for entries in itertools.product(axis, repeat=m * k):
        yield ImplementationMatrix(np.reshape(entries, (m, k)))


def nearest_net_member(T, c: float, xi: float) -> ImplementationMatrix:
    """Grid-net matrix closest entrywise to ``T`` (entries of T in ``[-c, c]``)."""
    T = np.asarray(T.entries if isinstance(T, ImplementationMatrix) else T, dtype=float)
    axis = grid_axis(c, xi)
    idx = np.clip(np.floor((T + c) / xi), 0, len(axis) - 1).astype(int)
    return ImplementationMatrix(axis[idx])


# ----------------------------------------------------------- empirical cover


def loss_rows(implementations, X, constraint: ConstraintSet, tol: float = 1e-10) -> np.ndarray:
    """Matrix of reconstruction errors, one row per implementation, one column per point."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rows = [encode_batch(X, T, constraint, tol=tol).losses for T in implementations]
    return np.array(rows, dtype=float).reshape(len(rows), X.shape[0])


def _coverage(rows: np.ndarray, xi_prime: float) -> np.ndarray:
    D = np.abs(rows[:, None, :] - rows[None, :, :]).mean(axis=-1)
    return D <= xi_prime * (1 + 1e-12)


def empirical_cover_number(rows, xi_prime: float) -> int:
    """Greedy cover size of the loss rows at normalized-l1 radius ``xi'``.

    Centers are restricted to the rows themselves, so the result upper
    bounds the true covering number.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0:
        raise ValueError("no loss rows to cover")
    covers = _coverage(rows, xi_prime)
    uncovered = np.ones(len(rows), dtype=bool)
    size = 0
    while uncovered.any():
        gain = (covers & uncovered).sum(axis=1)
        best = int(np.argmax(gain))
        uncovered &= ~covers[best]
        size += 1
    return size


def exact_cover_number(rows, xi_prime: float) -> int:
    """Minimum number of rows covering all rows; exhaustive, at most 20 rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    N = len(rows)
    if N == 0:
        raise ValueError("no loss rows to cover")
    if N > EXACT_COVER_LIMIT:
        raise ValueError(f"exact cover refuses {N} > {EXACT_COVER_LIMIT} rows")
    covers = _coverage(rows, xi_prime)
    masks = [sum(1 << j for j in np.flatnonzero(covers[i])) for i in range(N)]
    full = (1 << N) - 1
    for size in range(1, N + 1):
        for combo in itertools.combinations(masks, size):
            acc = 0
            for mask in combo:
                acc |= mask
            if acc == full:
                return size
    return N


@dataclass
class CoverReport:
    ln_theoretical: float
    xi_prime: float
    xi: float
    empirical_size: int | None = None
    net_size: int | None = None
    exact: bool = False
    notes: list = field(default_factory=list)

    @property
    def sound(self) -> bool:
        if self.empirical_size is None:
            return True
        return math.log(self.empirical_size) <= self.ln_theoretical + 1e-9

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sound"] = self.sound
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def verify_cover(spec: SchemeSpec, xi: float, n: int = 8, seed: int = 0, X=None) -> CoverReport:
    """Cover the grid-net loss class on a random sample and compare with the closed form.

    The grid spans ``[-c, c]`` per entry (``[-r, r]`` for k-means, whose
    centers sit inside the data ball) and the loss radius is
    ``xi' = lipschitz_xi_factor(spec) * xi``.
    """
    from .experiments import sample  # local import: experiments depends on this module

    if X is None:
        from .model import DistributionSpec

        dist = (
            DistributionSpec.uniform_positive_ball(spec.m, spec.r)
            if spec.scheme is Scheme.NMF
            else DistributionSpec.uniform_ball(spec.m, spec.r)
        )
        X = sample(dist, n, seed)
    half_width = spec.r if spec.scheme is Scheme.KMEANS else spec.c
    net = list(build_grid_net(spec.m, spec.k, half_width, xi))
    xi_prime = lipschitz_xi_factor(spec) * xi
    rows = loss_rows(net, X, constraint_for(spec))
    report = CoverReport(
        ln_theoretical=ln_cover_bound(spec, xi_prime),
        xi_prime=xi_prime,
        xi=xi,
        net_size=len(net),
        empirical_size=empirical_cover_number(rows, xi_prime),
    )
    if cover_argument(spec, xi_prime) <= 1.0:
        report.notes.append("log argument <= 1; closed form clamped to 0")
    if not report.sound and len(rows) <= EXACT_COVER_LIMIT:
        report.empirical_size = exact_cover_number(rows, xi_prime)
        report.exact = True
        report.notes.append("greedy cover exceeded the bound; exact search used")
    return report


# ---------------------------------------------------------------- CSV I/O


def write_loss_rows_csv(rows, fh=None) -> str:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    text = format_numeric_csv(rows, [f"x{i + 1}" for i in range(rows.shape[1])])
    if fh is not None:
        fh.write(text)
    return text


def read_loss_rows_csv(text: str) -> np.ndarray:
    return parse_numeric_csv(text)
