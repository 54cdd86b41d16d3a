"""Reconstruction error ``f_T(x) = min_{y in Y} ||x - T y||^2`` per codebook.

Every encoder works on a batch of points stored as rows of ``X`` (shape
``(n, m)``) and returns codes as rows (shape ``(n, k)``).  The single-point
functions (`encode_kmeans`, `encode_nmf`, ...) wrap the batch versions.

The convex codebooks (orthant, l1 and l-infinity balls) are solved with
accelerated projected gradient on ``0.5 * ||x - T y||^2`` using step
``1 / L``, ``L`` the top eigenvalue of ``T^T T``.  The l2 ball is solved
exactly from the SVD of T plus bisection on the Lagrange multiplier.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import (
    SUPPORTED_P,
    ConstraintKind,
    ConstraintSet,
    ImplementationMatrix,
)

__all__ = [
    "EncodeResult",
    "BatchEncoding",
    "encode",
    "encode_batch",
    "encode_kmeans",
    "encode_nmf",
    "encode_l2ball",
    "encode_lp_ball",
    "brute_force_encode",
    "project_l1_ball",
    "NonNegativeDataWarning",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
MAX_BISECTIONS = 200
# elements per chunk when materializing n x k x m distance tensors
_CHUNK = 2_000_000
# largest grid brute_force_encode will evaluate
MAX_GRID_POINTS = 50_000_000


class NonNegativeDataWarning(UserWarning):
    """Data handed to the NMF encoder has negative coordinates."""


@dataclass(frozen=True)
class EncodeResult:
    code: np.ndarray
    loss: float
    iterations: int
    converged: bool


class BatchEncoding(NamedTuple):
    codes: np.ndarray
    losses: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


def _as_matrix(T) -> np.ndarray:
    if isinstance(T, ImplementationMatrix):
        return T.entries
    T = np.asarray(T, dtype=float)
    return T.reshape(-1, 1) if T.ndim == 1 else T


def _as_rows(X, m: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != m:
        raise ValueError(f"points have dimension {X.shape[-1]}, implementation expects {m}")
    return X


def _losses(X, T, Y) -> np.ndarray:
    R = X - Y @ T.T
    return np.einsum("ij,ij->i", R, R)


def _single(batch: BatchEncoding) -> EncodeResult:
    return EncodeResult(
        code=batch.codes[0],
        loss=float(batch.losses[0]),
        iterations=int(batch.iterations[0]),
        converged=bool(batch.converged[0]),
    )


# ---------------------------------------------------------------- projections


def project_l1_ball(V, radius: float) -> np.ndarray:
    """Euclidean projection of each row of ``V`` onto the l1 ball.

    Sort-based: for a row outside the ball, soft-threshold at the level
    ``theta`` that puts the result exactly on the sphere.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    out = V.copy()
    A = np.abs(V)
    outside = A.sum(axis=1) > radius
    if not np.any(outside):
        return out
    U = -np.sort(-A[outside], axis=1)
    css = np.cumsum(U, axis=1)
    ind = np.arange(1, U.shape[1] + 1)
    cond = U - (css - radius) / ind > 0
    rho = U.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = (css[np.arange(len(rho)), rho] - radius) / (rho + 1.0)
    out[outside] = np.sign(V[outside]) * np.maximum(A[outside] - theta[:, None], 0.0)
    return out


def _projector(constraint: ConstraintSet):
    if constraint.kind is ConstraintKind.NONNEG_ORTHANT:
        return lambda V: np.maximum(V, 0.0)
    if constraint.kind is ConstraintKind.LP_BALL and constraint.index == 1.0:
        return lambda V: project_l1_ball(V, constraint.radius)
    if constraint.kind is ConstraintKind.LP_BALL and math.isinf(constraint.index):
        s = constraint.radius
        return lambda V: np.clip(V, -s, s)
    raise ValueError(f"no projection for {constraint}")


def _top_eigenvalue(T: np.ndarray) -> float:
    G = T.T @ T
    return float(np.linalg.eigvalsh(G)[-1]) if G.size else 0.0


# ------------------------------------------------------- projected gradient


def _projected_gradient(X, T, project, tol, max_iter, Y0=None) -> BatchEncoding:
    n, k = X.shape[0], T.shape[1]
    G = T.T @ T
    A = X @ T  # rows are T^T x
    L = _top_eigenvalue(T)
    Y = np.zeros((n, k)) if Y0 is None else project(np.array(Y0, dtype=float).reshape(n, k))
    iterations = np.zeros(n, dtype=int)

    def residual(Yc, Ac):
        grad = Yc @ G - Ac
        return np.max(np.abs(Yc - project(Yc - grad)), axis=1, initial=0.0)

    if L <= 0.0:
        # T == 0: every code gives loss ||x||^2
        Y = project(np.zeros((n, k)))
        return BatchEncoding(Y, _losses(X, T, Y), iterations, np.ones(n, dtype=bool))

    active = residual(Y, A) > tol
    Z = Y.copy()
    t = np.ones(n)
    it = 0
    while np.any(active) and it < max_iter:
        it += 1
        idx = np.flatnonzero(active)
        Ya, Za, Aa, ta = Y[idx], Z[idx], A[idx], t[idx]
        Ynew = project(Za - (Za @ G - Aa) / L)
        # adaptive restart: drop momentum when the step points uphill
        restart = np.einsum("ij,ij->i", Za - Ynew, Ynew - Ya) > 0
        tnew = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ta * ta))
        mom = np.where(restart, 0.0, (ta - 1.0) / tnew)
        Znew = Ynew + mom[:, None] * (Ynew - Ya)
        tnew = np.where(restart, 1.0, tnew)
        Y[idx], Z[idx], t[idx] = Ynew, Znew, tnew
        iterations[idx] = it
        done = residual(Ynew, Aa) <= tol
        active[idx[done]] = False
    return BatchEncoding(Y, _losses(X, T, Y), iterations, ~active)


# ---------------------------------------------------------------- l2 ball


def _l2_ball(X, T, radius, tol) -> BatchEncoding:
    n, k = X.shape[0], T.shape[1]
    U, sig, Vt = np.linalg.svd(T, full_matrices=False)
    cutoff = sig.max(initial=0.0) * max(T.shape) * np.finfo(float).eps
    keep = sig > cutoff
    U, sig, Vt = U[:, keep], sig[keep], Vt[keep]
    beta = X @ U  # (n, rank) coordinates of x in the range of T
    coeff = beta / sig
    # an overflowing norm is inf, which still compares correctly
    with np.errstate(over="ignore"):
        inside = np.linalg.norm(coeff, axis=1) <= radius
    iterations = np.zeros(n, dtype=int)
    converged = np.ones(n, dtype=bool)

    out = ~inside
    if np.any(out):
        # Write the multiplier as a row scale times nu, so that every
        # quantity stays O(1) no matter how small T or how large x is.
        sb = sig * beta[out]
        scale = np.abs(sb).max(axis=1, keepdims=True)
        u = sb / scale
        shift = sig**2 / scale

        def norm_at(nu):
            return np.linalg.norm(u / (shift + nu[:, None]), axis=1)

        lo = np.zeros(len(u))
        hi = np.linalg.norm(u, axis=1) / radius
        ok = np.zeros(len(u), dtype=bool)
        its = np.zeros(len(u), dtype=int)
        for it in range(1, MAX_BISECTIONS + 1):
            mid = 0.5 * (lo + hi)
            nm = norm_at(mid)
            hit = ~ok & (np.abs(nm - radius) <= tol * radius)
            big = ~ok & ~hit & (nm > radius)
            small = ~ok & ~hit & ~big
            lo = np.where(big, mid, lo)
            hi = np.where(hit | small, mid, hi)
            its = np.where(ok, its, it)
            ok |= hit | ((hi - lo) <= np.finfo(float).eps * hi)
            if np.all(ok):
                break
        c = u / (shift + hi[:, None])
        c *= np.minimum(1.0, radius / np.maximum(np.linalg.norm(c, axis=1), 1e-300))[:, None]
        coeff[out] = c
        iterations[out] = its
        converged[out] = ok
    Y = coeff @ Vt if Vt.size else np.zeros((n, k))
    return BatchEncoding(Y, _losses(X, T, Y), iterations, converged)


# ---------------------------------------------------------------- k-means


def _nearest_column(X, T) -> BatchEncoding:
    n, (m, k) = X.shape[0], T.shape
    Tt = T.T
    labels = np.empty(n, dtype=int)
    losses = np.empty(n)
    step = max(1, _CHUNK // max(1, k * m))
    for start in range(0, n, step):
        D = ((X[start:start + step, None, :] - Tt[None, :, :]) ** 2).sum(axis=-1)
        lab = np.argmin(D, axis=1)  # first minimum == lowest index
        labels[start:start + step] = lab
        losses[start:start + step] = D[np.arange(len(lab)), lab]
    Y = np.zeros((n, k))
    Y[np.arange(n), labels] = 1.0
    return BatchEncoding(Y, losses, np.full(n, k), np.ones(n, dtype=bool))


# ---------------------------------------------------------------- dispatch


def encode_batch(
    X,
    T,
    constraint: ConstraintSet,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init=None,
) -> BatchEncoding:
    """Encode every row of ``X`` against ``T`` under ``constraint``.

    ``init`` optionally warm-starts the iterative solvers (ignored by the
    exact ones).
    """
    T = _as_matrix(T)
    X = _as_rows(X, T.shape[0])
    if tol <= 0:
        raise ValueError("tol must be positive")
    kind = constraint.kind
    if kind is ConstraintKind.STANDARD_BASIS:
        return _nearest_column(X, T)
    if kind is ConstraintKind.L2_BALL:
        return _l2_ball(X, T, constraint.radius, tol)
    if kind is ConstraintKind.NONNEG_ORTHANT:
        if np.any(X < 0):
            warnings.warn("NMF encoder received negative coordinates", NonNegativeDataWarning, stacklevel=2)
        return _projected_gradient(X, T, _projector(constraint), tol, max_iter, init)
    p = constraint.index
    if p not in SUPPORTED_P:
        raise ValueError(f"lp-ball encoding supports p in {{1, 2, inf}}, got p={p}")
    if p == 2.0:
        return _l2_ball(X, T, constraint.radius, tol)
    return _projected_gradient(X, T, _projector(constraint), tol, max_iter, init)


def encode(x, T, constraint: ConstraintSet, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> EncodeResult:
    """Encode a single point."""
    return _single(encode_batch(x, T, constraint, tol=tol, max_iter=max_iter))


def encode_kmeans(x, T) -> EncodeResult:
    """Nearest column of T; ties go to the lowest column index."""
    return encode(x, T, ConstraintSet.standard_basis())


def encode_nmf(x, T, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> EncodeResult:
    """Non-negative least squares ``min_{y >= 0} ||x - T y||^2``."""
    T = _as_matrix(T)
    x = _as_rows(x, T.shape[0])
    if np.any(x < 0):
        warnings.warn("NMF encoder received negative coordinates", NonNegativeDataWarning, stacklevel=2)
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _single(_projected_gradient(x, T, _projector(ConstraintSet.nonneg()), tol, max_iter))


def encode_l2ball(x, T, radius: float = 1.0, tol: float = DEFAULT_TOL) -> EncodeResult:
    if not radius > 0:
        raise ValueError("radius must be positive")
    return encode(x, T, ConstraintSet.l2_ball(radius), tol=tol)


def encode_lp_ball(x, T, s: float, p, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> EncodeResult:
    if not s > 0:
        raise ValueError("s must be positive; s = 0 leaves only the zero code")
    return encode(x, T, ConstraintSet.lp_ball(s, p), tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------- oracle


def _nonneg_box(x, T) -> float:
    # Some optimal NNLS code is supported on linearly independent columns and
    # ||T y*|| <= ||x||, so each coordinate is at most ||x|| / sigma_min(T_S).
    xnorm = float(np.linalg.norm(x))
    k = T.shape[1]
    upper = 0.0
    for size in range(1, k + 1):
        for cols in itertools.combinations(range(k), size):
            sv = np.linalg.svd(T[:, cols], compute_uv=False)
            if sv[-1] > 1e-12 * max(1.0, sv[0]):
                upper = max(upper, xnorm / sv[-1])
    return upper


def brute_force_encode(x, T, constraint: ConstraintSet, grid_step: float) -> float:
    """Smallest loss over a regular grid laid on the codebook.

    Every grid point is feasible, so the result never undercuts the true
    minimum.  Only for ``k <= 3``.
    """
    T = _as_matrix(T)
    x = np.asarray(x, dtype=float).ravel()
    m, k = T.shape
    if x.shape != (m,):
        raise ValueError(f"point has dimension {x.size}, implementation expects {m}")
    if k > 3:
        raise ValueError(f"brute force refuses k={k} > 3")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")

    if constraint.kind is ConstraintKind.STANDARD_BASIS:
        return float(((x[None, :] - T.T) ** 2).sum(axis=-1).min())

    if constraint.kind is ConstraintKind.NONNEG_ORTHANT:
        top = _nonneg_box(x, T)
        axis = np.arange(0, math.floor(top / grid_step) + 2) * grid_step
    else:
        R = constraint.radius
        half = math.floor(R / grid_step)
        axis = np.arange(-half, half + 1) * grid_step
    if axis.size ** k > MAX_GRID_POINTS:
        raise ValueError(f"grid of {axis.size}^{k} points exceeds the {MAX_GRID_POINTS} guard")

    mesh = np.meshgrid(*([axis] * k), indexing="ij", sparse=True)
    G = T.T @ T
    a = T.T @ x
    loss = float(x @ x)
    for i in range(k):
        loss = loss - 2.0 * a[i] * mesh[i] + G[i, i] * mesh[i] ** 2
        for j in range(i + 1, k):
            loss = loss + 2.0 * G[i, j] * mesh[i] * mesh[j]
    loss = np.broadcast_to(loss, (axis.size,) * k)
    if constraint.kind in (ConstraintKind.L2_BALL, ConstraintKind.LP_BALL):
        p = constraint.index
        if math.isinf(p):
            feasible = np.ones(loss.shape, dtype=bool)
        else:
            feasible = sum(np.abs(g) ** p for g in mesh) <= constraint.radius**p * (1 + 1e-12)
            feasible = np.broadcast_to(feasible, loss.shape)
        return max(0.0, float(loss[feasible].min()))
    return max(0.0, float(loss.min()))
