"""Empirical risk and alternating-minimization training of T."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.exceptions import ConvergenceWarning

from .encoders import DEFAULT_TOL, encode_batch
from .model import ConstraintSet, ImplementationMatrix, Scheme, SchemeSpec, constraint_for

__all__ = [
    "TrainReport",
    "empirical_risk",
    "empirical_losses",
    "normalize_columns",
    "random_implementation",
    "train",
    "ZeroColumnWarning",
]

# a step must lower the risk by more than this to continue training
STOP_IMPROVEMENT = 1e-10


class ZeroColumnWarning(UserWarning):
    pass


def _rows(sample) -> np.ndarray:
    X = np.asarray(sample, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("sample must be a non-empty list of m-vectors")
    return X


def empirical_losses(T, sample, constraint: ConstraintSet, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Per-point reconstruction errors; warns if any encoding did not converge."""
    X = _rows(sample)
    enc = encode_batch(X, T, constraint, tol=tol)
    if not enc.converged.all():
        warnings.warn(
            f"{int((~enc.converged).sum())} of {len(X)} encodings did not converge",
            ConvergenceWarning,
            stacklevel=2,
        )
    return enc.losses


def empirical_risk(T, sample, constraint: ConstraintSet, tol: float = DEFAULT_TOL) -> float:
    """``R_n(T)``: mean reconstruction error over the sample."""
    return float(np.mean(empirical_losses(T, sample, constraint, tol=tol)))


def normalize_columns(T, target: float = 1.0):
    """Rescale every nonzero column of T to norm ``target``.

    Returns ``(T_normalized, Q)`` with ``T = T_normalized @ diag(Q)``, so a
    code ``y`` for T corresponds to ``Q * y`` for the normalized matrix.
    Zero columns keep scale 1 and trigger a `ZeroColumnWarning`.
    """
    A = np.asarray(T.entries if isinstance(T, ImplementationMatrix) else T, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    zero = norms == 0
    if zero.any():
        warnings.warn(f"columns {np.flatnonzero(zero).tolist()} are zero and left untouched", ZeroColumnWarning, stacklevel=2)
    Q = np.where(zero, 1.0, norms / target)
    return ImplementationMatrix(A / Q), Q


def random_implementation(spec: SchemeSpec, rng) -> ImplementationMatrix:
    """Columns drawn uniformly from the ball of radius c (orthant part for NMF)."""
    rng = np.random.default_rng(rng)
    D = rng.standard_normal((spec.m, spec.k))
    D /= np.maximum(np.linalg.norm(D, axis=0), 1e-300)
    radii = spec.c * rng.random(spec.k) ** (1.0 / spec.m)
    T = D * radii
    if spec.scheme is Scheme.NMF:
        T = np.abs(T)
    return ImplementationMatrix(T)


@dataclass
class TrainReport:
    T: ImplementationMatrix
    empirical_risk: float
    risk_trace: list[float]
    iterations: int
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "T": self.T.entries.tolist(),
            "shape": list(self.T.shape),
            "empirical_risk": self.empirical_risk,
            "risk_trace": list(self.risk_trace),
            "iterations": self.iterations,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _clip_columns(T: np.ndarray, c: float) -> np.ndarray:
    norms = np.linalg.norm(T, axis=0)
    scale = np.where(norms > c, c / np.maximum(norms, 1e-300), 1.0)
    return T * scale


def _lloyd_update(X, T, codes):
    counts = codes.sum(axis=0)
    sums = X.T @ codes
    new = T.copy()
    hit = counts > 0
    new[:, hit] = sums[:, hit] / counts[hit]  # empty clusters keep their center
    return new


def _dictionary_update(X, codes, spec: SchemeSpec):
    # least squares: min_T ||X^T - T Y^T||_F, then project back to feasibility
    sol, *_ = np.linalg.lstsq(codes, X, rcond=None)
    T = sol.T
    if spec.scheme is Scheme.NMF:
        T = np.maximum(T, 0.0)
    T = _clip_columns(T, spec.c)
    if spec.scheme is Scheme.NMF:
        norms = np.linalg.norm(T, axis=0)
        if np.all(norms > 0):
            T, _ = normalize_columns(T, target=spec.c)
            T = T.entries
        else:
            nz = norms > 0
            T[:, nz] = T[:, nz] / norms[nz] * spec.c
    return T


def _initial(spec, X, init, rng) -> np.ndarray:
    if isinstance(init, ImplementationMatrix) or (init is not None and np.ndim(init) == 2):
        T = ImplementationMatrix(init)
        T.check_against(spec)
        return np.array(T.entries)
    rng = np.random.default_rng(init if init is not None else rng)
    if spec.scheme is Scheme.KMEANS:
        # k sample points chosen uniformly without replacement (with, if k > n)
        idx = rng.choice(len(X), size=spec.k, replace=spec.k > len(X))
        return _clip_columns(X[idx].T.copy(), spec.c)
    return np.array(random_implementation(spec, rng).entries)


def train(
    spec: SchemeSpec,
    sample,
    init=None,
    outer_iters: int = 100,
    tol: float = DEFAULT_TOL,
    random_state=None,
) -> TrainReport:
    """Alternate between encoding the sample and updating T.

    Parameters
    ----------
    spec : SchemeSpec
        Scheme and constraints (column norms at most ``c``).
    sample : array-like of shape (n, m)
    init : ImplementationMatrix, array or int, optional
        Starting matrix, or a seed for a random feasible start.  k-means
        starts from k distinct sample points.
    outer_iters : int
        Maximum number of encode/update rounds.
    tol : float
        Encoder tolerance.

    Returns
    -------
    TrainReport
        ``risk_trace[0]`` is the risk of the starting matrix.  A candidate
        update that would raise the risk is rejected and training stops,
        so the trace never increases.
    """
    X = _rows(sample)
    if X.shape[1] != spec.m:
        raise ValueError(f"sample has dimension {X.shape[1]}, spec says m={spec.m}")
    constraint = constraint_for(spec)
    T = _initial(spec, X, init, random_state)
    flags: list[str] = []

    enc = encode_batch(X, T, constraint, tol=tol)
    risk = float(enc.losses.mean())
    trace = [risk]
    unconverged = int((~enc.converged).sum())
    it = 0
    for it in range(1, outer_iters + 1):
        if spec.scheme is Scheme.KMEANS:
            candidate = _clip_columns(_lloyd_update(X, T, enc.codes), spec.c)
        else:
            candidate = _dictionary_update(X, enc.codes, spec)
        new_enc = encode_batch(X, candidate, constraint, tol=tol)
        new_risk = float(new_enc.losses.mean())
        if new_risk > risk:
            flags.append(f"iteration {it}: update raised risk by {new_risk - risk:.3g}; rejected")
            it -= 1
            break
        improvement = risk - new_risk
        T, enc, risk = candidate, new_enc, new_risk
        unconverged += int((~enc.converged).sum())
        trace.append(risk)
        if improvement < STOP_IMPROVEMENT:
            break
    if unconverged:
        flags.append(f"{unconverged} encodings did not reach tolerance")
    return TrainReport(ImplementationMatrix(T), risk, trace, it, flags)
