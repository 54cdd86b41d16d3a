"""Problem description shared by every k-dimensional coding scheme.

A scheme encodes a point ``x`` in R^m as ``argmin_{y in Y} ||x - T y||^2``
where ``T`` is an m-by-k implementation matrix (columns are atoms or
centers) and ``Y`` is the codebook.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Scheme",
    "SchemeSpec",
    "ImplementationMatrix",
    "ConstraintKind",
    "ConstraintSet",
    "DistributionKind",
    "DistributionSpec",
    "worst_case_loss_bound",
    "operator_norm_on_Y",
    "constraint_for",
]

# p indices the exact sparse-coding encoders know how to handle
SUPPORTED_P = (1.0, 2.0, math.inf)


class Scheme(str, enum.Enum):
    NMF = "nmf"
    DICTIONARY = "dictionary"
    SPARSE = "sparse"
    KMEANS = "kmeans"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "nmf": cls.NMF,
            "dictionary": cls.DICTIONARY,
            "dictionarylearning": cls.DICTIONARY,
            "dict": cls.DICTIONARY,
            "general": cls.DICTIONARY,
            "sparse": cls.SPARSE,
            "sparsecoding": cls.SPARSE,
            "kmeans": cls.KMEANS,
            "vq": cls.KMEANS,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown scheme {value!r}") from None


def parse_p(value) -> float:
    """Parse an lp index; accepts numbers and the string ``"inf"``."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        value = float(value)
    p = float(value)
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"p must lie in [1, inf], got {value!r}")
    return p


def _format_p(p: float):
    return "inf" if math.isinf(p) else p


@dataclass(frozen=True)
class SchemeSpec:
    """Full parameterization of one coding problem.

    Parameters
    ----------
    scheme : Scheme or str
        Which coding scheme.
    m, k : int
        Data dimension and code dimension.
    r : float
        Radius of the ball containing the data.
    c : float
        Bound on the Euclidean norm of every column of T.
    s, p : float
        Radius and index of the lp codebook (sparse coding only).
    b : float
        Upper end of the loss range, used by the Hoeffding-type bounds.
    """

    scheme: Scheme
    m: int
    k: int
    r: float = 1.0
    c: float = 1.0
    s: float = 1.0
    p: float = math.inf
    b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        for name in ("m", "k"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("r", "c", "s", "b"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite non-negative real, got {v!r}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "p", parse_p(self.p))
        if self.b <= 0:
            raise ValueError("b must be positive")
        if self.scheme is Scheme.SPARSE and self.s <= 0:
            raise ValueError("sparse coding needs s > 0")

    @property
    def code_norm_exponent(self) -> float:
        """``1 - 1/p``, the exponent on k in the lp-ball norm chain."""
        return 1.0 - 1.0 / self.p

    def replace(self, **changes) -> "SchemeSpec":
        d = self.to_dict()
        d.update(changes)
        return SchemeSpec.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "m": self.m,
            "k": self.k,
            "r": self.r,
            "c": self.c,
            "s": self.s,
            "p": _format_p(self.p),
            "b": self.b,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeSpec":
        allowed = {"scheme", "m", "k", "r", "c", "s", "p", "b"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown SchemeSpec keys: {sorted(unknown)}")
        if "scheme" not in d or "m" not in d or "k" not in d:
            raise ValueError("SchemeSpec needs at least scheme, m and k")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "SchemeSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ImplementationMatrix:
    """Read-only m-by-k matrix T with cached column norms."""

    entries: np.ndarray
    column_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"implementation must be a non-empty 2-d array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("implementation has non-finite entries")
        a.flags.writeable = False
        norms = np.linalg.norm(a, axis=0)
        norms.flags.writeable = False
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "column_norms", norms)

    @classmethod
    def from_columns(cls, columns) -> "ImplementationMatrix":
        return cls(np.column_stack([np.asarray(col, dtype=float) for col in columns]))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def k(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def check_against(self, spec: SchemeSpec, slack: float = 1e-9) -> None:
        """Raise ``ValueError`` unless T is feasible for ``spec``."""
        if self.shape != (spec.m, spec.k):
            raise ValueError(f"T has shape {self.shape}, spec wants {(spec.m, spec.k)}")
        worst = float(self.column_norms.max())
        if worst > spec.c + slack:
            raise ValueError(f"column norm {worst:.6g} exceeds c={spec.c}")
        if spec.scheme is Scheme.NMF and np.any(self.entries < 0):
            raise ValueError("NMF implementation must be entrywise non-negative")

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ImplementationMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.entries, other.entries))

    def __hash__(self):
        return hash((self.shape, self.entries.tobytes()))


class ConstraintKind(str, enum.Enum):
    NONNEG_ORTHANT = "nonneg"
    L2_BALL = "l2ball"
    LP_BALL = "lpball"
    STANDARD_BASIS = "basis"


@dataclass(frozen=True)
class ConstraintSet:
    """The codebook Y."""

    kind: ConstraintKind
    radius: float = 1.0
    index: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        object.__setattr__(self, "index", parse_p(self.index))
        if self.kind in (ConstraintKind.L2_BALL, ConstraintKind.LP_BALL):
            if not (self.radius > 0 and math.isfinite(self.radius)):
                raise ValueError(f"ball radius must be positive, got {self.radius!r}")
        if self.kind is ConstraintKind.L2_BALL:
            object.__setattr__(self, "index", 2.0)

    @classmethod
    def nonneg(cls) -> "ConstraintSet":
        return cls(ConstraintKind.NONNEG_ORTHANT)

    @classmethod
    def l2_ball(cls, radius: float = 1.0) -> "ConstraintSet":
        return cls(ConstraintKind.L2_BALL, radius=radius)

    @classmethod
    def lp_ball(cls, radius: float, p) -> "ConstraintSet":
        return cls(ConstraintKind.LP_BALL, radius=radius, index=p)

    @classmethod
    def standard_basis(cls) -> "ConstraintSet":
        return cls(ConstraintKind.STANDARD_BASIS)

    def contains(self, y, tol: float = 1e-9) -> bool:
        y = np.asarray(y, dtype=float)
        if self.kind is ConstraintKind.NONNEG_ORTHANT:
            return bool(np.all(y >= -tol))
        if self.kind is ConstraintKind.STANDARD_BASIS:
            return bool(np.sum(np.abs(y) > tol) == 1 and np.isclose(y.max(), 1.0, atol=tol))
        return bool(np.linalg.norm(y, ord=self.index) <= self.radius + tol)


def constraint_for(spec: SchemeSpec) -> ConstraintSet:
    """Codebook each scheme uses."""
    if spec.scheme is Scheme.NMF:
        return ConstraintSet.nonneg()
    if spec.scheme is Scheme.DICTIONARY:
        return ConstraintSet.l2_ball(1.0)
    if spec.scheme is Scheme.SPARSE:
        return ConstraintSet.lp_ball(spec.s, spec.p)
    return ConstraintSet.standard_basis()


class DistributionKind(str, enum.Enum):
    UNIFORM_BALL = "uniform_ball"
    UNIFORM_POSITIVE_BALL = "uniform_positive_ball"
    POINT_MIXTURE = "point_mixture"


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """A data distribution supported on the closed ball of radius r."""

    kind: DistributionKind
    m: int
    r: float = 1.0
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DistributionKind(self.kind))
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        object.__setattr__(self, "m", int(self.m))
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValueError("r must be finite and non-negative")
        if self.kind is not DistributionKind.POINT_MIXTURE:
            return
        if self.atoms is None:
            raise ValueError("point mixture needs atoms")
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        if atoms.shape[1] != self.m:
            raise ValueError(f"atoms must have {self.m} coordinates")
        if self.weights is None:
            weights = np.full(len(atoms), 1.0 / len(atoms))
        else:
            weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(atoms),) or np.any(weights < 0):
            raise ValueError("weights must be non-negative, one per atom")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        if np.any(np.linalg.norm(atoms, axis=1) > self.r + 1e-12):
            raise ValueError("every atom must lie in the ball of radius r")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform_ball(cls, m: int, r: float = 1.0) -> "DistributionSpec":
        return cls(DistributionKind.UNIFORM_BALL, m=m, r=r)

    @classmethod
    def uniform_positive_ball(cls, m: int, r: float = 1.0) -> "DistributionSpec":
        return cls(DistributionKind.UNIFORM_POSITIVE_BALL, m=m, r=r)

    @classmethod
    def point_mixture(cls, atoms, weights=None, r: float | None = None) -> "DistributionSpec":
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        if r is None:
            r = float(np.linalg.norm(atoms, axis=1).max())
        return cls(DistributionKind.POINT_MIXTURE, m=atoms.shape[1], r=r, atoms=atoms, weights=weights)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "m": self.m, "r": self.r}
        if self.kind is DistributionKind.POINT_MIXTURE:
            d["atoms"] = self.atoms.tolist()
            d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        unknown = set(d) - {"kind", "m", "r", "atoms", "weights"}
        if unknown:
            raise ValueError(f"unknown DistributionSpec keys: {sorted(unknown)}")
        return cls(**d)


def worst_case_loss_bound(spec: SchemeSpec) -> float:
    """Analytic upper bound on the reconstruction error f_T over P(r).

    >>> worst_case_loss_bound(SchemeSpec("nmf", m=3, k=4, r=1.0))
    1.0
    """
    r, c, k = spec.r, spec.c, spec.k
    if spec.scheme is Scheme.NMF:
        return r * r
    if spec.scheme is Scheme.DICTIONARY:
        return r * r + c * c * k * k
    if spec.scheme is Scheme.SPARSE:
        return (r + spec.s * c * k ** spec.code_norm_exponent) ** 2
    # nearest center is no farther than r + max center norm
    return (r + max(r, c)) ** 2


def operator_norm_on_Y(spec: SchemeSpec) -> float:
    """Worst-case ``sup_T sup_{y in Y} ||T y||`` used by the Rademacher bounds."""
    c, k = spec.c, spec.k
    if spec.scheme is Scheme.NMF:
        return c * math.sqrt(k)
    if spec.scheme is Scheme.SPARSE:
        return spec.s * c * k ** spec.code_norm_exponent
    if spec.scheme is Scheme.DICTIONARY:
        return c * k
    return c
