"""Generalization bounds, encoders and ERM for k-dimensional coding schemes."""

from .bounds import BoundParams, BoundReport, RegimeError, scheme_bound_value, scheme_bounds
from .covering import ln_cover_bound, verify_cover
from .encoders import brute_force_encode, encode, encode_batch
from .erm import TrainReport, empirical_risk, train
from .estimators import DictionaryCoder, KDimensionalCoder, KMeansCoder, NMFCoder, SparseCoder
from .experiments import crossover_scan, estimate_expected_risk, figure_data, gap_experiment, sample
from .model import ConstraintSet, DistributionSpec, ImplementationMatrix, Scheme, SchemeSpec, constraint_for

__version__ = "0.1.0"

__all__ = [
    "BoundParams",
    "BoundReport",
    "ConstraintSet",
    "DictionaryCoder",
    "DistributionSpec",
    "ImplementationMatrix",
    "KDimensionalCoder",
    "KMeansCoder",
    "NMFCoder",
    "RegimeError",
    "Scheme",
    "SchemeSpec",
    "SparseCoder",
    "TrainReport",
    "brute_force_encode",
    "constraint_for",
    "crossover_scan",
    "empirical_risk",
    "encode",
    "encode_batch",
    "estimate_expected_risk",
    "figure_data",
    "gap_experiment",
    "ln_cover_bound",
    "sample",
    "scheme_bound_value",
    "scheme_bounds",
    "train",
    "verify_cover",
]
