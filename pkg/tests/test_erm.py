import json
import math
import warnings

import numpy as np
import pytest
from sklearn.exceptions import ConvergenceWarning

from kdcode.encoders import brute_force_encode, encode_nmf
from kdcode.erm import (
    ZeroColumnWarning,
    empirical_risk,
    normalize_columns,
    random_implementation,
    train,
)
from kdcode.experiments import sample
from kdcode.model import ConstraintSet, DistributionSpec, ImplementationMatrix, Scheme, SchemeSpec, constraint_for


class TestEmpiricalRisk:
    def test_repeated_column(self):
        T = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert empirical_risk(T, [[1.0, 0.0]] * 4, ConstraintSet.standard_basis()) == 0.0

    def test_single_point(self):
        T = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert empirical_risk(T, [[0.6, 0.0]], ConstraintSet.standard_basis()) == pytest.approx(0.16)

    def test_matches_oracle_average(self):
        rng = np.random.default_rng(2)
        T = np.abs(rng.standard_normal((2, 1)))
        X = np.abs(rng.standard_normal((3, 2)))
        oracle = np.mean([brute_force_encode(x, T, ConstraintSet.nonneg(), 1e-4) for x in X])
        assert empirical_risk(T, X, ConstraintSet.nonneg()) == pytest.approx(oracle, abs=1e-3)

    def test_empty_sample(self):
        with pytest.raises(ValueError):
            empirical_risk(np.eye(2), np.empty((0, 2)), ConstraintSet.nonneg())

    def test_non_convergence_warns(self, monkeypatch):
        import kdcode.erm as erm

        real = erm.encode_batch
        monkeypatch.setattr(erm, "encode_batch", lambda X, T, c, tol: real(X, T, c, tol=tol, max_iter=1))
        T = np.array([[1.0, 1.0], [0.0, 1e-3]])
        with pytest.warns(ConvergenceWarning):
            empirical_risk(T, [[1.0, 1e-4]], ConstraintSet.nonneg())


class TestNormalizeColumns:
    def test_example(self):
        Tn, Q = normalize_columns(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(Tn.entries.ravel(), [0.6, 0.8])
        np.testing.assert_allclose(Q, [5.0])

    def test_unit_columns_unchanged(self):
        _, Q = normalize_columns(np.eye(3))
        np.testing.assert_array_equal(Q, np.ones(3))

    def test_random_and_reconstruction(self):
        rng = np.random.default_rng(0)
        T = rng.standard_normal((4, 6))
        Tn, Q = normalize_columns(T)
        np.testing.assert_allclose(Tn.column_norms, 1.0, rtol=1e-12)
        np.testing.assert_allclose(Tn.entries * Q, T, rtol=1e-12)

    def test_zero_column_flagged(self):
        with pytest.warns(ZeroColumnWarning):
            Tn, Q = normalize_columns(np.array([[1.0, 0.0], [1.0, 0.0]]))
        assert Q[1] == 1.0 and np.all(Tn.entries[:, 1] == 0)


class TestTrain:
    def test_kmeans_single_center_is_mean(self):
        X = np.array([[0.1, 0.2], [0.5, -0.3], [0.0, 0.4]])
        rep = train(SchemeSpec(Scheme.KMEANS, 2, 1), X, random_state=0)
        np.testing.assert_allclose(rep.T.entries.ravel(), X.mean(axis=0))
        assert rep.risk_trace[1] == rep.empirical_risk  # one update reaches the fixed point

    def test_kmeans_two_points(self):
        X = np.array([[0.9, 0.0], [-0.9, 0.0]])
        rep = train(SchemeSpec(Scheme.KMEANS, 2, 2), X, random_state=3)
        assert rep.empirical_risk == 0.0

    def test_nmf_one_dimensional(self):
        rep = train(SchemeSpec(Scheme.NMF, 1, 1), [[0.5], [1.0]], random_state=0)
        np.testing.assert_allclose(rep.T.entries, [[1.0]])
        assert rep.empirical_risk == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_monotone_feasible_and_reproducible(self, scheme):
        spec = SchemeSpec(scheme, 4, 3, c=0.8, s=1.5, p=1.0 if scheme is Scheme.SPARSE else math.inf)
        dist = DistributionSpec.uniform_positive_ball(4) if scheme is Scheme.NMF else DistributionSpec.uniform_ball(4)
        X = sample(dist, 60, 5)
        rep = train(spec, X, outer_iters=30, random_state=1)
        assert all(b <= a + 1e-9 for a, b in zip(rep.risk_trace, rep.risk_trace[1:]))
        assert rep.empirical_risk == rep.risk_trace[-1]
        assert rep.T.column_norms.max() <= spec.c + 1e-9
        if scheme is Scheme.NMF:
            assert np.all(rep.T.entries >= 0)
        assert rep.empirical_risk == pytest.approx(empirical_risk(rep.T, X, constraint_for(spec)), abs=1e-7)
        again = train(spec, X, outer_iters=30, random_state=1)
        assert again.T == rep.T and again.risk_trace == rep.risk_trace

    def test_explicit_init(self):
        init = ImplementationMatrix(np.array([[0.1, -0.1]]))
        rep = train(SchemeSpec(Scheme.KMEANS, 1, 2), [[0.5], [-0.5]], init=init)
        assert rep.risk_trace[0] == pytest.approx(0.16)
        assert rep.empirical_risk == 0.0
        with pytest.raises(ValueError):
            train(SchemeSpec(Scheme.KMEANS, 1, 2), [[0.5]], init=np.array([[5.0, 0.0]]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            train(SchemeSpec(Scheme.KMEANS, 3, 2), [[0.5, 0.1]])

    def test_report_json(self):
        rep = train(SchemeSpec(Scheme.KMEANS, 2, 1), [[0.2, 0.4], [0.0, 0.0]])
        data = json.loads(rep.to_json())
        assert data["T"] == [[0.1], [0.2]] or np.allclose(data["T"], [[0.1], [0.2]])
        assert data["shape"] == [2, 1]


def test_random_implementation_is_feasible():
    rng = np.random.default_rng(0)
    for scheme in Scheme:
        spec = SchemeSpec(scheme, 5, 4, c=0.7)
        T = random_implementation(spec, rng)
        T.check_against(spec)


def test_normalized_nmf_codes_stay_in_data_ball():
    # with unit non-negative columns, ||y|| <= ||T y|| <= ||x|| <= r
    rng = np.random.default_rng(8)
    r = 1.3
    for _ in range(1000):
        m, k = rng.integers(1, 5), rng.integers(1, 5)
        T = normalize_columns(np.abs(rng.standard_normal((m, k))) + 1e-3)[0].entries
        x = np.abs(rng.standard_normal(m))
        x *= r * rng.random() / np.linalg.norm(x)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            y = encode_nmf(x, T).code
        assert np.linalg.norm(y) <= r + 1e-6
