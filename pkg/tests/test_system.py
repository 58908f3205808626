import numpy as np
import pytest

import stochmor as sm
from stochmor.errors import SizeCapError
from stochmor.system import _abscissa_power_iteration, ms_stability_operator

from helpers import random_stable_model


def scalar_model(a, nco, k):
    return sm.StateSpaceModel(A=[[a]], B1=[[1.0]], C=[[1.0]],
                              N=(np.array([[nco]]),), K=[[k]])


class TestStateSpaceModel:
    def test_kind_inference(self):
        det = sm.StateSpaceModel(A=[[-1.0]], B1=[[1.0]], C=[[1.0]])
        add = sm.StateSpaceModel(A=[[-1.0]], B1=[[1.0]], C=[[1.0]], B2=[[1.0]])
        mult = scalar_model(-1.0, 1.0, 1.0)
        assert det.kind == "deterministic"
        assert add.kind == "additive"
        assert mult.kind == "multiplicative"

    def test_default_covariance_is_identity(self):
        m = sm.StateSpaceModel(A=-np.eye(2), B1=np.eye(2), C=np.eye(2),
                               B2=np.ones((2, 3)))
        assert m.K.shape == (3, 3)
        np.testing.assert_array_equal(m.K, np.eye(3))

    def test_dimensions(self):
        m = sm.StateSpaceModel(A=-np.eye(3), B1=np.ones((3, 2)),
                               C=np.ones((1, 3)), B2=np.ones((3, 2)))
        assert (m.n, m.m1, m.m2, m.p) == (3, 2, 2, 1)

    def test_arrays_are_read_only(self):
        m = sm.StateSpaceModel(A=-np.eye(2), B1=np.ones((2, 1)),
                               C=np.ones((1, 2)))
        with pytest.raises(ValueError):
            m.A[0, 0] = 1.0


class TestValidateModel:
    def test_valid_additive_wave_preset_full_scale(self):
        model = sm.build_wave_model(sm.preset_config("add", n=1000))
        assert (model.n, model.m1, model.m2, model.p) == (1000, 1, 2, 1)
        assert sm.validate_model(model) == []

    def test_asymmetric_covariance_flagged(self):
        m = sm.StateSpaceModel(A=-np.eye(2), B1=np.ones((2, 1)),
                               C=np.ones((1, 2)), B2=np.ones((2, 2)),
                               K=np.array([[1.0, 0.3], [0.2, 1.0]]))
        violations = sm.validate_model(m)
        assert any("symmetric" in v for v in violations)

    def test_both_noise_kinds_flagged(self):
        m = sm.StateSpaceModel(A=-np.eye(2), B1=np.ones((2, 1)),
                               C=np.ones((1, 2)), B2=np.ones((2, 1)),
                               N=(np.eye(2),), K=np.eye(1))
        violations = sm.validate_model(m)
        assert any("ambiguity" in v for v in violations)

    def test_indefinite_covariance_flagged(self):
        m = sm.StateSpaceModel(A=-np.eye(2), B1=np.ones((2, 1)),
                               C=np.ones((1, 2)), B2=np.ones((2, 2)),
                               K=np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert any("semidefinite" in v for v in sm.validate_model(m))

    def test_total_on_garbage_shapes(self):
        m = sm.StateSpaceModel(A=np.ones((2, 3)), B1=np.ones((5, 1)),
                               C=np.ones((1, 7)))
        assert sm.validate_model(m)  # reports, never raises


class TestStabilityOperator:
    def test_scalar_closed_form(self):
        L = ms_stability_operator(scalar_model(-1.0, 1.0, 1.0))
        np.testing.assert_allclose(L, [[-1.0]])

    def test_kronecker_sum_spectrum(self):
        m = sm.StateSpaceModel(A=np.diag([-1.0, -2.0]), B1=np.ones((2, 1)),
                               C=np.ones((1, 2)))
        eigs = np.sort(np.linalg.eigvals(ms_stability_operator(m)).real)
        np.testing.assert_allclose(eigs, [-4.0, -3.0, -3.0, -2.0], atol=1e-12)

    def test_output_dimension(self):
        m = random_stable_model(np.random.default_rng(0), 3)
        assert ms_stability_operator(m).shape == (9, 9)

    def test_size_cap(self):
        m = random_stable_model(np.random.default_rng(0), 45)
        with pytest.raises(SizeCapError):
            ms_stability_operator(m)

    def test_similarity_invariant_spectrum(self):
        rng = np.random.default_rng(3)
        m = random_stable_model(rng, 6, m2=2, kind="multiplicative")
        T = np.eye(6) + 0.3 * rng.standard_normal((6, 6))
        Ti = np.linalg.inv(T)
        mt = sm.StateSpaceModel(
            A=T @ m.A @ Ti, B1=T @ m.B1, C=m.C @ Ti,
            N=tuple(T @ Ni @ Ti for Ni in m.N), K=m.K)
        s1 = np.sort_complex(np.linalg.eigvals(ms_stability_operator(m)))
        s2 = np.sort_complex(np.linalg.eigvals(ms_stability_operator(mt)))
        np.testing.assert_allclose(s1, s2, atol=1e-8)


class TestIsMsStable:
    def test_scalar_stable(self):
        rep = sm.is_ms_stable(scalar_model(-1.0, 1.0, 1.0))
        assert rep.stable
        np.testing.assert_allclose(rep.spectral_abscissa, -1.0, atol=1e-10)

    def test_scalar_marginal_is_not_stable(self):
        rep = sm.is_ms_stable(scalar_model(-1.0, np.sqrt(2.0), 1.0))
        assert not rep.stable
        np.testing.assert_allclose(rep.spectral_abscissa, 0.0, atol=1e-10)

    def test_deterministic_uses_drift_spectrum(self):
        m = sm.StateSpaceModel(A=np.diag([-1.0, -2.0]), B1=np.ones((2, 1)),
                               C=np.ones((1, 2)))
        rep = sm.is_ms_stable(m)
        assert rep.stable and rep.method == "dense_eig"
        np.testing.assert_allclose(rep.spectral_abscissa, -1.0)

    @pytest.mark.parametrize("n", [6, 10, 16])
    def test_dense_and_implicit_agree(self, n):
        m = random_stable_model(np.random.default_rng(n), n, m2=2,
                                kind="multiplicative")
        dense = sm.is_ms_stable(m).spectral_abscissa
        implicit = _abscissa_power_iteration(m.A, m.noise_matrices(), m.K)
        assert abs(dense - implicit) <= 1e-6 * max(abs(dense), 1.0)

    def test_implicit_path_used_above_cap(self):
        m = sm.build_wave_model(sm.preset_config("mult", n=60))
        rep = sm.is_ms_stable(m)
        assert rep.method == "power_iteration"
        assert rep.stable

    def test_implicit_path_flags_unstable(self):
        n = 50
        m = sm.StateSpaceModel(A=-0.1 * np.eye(n), B1=np.ones((n, 1)),
                               C=np.ones((1, n)), N=(np.eye(n),), K=np.eye(1))
        rep = sm.is_ms_stable(m)
        assert not rep.stable
        # closed form: all diagonal, abscissa 2a + k = 0.8
        np.testing.assert_allclose(rep.spectral_abscissa, 0.8, atol=1e-6)


class TestWeightMatrix:
    def test_accepts_well_conditioned(self):
        W = sm.WeightMatrix(np.array([[2.0, 0.0], [0.0, 0.5]]))
        assert W.m == 2

    def test_rejects_singular(self):
        with pytest.raises(ValueError):
            sm.WeightMatrix(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            sm.WeightMatrix(np.ones((2, 3)))
