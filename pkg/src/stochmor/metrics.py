"""Gramian-based weighted L2 distances, additive error bounds and output bounds.

The squared distance between the impulse responses of a full and a reduced
system is ``tr(C P C^T) + tr(Chat Phat Chat^T) - 2 tr(C P2 Chat^T)`` with
``P``, ``Phat`` and ``P2`` solving the full, reduced and mixed Gramian
equations of the two systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg as spla

from . import matrixeq
from .errors import DecompositionError, UnstableSystemError
from .system import StateSpaceModel, WeightMatrix, is_ms_stable

__all__ = [
    "DistanceReport",
    "AdditiveBounds",
    "sqrtm_psd",
    "l2w_distance",
    "additive_bounds",
    "output_error_bound",
    "input_l2_norm",
]

_SYM_RTOL = 1e-12
_PSD_RTOL = 1e-12


@dataclass
class DistanceReport:
    """Weighted L2 distance between two impulse responses.

    `distance_sq_raw` keeps the trace combination before clamping tiny
    negative rounding artifacts to zero.
    """

    distance: float
    tr_full: float
    tr_red: float
    tr_cross: float
    distance_sq_raw: float
    gramian_reports: dict


@dataclass
class AdditiveBounds:
    """Error-bound terms for reductions of a system with additive noise.

    E1 bounds the deterministic-subsystem output error (weight I), E2 the
    noise-subsystem error (weight K^(1/2)).  E3 is the combined one-step
    bound term and is None for two-step reductions.
    """

    E1: float
    E2: float
    E3: float | None
    u_norm: float


def sqrtm_psd(K):
    """Unique symmetric PSD square root of a symmetric PSD matrix.

    Computed by eigendecomposition; eigenvalues below zero within the PSD
    tolerance are clamped to zero.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.size == 0:
        return K.copy()
    scale = np.linalg.norm(K)
    if scale == 0.0:
        return np.zeros_like(K)
    if np.linalg.norm(K - K.T) > _SYM_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    lam, Q = np.linalg.eigh(0.5 * (K + K.T))
    if lam.min() < -_PSD_RTOL * scale:
        raise ValueError(
            f"matrix is indefinite (min eigenvalue {lam.min():.3e})")
    lam = np.clip(lam, 0.0, None)
    return (Q * np.sqrt(lam)) @ Q.T


def _as_weight(W, m):
    if W is None:
        return np.eye(m)
    if isinstance(W, WeightMatrix):
        return W.W
    return np.atleast_2d(np.asarray(W, dtype=float))


def _check_stable(model, label):
    rep = is_ms_stable(model)
    if not rep.stable:
        raise UnstableSystemError(
            f"{label} system is not mean-square stable "
            f"(abscissa {rep.spectral_abscissa:.3e})")


def _cross_gramian(model, reduced, BW, BhatW, solve_opts=None, solver=None):
    """Solve A P2 + P2 Ahat^T + sum k_ij N_i P2 Nhat_j^T = -(BW)(BhatW)^T.

    Uses the spectral decomposition Ahat = R Lam R^{-1} to diagonalize the
    reduced coefficient, exactly as in the projection equations of the
    reduction algorithms.
    """
    Ahat = reduced.A
    lam, R = np.linalg.eig(Ahat)
    if np.linalg.cond(R) > 1e12:
        raise DecompositionError(
            "reduced drift matrix is not numerically diagonalizable")
    N = model.noise_matrices()
    Nhat = reduced.noise_matrices()
    # Ntilde_j = S Nhat_j S^{-1} with S = R^{-1}.
    Ntilde = [np.linalg.solve(R, Nj @ R) for Nj in Nhat]
    Btilde_W = np.linalg.solve(R, BhatW)
    RHS = BW @ Btilde_W.T
    rep = matrixeq.solve_generalized_sylvester(
        model.A, lam, N, Ntilde, model.K, RHS, opts=solve_opts, solver=solver)
    Z = rep.X  # Z = P2 S^T, i.e. P2 = Z R^T
    P2 = Z @ R.T
    if np.linalg.norm(P2.imag) > 1e-8 * max(np.linalg.norm(P2.real), 1e-300):
        raise DecompositionError("mixed Gramian has a large imaginary part")
    rep.X = P2.real
    return rep


def l2w_distance(model, reduced, W=None, solve_opts=None, check_stability=True):
    """Weighted L2 distance between the impulse responses of two systems.

    Parameters
    ----------
    model, reduced : StateSpaceModel
        Must be mean-square stable with matching input/output dimensions;
        multiplicative models must share the noise dimension and covariance.
    W : WeightMatrix or (m1, m1) array, optional
        Input weight; identity by default.

    Returns
    -------
    DistanceReport
    """
    if model.m1 != reduced.m1 or model.p != reduced.p:
        raise ValueError("systems have incompatible input/output dimensions")
    if model.kind == "multiplicative" or reduced.kind == "multiplicative":
        if model.m2 != reduced.m2 or not np.allclose(model.K, reduced.K):
            raise ValueError("multiplicative systems must share m2 and K")
    if check_stability:
        _check_stable(model, "full")
        _check_stable(reduced, "reduced")
    Wm = _as_weight(W, model.m1)
    BW = model.B1 @ Wm
    BhatW = reduced.B1 @ Wm
    N = model.noise_matrices()
    Nhat = reduced.noise_matrices()

    rep_full = matrixeq.solve_generalized_lyapunov(
        model.A, N, model.K, BW @ BW.T, opts=solve_opts)
    rep_red = matrixeq.solve_generalized_lyapunov(
        reduced.A, Nhat, reduced.K, BhatW @ BhatW.T, opts=solve_opts)
    rep_cross = _cross_gramian(model, reduced, BW, BhatW, solve_opts=solve_opts)

    tr_full = float(np.trace(model.C @ rep_full.X @ model.C.T))
    tr_red = float(np.trace(reduced.C @ rep_red.X @ reduced.C.T))
    tr_cross = float(np.trace(model.C @ rep_cross.X @ reduced.C.T))
    dist_sq = tr_full + tr_red - 2.0 * tr_cross
    distance = float(np.sqrt(max(dist_sq, 0.0)))
    return DistanceReport(
        distance=distance, tr_full=tr_full, tr_red=tr_red, tr_cross=tr_cross,
        distance_sq_raw=dist_sq,
        gramian_reports={"full": rep_full, "reduced": rep_red,
                         "cross": rep_cross})


def deterministic_subsystem(model):
    """The noise-free part (A, B1, C) of a model."""
    return StateSpaceModel(A=model.A, B1=model.B1, C=model.C)


def noise_subsystem(model):
    """The noise-driven part (A, B2, C) of an additive model, with B2 as input."""
    if model.kind != "additive":
        raise ValueError("noise subsystem requires an additive model")
    return StateSpaceModel(A=model.A, B1=model.B2, C=model.C)


def additive_bounds(model, reduction, u_norm=1.0, solve_opts=None,
                    check_stability=True):
    """Compute the error-bound terms E1/E2 (and E3 for one-step reductions).

    Parameters
    ----------
    model : additive StateSpaceModel
    reduction : TwoStepReduction or ReductionResult
        A two-step reduction contributes independent subsystem reductions;
        a one-step result is evaluated with the shared reduced drift and
        output matrices in both terms.
    u_norm : float
        L2 norm of the control on the horizon of interest; stored in the
        report for use by `output_error_bound`.
    """
    if model.kind != "additive":
        raise ValueError("additive_bounds requires an additive model")
    Ksqrt = sqrtm_psd(model.K)
    sub1 = deterministic_subsystem(model)
    sub2 = noise_subsystem(model)

    if hasattr(reduction, "part1"):  # TwoStepReduction
        red1 = reduction.part1.reduced
        red2_model = reduction.part2.reduced
        red1 = StateSpaceModel(A=red1.A, B1=red1.B1, C=red1.C)
        red2 = StateSpaceModel(A=red2_model.A, B1=red2_model.B2, C=red2_model.C)
        E3 = None
    else:
        red = reduction.reduced if hasattr(reduction, "reduced") else reduction
        red1 = StateSpaceModel(A=red.A, B1=red.B1, C=red.C)
        red2 = StateSpaceModel(A=red.A, B1=red.B2, C=red.C)
        full3 = StateSpaceModel(A=model.A, B1=np.hstack([model.B1, model.B2]),
                                C=model.C)
        red3 = StateSpaceModel(A=red.A, B1=np.hstack([red.B1, red.B2]), C=red.C)
        W3 = spla.block_diag(np.eye(model.m1), Ksqrt)
        E3 = l2w_distance(full3, red3, W3, solve_opts=solve_opts,
                          check_stability=check_stability).distance
    E1 = l2w_distance(sub1, red1, None, solve_opts=solve_opts,
                      check_stability=check_stability).distance
    E2 = l2w_distance(sub2, red2, Ksqrt, solve_opts=solve_opts,
                      check_stability=check_stability).distance
    return AdditiveBounds(E1=E1, E2=E2, E3=E3, u_norm=float(u_norm))


def output_error_bound(distance_or_bounds, u_norm, mode):
    """Upper bound on ``sup_t E||y(t) - yhat(t)||`` for a given control norm.

    Parameters
    ----------
    distance_or_bounds : float, DistanceReport or AdditiveBounds
    u_norm : float
        ``||u||_{L2_T}`` of the control over the horizon.
    mode : {"multiplicative", "additive_two_step", "additive_one_step"}
    """
    if u_norm < 0:
        raise ValueError("u_norm must be nonnegative")
    x = distance_or_bounds
    if mode == "multiplicative":
        dist = x.distance if isinstance(x, DistanceReport) else float(x)
        return dist * u_norm
    if mode == "additive_two_step":
        return x.E1 * u_norm + x.E2
    if mode == "additive_one_step":
        if x.E3 is None:
            raise ValueError("one-step bound requires the E3 term")
        return np.sqrt(2.0) * x.E3 * max(1.0, u_norm)
    raise ValueError(f"unknown mode {mode!r}")


def input_l2_norm(u, T):
    """``||u||_{L2_T}`` of a deterministic control signal on [0, T]."""
    def integrand(t):
        return float(np.sum(np.square(np.atleast_1d(u(t)))))

    val, _ = scipy.integrate.quad(integrand, 0.0, T, epsabs=1e-12, epsrel=1e-10)
    return float(np.sqrt(val))
