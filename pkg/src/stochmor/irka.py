"""IRKA-type reduction algorithms and the optimality-condition checker.

All three reduction routines share one fixed-point loop over Petrov-Galerkin
projections: diagonalize the current reduced drift, solve a pair of
(generalized) Sylvester equations for the raw bases, realify and
orthonormalize, project, repeat until the reduced eigenvalues settle.
Converged fixed points satisfy the first-order optimality conditions of the
weighted L2 distance between the impulse responses.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as spla

from . import matrixeq
from .errors import (
    DecompositionError,
    ProjectionError,
    RankDeficiencyError,
    StabilityLossError,
    UnstableSystemError,
)
from .matrixeq import SchurShiftedSolver, SolveOptions
from .metrics import sqrtm_psd, _as_weight
from .system import StateSpaceModel, is_ms_stable

__all__ = [
    "IRKAOptions",
    "ReductionResult",
    "TwoStepReduction",
    "OptimalityResiduals",
    "reduce_bilinear_irka",
    "reduce_two_step",
    "reduce_one_step",
    "optimality_residuals",
    "realify_orthonormalize",
    "petrov_galerkin_project",
]

_COND_CAP = 1e12


@dataclass(frozen=True)
class IRKAOptions:
    """Settings for the reduction fixed-point loop.

    Convergence is declared when the Chebyshev distance between the sorted
    reduced eigenvalues of successive iterates drops below `tol` relative to
    the reduced spectral radius.
    """

    tol: float = 1e-6
    max_iter: int = 100
    seed: int = 0
    initial_bases: tuple | None = None  # (V0, W0) overriding the default init
    check_stability: bool = True
    solve_opts: SolveOptions = field(default_factory=SolveOptions)


@dataclass
class ReductionResult:
    """Outcome of one reduction run."""

    reduced: StateSpaceModel
    V: np.ndarray
    Wb: np.ndarray
    history: list  # per-iteration sorted eigenvalues of the reduced drift
    converged: bool
    iterations: int


@dataclass
class TwoStepReduction:
    """Independent reductions of the deterministic and noise subsystems."""

    part1: ReductionResult
    part2: ReductionResult


@dataclass
class OptimalityResiduals:
    """Relative residuals of the four first-order optimality conditions."""

    res_a: float
    res_b: float
    res_c: list
    res_d: float

    def max(self):
        return max([self.res_a, self.res_b, self.res_d] + list(self.res_c))


def _sort_eigs(lam):
    order = np.lexsort((lam.imag, lam.real))
    return lam[order]


def realify_orthonormalize(Xc, rtol=1e-12):
    """Turn a conjugate-pair complex basis into a real orthonormal one.

    Each conjugate column pair ``(x, conj(x))`` is replaced by
    ``(Re x, Im x)``; real columns are kept.  The result is orthonormalized
    by rank-revealing QR; its real column span equals that of the input.
    """
    Xc = np.atleast_2d(np.asarray(Xc))
    n, r = Xc.shape
    # For conjugate-paired columns, span_R{Re x, Im x} over all columns equals
    # the real span of the input, and its dimension is exactly r.
    M = np.hstack([Xc.real, Xc.imag])
    norms = np.linalg.norm(M, axis=0)
    keep = norms > 1e-14 * max(norms.max(), 1e-300)
    M = M[:, keep] / norms[keep]
    Q, R, _ = spla.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * max(diag[0], 1e-300) * max(n, r))) if diag.size else 0
    if rank < r:
        raise RankDeficiencyError(
            f"basis has numerical rank {rank} < {r}", rank=rank)
    return Q[:, :r]


def petrov_galerkin_project(model, V, Wb):
    """Project a model onto the bases V (right) and Wb (left).

    Returns a reduced model with
    ``Ahat = (Wb^T V)^{-1} Wb^T A V``, ``Bhat = (Wb^T V)^{-1} Wb^T B``,
    ``Chat = C V`` and ``Nhat_i = (Wb^T V)^{-1} Wb^T N_i V``; the covariance
    is copied unchanged.
    """
    M = Wb.T @ V
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > _COND_CAP:
        raise ProjectionError(
            f"projector Wb^T V is numerically singular (cond {cond:.2e})")
    lhs = lambda X: np.linalg.solve(M, Wb.T @ X)
    Ahat = lhs(model.A @ V)
    B1hat = lhs(model.B1)
    Chat = model.C @ V
    kwargs = {}
    if model.B2 is not None:
        kwargs["B2"] = lhs(model.B2)
    if model.N is not None:
        kwargs["N"] = tuple(lhs(Ni @ V) for Ni in model.N)
    return StateSpaceModel(A=Ahat, B1=B1hat, C=Chat, K=model.K.copy(),
                           kind=model.kind, **kwargs)


def _initial_basis(A, B, C, r, seed):
    """Projection basis onto the r dominant eigenvectors of A.

    Eigenvalues are taken in order of decreasing real part; ties (within a
    relative cluster width of 1e-8) break by decreasing residue magnitude
    ``|c_i| |b_i|`` so that uncontrollable or unobservable modes are picked
    last, then by increasing |imag|.  Conjugate pairs stay together.
    Rank-deficient candidate sets (e.g. defective blocks) are padded with
    seeded random directions.
    """
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    lam, L, R = spla.eig(A, left=True)
    bi = (L.conj().T @ B) / np.diag(L.conj().T @ R)[:, None]
    ci = C @ R
    residue = np.linalg.norm(bi, axis=1) * np.linalg.norm(ci, axis=0)
    # cluster nearly equal real parts so ties break by residue, not rounding
    scale = max(np.max(np.abs(lam)), 1.0)
    real_key = np.round(lam.real / (1e-8 * scale)) * (1e-8 * scale)
    order = np.lexsort((np.abs(lam.imag), -residue, -real_key))
    cols = []
    used = np.zeros(n, dtype=bool)
    for idx in order:
        if len(cols) >= r or used[idx]:
            continue
        used[idx] = True
        x = R[:, idx]
        if abs(lam[idx].imag) <= 1e-12 * max(abs(lam[idx]), 1.0):
            cols.append(x.real)
        else:
            # mark the conjugate partner as used
            conj_idx = np.argmin(np.abs(lam - lam[idx].conj()) +
                                 used * 1e300)
            used[conj_idx] = True
            cols.append(x.real)
            if len(cols) < r:
                cols.append(x.imag)
    M = np.column_stack(cols)
    Q, Rr, _ = spla.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rr))
    rank = int(np.sum(diag > 1e-10 * max(diag[0], 1e-300)))
    Q = Q[:, :rank]
    while Q.shape[1] < r:
        # pad with random directions orthogonal to what we have
        x = rng.standard_normal(n)
        x -= Q @ (Q.T @ x)
        nrm = np.linalg.norm(x)
        if nrm > 1e-8:
            Q = np.column_stack([Q, x / nrm])
    return Q[:, :r]


def _random_orthonormal(n, r, rng):
    Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return Q


def _reduced_is_stable(reduced):
    try:
        return is_ms_stable(reduced).stable
    except ValueError:
        return False


def _irka_loop(model, r, Wm, opts):
    """Shared fixed-point loop; `model` may be of any kind.

    For multiplicative models the generalized Sylvester equations couple the
    bases to the reduced noise matrices; for the linear case the coupling
    terms are absent and the solves reduce to shifted-column solves.
    """
    n = model.n
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    if opts.check_stability:
        rep = is_ms_stable(model)
        if not rep.stable:
            raise UnstableSystemError(
                f"model is not mean-square stable "
                f"(abscissa {rep.spectral_abscissa:.3e})")

    A, B, C = model.A, model.B1, model.C
    N = model.noise_matrices()
    K = model.K
    solver = SchurShiftedSolver(A)
    if opts.initial_bases is not None:
        V0, W0 = (np.asarray(M, dtype=float) for M in opts.initial_bases)
        starts = [(V0, W0)]
    else:
        # default start: dominant eigenvectors; fallback when that start
        # misses the controllable/observable part: seeded random orthonormal
        V0 = _initial_basis(A, B @ Wm, C, r, opts.seed)
        Vr = _random_orthonormal(n, r, np.random.default_rng(opts.seed))
        starts = [(V0, V0), (Vr, Vr)]
    last_exc = None
    for V0, W0 in starts:
        try:
            return _irka_iterate(model, r, Wm, opts, V0, W0, solver)
        except (RankDeficiencyError, StabilityLossError) as exc:
            last_exc = exc
    raise last_exc


def _irka_iterate(model, r, Wm, opts, V, Wb, solver):
    A, B, C = model.A, model.B1, model.C
    N = model.noise_matrices()
    K = model.K
    reduced = petrov_galerkin_project(model, V, Wb)
    history = [_sort_eigs(np.linalg.eigvals(reduced.A))]
    BW = B @ Wm
    CT = C.T

    converged = False
    iterations = 0
    for it in range(1, opts.max_iter + 1):
        iterations = it
        lam, R = np.linalg.eig(reduced.A)
        condR = np.linalg.cond(R)
        if not np.isfinite(condR) or condR > _COND_CAP:
            raise DecompositionError(
                f"reduced drift not numerically diagonalizable at iteration "
                f"{it} (eigenvector cond {condR:.2e})")
        # D = S Ahat S^{-1} with S = R^{-1}
        Btilde = np.linalg.solve(R, reduced.B1)
        Ctilde = reduced.C @ R
        Nhat = reduced.noise_matrices()
        Ntilde = [np.linalg.solve(R, Nj @ R) for Nj in Nhat]

        # V D + A V + sum k_ij N_i V Ntilde_j^T = -(B W)(Btilde W)^T
        rhs_v = BW @ (Btilde @ Wm).T
        rep_v = matrixeq.solve_generalized_sylvester(
            A, lam, N, Ntilde, K, rhs_v, opts=opts.solve_opts, solver=solver)
        # W D + A^T W + sum k_ij N_i^T W Ntilde_j = -C^T Ctilde
        rhs_w = CT @ Ctilde
        rep_w = matrixeq.solve_generalized_sylvester(
            A, lam, [Ni.T for Ni in N], [Nj.T for Nj in Ntilde], K, rhs_w,
            opts=opts.solve_opts, solver=solver, transpose=True)

        V = realify_orthonormalize(rep_v.X)
        Wb = realify_orthonormalize(rep_w.X)
        reduced = petrov_galerkin_project(model, V, Wb)
        eigs = _sort_eigs(np.linalg.eigvals(reduced.A))
        history.append(eigs)
        if opts.check_stability and not _reduced_is_stable(reduced):
            raise StabilityLossError(
                f"reduced iterate lost mean-square stability at iteration {it}",
                history=history, iterations=it)
        prev = history[-2]
        radius = max(np.max(np.abs(eigs)), 1e-300)
        if len(prev) == len(eigs):
            drift = np.max(np.abs(eigs - prev)) / radius
            if drift < opts.tol:
                converged = True
                break
    return ReductionResult(reduced=reduced, V=V, Wb=Wb, history=history,
                           converged=converged, iterations=iterations)


def reduce_bilinear_irka(model, r, W=None, opts=None):
    """Reduce a multiplicative-noise model to order `r`.

    Parameters
    ----------
    model : multiplicative StateSpaceModel
        Must be mean-square stable.
    r : int
        Reduced order, ``1 <= r <= n``.
    W : WeightMatrix or array, optional
        Input weight (identity by default).
    opts : IRKAOptions, optional
    """
    opts = opts or IRKAOptions()
    Wm = _as_weight(W, model.m1)
    return _irka_loop(model, r, Wm, opts)


def reduce_two_step(model, r1, r2, opts=None):
    """Reduce an additive-noise model by splitting it into two subsystems.

    The deterministic subsystem (A, B1, C) is reduced to order `r1` with
    weight I; the noise subsystem (A, B2, C) to order `r2` with weight
    K^(1/2).  The combined reduced output is the sum of the two subsystem
    outputs.
    """
    if model.kind != "additive":
        raise ValueError("reduce_two_step requires an additive model")
    opts = opts or IRKAOptions()
    sub1 = StateSpaceModel(A=model.A, B1=model.B1, C=model.C)
    sub2 = StateSpaceModel(A=model.A, B1=model.B2, C=model.C)
    part1 = _irka_loop(sub1, r1, np.eye(model.m1), opts)
    Ksqrt = sqrtm_psd(model.K)
    part2 = _irka_loop(sub2, r2, Ksqrt, opts)
    red2 = part2.reduced
    part2 = replace(part2, reduced=StateSpaceModel(
        A=red2.A, B1=np.zeros((r2, model.m1)), C=red2.C, B2=red2.B1,
        K=model.K.copy()))
    return TwoStepReduction(part1=part1, part2=part2)


def reduce_one_step(model, r, opts=None):
    """Reduce an additive-noise model in one run on the stacked input.

    Runs the linear loop on ``B = [B1 B2]`` with weight
    ``blkdiag(I, K^(1/2))`` and splits the reduced input matrix back into
    control and noise parts by column count.
    """
    if model.kind != "additive":
        raise ValueError("reduce_one_step requires an additive model")
    opts = opts or IRKAOptions()
    B = np.hstack([model.B1, model.B2])
    stacked = StateSpaceModel(A=model.A, B1=B, C=model.C)
    Wm = spla.block_diag(np.eye(model.m1), sqrtm_psd(model.K))
    res = _irka_loop(stacked, r, Wm, opts)
    red = res.reduced
    m1 = model.m1
    reduced = StateSpaceModel(A=red.A, B1=red.B1[:, :m1], C=red.C,
                              B2=red.B1[:, m1:], K=model.K.copy())
    return ReductionResult(reduced=reduced, V=res.V, Wb=res.Wb,
                           history=res.history, converged=res.converged,
                           iterations=res.iterations)


def optimality_residuals(model, reduced, W=None, solve_opts=None,
                         check_stability=True):
    """Relative residuals of the first-order optimality conditions.

    Solves the four Gramian equations (reduced reachability Phat, mixed
    reachability P2, reduced observability Qhat, mixed observability Q2) and
    returns the relative residuals of
    (a) ``Chat Phat = C P2``, (b) ``Qhat Phat = Q2 P2``,
    (c) ``Qhat Psihat_i Phat = Q2 Psi_i P2`` with
    ``Psi_i = sum_j N_j k_ij``, and (d) ``Qhat Bhat W W^T = Q2 B1 W W^T``.
    All four vanish at a local optimum of the weighted L2 distance.
    """
    if hasattr(reduced, "reduced"):
        reduced = reduced.reduced
    if check_stability:
        for m, label in [(model, "full"), (reduced, "reduced")]:
            rep = is_ms_stable(m)
            if not rep.stable:
                raise UnstableSystemError(
                    f"{label} system is not mean-square stable")
    Wm = _as_weight(W, model.m1)
    WWT = Wm @ Wm.T
    A, B1, C = model.A, model.B1, model.C
    N = model.noise_matrices()
    K = model.K if model.kind == "multiplicative" else reduced.K
    Ahat, B1hat, Chat = reduced.A, reduced.B1, reduced.C
    Nhat = reduced.noise_matrices()

    rep_phat = matrixeq.solve_generalized_lyapunov(
        Ahat, Nhat, K, (B1hat @ Wm) @ (B1hat @ Wm).T, opts=solve_opts)
    rep_qhat = matrixeq.solve_generalized_lyapunov(
        Ahat.T, [Nj.T for Nj in Nhat], K, Chat.T @ Chat, opts=solve_opts)
    Phat, Qhat = rep_phat.X, rep_qhat.X

    lam, R = np.linalg.eig(Ahat)
    if np.linalg.cond(R) > _COND_CAP:
        raise DecompositionError(
            "reduced drift matrix is not numerically diagonalizable")
    Ntilde = [np.linalg.solve(R, Nj @ R) for Nj in Nhat]
    Btilde = np.linalg.solve(R, B1hat)
    Ctilde = Chat @ R
    solver = SchurShiftedSolver(A)
    # Z = P2 S^T solves A Z + Z D + sum k_ij N_i Z Ntilde_j^T = -(B1 W)(Btilde W)^T
    rep_v = matrixeq.solve_generalized_sylvester(
        A, lam, N, Ntilde, K, (B1 @ Wm) @ (Btilde @ Wm).T,
        opts=solve_opts, solver=solver)
    P2 = (rep_v.X @ R.T).real
    # G = Q2^T S^{-1} solves A^T G + G D + sum k_ij N_i^T G Ntilde_j = -C^T Ctilde
    rep_w = matrixeq.solve_generalized_sylvester(
        A, lam, [Ni.T for Ni in N], [Nj.T for Nj in Ntilde], K, C.T @ Ctilde,
        opts=solve_opts, solver=solver, transpose=True)
    Q2 = (rep_w.X @ np.linalg.inv(R)).real.T

    def rel(lhs, rhs):
        return float(np.linalg.norm(lhs - rhs) /
                     max(np.linalg.norm(rhs), 1e-300))

    res_a = rel(Chat @ Phat, C @ P2)
    res_b = rel(Qhat @ Phat, Q2 @ P2)
    res_c = []
    for i in range(len(Nhat)):
        Psi = sum(K[i, j] * N[j] for j in range(len(N)))
        Psihat = sum(K[i, j] * Nhat[j] for j in range(len(Nhat)))
        res_c.append(rel(Qhat @ Psihat @ Phat, Q2 @ Psi @ P2))
    res_d = rel(Qhat @ B1hat @ WWT, Q2 @ B1 @ WWT)
    return OptimalityResiduals(res_a=res_a, res_b=res_b, res_c=res_c,
                               res_d=res_d)
