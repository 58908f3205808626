"""Solvers for standard and generalized Lyapunov/Sylvester matrix equations.

Generalized Lyapunov:  ``A X + X A^T + sum_ij k_ij N_i X N_j^T = -RHS``.
Generalized Sylvester: ``A X + X D + sum_ij k_ij N_i X Ntilde_j^T = -RHS``
with ``D`` diagonal (possibly complex).

Both are solved by a fixed-point splitting that uses the standard
(noise-free) equation as preconditioner; the mean-square stability assumed
throughout this package makes the splitting a contraction.  A dense
Kronecker-vectorization oracle is provided for verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import (
    ConvergenceError,
    DivergenceError,
    ShiftCollisionError,
    SingularOperatorError,
    SizeCapError,
)

__all__ = [
    "SolveOptions",
    "SolveReport",
    "SchurShiftedSolver",
    "solve_generalized_lyapunov",
    "solve_generalized_sylvester",
    "kronecker_oracle",
    "lyapunov_residual",
    "sylvester_residual",
]

KRONECKER_CAP = 4096


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances for the iterative matrix-equation solvers.

    `tol` applies to the right-hand-side-relative residual; stiff instances
    whose attainable floor lies above it are accepted once the backward-style
    residual (scaled by the operator and solution norms) meets `tol`.
    `growth` is the factor over the best residual that counts an iteration
    as diverging; `patience` such iterations in a row abort the solve.
    """

    tol: float = 1e-10
    max_iter: int = 500
    patience: int = 10
    growth: float = 10.0


@dataclass
class SolveReport:
    """Solution of a matrix equation together with its certification.

    `residual_norm` is the Frobenius norm of the equation residual of the
    returned `X`, relative to the Frobenius norm of the right-hand side.
    """

    X: np.ndarray
    residual_norm: float
    iterations: int
    method: str  # "direct", "shifted_columns", "fixed_point" or "kronecker"


def _coerce_diagonal(D):
    D = np.asarray(D)
    if D.ndim == 2:
        if np.any(D - np.diag(np.diag(D))):
            raise ValueError("D must be diagonal")
        D = np.diag(D)
    return D


def lyapunov_residual(A, N, K, X, RHS):
    """Relative residual of ``A X + X A^T + sum k_ij N_i X N_j^T + RHS``."""
    R = A @ X + X @ A.T + RHS
    for i, Ni in enumerate(N):
        for j, Nj in enumerate(N):
            if K[i, j] != 0.0:
                R += K[i, j] * (Ni @ X @ Nj.T)
    return float(np.linalg.norm(R) / np.linalg.norm(RHS))


def sylvester_residual(A, D, N, Ntilde, K, X, RHS):
    """Relative residual of ``A X + X D + sum k_ij N_i X Ntilde_j^T + RHS``."""
    d = _coerce_diagonal(D)
    R = A @ X + X * d[np.newaxis, :] + RHS
    for i, Ni in enumerate(N):
        for j, Nj in enumerate(Ntilde):
            if K[i, j] != 0.0:
                R = R + K[i, j] * (Ni @ X @ Nj.T)
    return float(np.linalg.norm(R) / np.linalg.norm(RHS))


class SchurShiftedSolver:
    """Cached complex Schur factorization for repeated shifted solves.

    Solves ``(A + d_k I) x_k = b_k`` (or the same with ``A^T``) column by
    column; the Schur form is computed once so each shift costs only
    triangular solves.
    """

    def __init__(self, A):
        self.n = A.shape[0]
        self.T, self.U = spla.schur(np.asarray(A, dtype=complex), output="complex")

    def solve(self, shifts, B, transpose=False):
        """Solve ``(A + shifts[k] I) X[:, k] = B[:, k]`` for every column."""
        shifts = np.asarray(shifts)
        T, U = self.T, self.U
        diag = np.diag(T)
        scale = max(np.abs(diag).max(), np.abs(shifts).max(), 1e-300)
        if transpose:
            # A^T = conj(U) T^T conj(U)^H, with T^T lower triangular.
            Y = U.T @ B
        else:
            Y = U.conj().T @ B
        X = np.empty((self.n, B.shape[1]), dtype=complex)
        for k in range(B.shape[1]):
            d = shifts[k]
            if np.min(np.abs(diag + d)) < 1e-13 * scale:
                raise ShiftCollisionError(
                    f"shift {d} in column {k} collides with an eigenvalue "
                    "of the coefficient matrix", column=k)
            Tk = T.T + d * np.eye(self.n) if transpose else T + d * np.eye(self.n)
            X[:, k] = spla.solve_triangular(Tk, Y[:, k], lower=transpose)
        if transpose:
            return U.conj() @ X
        return U @ X


def _lyap_direct(A, RHS):
    # Schur-based standard Lyapunov solve A X + X A^T = -RHS.
    X = spla.solve_continuous_lyapunov(A, -RHS)
    return 0.5 * (X + X.T)


def solve_generalized_lyapunov(A, N, K, RHS, opts=None):
    """Solve ``A X + X A^T + sum_ij k_ij N_i X N_j^T = -RHS``.

    Parameters
    ----------
    A : (n, n) array
    N : sequence of (n, n) arrays
        May be empty, in which case a direct Schur-based solve is used.
    K : (m2, m2) array
        Noise covariance weighting the coupling terms.
    RHS : (n, n) array, symmetric.
    opts : SolveOptions, optional

    Returns
    -------
    SolveReport
        With symmetric `X`.
    """
    opts = opts or SolveOptions()
    A = np.asarray(A, dtype=float)
    N = [np.asarray(Ni, dtype=float) for Ni in N]
    K = np.atleast_2d(np.asarray(K, dtype=float))
    RHS = np.asarray(RHS, dtype=float)
    rhs_norm = np.linalg.norm(RHS)
    if rhs_norm == 0.0:
        return SolveReport(np.zeros_like(RHS), 0.0, 0, "direct")

    if not N:
        X = _lyap_direct(A, RHS)
        res = lyapunov_residual(A, N, K, X, RHS)
        return SolveReport(X, res, 0, "direct")

    op_norm = 2.0 * np.linalg.norm(A) + sum(
        abs(K[i, j]) * np.linalg.norm(Ni) * np.linalg.norm(Nj)
        for i, Ni in enumerate(N) for j, Nj in enumerate(N))
    X = _lyap_direct(A, RHS)
    best = np.inf
    best_X = X
    best_scaled = np.inf
    bad_streak = 0
    for it in range(1, opts.max_iter + 1):
        G = RHS.copy()
        for i, Ni in enumerate(N):
            for j, Nj in enumerate(N):
                if K[i, j] != 0.0:
                    G += K[i, j] * (Ni @ X @ Nj.T)
        X = _lyap_direct(A, G)
        res = lyapunov_residual(A, N, K, X, RHS)
        if res <= opts.tol:
            return SolveReport(X, res, it, "fixed_point")
        scaled = res * rhs_norm / (rhs_norm + op_norm * np.linalg.norm(X))
        if res < best:
            best, best_X, best_scaled, bad_streak = res, X, scaled, 0
            continue
        bad_streak += 1
        if bad_streak >= opts.patience:
            if best_scaled <= opts.tol:
                # stagnation at the attainable floor, certified in backward
                # (operator- and solution-scaled) error
                return SolveReport(best_X, best, it, "fixed_point")
            if res >= opts.growth * best:
                raise DivergenceError(
                    f"generalized Lyapunov fixed point diverging: residual "
                    f"{res:.3e} after {it} iterations (the coupled system is "
                    "likely not mean-square stable)")
            bad_streak = 0  # benign oscillation, keep iterating
    if best_scaled <= opts.tol:
        return SolveReport(best_X, best, opts.max_iter, "fixed_point")
    raise ConvergenceError(
        f"generalized Lyapunov solve did not reach tol {opts.tol:.1e} in "
        f"{opts.max_iter} iterations (last residual {res:.3e})",
        last_residual=res)


def solve_generalized_sylvester(A, D, N, Ntilde, K, RHS, opts=None, solver=None,
                                transpose=False):
    """Solve ``A X + X D + sum_ij k_ij N_i X Ntilde_j^T = -RHS``.

    Parameters
    ----------
    A : (n, n) array
    D : (r,) or (r, r) diagonal array, possibly complex.
    N : sequence of (n, n) arrays
    Ntilde : sequence of (r, r) arrays, possibly complex.
    K : (m2, m2) array
    RHS : (n, r) array, possibly complex.
    solver : SchurShiftedSolver, optional
        Cached factorization of `A` to reuse across calls.
    transpose : bool
        Solve with ``A^T`` in place of ``A`` (using the same cached
        factorization of ``A``).  `N` is still applied as given.

    Returns
    -------
    SolveReport
    """
    opts = opts or SolveOptions()
    A = np.asarray(A)
    d = _coerce_diagonal(D)
    N = [np.asarray(Ni) for Ni in N]
    Ntilde = [np.asarray(Nj) for Nj in Ntilde]
    K = np.atleast_2d(np.asarray(K, dtype=float))
    RHS = np.asarray(RHS)
    rhs_norm = np.linalg.norm(RHS)
    if rhs_norm == 0.0:
        return SolveReport(np.zeros(RHS.shape, dtype=complex), 0.0, 0,
                           "shifted_columns")
    if solver is None:
        solver = SchurShiftedSolver(A)
    Aop = A.T if transpose else A

    def shifted(B):
        return solver.solve(d, -B, transpose=transpose)

    if not N:
        X = shifted(RHS)
        res = sylvester_residual(Aop, d, N, Ntilde, K, X, RHS)
        return SolveReport(X, res, 0, "shifted_columns")

    op_norm = np.linalg.norm(A) + np.abs(d).max() + sum(
        abs(K[i, j]) * np.linalg.norm(Ni) * np.linalg.norm(Nj)
        for i, Ni in enumerate(N) for j, Nj in enumerate(Ntilde))
    X = shifted(RHS)
    best = np.inf
    best_X = X
    best_scaled = np.inf
    bad_streak = 0
    for it in range(1, opts.max_iter + 1):
        G = RHS.astype(complex).copy()
        for i, Ni in enumerate(N):
            for j, Nj in enumerate(Ntilde):
                if K[i, j] != 0.0:
                    G += K[i, j] * (Ni @ X @ Nj.T)
        X = shifted(G)
        res = sylvester_residual(Aop, d, N, Ntilde, K, X, RHS)
        if res <= opts.tol:
            return SolveReport(X, res, it, "fixed_point")
        scaled = res * rhs_norm / (rhs_norm + op_norm * np.linalg.norm(X))
        if res < best:
            best, best_X, best_scaled, bad_streak = res, X, scaled, 0
            continue
        bad_streak += 1
        if bad_streak >= opts.patience:
            if best_scaled <= opts.tol:
                # stagnation at the attainable floor, certified in backward
                # (operator- and solution-scaled) error
                return SolveReport(best_X, best, it, "fixed_point")
            if res >= opts.growth * best:
                raise DivergenceError(
                    f"generalized Sylvester fixed point diverging: residual "
                    f"{res:.3e} after {it} iterations")
            bad_streak = 0  # benign oscillation, keep iterating
    if best_scaled <= opts.tol:
        return SolveReport(best_X, best, opts.max_iter, "fixed_point")
    raise ConvergenceError(
        f"generalized Sylvester solve did not reach tol {opts.tol:.1e} in "
        f"{opts.max_iter} iterations (last residual {res:.3e})",
        last_residual=res)


def kronecker_oracle(A, D, N, Ntilde, K, RHS, cap=KRONECKER_CAP):
    """Brute-force reference solve via Kronecker vectorization.

    Solves ``A X + X D^T + sum_ij k_ij N_i X Ntilde_j^T = -RHS`` by forming
    the dense ``nr x nr`` operator
    ``(I (x) A) + (D (x) I) + sum_ij k_ij (Ntilde_j (x) N_i)``
    and applying one dense linear solve to ``vec(RHS)``.  `D` may be a
    diagonal vector, a full square matrix (e.g. a reduced drift matrix), or
    equal to `A` for the Lyapunov case.
    """
    A = np.asarray(A)
    D = np.asarray(D)
    if D.ndim == 1:
        D = np.diag(D)
    N = [np.asarray(Ni) for Ni in N]
    Ntilde = [np.asarray(Nj) for Nj in Ntilde]
    K = np.atleast_2d(np.asarray(K, dtype=float))
    RHS = np.asarray(RHS)
    n, r = RHS.shape
    if n * r > cap:
        raise SizeCapError(
            f"kronecker_oracle needs n*r <= {cap}, got {n * r}")
    dtype = np.result_type(A.dtype, D.dtype, RHS.dtype,
                           *[M.dtype for M in N + Ntilde], float)
    L = np.kron(np.eye(r), A).astype(dtype) + np.kron(D, np.eye(n))
    for i, Ni in enumerate(N):
        for j, Nj in enumerate(Ntilde):
            if K[i, j] != 0.0:
                L += K[i, j] * np.kron(Nj, Ni)
    try:
        x = np.linalg.solve(L, -RHS.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularOperatorError(
            f"Kronecker operator is singular: {exc}") from exc
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularOperatorError(
            f"Kronecker operator is numerically singular (cond {cond:.2e})")
    return x.reshape((n, r), order="F")
