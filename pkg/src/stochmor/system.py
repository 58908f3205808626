"""State-space model data types, validation and mean-square stability analysis.

A model is ``dx = (A x + B1 u) dt + noise`` with output ``y = C x``.  The
noise is either ``B2 dM`` (additive) or ``sum_i N_i x dM_i`` (multiplicative),
where ``M`` is a mean-zero process with covariance ``E[M(t) M(t)^T] = K t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import ConvergenceError, SizeCapError

__all__ = [
    "StateSpaceModel",
    "WeightMatrix",
    "StabilityReport",
    "validate_model",
    "ms_stability_operator",
    "is_ms_stable",
]

#: Largest state dimension for which the n^2 x n^2 stability operator is
#: formed densely; beyond it the abscissa comes from an implicit Krylov
#: eigensolve.  Kept small: a dense nonsymmetric eigensolve of the n^2 x n^2
#: operator grows like n^6.
DENSE_STABILITY_CAP = 40

_SYM_RTOL = 1e-12
_PSD_RTOL = 1e-12
_COND_CAP = 1e12


def _as_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    return M


@dataclass(frozen=True)
class StateSpaceModel:
    """A (possibly stochastic) linear state-space model.

    Parameters
    ----------
    A : (n, n) array
        Drift matrix.
    B1 : (n, m1) array
        Control input matrix.
    C : (p, n) array
        Output matrix.
    B2 : (n, m2) array, optional
        Additive-noise input matrix.  Mutually exclusive with `N`.
    N : list of (n, n) arrays, optional
        Multiplicative-noise matrices, one per noise component.
    K : (m2, m2) array, optional
        Noise covariance.  Defaults to the identity when noise is present.
    kind : {"deterministic", "additive", "multiplicative"}, optional
        Inferred from which noise terms are present when omitted.
    """

    A: np.ndarray
    B1: np.ndarray
    C: np.ndarray
    B2: np.ndarray | None = None
    N: tuple[np.ndarray, ...] | None = None
    K: np.ndarray | None = None
    kind: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))
        object.__setattr__(self, "B1", _as_matrix(self.B1))
        C = np.asarray(self.C, dtype=float)
        if C.ndim == 1:
            C = C.reshape(1, -1)
        object.__setattr__(self, "C", C)
        if self.B2 is not None:
            object.__setattr__(self, "B2", _as_matrix(self.B2))
        if self.N is not None:
            object.__setattr__(self, "N", tuple(_as_matrix(Ni) for Ni in self.N))
        if self.kind is None:
            object.__setattr__(self, "kind", self._infer_kind())
        if self.K is None:
            object.__setattr__(self, "K", np.eye(self._noise_dim()))
        else:
            object.__setattr__(self, "K", _as_matrix(self.K))
        for M in self._arrays():
            M.setflags(write=False)

    def _infer_kind(self):
        if self.B2 is not None and self.N is None:
            return "additive"
        if self.N is not None and self.B2 is None:
            return "multiplicative"
        if self.B2 is None and self.N is None:
            return "deterministic"
        return "ambiguous"

    def _noise_dim(self):
        if self.B2 is not None:
            return self.B2.shape[1]
        if self.N is not None:
            return len(self.N)
        return 0

    def _arrays(self):
        out = [self.A, self.B1, self.C, self.K]
        if self.B2 is not None:
            out.append(self.B2)
        if self.N is not None:
            out.extend(self.N)
        return out

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m1(self):
        return self.B1.shape[1]

    @property
    def m2(self):
        return self._noise_dim()

    @property
    def p(self):
        return self.C.shape[0]

    def noise_matrices(self):
        """Multiplicative noise matrices as a list (empty if none)."""
        return list(self.N) if self.N is not None else []


@dataclass(frozen=True)
class WeightMatrix:
    """Invertible weight applied to the input channels of an impulse response."""

    W: np.ndarray

    def __post_init__(self):
        W = _as_matrix(self.W)
        if W.shape[0] != W.shape[1]:
            raise ValueError(f"weight must be square, got shape {W.shape}")
        if W.size and np.linalg.cond(W) > _COND_CAP:
            raise ValueError("weight matrix is numerically singular")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def m(self):
        return self.W.shape[0]


@dataclass(frozen=True)
class StabilityReport:
    """Result of a mean-square stability check."""

    spectral_abscissa: float
    stable: bool
    method: str  # "dense_eig" or "power_iteration"


def validate_model(model):
    """Check every model invariant and describe the violations.

    Returns a list of human-readable violation strings; an empty list means
    the model is valid.  Never raises on finite-valued input.
    """
    v = []
    A, B1, C, K = model.A, model.B1, model.C, model.K
    n = A.shape[0]
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        v.append(f"A must be square, got shape {A.shape}")
        return v + ["remaining checks skipped: A not square"]
    if B1.ndim != 2 or B1.shape[0] != n:
        v.append(f"B1 must have {n} rows, got shape {B1.shape}")
    if C.ndim != 2 or C.shape[1] != n:
        v.append(f"C must have {n} columns, got shape {C.shape}")

    has_b2 = model.B2 is not None
    has_n = model.N is not None
    if has_b2 and has_n:
        v.append("kind ambiguity: both B2 and N are present")
    expected = {(False, False): "deterministic", (True, False): "additive",
                (False, True): "multiplicative"}.get((has_b2, has_n))
    if expected is not None and model.kind != expected:
        v.append(f"kind={model.kind!r} inconsistent with present noise terms "
                 f"(expected {expected!r})")

    m2 = model.m2
    if has_b2 and model.B2.shape[0] != n:
        v.append(f"B2 must have {n} rows, got shape {model.B2.shape}")
    if has_n:
        for i, Ni in enumerate(model.N):
            if Ni.shape != (n, n):
                v.append(f"N[{i}] must be {n}x{n}, got shape {Ni.shape}")
    if K.shape != (m2, m2):
        v.append(f"K must be {m2}x{m2}, got shape {K.shape}")
    elif K.size:
        if not np.all(np.isfinite(K)):
            v.append("K has non-finite entries")
        else:
            scale = np.linalg.norm(K)
            if np.linalg.norm(K - K.T) > _SYM_RTOL * max(scale, 1e-300):
                v.append("K is not symmetric")
            else:
                try:
                    lam_min = np.linalg.eigvalsh(0.5 * (K + K.T)).min()
                except np.linalg.LinAlgError:
                    lam_min = -np.inf
                if lam_min < -_PSD_RTOL * scale:
                    v.append(f"K is not positive semidefinite "
                             f"(min eigenvalue {lam_min:.3e})")
    for name, M in [("A", A), ("B1", B1), ("C", C)]:
        if not np.all(np.isfinite(M)):
            v.append(f"{name} has non-finite entries")
    return v


def _require_valid(model):
    v = validate_model(model)
    if v:
        raise ValueError("invalid model: " + "; ".join(v))


def ms_stability_operator(model, cap=DENSE_STABILITY_CAP):
    """Dense mean-square stability operator ``I(x)A + A(x)I + sum k_ij N_i(x)N_j``.

    The spectrum of the returned ``n^2 x n^2`` matrix lies in the open left
    half-plane exactly when the model is mean-square asymptotically stable.
    """
    _require_valid(model)
    n = model.n
    if n > cap:
        raise SizeCapError(
            f"dense stability operator needs n <= {cap}, got n = {n}; "
            "use is_ms_stable which falls back to power iteration")
    A = model.A
    eye = np.eye(n)
    L = np.kron(eye, A) + np.kron(A, eye)
    if model.kind == "multiplicative":
        N = model.noise_matrices()
        K = model.K
        for i, Ni in enumerate(N):
            for j, Nj in enumerate(N):
                if K[i, j] != 0.0:
                    L += K[i, j] * np.kron(Ni, Nj)
    return L


def _lyapunov_like_apply(A, N, K, X):
    Y = A @ X + X @ A.T
    for i, Ni in enumerate(N):
        for j, Nj in enumerate(N):
            if K[i, j] != 0.0:
                Y += K[i, j] * (Ni @ X @ Nj.T)
    return Y


def _abscissa_power_iteration(A, N, K, tol=1e-9, max_iter=20000):
    # The rightmost eigenvalue of the stability operator is real with a
    # symmetric PSD eigenvector (the operator generates a positive semigroup).
    # It is found by an implicit Krylov (Arnoldi) iteration on
    # X -> A X + X A^T + sum k_ij N_i X N_j^T, seeded with the identity
    # direction; the n^2 x n^2 matrix is never formed.
    import scipy.sparse.linalg as sspla

    n = A.shape[0]

    def matvec(x):
        X = x.reshape(n, n)
        return _lyapunov_like_apply(A, N, K, X).ravel()

    op = sspla.LinearOperator((n * n, n * n), matvec=matvec)
    v0 = (np.eye(n) / np.sqrt(n)).ravel()

    # Shift-invert at 0: the rightmost eigenvalue of the positive semigroup
    # generator is real (Perron), and for a generator with real rightmost
    # eigenvalue the eigenvalue nearest zero is exactly the rightmost one.
    # Each inverse apply is one generalized Lyapunov solve.
    from . import matrixeq

    def inv_matvec(y):
        Y = np.asarray(y).real.reshape(n, n)
        rep = matrixeq.solve_generalized_lyapunov(A, N, K, -Y)
        return rep.X.ravel()

    try:
        opinv = sspla.LinearOperator((n * n, n * n), matvec=inv_matvec)
        vals = sspla.eigs(op, k=1, sigma=0.0, OPinv=opinv, v0=v0, tol=tol,
                          maxiter=max_iter, return_eigenvectors=False)
        return float(vals[0].real)
    except Exception:
        # shift-invert needs a stable (hence invertible, contraction-friendly)
        # operator; fall back to a direct rightmost-eigenvalue iteration
        pass
    try:
        vals = sspla.eigs(op, k=1, which="LR", v0=v0, tol=1e-8,
                          maxiter=max_iter, ncv=min(n * n - 1, 200),
                          return_eigenvectors=False)
    except sspla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"implicit eigensolve for the stability abscissa did not "
            f"converge within {max_iter} iterations") from exc
    return float(vals[0].real)


def is_ms_stable(model, cap=DENSE_STABILITY_CAP):
    """Mean-square stability report for a model.

    For deterministic and additive kinds this is the spectral abscissa of
    ``A``.  For multiplicative noise the abscissa of the stability operator
    is computed densely for ``n <= cap`` and by an implicit power iteration
    (never forming the n^2 x n^2 matrix) beyond that.
    """
    _require_valid(model)
    if model.kind in ("deterministic", "additive"):
        abscissa = float(np.max(np.linalg.eigvals(model.A).real))
        return StabilityReport(abscissa, abscissa < 0.0, "dense_eig")
    if model.n <= cap:
        L = ms_stability_operator(model, cap=cap)
        abscissa = float(np.max(np.linalg.eigvals(L).real))
        return StabilityReport(abscissa, abscissa < 0.0, "dense_eig")
    abscissa = _abscissa_power_iteration(
        model.A, model.noise_matrices(), model.K)
    return StabilityReport(float(abscissa), abscissa < 0.0, "power_iteration")
