"""Shared generators and independent oracles for the test suite.

Oracles here deliberately avoid the library's own solver paths: they use
dense Kronecker solves, matrix exponentials, quadrature, moment ODEs or
plain Monte Carlo so that agreement is meaningful evidence.
"""

import numpy as np
import scipy.integrate
import scipy.linalg as spla

from stochmor import StateSpaceModel, is_ms_stable


def random_stable_model(rng, n, m1=1, p=1, m2=0, kind="deterministic",
                        decay=2.0):
    """A random mean-square-stable model of the requested kind."""
    A = -decay * np.eye(n) + 0.4 * rng.standard_normal((n, n))
    B1 = rng.standard_normal((n, m1))
    C = rng.standard_normal((p, n))
    if kind == "deterministic":
        return StateSpaceModel(A=A, B1=B1, C=C)
    K = random_covariance(rng, m2)
    if kind == "additive":
        return StateSpaceModel(A=A, B1=B1, C=C,
                               B2=rng.standard_normal((n, m2)), K=K)
    scale = 0.3
    while True:
        N = tuple(scale * rng.standard_normal((n, n)) for _ in range(m2))
        model = StateSpaceModel(A=A, B1=B1, C=C, N=N, K=K)
        if is_ms_stable(model).stable:
            return model
        scale *= 0.5


def random_covariance(rng, m, correlated=True):
    if not correlated:
        return np.eye(m)
    F = rng.standard_normal((m, m))
    K = F @ F.T / m + 0.5 * np.eye(m)
    return 0.5 * (K + K.T)


def impulse_distance_quadrature(model, reduced, W=None):
    """Time-domain squared-distance oracle by adaptive quadrature.

    Integrates ``||C e^{As} B1 W - Chat e^{Ahat s} Bhat1 W||_F^2`` over
    [0, T] with T = 40 / |abscissa|, where the truncated tail is below
    1e-34 relative.  Only valid for models without multiplicative noise.
    """
    W = np.eye(model.m1) if W is None else np.atleast_2d(W)
    BW = model.B1 @ W
    BhatW = reduced.B1 @ W
    absc = max(np.max(np.linalg.eigvals(model.A).real),
               np.max(np.linalg.eigvals(reduced.A).real))
    T = 40.0 / abs(absc)

    def integrand(s):
        D = (model.C @ spla.expm(model.A * s) @ BW
             - reduced.C @ spla.expm(reduced.A * s) @ BhatW)
        return float(np.sum(D * D))

    val, _ = scipy.integrate.quad(integrand, 0.0, T, epsabs=1e-10,
                                  epsrel=1e-8, limit=400)
    return val


def linear_irka_reference(A, B, C, r, V0, tol=1e-6, max_iter=100):
    """Independent textbook linear IRKA with mirrored interpolation shifts.

    Bases are built column by column from dense shifted solves; used to
    cross-check that the Sylvester-equation formulation specializes to the
    classical algorithm when no noise matrices are present.
    """
    n = A.shape[0]
    V = np.array(V0)
    Wb = np.array(V0)
    lam_prev = None
    for _ in range(max_iter):
        M = Wb.T @ V
        Ah = np.linalg.solve(M, Wb.T @ A @ V)
        Bh = np.linalg.solve(M, Wb.T @ B)
        Ch = C @ V
        lam, R = np.linalg.eig(Ah)
        bt = np.linalg.solve(R, Bh)
        ct = Ch @ R
        Vc = np.column_stack([
            -np.linalg.solve(A + lam[k] * np.eye(n), B @ bt[k, :])
            for k in range(r)])
        Wc = np.column_stack([
            -np.linalg.solve(A.T + lam[k] * np.eye(n), C.T @ ct[:, k])
            for k in range(r)])
        V = _realify_orth(Vc)
        Wb = _realify_orth(Wc)
        lam_sorted = np.sort_complex(lam)
        if lam_prev is not None and len(lam_prev) == len(lam_sorted):
            drift = np.max(np.abs(lam_sorted - lam_prev))
            if drift < tol * max(np.max(np.abs(lam_sorted)), 1e-300):
                break
        lam_prev = lam_sorted
    return V, Wb


def _realify_orth(Xc):
    M = np.hstack([Xc.real, Xc.imag])
    norms = np.linalg.norm(M, axis=0)
    M = M[:, norms > 1e-14 * norms.max()]
    Q, R, _ = spla.qr(M / np.linalg.norm(M, axis=0), mode="economic",
                      pivoting=True)
    return Q[:, :Xc.shape[1]]


def scalar_moment_odes(a, nco, k, b1, u, T, steps=20000):
    """First and second moment of scalar dx=(ax+b1 u)dt + n x dM, x(0)=0."""
    dt = T / steps
    m1 = 0.0
    m2 = 0.0
    for s in range(steps):
        t = s * dt
        d1 = a * m1 + b1 * u(t)
        d2 = (2 * a + nco ** 2 * k) * m2 + 2 * b1 * u(t) * m1
        m1 += dt * d1
        m2 += dt * d2
    return m1, m2


def mc_fundamental_product(A, Ahat, N, Nhat, K, L, Lhat, T, dt, M, seed):
    """Monte Carlo estimate of ``E[Phi(T) L Lhat^T Phihat^T(T)]``.

    Both fundamental solutions are advanced jointly by explicit stepping on
    matrix-valued dynamics with shared correlated increments.  Returns the
    entrywise mean and standard error.
    """
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    r = Ahat.shape[0]
    m2 = K.shape[0]
    q = L.shape[1]
    F = spla.sqrtm(K).real
    steps = int(round(T / dt))
    sqdt = np.sqrt(dt)
    # evolve Phi L and Phihat Lhat jointly as one block state (n+r, M*q):
    # stacking the drift propagator and all noise blocks makes every step a
    # single gemm plus one fused multiply-add per noise channel
    nb = n + r
    Ab = np.block([[np.eye(n) + dt * A, np.zeros((n, r))],
                   [np.zeros((r, n)), np.eye(r) + dt * Ahat]])
    blocks = [Ab]
    for i in range(m2):
        Nb = np.zeros((nb, nb))
        Nb[:n, :n] = N[i]
        Nb[n:, n:] = Nhat[i]
        blocks.append(Nb)
    S = np.vstack(blocks)  # ((1+m2)*nb, nb)
    y = np.tile(np.vstack([L, Lhat]), (1, M))
    for _ in range(steps):
        z = rng.standard_normal((M, m2))
        dW = sqdt * (z @ F)  # (M, m2)
        P = S @ y
        ynew = P[:nb]
        for i in range(m2):
            wi = dW[:, i] if q == 1 else np.repeat(dW[:, i], q)
            ynew = ynew + P[(i + 1) * nb:(i + 2) * nb] * wi[None, :]
        y = ynew
    samples = np.empty((M, n, r))
    for p_ in range(M):
        cols = slice(p_ * q, (p_ + 1) * q)
        samples[p_] = y[:n, cols] @ y[n:, cols].T
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(M)
    return mean, se
