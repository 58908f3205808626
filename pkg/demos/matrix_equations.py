"""Generalized matrix equations: the workhorses behind every distance.

Solves a generalized Lyapunov equation for the Gramian of a small stochastic
system, certifies the residual, and cross-checks the solution against the
dense Kronecker-vectorized oracle.
"""

import numpy as np

import stochmor as sm
from stochmor.matrixeq import (
    kronecker_oracle,
    solve_generalized_lyapunov,
    solve_generalized_sylvester,
)

rng = np.random.default_rng(0)
n = 8

A = -2.0 * np.eye(n) + 0.4 * rng.standard_normal((n, n))
N = [0.25 * rng.standard_normal((n, n)) for _ in range(2)]
K = np.array([[1.0, 0.5], [0.5, 1.0]])
B = rng.standard_normal((n, 1))

model = sm.StateSpaceModel(A=A, B1=B, C=np.ones((1, n)), N=tuple(N), K=K)
print("mean-square stable:", sm.is_ms_stable(model).stable)

# reachability Gramian: A P + P A^T + sum k_ij N_i P N_j^T = -B B^T
rep = solve_generalized_lyapunov(A, N, K, B @ B.T)
print(f"Lyapunov solve: method={rep.method}, iterations={rep.iterations}, "
      f"residual={rep.residual_norm:.2e}")

P_oracle = kronecker_oracle(A, A, N, N, K, B @ B.T)
print(f"agreement with dense Kronecker oracle: "
      f"{np.linalg.norm(rep.X - P_oracle) / np.linalg.norm(P_oracle):.2e}")

# mixed Sylvester equation with a diagonal reduced coefficient, as used by
# the cross-Gramian terms of the distance
r = 3
lam = -1.0 - rng.uniform(0.1, 2.0, r) + 1j * rng.standard_normal(r)
Ntilde = [0.2 * rng.standard_normal((r, r)) + 0j for _ in range(2)]
RHS = rng.standard_normal((n, r)) + 0j
rep_s = solve_generalized_sylvester(A, lam, N, Ntilde, K, RHS)
X_oracle = kronecker_oracle(A, np.diag(lam), N, Ntilde, K, RHS)
print(f"Sylvester solve: method={rep_s.method}, oracle agreement "
      f"{np.linalg.norm(rep_s.X - X_oracle) / np.linalg.norm(X_oracle):.2e}")
