"""Lifting the dynamics: stacked block matrices vs stepwise simulation.

Stacking the whole horizon turns the recursion x(t+1) = A x(t) + B u(t) + w(t)
into a single linear map x_stack = Gu u + Gw w + G0 x0.  This script builds
the lifted form for a tiny system, prints the block structure, and checks it
against a plain for-loop simulation.
"""

import numpy as np

from covsteer import build_lifted, load_problem, state_transition

np.set_printoptions(precision=3, suppress=True)

problem = load_problem("demos/random_system.json")
system = problem.system
lifted = build_lifted(system)

print(f"system: n={system.n}, m={system.m}, T={system.T}")
print(f"Gu shape {lifted.Gu.shape}, Gw shape {lifted.Gw.shape}, G0 shape {lifted.G0.shape}")
print("transition product over the whole horizon:")
print(state_transition(system.T, 0, system))

# stepwise replay with arbitrary fixed inputs and disturbances
rng = np.random.default_rng(0)
x0 = rng.normal(size=system.n)
u = rng.normal(size=system.T * system.m)
w = rng.normal(size=system.T * system.n)

stacked = lifted.Gu @ u + lifted.Gw @ w + lifted.G0 @ x0
x = x0.copy()
for t in range(system.T):
    x = system.A[t] @ x + system.B[t] @ u[t:t + 1] + w[2 * t:2 * t + 2]
err = np.linalg.norm(stacked[-2:] - x)
print(f"terminal state, lifted vs stepwise: |difference| = {err:.2e}")

# the joint square-root factor reconstructs blockdiag(Sigma0, W, ..., W)
target = np.zeros_like(lifted.R)
target[:2, :2] = system.init.covariance
target[2:, 2:] = lifted.bigW
print("R R' reconstruction error:",
      f"{np.linalg.norm(lifted.R @ lifted.R.T - target):.2e}")
