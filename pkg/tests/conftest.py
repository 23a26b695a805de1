import numpy as np
import pytest

from covsteer import Policy, problem_from_dict

BENCHMARK = {
    "n": 2, "m": 1, "T": 50,
    "A": [[1.1, -0.07], [0.23, -0.87]],
    "B": [[0.0], [0.1]],
    "W": [[0.1, 0.0], [0.0, 0.3]],
    "mu0": [1.0, 0.0], "Sigma0": [[1.0, 0.0], [0.0, 1.0]],
    "mud": [10.0, 0.0], "Sigmad": [[4.0, -1.5], [-1.5, 4.0]],
    "rho": 300.0, "gamma": 50, "variant": "hard",
}


def benchmark_problem(**overrides):
    data = dict(BENCHMARK)
    data.update(overrides)
    return problem_from_dict(data)


@pytest.fixture
def benchmark():
    return benchmark_problem()


def random_system_dict(rng, n=None, m=None, T=None, stable=True):
    """Random well-posed problem data with PD covariances."""
    n = n if n is not None else int(rng.integers(1, 4))
    m = m if m is not None else int(rng.integers(1, 3))
    T = T if T is not None else int(rng.integers(2, 7))
    A = rng.normal(size=(n, n))
    if stable:
        A *= 0.9 / max(np.abs(np.linalg.eigvals(A)).max(), 1e-6)
    B = rng.normal(size=(n, m))
    Wf = rng.normal(size=(n, n)) * 0.3
    W = Wf @ Wf.T
    S0f = rng.normal(size=(n, n))
    S0 = S0f @ S0f.T + 0.5 * np.eye(n)
    Sdf = rng.normal(size=(n, n))
    Sd = Sdf @ Sdf.T + 0.5 * np.eye(n)
    return {
        "n": n, "m": m, "T": T, "A": A.tolist(), "B": B.tolist(), "W": W.tolist(),
        "mu0": rng.normal(size=n).tolist(), "Sigma0": S0.tolist(),
        "mud": rng.normal(size=n).tolist(), "Sigmad": Sd.tolist(),
        "rho": float(rng.uniform(1.0, 10.0)), "gamma": T, "variant": "hard",
    }


def random_policy(rng, n, m, T, gamma, scale=0.3):
    """Random policy respecting the truncation mask."""
    from covsteer import truncation_mask
    ubar = rng.normal(size=T * m) * scale
    L = rng.normal(size=(T, m, n)) * scale
    K = np.zeros((max(T - 1, 0), max(T - 1, 0), m, n))
    mask = truncation_mask(gamma, T)
    for i in range(T - 1):
        for j in range(T - 1):
            if mask[i, j]:
                K[i, j] = rng.normal(size=(m, n)) * scale
    return Policy(ubar=ubar, L=L, K=K, gamma=gamma)


def stagewise_moments(system, policy):
    """Exact per-stage moments by recursion on the augmented state.

    The augmented vector z(t) = [x(t); x(0)-mu0; w(0); ...; w(T-1)] evolves
    linearly, so its mean and covariance propagate exactly.  This never
    touches the lifted block matrices, making it an independent oracle for
    the stacked moment formulas.
    """
    n, m, T = system.n, system.m, system.T
    D = 2 * n + T * n
    mu0 = system.init.mean
    S0 = system.init.covariance

    mean = np.zeros(D)
    mean[:n] = mu0
    P = np.zeros((D, D))
    P[:n, :n] = S0
    P[:n, n:2 * n] = S0
    P[n:2 * n, :n] = S0
    P[n:2 * n, n:2 * n] = S0
    for t in range(T):
        s = 2 * n + t * n
        P[s:s + n, s:s + n] = system.W

    means = [mean[:n].copy()]
    covs = [P[:n, :n].copy()]
    efforts = []
    for t in range(T):
        # u(t) = ubar(t) + F_t z(t)
        F = np.zeros((m, D))
        F[:, n:2 * n] = policy.L[t]
        if t >= 1:
            for tau in range(max(0, t - 1 - policy.gamma), t):
                F[:, 2 * n + tau * n: 2 * n + (tau + 1) * n] = policy.K[t - 1, tau]
        ubar_t = policy.ubar[t * m:(t + 1) * m]
        u_mean = ubar_t + F @ mean
        efforts.append(float(u_mean @ u_mean + np.trace(F @ P @ F.T)))

        M = np.eye(D)
        M[:n, :] = 0.0
        M[:n, :n] = system.A[t]
        M[:n, :] += system.B[t] @ F
        M[:n, 2 * n + t * n: 2 * n + (t + 1) * n] += np.eye(n)
        c = np.zeros(D)
        c[:n] = system.B[t] @ ubar_t
        mean = M @ mean + c
        P = M @ P @ M.T
        means.append(mean[:n].copy())
        covs.append(0.5 * (P[:n, :n] + P[:n, :n].T))
    return np.array(means), np.array(covs), float(np.sum(efforts))
