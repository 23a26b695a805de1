"""Affine disturbance-feedback policies and their exact closed-loop moments.

The control applied at stage t is

    u(t) = ubar(t) + L_t (x(0) - mu0) + sum_{tau} K_(t-1,tau) w(tau),

where the disturbance sum runs over the last gamma+1 stages,
tau in [max(0, t-1-gamma), t-1], and is empty at t = 0.  Stacked over the
horizon this reads u_stack = ubar + Lmat (x0 - mu0) + Kmat w_stack with
Lmat the vertical stack of the L_t and Kmat a strictly block lower
triangular embedding of the K blocks.
"""

import json
from dataclasses import dataclass

import numpy as np

from .lifting import selector


def truncation_mask(gamma, T):
    """Boolean keep-mask over the (T-1)x(T-1) block array of K gains.

    Block (i, j) is kept iff j <= i and j >= i - gamma: stage t = i+1 may use
    the gamma+1 most recent disturbances w(tau), tau in [i-gamma, i].
    """
    if not (0 <= gamma <= T):
        raise ValueError(f"gamma must lie in [0, T]=[0, {T}], got {gamma}")
    k = max(T - 1, 0)
    mask = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in range(max(0, i - gamma), i + 1):
            mask[i, j] = True
    return mask


def kept_blocks(gamma, T):
    """Sorted (i, j) indices of the K blocks kept by the truncation window."""
    mask = truncation_mask(gamma, T)
    return [(i, j) for i in range(mask.shape[0]) for j in range(mask.shape[1]) if mask[i, j]]


@dataclass(frozen=True)
class Policy:
    """Disturbance-feedback policy parameters.

    ``ubar`` has shape (T*m,), ``L`` shape (T, m, n) and ``K`` shape
    (T-1, T-1, m, n) with zero blocks above the diagonal and outside the
    truncation window.
    """

    ubar: np.ndarray
    L: np.ndarray
    K: np.ndarray
    gamma: int

    def __post_init__(self):
        object.__setattr__(self, "ubar", np.asarray(self.ubar, dtype=float).reshape(-1))
        object.__setattr__(self, "L", np.asarray(self.L, dtype=float))
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float))
        T, m, n = self.L.shape
        if self.ubar.shape != (T * m,):
            raise ValueError(f"ubar must have length T*m={T * m}, got {self.ubar.shape}")
        if self.K.shape != (max(T - 1, 0), max(T - 1, 0), m, n):
            raise ValueError(
                f"K must have shape ({T - 1}, {T - 1}, {m}, {n}), got {self.K.shape}")
        mask = truncation_mask(self.gamma, T)
        dead = ~mask
        if self.K.size and np.any(self.K[dead] != 0.0):
            raise ValueError("K has nonzero blocks outside the truncation window")

    @property
    def T(self):
        return self.L.shape[0]

    @property
    def m(self):
        return self.L.shape[1]

    @property
    def n(self):
        return self.L.shape[2]

    @staticmethod
    def zero(n, m, T, gamma):
        return Policy(ubar=np.zeros(T * m),
                      L=np.zeros((T, m, n)),
                      K=np.zeros((max(T - 1, 0), max(T - 1, 0), m, n)),
                      gamma=gamma)


@dataclass(frozen=True)
class MomentTrajectory:
    """Per-stage means (T+1, n) and covariances (T+1, n, n)."""

    means: np.ndarray
    covariances: np.ndarray


def _check_dims(policy, lifted):
    if (policy.T, policy.m, policy.n) != (lifted.T, lifted.m, lifted.n):
        raise ValueError(
            f"policy dimensions (T,m,n)=({policy.T},{policy.m},{policy.n}) do not match "
            f"lifted system ({lifted.T},{lifted.m},{lifted.n})")


def assemble_K(policy, lifted=None):
    """Strictly causal Tm x Tn gain matrix Kmat.

    The first block row (stage 0) and last block column (disturbance T-1)
    are zero; block (r, c) with r >= 1, c <= r-1 holds K_(r-1, c).
    """
    if lifted is not None:
        _check_dims(policy, lifted)
    T, m, n = policy.T, policy.m, policy.n
    Kmat = np.zeros((T * m, T * n))
    for i in range(T - 1):
        for j in range(i + 1):
            Kmat[(i + 1) * m:(i + 2) * m, j * n:(j + 1) * n] = policy.K[i, j]
    return Kmat


def assemble_L(policy):
    """Vertical stack of L_0..L_{T-1}, shape (T*m, n)."""
    return policy.L.reshape(policy.T * policy.m, policy.n)


def mean_trajectory(policy, lifted):
    """Stacked state mean Gu @ ubar + G0 @ mu0; gains do not enter."""
    _check_dims(policy, lifted)
    return lifted.Gu @ policy.ubar + lifted.G0 @ lifted.mu0


def covariance_stacked(policy, lifted):
    """Stacked state covariance of the closed loop.

    Equals (G0 + Gu Lmat) Sigma0 (.)^T + (Gw + Gu Kmat) bigW (.)^T, which is
    symmetric PSD by construction.
    """
    _check_dims(policy, lifted)
    ML = lifted.G0 + lifted.Gu @ assemble_L(policy)
    MK = lifted.Gw + lifted.Gu @ assemble_K(policy)
    out = ML @ lifted.Sigma0 @ ML.T + MK @ lifted.bigW @ MK.T
    return 0.5 * (out + out.T)


def terminal_moments(policy, lifted):
    """Mean and covariance of x(T) from the stacked formulas."""
    P = selector(lifted.T, lifted).matrix
    mean = P @ mean_trajectory(policy, lifted)
    cov = P @ covariance_stacked(policy, lifted) @ P.T
    return mean, 0.5 * (cov + cov.T)


def moment_trajectory(policy, lifted):
    """Per-stage moments extracted from the stacked mean and covariance."""
    n = lifted.n
    mu = mean_trajectory(policy, lifted)
    var = covariance_stacked(policy, lifted)
    means = mu.reshape(lifted.T + 1, n)
    covs = np.empty((lifted.T + 1, n, n))
    for t in range(lifted.T + 1):
        block = var[t * n:(t + 1) * n, t * n:(t + 1) * n]
        covs[t] = 0.5 * (block + block.T)
    return MomentTrajectory(means=means, covariances=covs)


def zeta(policy, lifted):
    """Terminal-covariance factor: an n x (n + Tn) matrix, affine in (L, K).

    Satisfies zeta @ zeta.T == var_{x(T)} because R @ R.T reconstructs
    blockdiag(Sigma0, bigW).
    """
    _check_dims(policy, lifted)
    P = selector(lifted.T, lifted).matrix
    ML = P @ (lifted.G0 + lifted.Gu @ assemble_L(policy))
    MK = P @ (lifted.Gw + lifted.Gu @ assemble_K(policy))
    return np.hstack([ML, MK]) @ lifted.R


def expected_effort(policy, Sigma0, bigW):
    """Expected total control effort E[sum_t u(t)' u(t)].

    Closed form: ubar'ubar + tr(Kmat bigW Kmat') + tr(Lmat Sigma0 Lmat'),
    jointly convex quadratic in the policy parameters.
    """
    Lmat = assemble_L(policy)
    Kmat = assemble_K(policy)
    return float(policy.ubar @ policy.ubar
                 + np.trace(Kmat @ bigW @ Kmat.T)
                 + np.trace(Lmat @ np.asarray(Sigma0, dtype=float) @ Lmat.T))


def effort_constraint(policy, rho, Sigma0, bigW):
    """Budget functional: expected_effort - rho**2 (feasible iff <= 0)."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    return expected_effort(policy, Sigma0, bigW) - float(rho) ** 2


def control_input(policy, t, x0, w_history, mu0):
    """Evaluate u(t) for a realized initial state and disturbance history.

    ``w_history`` must contain w(0..t-1) (longer is fine); only the last
    gamma+1 entries of the window actually enter.
    """
    if not (0 <= t <= policy.T - 1):
        raise IndexError(f"stage {t} outside [0, {policy.T - 1}]")
    w_history = np.asarray(w_history, dtype=float).reshape(-1, policy.n)
    if w_history.shape[0] < t:
        raise ValueError(f"w_history has {w_history.shape[0]} entries, need at least {t}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    mu0 = np.asarray(mu0, dtype=float).reshape(-1)
    m = policy.m
    u = policy.ubar[t * m:(t + 1) * m] + policy.L[t] @ (x0 - mu0)
    if t >= 1:
        for tau in range(max(0, t - 1 - policy.gamma), t):
            u = u + policy.K[t - 1, tau] @ w_history[tau]
    return u


def policy_to_dict(policy):
    """Serializable document: ubar as vectors, L as matrices, K as kept blocks."""
    T, m = policy.T, policy.m
    kept = []
    for (i, j) in kept_blocks(policy.gamma, T):
        kept.append({"i": i, "j": j, "block": policy.K[i, j].tolist()})
    return {
        "ubar": [policy.ubar[t * m:(t + 1) * m].tolist() for t in range(T)],
        "L": [policy.L[t].tolist() for t in range(T)],
        "K": kept,
        "gamma": policy.gamma,
    }


def policy_from_dict(data):
    ubar_blocks = [np.asarray(v, dtype=float).reshape(-1) for v in data["ubar"]]
    L = np.asarray(data["L"], dtype=float)
    T, m, n = L.shape
    ubar = np.concatenate(ubar_blocks) if ubar_blocks else np.zeros(0)
    K = np.zeros((max(T - 1, 0), max(T - 1, 0), m, n))
    for entry in data["K"]:
        K[int(entry["i"]), int(entry["j"])] = np.asarray(entry["block"], dtype=float)
    return Policy(ubar=ubar, L=L, K=K, gamma=int(data["gamma"]))


def save_policy(policy, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_dict(policy), fh, indent=2)
        fh.write("\n")


def load_policy(path):
    with open(path, "r", encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))
