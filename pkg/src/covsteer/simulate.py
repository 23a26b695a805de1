"""Monte-Carlo closed-loop simulation for validating analytic moments.

Each rollout draws from its own counter-based random stream (Philox keyed by
the rollout seed), so results are reproducible and rollouts are independent
regardless of execution order.  Gaussian draws go through the symmetric PSD
square roots of the covariances, which stays valid for singular noise.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import psd_sqrt
from .policy import control_input


@dataclass(frozen=True)
class Rollout:
    """One closed-loop trace; states[t+1] = A(t) states[t] + B(t) inputs[t] + disturbances[t]."""

    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray
    seed: int


@dataclass(frozen=True)
class SampleStats:
    """Sample moments over N rollouts; covariances use 1/(N-1) normalization."""

    N: int
    mean_t: np.ndarray
    cov_t: np.ndarray
    effort_mean: float
    effort_se: float


def _stream_draws(seed, n, T):
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    z = gen.standard_normal(n + T * n)
    return z[:n], z[n:].reshape(T, n)


def rollout(system, policy, seed):
    """Simulate one closed-loop trajectory from the stream keyed by ``seed``."""
    n, m, T = system.n, system.m, system.T
    if (policy.T, policy.m, policy.n) != (T, m, n):
        raise ValueError("policy dimensions do not match the system")
    S0root = psd_sqrt(system.init.covariance)
    Wroot = psd_sqrt(system.W)
    z0, zw = _stream_draws(seed, n, T)
    x0 = system.init.mean + S0root @ z0
    w = zw @ Wroot.T

    states = np.empty((T + 1, n))
    inputs = np.empty((T, m))
    states[0] = x0
    for t in range(T):
        inputs[t] = control_input(policy, t, x0, w[:t], system.init.mean)
        states[t + 1] = system.A[t] @ states[t] + system.B[t] @ inputs[t] + w[t]
    return Rollout(states=states, inputs=inputs, disturbances=w, seed=int(seed))


def monte_carlo(system, policy, N, base_seed):
    """Sample moments from N independent rollouts (streams base_seed..base_seed+N-1).

    The stagewise recursion is evaluated vectorized across rollouts but uses
    exactly the same per-rollout streams as :func:`rollout`, and the
    aggregation order is fixed, so results are reproducible.
    """
    if N < 2:
        raise ValueError(f"need at least 2 rollouts, got {N}")
    n, m, T = system.n, system.m, system.T
    if (policy.T, policy.m, policy.n) != (T, m, n):
        raise ValueError("policy dimensions do not match the system")
    S0root = psd_sqrt(system.init.covariance)
    Wroot = psd_sqrt(system.W)

    z = np.empty((N, n + T * n))
    for i in range(N):
        gen = np.random.Generator(np.random.Philox(key=int(base_seed) + i))
        z[i] = gen.standard_normal(n + T * n)
    X0 = system.init.mean + z[:, :n] @ S0root.T
    w = z[:, n:].reshape(N, T, n) @ Wroot.T

    mean_t = np.empty((T + 1, n))
    cov_t = np.empty((T + 1, n, n))
    X = X0.copy()
    dev0 = X0 - system.init.mean
    effort = np.zeros(N)
    for t in range(T + 1):
        mean_t[t] = X.mean(axis=0)
        centered = X - mean_t[t]
        cov_t[t] = centered.T @ centered / (N - 1)
        if t == T:
            break
        U = np.tile(policy.ubar[t * m:(t + 1) * m], (N, 1)) + dev0 @ policy.L[t].T
        if t >= 1:
            for tau in range(max(0, t - 1 - policy.gamma), t):
                U += w[:, tau, :] @ policy.K[t - 1, tau].T
        effort += np.einsum("ij,ij->i", U, U)
        X = X @ system.A[t].T + U @ system.B[t].T + w[:, t, :]

    effort_mean = float(effort.mean())
    effort_se = float(effort.std(ddof=1) / np.sqrt(N))
    return SampleStats(N=N, mean_t=mean_t, cov_t=cov_t,
                       effort_mean=effort_mean, effort_se=effort_se)


def write_rollout_csv(trace, stream):
    """Dump one rollout as CSV rows t, x, u, w (u and w empty at the final stage)."""
    T = trace.inputs.shape[0]
    n = trace.states.shape[1]
    m = trace.inputs.shape[1]
    header = ["t"] + [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)] \
        + [f"w_{i}" for i in range(n)]
    stream.write(",".join(header) + "\n")
    for t in range(T + 1):
        row = [str(t)] + [format(v, ".17g") for v in trace.states[t]]
        if t < T:
            row += [format(v, ".17g") for v in trace.inputs[t]]
            row += [format(v, ".17g") for v in trace.disturbances[t]]
        else:
            row += [""] * (m + n)
        stream.write(",".join(row) + "\n")


@dataclass(frozen=True)
class MomentComparison:
    """Per-stage deviations of sample moments from analytic ones."""

    mean_dev_se: np.ndarray      # max componentwise |dev| in standard-error units
    cov_rel_err: np.ndarray      # relative Frobenius error per stage
    mean_flags: list
    cov_flags: list
    mean_se_limit: float
    cov_rel_limit: float

    @property
    def ok(self):
        return not self.mean_flags and not self.cov_flags


def compare_moments(analytic, sample, mean_se_limit=4.0, cov_rel_limit=0.05):
    """Flag stages where sample moments deviate beyond the given thresholds."""
    means = np.asarray(analytic.means, dtype=float)
    covs = np.asarray(analytic.covariances, dtype=float)
    if means.shape != sample.mean_t.shape:
        raise ValueError("stage counts of analytic and sampled moments differ")
    stages = means.shape[0]
    mean_dev_se = np.zeros(stages)
    cov_rel_err = np.zeros(stages)
    mean_flags, cov_flags = [], []
    for t in range(stages):
        se = np.sqrt(np.clip(np.diag(sample.cov_t[t]), 0.0, None) / sample.N)
        dev = np.abs(sample.mean_t[t] - means[t])
        with np.errstate(divide="ignore", invalid="ignore"):
            units = np.where(se > 0, dev / se, np.where(dev > 0, np.inf, 0.0))
        mean_dev_se[t] = float(np.max(units)) if units.size else 0.0
        scale = max(float(np.linalg.norm(covs[t])), 1e-300)
        cov_rel_err[t] = float(np.linalg.norm(sample.cov_t[t] - covs[t])) / scale
        if mean_dev_se[t] > mean_se_limit:
            mean_flags.append(t)
        if cov_rel_err[t] > cov_rel_limit:
            cov_flags.append(t)
    return MomentComparison(mean_dev_se=mean_dev_se, cov_rel_err=cov_rel_err,
                            mean_flags=mean_flags, cov_flags=cov_flags,
                            mean_se_limit=mean_se_limit, cov_rel_limit=cov_rel_limit)
