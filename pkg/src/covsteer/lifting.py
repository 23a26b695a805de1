"""Finite-horizon lifting of the dynamics into stacked block-matrix form.

Stacking x(0..T), u(0..T-1), w(0..T-1) into single vectors turns the
recursion x(t+1) = A(t) x(t) + B(t) u(t) + w(t) into

    x_stack = Gu @ u_stack + Gw @ w_stack + G0 @ x0,

where Gu and Gw are block lower triangular and G0 stacks the transition
products Phi(t, 0).  The joint square-root factor R satisfies
R @ R.T = blockdiag(Sigma0, W, ..., W) and enters the terminal-covariance
factor used by the solvers.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import psd_sqrt
from .model import ValidationError, validate_system


def state_transition(t, tau, system):
    """Transition product Phi(t, tau) = A(t-1) @ ... @ A(tau); identity when t == tau."""
    if not (0 <= tau <= t <= system.T):
        raise IndexError(f"need 0 <= tau <= t <= T, got t={t}, tau={tau}, T={system.T}")
    out = np.eye(system.n)
    for k in range(tau, t):
        out = system.A[k] @ out
    return out


def _transition_table(system):
    """All Phi(i, j) for 0 <= j <= i <= T, built with running products."""
    n, T = system.n, system.T
    Phi = {}
    for j in range(T + 1):
        Phi[(j, j)] = np.eye(n)
        for i in range(j + 1, T + 1):
            Phi[(i, j)] = system.A[i - 1] @ Phi[(i - 1, j)]
    return Phi


@dataclass(frozen=True)
class LiftedSystem:
    """Block matrices of the stacked finite-horizon dynamics.

    Shapes: Gu is (T+1)n x Tm, Gw is (T+1)n x Tn, G0 is (T+1)n x n, bigW is
    Tn x Tn and R is (n+Tn) x (n+Tn).  The initial law (mu0, Sigma0) is
    carried along so moment formulas can be evaluated without the source
    model.
    """

    Gu: np.ndarray
    Gw: np.ndarray
    G0: np.ndarray
    bigW: np.ndarray
    R: np.ndarray
    n: int
    m: int
    T: int
    mu0: np.ndarray
    Sigma0: np.ndarray


@dataclass(frozen=True)
class Selector:
    """Block row selector: ``matrix @ x_stack`` extracts x(t)."""

    t: int
    matrix: np.ndarray


def joint_sqrt(Sigma0, bigW):
    """Symmetric PSD square root R of blockdiag(Sigma0, bigW).

    Each diagonal block is rooted by eigendecomposition with negative
    eigenvalues clamped to zero, so singular noise covariances are fine
    (Cholesky would fail there).
    """
    Sigma0 = np.atleast_2d(np.asarray(Sigma0, dtype=float))
    bigW = np.atleast_2d(np.asarray(bigW, dtype=float))
    n = Sigma0.shape[0]
    k = bigW.shape[0]
    R = np.zeros((n + k, n + k))
    R[:n, :n] = psd_sqrt(Sigma0)
    R[n:, n:] = psd_sqrt(bigW)
    return R


def build_lifted(system):
    """Assemble the LiftedSystem for a validated SystemModel."""
    report = validate_system(system)
    if not report.ok:
        raise ValidationError(report)
    n, m, T = system.n, system.m, system.T
    Phi = _transition_table(system)

    Gu = np.zeros(((T + 1) * n, T * m))
    Gw = np.zeros(((T + 1) * n, T * n))
    G0 = np.zeros(((T + 1) * n, n))
    for i in range(T + 1):
        G0[i * n:(i + 1) * n, :] = Phi[(i, 0)]
        for j in range(i):
            Gu[i * n:(i + 1) * n, j * m:(j + 1) * m] = Phi[(i, j + 1)] @ system.B[j]
            Gw[i * n:(i + 1) * n, j * n:(j + 1) * n] = Phi[(i, j + 1)]

    bigW = np.kron(np.eye(T), system.W)
    R = joint_sqrt(system.init.covariance, bigW)
    return LiftedSystem(Gu=Gu, Gw=Gw, G0=G0, bigW=bigW, R=R, n=n, m=m, T=T,
                        mu0=system.init.mean.copy(),
                        Sigma0=np.array(system.init.covariance, dtype=float))


def selector(t, lifted):
    """Selector P_{t+1} with the identity in block t of a (T+1)-block row."""
    if not (0 <= t <= lifted.T):
        raise IndexError(f"stage {t} outside [0, {lifted.T}]")
    n = lifted.n
    P = np.zeros((n, (lifted.T + 1) * n))
    P[:, t * n:(t + 1) * n] = np.eye(n)
    return Selector(t=t, matrix=P)
