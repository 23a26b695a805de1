"""Squared Gaussian Wasserstein distance, soft objective terms and gradients.

For Gaussian laws N(mu1, S1), N(mu2, S2) the squared 2-Wasserstein distance
has the closed form

    W2^2 = ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}).

With the terminal covariance factored as zeta @ zeta.T, the soft steering
objective splits into a convex quadratic part minus twice the nuclear norm
of sqrt(Sigmad) @ zeta, which is the difference-of-convex structure the
CCP solver exploits.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import psd_inv_sqrt, psd_sqrt, symmetrize


class ConditioningWarning(UserWarning):
    """Raised when eigenvalue flooring activates inside an inverse root."""


def gaussian_w2(mu1, Sigma1, mu2, Sigma2):
    """Squared Wasserstein distance between N(mu1, Sigma1) and N(mu2, Sigma2).

    Nearly-singular covariances are handled by clamping negative eigenvalues
    inside the matrix roots; tiny negative totals from trace cancellation are
    clamped to zero.
    """
    mu1 = np.asarray(mu1, dtype=float).reshape(-1)
    mu2 = np.asarray(mu2, dtype=float).reshape(-1)
    Sigma1 = symmetrize(Sigma1)
    Sigma2 = symmetrize(Sigma2)
    root2 = psd_sqrt(Sigma2)
    cross = psd_sqrt(root2 @ Sigma1 @ root2)
    diff = mu1 - mu2
    total = float(diff @ diff + np.trace(Sigma1) + np.trace(Sigma2) - 2.0 * np.trace(cross))
    scale = 1.0 + abs(float(np.trace(Sigma1) + np.trace(Sigma2)))
    if total < 0.0:
        if total < -1e-9 * scale:
            raise ArithmeticError(
                f"squared Wasserstein distance evaluated to {total:.3e} (beyond round-off)")
        total = 0.0
    return total


def nuclear_norm(M):
    """Sum of singular values of M."""
    return float(np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False).sum())


@dataclass(frozen=True)
class SoftObjectiveValue:
    """Terms of the soft steering objective; total = mean + frob + const - nuclear."""

    total: float
    mean_term: float
    frob_term: float
    const_term: float
    nuclear_term: float


def sccs_objective(terminal_mean, zeta, mud, Sigmad):
    """Soft objective from the terminal mean and the covariance factor zeta.

    Equals gaussian_w2(terminal_mean, zeta @ zeta.T, mud, Sigmad); the
    nuclear-norm form is what the difference-of-convex solver minimizes.
    """
    terminal_mean = np.asarray(terminal_mean, dtype=float).reshape(-1)
    mud = np.asarray(mud, dtype=float).reshape(-1)
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape[0] != mud.shape[0]:
        raise ValueError(f"zeta has {zeta.shape[0]} rows, expected {mud.shape[0]}")
    diff = terminal_mean - mud
    mean_term = float(diff @ diff)
    frob_term = float(np.sum(zeta * zeta))
    const_term = float(np.trace(np.asarray(Sigmad, dtype=float)))
    nuclear_term = 2.0 * nuclear_norm(psd_sqrt(Sigmad) @ zeta)
    total = mean_term + frob_term + const_term - nuclear_term
    return SoftObjectiveValue(total=total, mean_term=mean_term, frob_term=frob_term,
                              const_term=const_term, nuclear_term=nuclear_term)


def nuclear_term_gradient(zeta, Sigmad, eig_floor=1e-10):
    """Gradient of zeta -> ||sqrt(Sigmad) @ zeta||_* in closed form.

    The formula sqrt(Sigmad) (sqrt(Sigmad) zeta zeta' sqrt(Sigmad))^{-1/2}
    sqrt(Sigmad) zeta requires zeta @ zeta.T to be nonsingular; numerically,
    eigenvalues of the inner matrix below ``eig_floor`` times its largest one
    are raised to the floor before inversion (with a ConditioningWarning).
    """
    zeta = np.asarray(zeta, dtype=float)
    root = psd_sqrt(Sigmad)
    inner = root @ zeta @ zeta.T @ root
    inv_root, floored = psd_inv_sqrt(inner, floor_rel=eig_floor)
    if floored:
        warnings.warn("nuclear-norm gradient: inner matrix is near rank-deficient; "
                      "eigenvalues floored before inversion", ConditioningWarning,
                      stacklevel=2)
    return root @ inv_root @ root @ zeta
