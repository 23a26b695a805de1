"""Small shared linear-algebra helpers for symmetric PSD matrices."""

import numpy as np


def symmetrize(M):
    """Return the symmetric part (M + M.T) / 2."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def symmetry_defect(M):
    """Relative asymmetry ||M - M.T|| / max(1, ||M||) in Frobenius norm."""
    M = np.asarray(M, dtype=float)
    scale = max(1.0, float(np.linalg.norm(M)))
    return float(np.linalg.norm(M - M.T)) / scale


def min_eigval(M):
    """Smallest eigenvalue of the symmetric part of M."""
    return float(np.linalg.eigvalsh(symmetrize(M))[0])


def psd_sqrt(M):
    """Symmetric PSD square root via eigendecomposition.

    Negative eigenvalues (round-off) are clamped to zero, so the result is
    defined for any nearly-PSD symmetric input and R @ R.T reconstructs the
    PSD projection of M.
    """
    lam, V = np.linalg.eigh(symmetrize(M))
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T


def psd_clamp(M):
    """Project a symmetric matrix onto the PSD cone by zeroing negative eigenvalues."""
    lam, V = np.linalg.eigh(symmetrize(M))
    return (V * np.clip(lam, 0.0, None)) @ V.T


def psd_inv_sqrt(M, floor_rel=1e-10):
    """Inverse symmetric square root with relative eigenvalue flooring.

    Eigenvalues below ``floor_rel`` times the largest eigenvalue are raised to
    that floor before inversion.  Returns ``(X, floored)`` where ``floored``
    tells whether the floor was active.
    """
    lam, V = np.linalg.eigh(symmetrize(M))
    lmax = float(lam[-1])
    if lmax <= 0.0:
        # fully degenerate input: fall back to an absolute floor
        floor = max(floor_rel, np.finfo(float).tiny)
        return (V * (1.0 / np.sqrt(np.full_like(lam, floor)))) @ V.T, True
    floor = floor_rel * lmax
    floored = bool(lam[0] < floor)
    lam = np.maximum(lam, floor)
    return (V * (1.0 / np.sqrt(lam))) @ V.T, floored
