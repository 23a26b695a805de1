"""Shared machinery for reducing steering problems to cone programs.

Both solver front ends use the same decision-variable layout (feedforward
``ubar``, initial-state gains ``L``, kept disturbance gains ``K``) and the
same affine maps: the terminal mean as a function of ubar and the
terminal-covariance factor zeta as a function of (L, K).  Masked-out K
blocks are absent variables, not zero-constrained ones.
"""

import numpy as np

from .lifting import state_transition
from .linalg import psd_sqrt
from .policy import Policy, kept_blocks


class GainLayout:
    """Registers gain variables on a program and exposes their affine maps."""

    def __init__(self, problem, lifted, program):
        self.problem = problem
        self.lifted = lifted
        n, m, T = lifted.n, lifted.m, lifted.T
        self.n, self.m, self.T = n, m, T
        self.iu = program.add_variables("ubar", T * m)
        self.iL = program.add_variables("L", T * m * n).reshape(T * m, n)
        self.kept = kept_blocks(problem.gamma, T)
        k_vars = program.add_variables("K", len(self.kept) * m * n)
        self.iK = {blk: k_vars[idx * m * n:(idx + 1) * m * n].reshape(m, n)
                   for idx, blk in enumerate(self.kept)}

        # terminal block rows of the lifted maps
        P = slice(T * n, (T + 1) * n)
        self.PG0 = lifted.G0[P, :]
        self.PGu = lifted.Gu[P, :]
        self.PGw = lifted.Gw[P, :]
        # blockwise square roots; R R' = blockdiag(Sigma0, bigW)
        self.R0 = psd_sqrt(lifted.Sigma0)
        self.RW = psd_sqrt(problem.system.W)

    def k_var(self, r, c):
        """Variable index behind scalar entry (r, c) of Kmat, or None if absent."""
        br, p = divmod(r, self.m)
        bc, q = divmod(c, self.n)
        if br == 0 or bc > br - 1:
            return None
        block = self.iK.get((br - 1, bc))
        return None if block is None else int(block[p, q])

    # -- affine maps --------------------------------------------------------
    def mean_rows(self):
        """Rows of P f(ubar) - mud: affine in ubar, zero at the target mean."""
        base = self.PG0 @ self.lifted.mu0 - self.problem.target.mean
        rows = []
        for r in range(self.n):
            coeffs = {int(self.iu[j]): float(self.PGu[r, j])
                      for j in range(self.T * self.m) if self.PGu[r, j] != 0.0}
            rows.append((coeffs, float(base[r])))
        return rows

    def zeta_rows(self):
        """Affine map of zeta as a dict (i, c) -> (coeffs, const).

        Column block 0..n-1 comes from (PG0 + PGu Lmat) R0; the remaining Tn
        columns from (PGw + PGu Kmat) RWbig, where RWbig is block diagonal so
        only the n columns of the matching stage couple.
        """
        n, m, T = self.n, self.m, self.T
        out = {}
        PG0R0 = self.PG0 @ self.R0
        for i in range(n):
            for c in range(n):
                coeffs = {}
                for j in range(T * m):
                    g = self.PGu[i, j]
                    if g == 0.0:
                        continue
                    for a in range(n):
                        if self.R0[a, c] != 0.0:
                            key = int(self.iL[j, a])
                            coeffs[key] = coeffs.get(key, 0.0) + g * self.R0[a, c]
                out[(i, c)] = (coeffs, float(PG0R0[i, c]))
        PGwRW = np.hstack([self.PGw[:, s * n:(s + 1) * n] @ self.RW for s in range(T)])
        for i in range(n):
            for cc in range(T * n):
                stage = cc // n
                coeffs = {}
                for j in range(T * m):
                    g = self.PGu[i, j]
                    if g == 0.0:
                        continue
                    for q in range(n):
                        vi = self.k_var(j, stage * n + q)
                        if vi is not None and self.RW[q, cc % n] != 0.0:
                            coeffs[vi] = coeffs.get(vi, 0.0) + g * self.RW[q, cc % n]
                out[(i, n + cc)] = (coeffs, float(PGwRW[i, cc]))
        return out

    def effort_stage_rows(self, j):
        """Rows whose squared norm is stage j's effort contribution.

        Covers ubar(j), row j of Lmat R0 and row j of Kmat RWbig; summing
        ||rows||^2 over stages gives ubar'ubar + tr(L Sigma0 L') + tr(K bigW K').
        """
        n, T = self.n, self.T
        rows = [({int(self.iu[j]): 1.0}, 0.0)]
        for c in range(n):
            coeffs = {int(self.iL[j, a]): float(self.R0[a, c])
                      for a in range(n) if self.R0[a, c] != 0.0}
            rows.append((coeffs, 0.0))
        for c in range(T * n):
            stage = c // n
            coeffs = {}
            for q in range(n):
                vi = self.k_var(j, stage * n + q)
                if vi is not None and self.RW[q, c % n] != 0.0:
                    coeffs[vi] = float(self.RW[q, c % n])
            if coeffs:
                rows.append((coeffs, 0.0))
        return rows

    def policy_from_primal(self, primal):
        """Rebuild the Policy from a primal vector using the variable layout."""
        n, m, T = self.n, self.m, self.T
        ubar = primal[self.iu]
        L = primal[self.iL.reshape(-1)].reshape(T, m, n)
        K = np.zeros((max(T - 1, 0), max(T - 1, 0), m, n))
        for blk, idx in self.iK.items():
            K[blk] = primal[idx.reshape(-1)].reshape(m, n)
        return Policy(ubar=ubar, L=L, K=K, gamma=self.problem.gamma)


def policy_from_name_table(primal, name_table, problem):
    """Rebuild a Policy from a solved primal vector and the program's name table."""
    sys_ = problem.system
    n, m, T = sys_.n, sys_.m, sys_.T
    ua, ub = name_table["ubar"]
    la, lb = name_table["L"]
    ka, kb = name_table["K"]
    ubar = primal[ua:ub]
    L = primal[la:lb].reshape(T, m, n)
    K = np.zeros((max(T - 1, 0), max(T - 1, 0), m, n))
    for idx, blk in enumerate(kept_blocks(problem.gamma, T)):
        K[blk] = primal[ka + idx * m * n: ka + (idx + 1) * m * n].reshape(m, n)
    return Policy(ubar=ubar, L=L, K=K, gamma=problem.gamma)


def min_norm_mean_feedforward(problem, lifted):
    """Minimum-norm ubar with P f(ubar) = mud, via least squares."""
    n, T = lifted.n, lifted.T
    P = slice(T * n, (T + 1) * n)
    PGu = lifted.Gu[P, :]
    rhs = problem.target.mean - state_transition(T, 0, problem.system) @ lifted.mu0
    ubar, *_ = np.linalg.lstsq(PGu, rhs, rcond=None)
    return ubar
