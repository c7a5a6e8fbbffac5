"""Separable non-convex regularizers and their proximal operators.

Only the log-sum penalty ``g(w) = kappa * sum_i log(1 + |w_i| / nu)`` is
implemented. :class:`Regularizer` fixes the interface the optimizers use, so
other separable penalties (SCAD, MCP, capped-l1) can be dropped in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProxResult:
    """A proximal point and the Moreau envelope value it attains."""

    point: np.ndarray
    envelope_value: float


class Regularizer:
    """Interface: separable ``g(w) = sum_i g_i(w_i)`` with a scalar prox."""

    dim: int

    def coord_values(self, w) -> np.ndarray:
        raise NotImplementedError

    def prox_coords(self, lam: float, w) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_const(self) -> float:
        raise NotImplementedError

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {w.shape}")
        return w

    def value(self, w) -> float:
        return float(np.sum(self.coord_values(self._check(w))))

    def prox_scalar(self, lam: float, w_i: float) -> float:
        return float(self.prox_coords(lam, np.array([float(w_i)]))[0])

    def prox_vector(self, lam: float, w) -> ProxResult:
        w = self._check(w)
        z = self.prox_coords(lam, w)
        diff = w - z
        env = float(diff @ diff) / (2.0 * lam) + float(np.sum(self.coord_values(z)))
        return ProxResult(point=z, envelope_value=env)

    def moreau_envelope(self, lam: float, w) -> float:
        return self.prox_vector(lam, w).envelope_value


class LogSumRegularizer(Regularizer):
    """Log-sum penalty ``kappa * sum_i log(1 + |w_i| / nu)``.

    ``kappa = 0`` is accepted and makes every prox the identity.
    """

    def __init__(self, kappa: float, nu: float, dim: int):
        if kappa < 0:
            raise ValueError("kappa must be >= 0")
        if nu <= 0:
            raise ValueError("nu must be > 0")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.kappa = float(kappa)
        self.nu = float(nu)
        self.dim = int(dim)

    def __repr__(self) -> str:
        return f"LogSumRegularizer(kappa={self.kappa}, nu={self.nu}, dim={self.dim})"

    def coord_values(self, w) -> np.ndarray:
        return self.kappa * np.log1p(np.abs(w) / self.nu)

    def lipschitz_const(self) -> float:
        return self.kappa / self.nu * math.sqrt(self.dim)

    def prox_objective(self, lam: float, w_i, x):
        """``phi(x) = (x - w_i)^2 / (2 lam) + kappa log(1 + |x|/nu)``."""
        x = np.asarray(x, dtype=np.float64)
        return (x - w_i) ** 2 / (2.0 * lam) + self.kappa * np.log1p(np.abs(x) / self.nu)

    def prox_coords(self, lam: float, w) -> np.ndarray:
        """Coordinate-wise global minimizer of the prox objective.

        For ``a = |w_i|`` the stationary points on ``x > 0`` solve
        ``x^2 + (nu - a) x + (lam kappa - a nu) = 0``; the minimizer is the
        best of ``{0}`` and the positive real roots, ties going to the
        smaller magnitude.
        """
        if lam <= 0:
            raise ValueError("lambda must be > 0")
        w = np.asarray(w, dtype=np.float64)
        if self.kappa == 0.0:
            return w.copy()
        a = np.abs(w)
        nu, lk = self.nu, lam * self.kappa
        disc = (a + nu) ** 2 - 4.0 * lk
        real = disc >= 0.0
        s = np.sqrt(np.where(real, disc, 0.0))
        p = a - nu
        c = lk - a * nu  # product of the roots
        with np.errstate(divide="ignore", invalid="ignore"):
            # cancellation-free pair: compute the larger-|.| root directly
            big_pos = 0.5 * (p + s)
            small_neg = 0.5 * (p - s)
            r_hi = np.where(p >= 0, big_pos, np.where(small_neg != 0, c / small_neg, 0.0))
            r_lo = np.where(p >= 0, np.where(big_pos != 0, c / big_pos, 0.0), small_neg)
        r_hi = np.where(real, np.clip(r_hi, 0.0, a), 0.0)
        r_lo = np.where(real & (r_lo > 0), np.clip(r_lo, 0.0, a), 0.0)

        best = np.zeros_like(a)
        best_val = self.prox_objective(lam, a, best)
        for cand in (r_lo, r_hi):  # ascending magnitude; strict < keeps ties small
            val = self.prox_objective(lam, a, cand)
            take = (cand > 0) & (val < best_val)
            best = np.where(take, cand, best)
            best_val = np.where(take, val, best_val)
        return np.copysign(best, w)

    def prox_oracle_scalar(self, lam: float, w_i: float, grid_step: float,
                           max_points: int = 2_000_001) -> float:
        """Grid-search minimizer of the prox objective.

        Searches ``{0, s, 2s, ...}`` up to ``|w_i|`` on the side of
        ``w_i``; points of opposite sign are dominated by their mirror.
        Long grids are searched coarse-to-fine: every discrete local minimum
        of a coarse subgrid is re-searched at full resolution over its two
        neighbouring coarse cells.
        """
        if grid_step <= 0:
            raise ValueError("grid_step must be > 0")
        a = abs(float(w_i))
        if a == 0.0:
            return 0.0
        kmax = int(math.floor(a / grid_step))

        def phi(k):
            return self.prox_objective(lam, a, k * grid_step)

        if kmax + 1 <= max_points:
            ks = np.arange(kmax + 1)
        else:
            stride = int(math.ceil((kmax + 1) / 20_000))
            coarse = np.arange(0, kmax + 1, stride)
            if coarse[-1] != kmax:
                coarse = np.append(coarse, kmax)
            v = phi(coarse)
            left = np.concatenate(([np.inf], v[:-1]))
            right = np.concatenate((v[1:], [np.inf]))
            locmin = np.flatnonzero((v <= left) & (v <= right))
            pieces = []
            for i in locmin:
                lo = coarse[max(i - 1, 0)]
                hi = coarse[min(i + 1, len(coarse) - 1)]
                pieces.append(np.arange(lo, hi + 1))
            ks = np.unique(np.concatenate(pieces))
        vals = phi(ks)
        k = ks[int(np.argmin(vals))]
        return math.copysign(k * grid_step, w_i)
