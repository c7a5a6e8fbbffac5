"""Smooth majorant of ``f + e_lambda g`` anchored at an iterate.

With ``z = prox_{lambda g}(w_k)`` the Moreau envelope splits as
``e(w) = ||w||^2 / (2 lambda) - D(w)`` where ``D`` is convex and attains its
supremum at ``z``. Linearizing ``D`` at ``w_k`` gives the majorant

    E_k(w) = f(w) + ||w||^2 / (2 lambda) - D(w_k) - z.(w - w_k) / lambda

whose gradient is ``grad f(w) + (w - z) / lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import ErmObjective
from .regularizers import Regularizer


@dataclass(frozen=True)
class EnvelopeAnchor:
    anchor: np.ndarray
    prox_point: np.ndarray
    lam: float
    g_at_prox: float

    @property
    def conjugate_value(self) -> float:
        """``D(w_k)`` reconstructed from the prox point (no supremum taken)."""
        z, w = self.prox_point, self.anchor
        return float(w @ z) / self.lam - float(z @ z) / (2.0 * self.lam) - self.g_at_prox

    @property
    def envelope_at_anchor(self) -> float:
        """``e_lambda g(w_k)`` via ``||w_k||^2 / (2 lambda) - D(w_k)``."""
        w = self.anchor
        return float(w @ w) / (2.0 * self.lam) - self.conjugate_value

    def smoothness(self, L: float) -> float:
        return L + 1.0 / self.lam


def make_anchor(g: Regularizer, lam: float, w_k) -> EnvelopeAnchor:
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    w_k = np.array(w_k, dtype=np.float64)
    res = g.prox_vector(lam, w_k)
    return EnvelopeAnchor(anchor=w_k, prox_point=res.point, lam=float(lam),
                          g_at_prox=g.value(res.point))


def _check_dim(a: EnvelopeAnchor, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != a.anchor.shape:
        raise ValueError(f"expected shape {a.anchor.shape}, got {w.shape}")
    return w


def envelope_majorant_value(a: EnvelopeAnchor, obj: ErmObjective,
                            g: Regularizer, w) -> float:
    w = _check_dim(a, w)
    lam, z = a.lam, a.prox_point
    upper = float(w @ w) / (2.0 * lam) - (a.conjugate_value + float(z @ (w - a.anchor)) / lam)
    return obj.value(w) + upper


def envelope_gradient(a: EnvelopeAnchor, obj: ErmObjective, w) -> np.ndarray:
    w = _check_dim(a, w)
    return obj.full_gradient(w) + (w - a.prox_point) / a.lam


def aux_objective(obj: ErmObjective, g: Regularizer, lam: float, w) -> float:
    """``f(w) + e_lambda g(w)``."""
    return obj.value(w) + g.prox_vector(lam, w).envelope_value


def objective(obj: ErmObjective, g: Regularizer, w) -> float:
    """The composite objective ``h = f + g``."""
    return obj.value(w) + g.value(w)


def subgradient_residual(a: EnvelopeAnchor, obj: ErmObjective) -> float:
    """Norm of ``grad f(z) + (w_k - z) / lambda``, a member of the
    limiting subdifferential of ``h`` at ``z = prox(w_k)``."""
    z = a.prox_point
    return float(np.linalg.norm(obj.full_gradient(z) + (a.anchor - z) / a.lam))


def stationarity_bound(a: EnvelopeAnchor, obj: ErmObjective, g: Regularizer,
                       L: float | None = None) -> float:
    """Upper bound on ``dist(0, dh(z))``: ``||grad E_k(w_k)|| + 2 l lambda L``.

    ``L`` defaults to the mean smoothness of ``f``.
    """
    if L is None:
        L = obj.L_mean
    grad = envelope_gradient(a, obj, a.anchor)
    return float(np.linalg.norm(grad)) + 2.0 * g.lipschitz_const() * a.lam * L
