"""Mini-batch (MBSGA) and variance-reduced (VRSGA) stochastic gradient solvers.

Both methods minimize ``h = f + g`` by stepping along the gradient of the
majorant ``E_k(w) = f(w) + U_k(w)`` whose gradient at the current iterate is
``grad f(w) + (w - prox_{lambda g}(w)) / lambda``; the first term is replaced
by a mini-batch estimate (MBSGA) or an SVRG-style corrected estimate
(VRSGA).

Gradient calls are counted per sample gradient and prox calls per
full-vector proximal evaluation. Monitoring work done for trace records
(objective values, exact majorant gradients) is not counted and is excluded
from the recorded wall-clock time.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .data import SparseDataset
from .losses import ErmObjective
from .regularizers import Regularizer

log = logging.getLogger(__name__)

OUTPUT_RULES = ("random_R", "last_iterate")
DIVERGENCE_FACTOR = 1e6

# sampler(rng, size) -> array of sample indices; a test hook for forcing draws
Sampler = Callable[[np.random.Generator, int], np.ndarray]


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, value: float):
        self.iteration = iteration
        self.value = value
        super().__init__(f"divergence at iteration {iteration}: h(w) = {value!r}")


def ceil_pow(base: float, exponent: float) -> int:
    """``ceil(base ** exponent)`` robust to round-off (``10000**0.25``)."""
    x = float(base) ** exponent
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return max(int(r), 1)
    return max(int(math.ceil(x)), 1)


class MbsgaParams(NamedTuple):
    M: int
    lam: float
    L_E: float
    gamma: float


class VrsgaParams(NamedTuple):
    m: int
    b: int
    S: int
    lam: float
    L_E: float
    gamma: float


def mbsga_derive_params(N: int, alpha: float, theta: float, L: float,
                        sigma: float) -> MbsgaParams:
    if N < 1:
        raise ValueError("N must be >= 1")
    if L < 0 or sigma < 0:
        raise ValueError("L and sigma must be >= 0")
    M = ceil_pow(N, alpha)
    lam = float(N) ** (-theta)
    L_E = L + 1.0 / lam
    gamma = 1.0 / L_E
    if sigma > 0:
        gamma = min(gamma, 1.0 / (sigma * math.sqrt(N)))
    return MbsgaParams(M, lam, L_E, gamma)


def vrsga_derive_params(N: int, n: int, alpha: float, theta: float,
                        L: float) -> VrsgaParams:
    if N < 1 or n < 1:
        raise ValueError("N and n must be >= 1")
    m = ceil_pow(n, alpha)
    b = m * m
    S = -(-N // m)
    lam = float(S * m) ** (-theta)
    L_E = L + 1.0 / lam
    gamma = 1.0 / (6.0 * L_E)
    return VrsgaParams(m, b, S, lam, L_E, gamma)


def mbsga_iterations_for_passes(n: int, passes: float, alpha: float) -> int:
    """Largest ``N`` with ``N * ceil(N^alpha) <= passes * n`` (at least 1)."""
    budget = passes * n
    lo, hi = 1, max(1, int(budget))
    if lo * ceil_pow(lo, alpha) > budget:
        return 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid * ceil_pow(mid, alpha) <= budget:
            lo = mid
        else:
            hi = mid - 1
    return lo


def vrsga_iterations_for_passes(n: int, passes: float, alpha: float) -> int:
    """Nominal ``N = S * m`` for the largest ``S`` with
    ``S * (n + m * b) <= passes * n`` (at least one outer iteration)."""
    m = ceil_pow(n, alpha)
    S = max(1, int(math.floor(passes * n / (n + m * m * m))))
    return S * m


@dataclass
class MbsgaConfig:
    N: int
    alpha: float = 0.25
    theta: float = 0.25
    sigma: float = 0.0
    seed: int = 0
    output_rule: str = "random_R"
    record_every: int = 1
    grad_every: int = 1  # record ||grad E|| on every j-th record; 0 = never

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.output_rule not in OUTPUT_RULES:
            raise ValueError(f"output_rule must be one of {OUTPUT_RULES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def derive(self, L: float) -> MbsgaParams:
        return mbsga_derive_params(self.N, self.alpha, self.theta, L, self.sigma)


@dataclass
class VrsgaConfig:
    N: int
    alpha: float = 1.0 / 3.0
    theta: float = 1.0 / 3.0
    seed: int = 0
    output_rule: str = "random_R"
    record_every: int = 1
    grad_every: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.output_rule not in OUTPUT_RULES:
            raise ValueError(f"output_rule must be one of {OUTPUT_RULES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def derive(self, n: int, L: float) -> VrsgaParams:
        return vrsga_derive_params(self.N, n, self.alpha, self.theta, L)


class TraceRecord(NamedTuple):
    iter: int
    time_s: float
    h: float
    log_h: float
    grad_calls: int
    prox_calls: int
    grad_E_norm: Optional[float]


@dataclass
class RunTrace:
    algorithm: str
    params: dict
    records: list = field(default_factory=list)
    iterations: int = 0
    grad_calls: int = 0
    prox_calls: int = 0
    final_w: Optional[np.ndarray] = None
    output_w: Optional[np.ndarray] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def _as_objective(data) -> ErmObjective:
    if isinstance(data, ErmObjective):
        return data
    if isinstance(data, SparseDataset):
        return ErmObjective(data)
    raise TypeError(f"expected ErmObjective or SparseDataset, got {type(data)!r}")


def _uniform_sampler(n: int) -> Sampler:
    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(0, n, size=size)
    return draw


class _Recorder:
    """Evaluates h and ||grad E|| at record points, off the algorithm clock."""

    def __init__(self, obj, g, lam, trace, record_every, grad_every):
        self.obj, self.g, self.lam = obj, g, lam
        self.trace = trace
        self.record_every = record_every
        self.grad_every = grad_every
        self.elapsed = 0.0
        self.h0 = None
        self._t = time.perf_counter()
        self._nrec = 0

    def pause(self):
        self.elapsed += time.perf_counter() - self._t

    def resume(self):
        self._t = time.perf_counter()

    def maybe_record(self, it: int, w, force: bool = False):
        if not force and it % self.record_every != 0:
            return
        self.pause()
        h = self.obj.value(w) + self.g.value(w)
        if not np.isfinite(h) or (
                self.h0 is not None
                and h > DIVERGENCE_FACTOR * max(self.h0, np.finfo(float).tiny)):
            raise DivergenceError(it, h)
        if self.h0 is None:
            self.h0 = h
        gnorm = None
        if self.grad_every and self._nrec % self.grad_every == 0:
            z = self.g.prox_coords(self.lam, w)
            gnorm = float(np.linalg.norm(self.obj.full_gradient(w) + (w - z) / self.lam))
        self._nrec += 1
        t = self.trace
        self.trace.records.append(TraceRecord(
            it, self.elapsed, h, math.log(h) if h > 0 else float("-inf"),
            t.grad_calls, t.prox_calls, gnorm))
        self.resume()


def mbsga_run(data, g: Regularizer, cfg: MbsgaConfig, w0=None,
              sampler: Optional[Sampler] = None,
              callback: Optional[Callable[[int, np.ndarray], None]] = None
              ) -> RunTrace:
    """Run the mini-batch algorithm.

    ``random_R`` draws ``R ~ U{1..N}``, runs ``R - 1`` steps and returns
    ``prox(w^R)``; ``last_iterate`` runs ``N`` steps and returns the last
    iterate without a final prox. ``L`` is the mean smoothness of ``f``.
    ``callback(k, w)`` sees every iterate, starting with ``k = 0``.
    """
    obj = _as_objective(data)
    n = obj.n
    p = cfg.derive(obj.L_mean)
    rng = np.random.default_rng(cfg.seed)
    sampler = sampler or _uniform_sampler(n)

    if cfg.output_rule == "random_R":
        R = int(rng.integers(1, cfg.N + 1))
        K = R - 1
    else:
        R = None
        K = cfg.N

    trace = RunTrace("mbsga", {"N": cfg.N, "M": p.M, "lambda": p.lam,
                               "L": obj.L_mean, "L_E": p.L_E, "gamma": p.gamma,
                               "sigma": cfg.sigma, "R": R, "K": K})
    w = np.zeros(obj.d) if w0 is None else np.array(w0, dtype=np.float64)
    rec = _Recorder(obj, g, p.lam, trace, cfg.record_every, cfg.grad_every)
    rec.maybe_record(0, w, force=True)
    if callback:
        callback(0, w)

    for k in range(1, K + 1):
        z = g.prox_coords(p.lam, w)
        trace.prox_calls += 1
        idx = sampler(rng, p.M)
        grad = obj.minibatch_gradient(w, idx)
        trace.grad_calls += len(idx)
        w = w - p.gamma * (grad + (w - z) / p.lam)
        trace.iterations = k
        if not np.all(np.isfinite(w)):
            raise DivergenceError(k, float("nan"))
        rec.maybe_record(k, w, force=(k == K))
        if callback:
            callback(k, w)

    trace.final_w = w
    if cfg.output_rule == "random_R":
        trace.output_w = g.prox_coords(p.lam, w)
        trace.prox_calls += 1
    else:
        trace.output_w = w.copy()
    return trace


def vrsga_direction(obj: ErmObjective, lam: float, w_t, z_t, G, snap_coefs,
                    indices) -> np.ndarray:
    """Corrected direction
    ``mean_{j in I}(grad f_j(w_t) - grad f_j(w_snap)) + G + (w_t - z_t)/lambda``.

    Snapshot per-sample gradients come from cached coefficients, so only the
    ``|I|`` gradients at ``w_t`` are new work. Evaluated as
    ``mb(w_t) + (G - mb(w_snap))`` so an exhaustive ``I`` reproduces
    ``grad f(w_t)`` exactly.
    """
    cur = obj.minibatch_gradient(w_t, indices)
    snap = obj.minibatch_gradient(None, indices, coefs=snap_coefs)
    return (cur + (G - snap)) + (w_t - z_t) / lam


def vrsga_run(data, g: Regularizer, cfg: VrsgaConfig, w0=None,
              sampler: Optional[Sampler] = None,
              callback: Optional[Callable[[int, np.ndarray], None]] = None
              ) -> RunTrace:
    """Run the variance-reduced algorithm (``L`` = max per-sample smoothness).

    ``random_R`` runs ``R ~ U{1..S}`` outer iterations and returns
    ``prox(w^R_T)`` with ``T ~ U{1..m}``; ``last_iterate`` runs all ``S``
    outer iterations and returns ``w^S_{m+1}``.
    """
    obj = _as_objective(data)
    n = obj.n
    p = cfg.derive(n, obj.L_max)
    rng = np.random.default_rng(cfg.seed)
    sampler = sampler or _uniform_sampler(n)

    if cfg.output_rule == "random_R":
        R = int(rng.integers(1, p.S + 1))
        K = R
    else:
        R = None
        K = p.S

    trace = RunTrace("vrsga", {"N": cfg.N, "m": p.m, "b": p.b, "S": p.S,
                               "lambda": p.lam, "L": obj.L_max, "L_E": p.L_E,
                               "gamma": p.gamma, "R": R, "K": K})
    w_snap = np.zeros(obj.d) if w0 is None else np.array(w0, dtype=np.float64)
    rec = _Recorder(obj, g, p.lam, trace, cfg.record_every, cfg.grad_every)
    rec.maybe_record(0, w_snap, force=True)
    if callback:
        callback(0, w_snap)

    it = 0
    total = K * p.m
    last_inner: list = []
    for k in range(1, K + 1):
        coefs = obj.sample_coefs(w_snap)
        G = obj.weighted_rows_sum(None, coefs, float(n))
        trace.grad_calls += n
        keep = cfg.output_rule == "random_R" and k == K
        w = w_snap.copy()
        for _ in range(p.m):
            if keep:
                last_inner.append(w)
            z = g.prox_coords(p.lam, w)
            trace.prox_calls += 1
            idx = sampler(rng, p.b)
            V = vrsga_direction(obj, p.lam, w, z, G, coefs, idx)
            trace.grad_calls += len(idx)
            w = w - p.gamma * V
            it += 1
            trace.iterations = it
            if not np.all(np.isfinite(w)):
                raise DivergenceError(it, float("nan"))
            rec.maybe_record(it, w, force=(it == total))
            if callback:
                callback(it, w)
        w_snap = w

    trace.final_w = w_snap
    if cfg.output_rule == "random_R":
        T = int(rng.integers(1, p.m + 1))
        trace.params["T"] = T
        trace.output_w = g.prox_coords(p.lam, last_inner[T - 1])
        trace.prox_calls += 1
    else:
        trace.output_w = w_snap.copy()
    return trace


def estimate_sigma(data, g: Regularizer, N: int, alpha: float = 0.25,
                   theta: float = 0.25, trial_iters: int = 50, seed: int = 1,
                   w0=None, sampler: Optional[Sampler] = None):
    """Estimate the gradient-noise level from a short MBSGA run.

    Runs ``trial_iters`` steps with ``gamma = 1 / L_E`` and at each step
    computes ``sigma_k^2 = mean_j ||grad F(w_k, xi_j) - grad f(w_k)||^2`` over
    the ``M`` samples drawn. Returns ``(max_k sigma_k, [sigma_k])``. Callers
    must pass a seed different from the one used for the main run.
    """
    obj = _as_objective(data)
    p = mbsga_derive_params(N, alpha, theta, obj.L_mean, 0.0)
    rng = np.random.default_rng(seed)
    sampler = sampler or _uniform_sampler(obj.n)
    w = np.zeros(obj.d) if w0 is None else np.array(w0, dtype=np.float64)
    series = []
    for _ in range(trial_iters):
        z = g.prox_coords(p.lam, w)
        idx = np.sort(np.asarray(sampler(rng, p.M)))
        coefs = obj.sample_coefs(w, idx)
        per_sample = obj.X[idx].multiply(coefs[:, None]).toarray()
        full = obj.full_gradient(w)
        series.append(math.sqrt(float(np.mean(np.sum((per_sample - full) ** 2, axis=1)))))
        grad = obj.minibatch_gradient(w, idx)
        w = w - p.gamma * (grad + (w - z) / p.lam)
    return max(series), series


class VarianceCheck(NamedTuple):
    empirical: float
    bound: float
    stderr: float
    sigma_sq: float


def variance_bound_check(data, g: Regularizer, w, lam: float, M: int,
                         trials: int, seed: int = 0,
                         exhaustive: bool = False) -> VarianceCheck:
    """Empirical ``E||grad A - grad E||^2`` against ``sigma(w)^2 / M``.

    ``sigma(w)^2`` is the exact per-sample gradient variance at ``w`` by
    enumeration. With ``exhaustive=True`` the mini-batch is the whole data
    set (a single census draw).
    """
    obj = _as_objective(data)
    w = np.asarray(w, dtype=np.float64)
    z = g.prox_coords(lam, w)
    prox_term = (w - z) / lam
    grad_E = obj.full_gradient(w) + prox_term
    sigma_sq = obj.gradient_variance(w)
    if exhaustive:
        grad_A = obj.minibatch_gradient(w, np.arange(obj.n)) + prox_term
        diff = grad_A - grad_E
        return VarianceCheck(float(diff @ diff), sigma_sq / obj.n, 0.0, sigma_sq)
    table = np.stack([obj.sample_gradient(w, j) for j in range(obj.n)])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, obj.n, size=(trials, M))
    grad_A = table[idx].mean(axis=1) + prox_term
    sq = np.sum((grad_A - grad_E) ** 2, axis=1)
    stderr = float(np.std(sq, ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return VarianceCheck(float(np.mean(sq)), sigma_sq / M, stderr, sigma_sq)


def mbsga_gradient_bound(delta_tilde: float, N: int, alpha: float, theta: float,
                         L: float, sigma: float) -> float:
    """Right-hand side of the MBSGA bound on the mean of ``||grad E_k(w_k)||^2``."""
    LN = L + float(N) ** theta
    return (delta_tilde / N * LN
            + sigma / math.sqrt(N) * (delta_tilde + LN / ceil_pow(N, alpha)))
