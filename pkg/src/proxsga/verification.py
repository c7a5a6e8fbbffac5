"""Verification suites: oracle equivalence and property checks.

Each suite returns a :class:`SuiteReport` listing named checks with the
measured value and the tolerance it was held to. The CLI ``verify``
command and the acceptance tests both run these.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .envelope import (aux_objective, envelope_gradient, envelope_majorant_value,
                       make_anchor, stationarity_bound,
                       subgradient_residual)
from .losses import ErmObjective, lorenz_deriv, lorenz_value
from .optimizers import (MbsgaConfig, VrsgaConfig, ceil_pow, estimate_sigma,
                         mbsga_gradient_bound, mbsga_iterations_for_passes,
                         mbsga_run, variance_bound_check, vrsga_derive_params,
                         vrsga_direction, vrsga_iterations_for_passes,
                         vrsga_run)
from .regularizers import LogSumRegularizer
from .synthetic import make_classification, make_gaussian


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, value, tolerance, detail=""):
        self.checks.append(Check(name, bool(passed), float(value), float(tolerance), detail))

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed,
                "seconds": self.seconds,
                "checks": [asdict(c) for c in self.checks]}


def _timed(fn: Callable[..., SuiteReport]):
    def wrapper(*args, **kwargs) -> SuiteReport:
        t0 = time.perf_counter()
        report = fn(*args, **kwargs)
        report.seconds = time.perf_counter() - t0
        return report
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=size))


@_timed
def prox_suite(cases: int = 1000, grid_step: float = 1e-6, seed: int = 0,
               tol: float = 1e-8) -> SuiteReport:
    """Closed-form log-sum prox against the grid-search oracle."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("prox")
    worst = -np.inf
    worst_case = None
    for _ in range(cases):
        kappa = rng.uniform(1e-3, 10.0)
        nu = rng.uniform(1e-2, 10.0)
        lam = rng.uniform(1e-3, 10.0)
        w = rng.uniform(-20.0, 20.0)
        g = LogSumRegularizer(kappa, nu, 1)
        x_cf = g.prox_scalar(lam, w)
        x_or = g.prox_oracle_scalar(lam, w, grid_step)
        gap = float(g.prox_objective(lam, w, x_cf) - g.prox_objective(lam, w, x_or))
        if gap > worst:
            worst, worst_case = gap, (kappa, nu, lam, w)
    rep.add("closed_form_minus_oracle_objective", worst <= tol, worst, tol,
            f"worst case (kappa, nu, lam, w) = {worst_case}")

    # monotonicity of |prox| in |w| on a sampled grid
    g = LogSumRegularizer(1.0, 0.5, 1)
    ws = np.linspace(0.0, 5.0, 501)
    mags = np.abs([g.prox_oracle_scalar(0.7, w, 1e-4) for w in ws])
    drops = float(np.max(np.maximum(mags[:-1] - mags[1:], 0.0)))
    rep.add("oracle_monotone_in_abs_w", drops == 0.0, drops, 0.0)
    return rep


def _fd_grad(fun, x, h):
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return out


def _rel_err(approx, exact):
    denom = max(np.linalg.norm(exact), np.linalg.norm(approx), 1e-12)
    return float(np.linalg.norm(approx - exact) / denom)


@_timed
def gradient_suite(points: int = 100, n: int = 50, d: int = 10, h: float = 1e-5,
                   tol: float = 1e-5, seed: int = 0) -> SuiteReport:
    """grad f and grad E against central finite differences."""
    rng = np.random.default_rng(seed)
    obj = ErmObjective(make_gaussian(n, d, seed=seed))
    g = LogSumRegularizer(1.0 / d, 1.0, d)
    rep = SuiteReport("gradient")
    worst_f = worst_E = 0.0
    for _ in range(points):
        w = rng.normal(size=d)
        worst_f = max(worst_f, _rel_err(_fd_grad(obj.value, w, h), obj.full_gradient(w)))
        lam = _log_uniform(rng, 1e-2, 10.0)
        a = make_anchor(g, lam, rng.normal(size=d))
        fd = _fd_grad(lambda x: envelope_majorant_value(a, obj, g, x), w, h)
        worst_E = max(worst_E, _rel_err(fd, envelope_gradient(a, obj, w)))
    rep.add("grad_f_vs_central_differences", worst_f <= tol, worst_f, tol)
    rep.add("grad_E_vs_central_differences", worst_E <= tol, worst_E, tol)

    v = rng.uniform(-10, 3, size=10_000)
    fd = (lorenz_value(v + h) - lorenz_value(v - h)) / (2 * h)
    err = float(np.max(np.abs(fd - lorenz_deriv(v))))
    rep.add("lorenz_deriv_vs_central_differences", err <= 1e-6, err, 1e-6)
    return rep


@_timed
def envelope_suite(sweeps: int = 10_000, n: int = 50, d: int = 10,
                   tol: float = 1e-9, seed: int = 0) -> SuiteReport:
    """Majorization, touching and (L + 1/lambda)-smoothness of the majorant."""
    rng = np.random.default_rng(seed)
    obj = ErmObjective(make_gaussian(n, d, seed=seed + 1))
    rep = SuiteReport("envelope")
    worst_major = -np.inf   # max of h_tilde(w) - E(w)
    worst_touch = 0.0
    worst_ratio = 0.0       # max of ratio / (L + 1/lam)
    worst_recon = 0.0
    worst_stat = -np.inf    # max of residual - bound
    for _ in range(sweeps):
        g = LogSumRegularizer(_log_uniform(rng, 1e-3, 2.0), _log_uniform(rng, 0.05, 5.0), d)
        lam = _log_uniform(rng, 1e-2, 10.0)
        scale = _log_uniform(rng, 0.05, 5.0)
        wk = scale * rng.normal(size=d)
        w = wk + _log_uniform(rng, 1e-3, 5.0) * rng.normal(size=d)
        a = make_anchor(g, lam, wk)

        worst_major = max(worst_major,
                          aux_objective(obj, g, lam, w) - envelope_majorant_value(a, obj, g, w))
        worst_touch = max(worst_touch, abs(envelope_majorant_value(a, obj, g, wk)
                                           - aux_objective(obj, g, lam, wk)))
        worst_recon = max(worst_recon, abs(a.envelope_at_anchor
                                           - g.prox_vector(lam, wk).envelope_value))
        x = w + _log_uniform(rng, 1e-3, 5.0) * rng.normal(size=d)
        ratio = (np.linalg.norm(envelope_gradient(a, obj, w) - envelope_gradient(a, obj, x))
                 / np.linalg.norm(w - x))
        worst_ratio = max(worst_ratio, ratio / (obj.L_mean + 1.0 / lam))
        worst_stat = max(worst_stat,
                         subgradient_residual(a, obj) - stationarity_bound(a, obj, g))
    rep.add("majorization E(w) >= h_tilde(w)", worst_major <= tol, worst_major, tol)
    rep.add("touching |E(w_k) - h_tilde(w_k)|", worst_touch <= tol, worst_touch, tol)
    rep.add("smoothness ratio / (L + 1/lambda)", worst_ratio <= 1 + 1e-8, worst_ratio, 1 + 1e-8)
    rep.add("envelope DC reconstruction at anchor", worst_recon <= 1e-10, worst_recon, 1e-10)
    rep.add("subgradient residual <= stationarity bound", worst_stat <= 0.0, worst_stat, 0.0)
    return rep


@_timed
def moreau_suite(draws: int = 10_000, seed: int = 0) -> SuiteReport:
    """Moreau gap, prox displacement and Lipschitz bounds of the log-sum penalty."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("moreau")
    gap_v = disp_v = lip_v = stat_v = 0
    worst_gap = worst_disp = worst_lip = -np.inf
    worst_stat = 0.0
    for _ in range(draws):
        d = int(rng.integers(1, 30))
        g = LogSumRegularizer(_log_uniform(rng, 1e-3, 10.0), _log_uniform(rng, 1e-2, 10.0), d)
        lam = _log_uniform(rng, 1e-3, 10.0)
        l = g.lipschitz_const()
        w = _log_uniform(rng, 1e-2, 20.0) * rng.normal(size=d)
        z = w + _log_uniform(rng, 1e-3, 20.0) * rng.normal(size=d)
        res = g.prox_vector(lam, w)
        gap = g.value(w) - res.envelope_value - l * l * lam / 2
        disp = np.linalg.norm(w - res.point) - 2 * l * lam
        lip = abs(g.value(z) - g.value(w)) - l * np.linalg.norm(z - w)
        gap_v += gap > 0
        disp_v += disp > 0
        lip_v += lip > 0
        worst_gap, worst_disp, worst_lip = max(worst_gap, gap), max(worst_disp, disp), max(worst_lip, lip)
        nz = res.point != 0
        if np.any(nz):
            zeta = res.point[nz]
            lhs = (w[nz] - zeta) / lam
            rhs = g.kappa * np.sign(zeta) / (g.nu + np.abs(zeta))
            err = float(np.max(np.abs(lhs - rhs)))
            worst_stat = max(worst_stat, err)
            stat_v += err > 1e-8
    rep.add("moreau_gap_violations", gap_v == 0, gap_v, 0, f"max excess {worst_gap:.3e}")
    rep.add("prox_displacement_violations", disp_v == 0, disp_v, 0, f"max excess {worst_disp:.3e}")
    rep.add("lipschitz_violations", lip_v == 0, lip_v, 0, f"max excess {worst_lip:.3e}")
    rep.add("prox_point_subgradient_stationarity", stat_v == 0, worst_stat, 1e-8)
    return rep


def tiny_variance_instance(seed: int = 3):
    """``n = 5, d = 2`` problem and a point where every margin is below 1."""
    ds = make_gaussian(5, 2, seed=seed)
    obj = ErmObjective(ds)
    w = np.array([0.3, -0.2])
    return obj, w


@_timed
def variance_suite(trials: int = 100_000, Ms=(1, 2, 5), seed: int = 0) -> SuiteReport:
    """Mini-batch direction variance against ``sigma(w)^2 / M``."""
    obj, w = tiny_variance_instance()
    g = LogSumRegularizer(0.5, 1.0, 2)
    lam = 0.5
    rep = SuiteReport("variance")
    P = np.stack([obj.sample_gradient(w, j) for j in range(obj.n)])
    full = obj.full_gradient(w)
    for M in Ms:
        chk = variance_bound_check(obj, g, w, lam, M, trials, seed=seed + M)
        # independent route: enumerate all n^M equiprobable index tuples
        exact = np.mean([np.sum((P[list(t)].mean(axis=0) - full) ** 2)
                         for t in itertools.product(range(obj.n), repeat=M)])
        rep.add(f"M={M}: enumerated variance == sigma^2/M",
                abs(exact - chk.bound) <= 1e-12 * max(1.0, chk.bound),
                abs(exact - chk.bound), 1e-12)
        z = abs(chk.empirical - chk.bound) / chk.stderr
        rep.add(f"M={M}: |empirical - sigma^2/M| in standard errors", z <= 3.0, z, 3.0,
                f"empirical {chk.empirical:.6g}, bound {chk.bound:.6g}")
        ratio = chk.empirical / chk.bound
        rep.add(f"M={M}: empirical / (sigma^2/M)", ratio <= 1.05, ratio, 1.05)
    census = variance_bound_check(obj, g, w, lam, obj.n, 1, exhaustive=True)
    rep.add("exhaustive mini-batch gives zero deviation", census.empirical == 0.0,
            census.empirical, 0.0)
    return rep


@_timed
def vrsga_suite(redraws: int = 100_000, seed: int = 0) -> SuiteReport:
    """VRSGA direction: exhaustive-I identity and Monte-Carlo unbiasedness."""
    ds = make_gaussian(6, 3, seed=seed + 11)
    obj = ErmObjective(ds)
    g = LogSumRegularizer(1.0 / 3, 1.0, 3)
    rng = np.random.default_rng(seed)
    p = vrsga_derive_params(20, obj.n, 1.0 / 3, 1.0 / 3, obj.L_max)
    rep = SuiteReport("vrsga")
    w_snap = rng.normal(scale=0.5, size=3)
    w_t = w_snap + rng.normal(scale=0.3, size=3)
    coefs = obj.sample_coefs(w_snap)
    G = obj.weighted_rows_sum(None, coefs, float(obj.n))
    z = g.prox_coords(p.lam, w_t)
    grad_E = obj.full_gradient(w_t) + (w_t - z) / p.lam

    V_all = vrsga_direction(obj, p.lam, w_t, z, G, coefs, np.arange(obj.n))
    rep.add("exhaustive I reproduces grad E bitwise",
            np.array_equal(V_all, grad_E), float(np.max(np.abs(V_all - grad_E))), 0.0)

    z1 = g.prox_coords(p.lam, w_snap)
    V_1 = vrsga_direction(obj, p.lam, w_snap, z1, G, coefs, rng.integers(0, obj.n, p.b))
    E_1 = G + (w_snap - z1) / p.lam
    err1 = float(np.max(np.abs(V_1 - E_1)))
    rep.add("at the snapshot V equals G + prox term", err1 <= 1e-15, err1, 1e-15)

    Vs = np.empty((redraws, 3))
    for r in range(redraws):
        Vs[r] = vrsga_direction(obj, p.lam, w_t, z, G, coefs, rng.integers(0, obj.n, p.b))
    mean = Vs.mean(axis=0)
    se = Vs.std(axis=0, ddof=1) / math.sqrt(redraws)
    zmax = float(np.max(np.abs(mean - grad_E) / se))
    rep.add("Monte-Carlo mean within 3 SE per coordinate", zmax <= 3.0, zmax, 3.0)
    return rep


def _variance_on_points(obj: ErmObjective, W: np.ndarray) -> np.ndarray:
    """Exact per-sample gradient variance at each row of ``W``."""
    X = obj.X.toarray()
    margins = (W @ X.T) * obj.y                      # (P, n)
    c = lorenz_deriv(margins) * obj.y                # (P, n)
    grads = c[:, :, None] * X[None, :, :]            # (P, n, d)
    dev = grads - grads.mean(axis=1, keepdims=True)
    return np.mean(np.sum(dev ** 2, axis=2), axis=1)


def _aux_on_points(obj: ErmObjective, g: LogSumRegularizer, lam, W) -> np.ndarray:
    X = obj.X.toarray()
    f = np.mean(lorenz_value((W @ X.T) * obj.y), axis=1)
    Z = g.prox_coords(lam, W)
    env = np.sum((W - Z) ** 2, axis=1) / (2 * lam) + np.sum(g.coord_values(Z), axis=1)
    return f + env


def tiny_bound_instance():
    X = np.array([[1.0, 0.4], [0.8, -0.6], [-0.5, 1.0], [-1.0, -0.3]])
    y = np.array([1.0, 1.0, -1.0, 1.0])
    from .data import SparseDataset
    return ErmObjective(SparseDataset.from_matrix(X, y))


@_timed
def lemma_suite(runs: int = 50, N: int = 200, alpha: float = 0.25,
                theta: float = 0.25, box: float = 8.0, grid: int = 801) -> SuiteReport:
    """Mean of ``||grad E_k(w_k)||^2`` over MBSGA runs against the MBSGA gradient bound.

    ``sigma`` and ``min h_tilde`` come from a dense grid over ``[-box, box]^2``
    refined by Nelder-Mead; the grid minimum can only overestimate
    ``min h_tilde``, which makes the computed bound conservative.
    """
    obj = tiny_bound_instance()
    d = obj.d
    g = LogSumRegularizer(1.0 / d, 1.0, d)
    lam = float(N) ** (-theta)
    rep = SuiteReport("lemma")

    ax = np.linspace(-box, box, grid)
    W = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, d)

    var = _variance_on_points(obj, W)
    i = int(np.argmax(var))
    res = optimize.minimize(lambda w: -_variance_on_points(obj, w[None, :])[0], W[i],
                            method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    sigma_sq = max(float(var[i]), -float(res.fun))
    sigma = math.sqrt(sigma_sq)

    aux = _aux_on_points(obj, g, lam, W)
    j = int(np.argmin(aux))
    on_edge = bool(np.any(np.abs(W[j]) >= box))
    res = optimize.minimize(lambda w: aux_objective(obj, g, lam, w), W[j],
                            method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    aux_min = min(float(aux[j]), float(res.fun))
    w1 = np.zeros(d)
    delta_tilde = 2.0 * (aux_objective(obj, g, lam, w1) - aux_min)
    bound = mbsga_gradient_bound(delta_tilde, N, alpha, theta, obj.L_mean, sigma)

    per_run = []
    iterates = []
    for s in range(runs):
        cfg = MbsgaConfig(N=N, alpha=alpha, theta=theta, sigma=sigma, seed=1000 + s,
                          output_rule="last_iterate", record_every=1, grad_every=1)
        tr = mbsga_run(obj, g, cfg, callback=lambda k, w: iterates.append(w))
        gn = tr.column("grad_E_norm")[:N]    # w^1 .. w^N
        per_run.append(float(np.mean(gn ** 2)))
    lhs = float(np.mean(per_run))
    # sigma must dominate the gradient variance at every iterate visited
    iter_var = float(np.max(_variance_on_points(obj, np.array(iterates))))
    rep.add("min h_tilde found inside the search box", not on_edge, float(on_edge), 0.0)
    rep.add("iterate variance <= sigma^2", iter_var <= sigma_sq, iter_var, sigma_sq)
    rep.add("mean ||grad E_k(w_k)||^2 <= gradient bound", lhs <= bound, lhs, bound,
            f"sigma={sigma:.6g}, delta_tilde={delta_tilde:.6g}, L={obj.L_mean:.6g}")
    return rep


@_timed
def convergence_suite(passes: float = 15.0, seed: int = 0, ratio_tol: float = 0.2
                      ) -> SuiteReport:
    """Both solvers on the synthetic mixture at a fixed pass budget."""
    ds = make_classification(seed=seed)
    obj = ErmObjective(ds)
    g = LogSumRegularizer(1.0 / ds.d, 1.0, ds.d)
    rep = SuiteReport("convergence")

    N = mbsga_iterations_for_passes(ds.n, passes, 0.25)
    sigma, _ = estimate_sigma(obj, g, N, 0.25, 0.25, seed=seed + 7919)
    tr = mbsga_run(obj, g, MbsgaConfig(N=N, sigma=sigma, seed=seed,
                                       output_rule="last_iterate"))
    _convergence_checks(rep, "mbsga", tr, ratio_tol)

    N = vrsga_iterations_for_passes(ds.n, passes, 1.0 / 3)
    tr = vrsga_run(obj, g, VrsgaConfig(N=N, seed=seed, output_rule="last_iterate"))
    _convergence_checks(rep, "vrsga", tr, ratio_tol)
    return rep


def _convergence_checks(rep, name, tr, ratio_tol):
    h = tr.column("h")
    gn = tr.column("grad_E_norm")
    rep.add(f"{name}: h(w_final) < h(w_1)", h[-1] < h[0], h[-1], h[0])
    tail = float(np.mean(h[-max(1, len(h) // 10):]))
    rep.add(f"{name}: mean h over last 10% < h(w_1)", tail < h[0], tail, h[0])
    ratio = float(np.min(gn) / gn[0])
    rep.add(f"{name}: min ||grad E|| / initial", ratio <= ratio_tol, ratio, ratio_tol,
            f"{tr.grad_calls} gradient calls")


@_timed
def counters_suite(seed: int = 0) -> SuiteReport:
    """Gradient/prox call counters against closed-form counts."""
    ds = make_gaussian(64, 5, seed=seed)
    obj = ErmObjective(ds)
    g = LogSumRegularizer(0.2, 1.0, 5)
    rep = SuiteReport("counters")
    for N, alpha in ((50, 0.25), (120, 0.5), (400, 0.25)):
        M = ceil_pow(N, alpha)
        tr = mbsga_run(obj, g, MbsgaConfig(N=N, alpha=alpha, seed=seed, output_rule="last_iterate",
                                           record_every=N, grad_every=0))
        ok = tr.grad_calls == N * M and tr.prox_calls == N
        rep.add(f"mbsga N={N} alpha={alpha} last_iterate", ok, tr.grad_calls, N * M,
                f"prox {tr.prox_calls} expected {N}")
        tr = mbsga_run(obj, g, MbsgaConfig(N=N, alpha=alpha, seed=seed, output_rule="random_R",
                                           record_every=N, grad_every=0))
        K = tr.params["K"]
        ok = tr.grad_calls == K * M and tr.prox_calls == K + 1
        rep.add(f"mbsga N={N} alpha={alpha} random_R", ok, tr.grad_calls, K * M,
                f"prox {tr.prox_calls} expected {K + 1}")
    for N, alpha in ((24, 1.0 / 3), (40, 0.25), (90, 0.5)):
        p = vrsga_derive_params(N, obj.n, alpha, 1.0 / 3, obj.L_max)
        tr = vrsga_run(obj, g, VrsgaConfig(N=N, alpha=alpha, seed=seed, output_rule="last_iterate",
                                           record_every=10**6, grad_every=0))
        want = p.S * obj.n + p.S * p.m * p.b
        ok = tr.grad_calls == want and tr.prox_calls == p.S * p.m
        rep.add(f"vrsga N={N} alpha={alpha:.3g} last_iterate", ok, tr.grad_calls, want,
                f"prox {tr.prox_calls} expected {p.S * p.m}")
        tr = vrsga_run(obj, g, VrsgaConfig(N=N, alpha=alpha, seed=seed, output_rule="random_R",
                                           record_every=10**6, grad_every=0))
        K = tr.params["K"]
        want = K * obj.n + K * p.m * p.b
        ok = tr.grad_calls == want and tr.prox_calls == K * p.m + 1
        rep.add(f"vrsga N={N} alpha={alpha:.3g} random_R", ok, tr.grad_calls, want,
                f"prox {tr.prox_calls} expected {K * p.m + 1}")
    return rep


SUITES = {
    "prox": prox_suite,
    "gradient": gradient_suite,
    "envelope": envelope_suite,
    "moreau": moreau_suite,
    "variance": variance_suite,
    "vrsga": vrsga_suite,
    "lemma": lemma_suite,
    "convergence": convergence_suite,
    "counters": counters_suite,
}


def run_suite(name: str, **kwargs) -> SuiteReport:
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None
    return fn(**kwargs)
