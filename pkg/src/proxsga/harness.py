"""Experiment runner: load data, derive parameters, run a solver, write a trace."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, TextIO

import numpy as np

from .data import load_dataset
from .losses import ErmObjective
from .optimizers import (MbsgaConfig, RunTrace, VrsgaConfig, estimate_sigma,
                         mbsga_iterations_for_passes, mbsga_run,
                         vrsga_iterations_for_passes, vrsga_run)
from .regularizers import LogSumRegularizer

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "time_s", "h", "log_h", "grad_calls", "prox_calls", "grad_E_norm")
ALGORITHMS = ("mbsga", "vrsga")
DEFAULT_EXPONENTS = {"mbsga": 0.25, "vrsga": 1.0 / 3.0}
TARGET_RECORDS = 1000


@dataclass
class ExperimentConfig:
    data: Optional[str] = None
    format: str = "libsvm"
    dim: Optional[int] = None
    positive_class: int = 1
    labels: Optional[str] = None
    algo: str = "mbsga"
    alpha: Optional[float] = None
    theta: Optional[float] = None
    kappa: Optional[float] = None   # None -> 1/d
    nu: float = 1.0
    passes: float = 15.0
    seed: int = 0
    output_rule: str = "last_iterate"
    sigma: Optional[float] = None   # None -> estimate
    out: Optional[str] = None
    record_every: Optional[int] = None  # None -> about TARGET_RECORDS records
    grad_every: int = 1
    repeat: int = 1

    def validate(self) -> "ExperimentConfig":
        if not self.data:
            raise ValueError("no dataset given (--data)")
        if self.format not in ("libsvm", "idx"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.algo not in ALGORITHMS:
            raise ValueError(f"algo must be one of {ALGORITHMS}")
        if self.output_rule not in ("random_R", "last_iterate"):
            raise ValueError("output_rule must be random_R or last_iterate")
        if self.passes <= 0:
            raise ValueError("passes must be > 0")
        if self.nu <= 0:
            raise ValueError("nu must be > 0")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")
        return self

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        clean = {}
        for key, val in raw.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            clean[key] = val
        return cls(**clean)

    def exponents(self) -> tuple[float, float]:
        default = DEFAULT_EXPONENTS[self.algo]
        return (default if self.alpha is None else self.alpha,
                default if self.theta is None else self.theta)


def sigma_seed(seed: int) -> int:
    """Seed for the noise-estimation run, distinct from the experiment seed."""
    return int(np.random.SeedSequence([seed, 0x51]).generate_state(1)[0])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x) and x < 0:
            return "NA"
        return repr(x)
    return str(x)


def write_trace(trace: RunTrace, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace.records:
        writer.writerow([_fmt(getattr(rec, c)) for c in TRACE_COLUMNS])


def read_trace(path) -> dict[str, np.ndarray]:
    """Read a trace file into columns; blanks and ``NA`` become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for col in TRACE_COLUMNS:
        out[col] = np.array([float(r[col]) if r[col] not in ("", "NA") else np.nan
                             for r in rows])
    return out


def plan(cfg: ExperimentConfig, obj: ErmObjective) -> dict:
    """Derived run parameters for a config, without running anything."""
    alpha, theta = cfg.exponents()
    if cfg.algo == "mbsga":
        N = mbsga_iterations_for_passes(obj.n, cfg.passes, alpha)
    else:
        N = vrsga_iterations_for_passes(obj.n, cfg.passes, alpha)
    every = cfg.record_every or max(1, N // TARGET_RECORDS)
    return {"N": N, "alpha": alpha, "theta": theta, "record_every": every}


def _output_path(cfg: ExperimentConfig) -> Optional[Path]:
    if cfg.out is None:
        return None
    p = Path(cfg.out)
    if cfg.repeat > 1:
        return p.with_name(f"{p.stem}.seed{cfg.seed}{p.suffix}")
    return p


def run_experiment(cfg: ExperimentConfig, stdout: Optional[TextIO] = None,
                   dataset=None) -> RunTrace:
    """Run one experiment and write its trace file (if ``cfg.out`` is set).

    Derived parameters are echoed as ``key = value`` lines on ``stdout``.
    """
    if dataset is None:
        cfg.validate()
        dataset = load_dataset(cfg.data, cfg.format, d=cfg.dim,
                               positive_class=cfg.positive_class, label_path=cfg.labels)
    obj = ErmObjective(dataset)
    kappa = 1.0 / obj.d if cfg.kappa is None else cfg.kappa
    g = LogSumRegularizer(kappa, cfg.nu, obj.d)
    pl = plan(cfg, obj)
    N, alpha, theta = pl["N"], pl["alpha"], pl["theta"]

    echo = {"algo": cfg.algo, "n": obj.n, "d": obj.d, "kappa": kappa, "nu": cfg.nu,
            "l": g.lipschitz_const(), "passes": cfg.passes, "seed": cfg.seed}
    if cfg.algo == "mbsga":
        sigma = cfg.sigma
        if sigma is None:
            sigma, _ = estimate_sigma(obj, g, N, alpha, theta, seed=sigma_seed(cfg.seed))
            echo["sigma_hat"] = sigma
        mc = MbsgaConfig(N=N, alpha=alpha, theta=theta, sigma=sigma, seed=cfg.seed,
                         output_rule=cfg.output_rule, record_every=pl["record_every"],
                         grad_every=cfg.grad_every)
        trace = mbsga_run(obj, g, mc)
    else:
        vc = VrsgaConfig(N=N, alpha=alpha, theta=theta, seed=cfg.seed,
                         output_rule=cfg.output_rule, record_every=pl["record_every"],
                         grad_every=cfg.grad_every)
        trace = vrsga_run(obj, g, vc)
    echo.update(trace.params)
    echo["grad_calls"] = trace.grad_calls
    echo["prox_calls"] = trace.prox_calls
    echo["final_h"] = trace.records[-1].h

    path = _output_path(cfg)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            write_trace(trace, fh)
        echo["trace"] = str(path)
    if stdout is not None:
        for key, val in echo.items():
            stdout.write(f"{key} = {_fmt(val)}\n")
    return trace


def _run_one(cfg: ExperimentConfig) -> tuple[int, str]:
    import io
    buf = io.StringIO()
    run_experiment(cfg, stdout=buf)
    return cfg.seed, buf.getvalue()


def run_repeated(cfg: ExperimentConfig, stdout: TextIO) -> None:
    """Run ``cfg.repeat`` seeds (``seed, seed+1, ...``) in parallel processes."""
    cfg.validate()
    cfgs = [replace(cfg, seed=cfg.seed + i) for i in range(cfg.repeat)]
    if cfg.repeat == 1:
        run_experiment(cfgs[0], stdout=stdout)
        return
    with ProcessPoolExecutor() as pool:
        for seed, text in pool.map(_run_one, cfgs):
            stdout.write(f"# seed {seed}\n{text}")


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
