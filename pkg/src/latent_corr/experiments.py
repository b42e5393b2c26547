"""Monte Carlo harness for the simulation studies.

Every replication draws from its own substream, so results do not depend on
the number of worker processes or the order in which replications finish.
For an experiment seed ``s`` replication ``r`` uses ``replication_seed(s, r)``
at every sample size, so a replication keeps its factor draw across ``n``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import likelihood as lik
from .dist import StandardizedDistribution, from_name, laplace, logistic, scaled_t, std_normal
from .errors import DomainError, ParameterError
from .estimators import binary_mle, hidden_pairs, trinary_moment
from .model import (
    ModelConfig,
    discretize_binary,
    discretize_trinary,
    replication_seed,
    simulate_latent,
)
from .tables import provenance_lines, write_table

LIMIT_QUANTILE_POINTS = 10_000
DEFAULT_GRID = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))


@dataclass(frozen=True)
class CaseSpec:
    """A simulation setting: laws, correlation and thresholds."""

    case_id: str
    noise: StandardizedDistribution
    factor: StandardizedDistribution
    a_star: float = 0.5
    tau: float = 0.0
    tau1: float = -1.0
    tau2: float = 1.0

    def config(self) -> ModelConfig:
        return ModelConfig(self.a_star, self.noise, self.factor, self.tau, self.tau1, self.tau2)

    def to_dict(self) -> dict:
        return {
            "case": self.case_id,
            "noise": self.noise.to_dict(),
            "factor": self.factor.to_dict(),
            "a_star": self.a_star,
            "tau": self.tau,
            "tau1": self.tau1,
            "tau2": self.tau2,
        }


CASES = {
    "1": CaseSpec("1", std_normal(), std_normal()),
    "2": CaseSpec("2", logistic(), std_normal()),
    "3": CaseSpec("3", laplace(), scaled_t(5.0)),
}


def get_case(case, **overrides) -> CaseSpec:
    """Preset case ``1``, ``2`` or ``3`` with optional field overrides."""
    key = str(case).lower().removeprefix("case")
    if key not in CASES:
        raise ParameterError(f"unknown case {case!r}; expected 1, 2 or 3")
    spec = CASES[key]
    overrides = {k: v for k, v in overrides.items() if v is not None}
    for k in ("noise", "factor"):
        if isinstance(overrides.get(k), (str, dict)):
            d = overrides[k]
            overrides[k] = from_name(d) if isinstance(d, str) else from_name(d["family"], d.get("df"))
    return replace(spec, **overrides) if overrides else spec


def _seeds(seed: int, reps: int) -> list[int]:
    return [replication_seed(seed, r) for r in range(reps)]


def _run_parallel(fn, tasks: list, workers: int) -> list:
    """Apply ``fn`` to each task, in order, optionally across processes."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _chunks(seq: list, k: int) -> list[list]:
    k = max(1, min(k, len(seq)))
    size = math.ceil(len(seq) / k)
    return [seq[i : i + size] for i in range(0, len(seq), size)]


# -- curves -------------------------------------------------------------------------


@dataclass
class CurveSet:
    """Sample, averaged and limiting curves for one case."""

    case_id: str
    seed: int
    curves: dict = field(default_factory=dict)  # label -> Curve
    samples: dict = field(default_factory=dict)  # kind -> list of Curve

    def rows(self):
        for label, c in self.curves.items():
            for a, v, _, n, seed in c.rows():
                yield (a, v, label, n, seed)
        for kind, lst in self.samples.items():
            for c in lst:
                for a, v, _, n, seed in c.rows():
                    yield (a, v, kind, n, seed)


def limit_quantile_grid(factor: StandardizedDistribution, points: int = LIMIT_QUANTILE_POINTS) -> np.ndarray:
    """Factor quantiles at the midpoints ``(j - 1/2) / points``."""
    u = (np.arange(points) + 0.5) / points
    return factor._quantile(u)


def curve_experiment(
    case: CaseSpec,
    n: int = 1000,
    n_curves: int = 10,
    grid: Sequence[float] = DEFAULT_GRID,
    seed: int = 0,
    n_trinary: int | None = 500,
) -> CurveSet:
    """Normalized log-likelihood, scaled likelihood and trinary log-likelihood curves.

    Sample ``r`` uses ``replication_seed(seed, r)``. The averaged curves are
    replication means; the limiting curves average the first- and
    second-order limits over a quantile grid of the factor law. Samples with a
    boundary frequency are left out of the scaled-likelihood curves.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or not np.all((grid > 0) & (grid < 1)):
        raise DomainError("grid must lie inside (0, 1)")
    if n_curves < 1:
        raise DomainError("n_curves must be positive")
    cfg = case.config()
    out = CurveSet(case.case_id, seed)
    loglik, scaled, tri = [], [], []
    for r in range(n_curves):
        s = replication_seed(seed, r)
        ls = simulate_latent(cfg, n, s)
        b = discretize_binary(ls, cfg.tau)
        loglik.append(lik.normalized_loglik_curve(b, cfg, grid, seed=s))
        if 0.0 < b.abar < 1.0:
            scaled.append(lik.scaled_likelihood_curve(b, cfg, grid, seed=s))
        if n_trinary:
            lt = simulate_latent(cfg, n_trinary, s)
            t = discretize_trinary(lt, cfg.tau1, cfg.tau2)
            vals = np.array([lik.trinary_log_likelihood(a, t, cfg) for a in grid]) / n_trinary
            tri.append(lik.Curve(grid, vals, {"kind": "trinary-log-lik", "n": n_trinary, "seed": s}))

    ys = limit_quantile_grid(cfg.factor)
    lim1 = float(np.mean(lik.prop1_limit(cfg.a_star, ys, cfg.tau, cfg.noise)))
    lim2 = np.array(
        [np.mean(lik.prop2_limit(a, cfg.a_star, ys, cfg.tau, n, cfg.noise, cfg.factor)) for a in grid]
    )

    def avg(lst, kind, nn):
        return lik.Curve(grid, np.mean([c.values for c in lst], axis=0), {"kind": kind, "n": nn, "seed": seed})

    out.samples["log-lik"] = loglik
    out.curves["log-lik-averaged"] = avg(loglik, "log-lik-averaged", n)
    out.curves["log-lik-limit"] = lik.Curve(grid, np.full(grid.size, lim1), {"kind": "limit", "n": n, "seed": seed})
    if scaled:
        out.samples["scaled-lik"] = scaled
        out.curves["scaled-lik-averaged"] = avg(scaled, "scaled-lik-averaged", n)
    out.curves["scaled-lik-limit"] = lik.Curve(grid, lim2, {"kind": "limit", "n": n, "seed": seed})
    if tri:
        out.samples["trinary-log-lik"] = tri
        out.curves["trinary-log-lik-averaged"] = avg(tri, "trinary-log-lik-averaged", n_trinary)
    return out


# -- Monte Carlo error sweep ------------------------------------------------------------


@dataclass(frozen=True)
class MCRow:
    case_id: str
    n: int
    reps: int
    mean_abs_err: float
    stderr: float
    seed: int


@dataclass(frozen=True)
class MCResult:
    """Mean absolute error of the trinary estimator per sample size."""

    rows: tuple[MCRow, ...]

    COLUMNS = ("case_id", "n", "reps", "mean_abs_err", "stderr", "seed")

    def table(self):
        return [(r.case_id, r.n, r.reps, r.mean_abs_err, r.stderr, r.seed) for r in self.rows]

    @property
    def ns(self) -> np.ndarray:
        return np.array([r.n for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.mean_abs_err for r in self.rows])


def _trinary_errors(task) -> np.ndarray:
    case, n, seeds = task
    cfg = case.config()
    out = np.empty(len(seeds))
    for j, s in enumerate(seeds):
        t = discretize_trinary(simulate_latent(cfg, n, s), cfg.tau1, cfg.tau2)
        out[j] = abs(trinary_moment(t, cfg.tau1, cfg.tau2, cfg.noise).a_hat - cfg.a_star)
    return out


def trinary_abs_errors(case: CaseSpec, n: int, reps: int, seed: int, workers: int = 1) -> np.ndarray:
    """``|a_hat - a*|`` for each replication, in replication order."""
    tasks = [(case, n, chunk) for chunk in _chunks(_seeds(seed, reps), workers)]
    return np.concatenate(_run_parallel(_trinary_errors, tasks, workers))


def mc_error_sweep(case: CaseSpec, ns: Sequence[int], reps: int = 2000, seed: int = 0, workers: int = 1) -> MCResult:
    """Mean absolute error of the trinary moment estimator for each ``n`` in ``ns``."""
    if reps < 2:
        raise DomainError("reps must be at least 2")
    if not ns or any(int(n) < 4 for n in ns):
        raise DomainError("every n must be at least 4")
    rows = []
    for n in ns:
        err = trinary_abs_errors(case, int(n), reps, seed, workers)
        rows.append(MCRow(case.case_id, int(n), reps, float(err.mean()), float(err.std(ddof=1) / math.sqrt(reps)), seed))
    return MCResult(tuple(rows))


def loglog_slope(result: MCResult | tuple[Sequence[float], Sequence[float]]) -> float:
    """Least-squares slope of ``log(mean_abs_err)`` on ``log(n)``."""
    if isinstance(result, MCResult):
        ns, err = result.ns, result.errors
    else:
        ns, err = (np.asarray(v, dtype=float) for v in result)
    ns = np.asarray(ns, dtype=float)
    err = np.asarray(err, dtype=float)
    if np.unique(ns).size < 2:
        raise DomainError("need at least two distinct sample sizes")
    if np.any(err <= 0) or np.any(ns <= 0):
        raise DomainError("errors and sample sizes must be positive")
    slope, _ = np.polyfit(np.log(ns), np.log(err), 1)
    return float(slope)


# -- KL curve -------------------------------------------------------------------------


KL_COLUMNS = ("n", "a1", "a2", "kl")


def kl_curve(case: CaseSpec, a1: float, a2: float, ns: Sequence[int]) -> list[tuple]:
    """Rows ``(n, a1, a2, KL)`` for the laws of the first ``n`` bits at ``a1`` and ``a2``."""
    cfg = case.config()
    return [(int(n), float(a1), float(a2), lik.kl_divergence(a1, a2, int(n), cfg)) for n in ns]


# -- estimator concentration ----------------------------------------------------------


CONCENTRATION_COLUMNS = ("n", "method", "reps", "rmse", "mean", "sd")


def _concentration_task(task):
    case, n, seeds = task
    cfg = case.config()
    out = np.empty((len(seeds), 2))
    for j, s in enumerate(seeds):
        ls = simulate_latent(cfg, n, s)
        b = discretize_binary(ls, cfg.tau)
        out[j, 0] = binary_mle(b, cfg).a_hat
        t = discretize_trinary(ls, cfg.tau1, cfg.tau2)
        out[j, 1] = trinary_moment(t, cfg.tau1, cfg.tau2, cfg.noise).a_hat
    return out


def estimator_concentration(
    case: CaseSpec, ns: Sequence[int] = (500, 4000), reps: int = 200, seed: int = 0, workers: int = 1
) -> list[tuple]:
    """RMSE of the binary MLE and the trinary estimator on shared latent samples.

    Replications with a boundary binary frequency have no MLE and are dropped
    from the binary rows only.
    """
    rows = []
    for n in ns:
        tasks = [(case, int(n), c) for c in _chunks(_seeds(seed, reps), workers)]
        est = np.concatenate(_run_parallel(_concentration_task, tasks, workers))
        for k, method in enumerate(("binary_mle", "trinary_moment")):
            v = est[:, k][np.isfinite(est[:, k])]
            rmse = float(np.sqrt(np.mean((v - case.a_star) ** 2)))
            rows.append((int(n), method, v.size, rmse, float(v.mean()), float(v.std(ddof=1))))
    return rows


def _hidden_pairs_task(task):
    case, n, seeds = task
    cfg = case.config()
    return np.array([hidden_pairs(simulate_latent(cfg, n, s)).a_hat for s in seeds])


def hidden_pairs_sweep(
    case: CaseSpec, ns: Sequence[int], reps: int = 10_000, seed: int = 0, workers: int = 1
) -> list[tuple]:
    """Rows ``(n, reps, mean, stderr, rmse)`` of the hidden-pairs estimator."""
    rows = []
    for n in ns:
        tasks = [(case, int(n), c) for c in _chunks(_seeds(seed, reps), workers)]
        est = np.concatenate(_run_parallel(_hidden_pairs_task, tasks, workers))
        rmse = float(np.sqrt(np.mean((est - case.a_star) ** 2)))
        rows.append((int(n), reps, float(est.mean()), float(est.std(ddof=1) / math.sqrt(reps)), rmse))
    return rows


# -- config-driven runs ----------------------------------------------------------------


EXPERIMENTS = ("loglik-curve", "scaled-lik-curve", "mc-sweep", "kl-curve")


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment description read from JSON.

    Keys: ``experiment``, ``case``, ``n_list``, ``reps``, ``seed``, ``grid``,
    ``output_path`` and optionally ``a1``, ``a2``, ``n_curves``, ``workers``.
    """

    experiment: str
    case: str = "1"
    n_list: tuple[int, ...] = (1000,)
    reps: int = 2000
    seed: int = 0
    grid: tuple[float, ...] = DEFAULT_GRID
    output_path: str = "."
    a1: float = 0.3
    a2: float = 0.7
    n_curves: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        for k in ("n_list", "grid"):
            if k in d:
                d[k] = tuple(d[k])
        d["case"] = str(d.get("case", "1"))
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def output_name(experiment: str, case: str, seed: int) -> str:
    return f"{experiment}_{case}_{seed}.csv"


def run_experiment(ec: ExperimentConfig) -> Path:
    """Run ``ec`` and write ``<experiment>_<case>_<seed>.csv`` under ``output_path``."""
    case = get_case(ec.case)
    if ec.experiment in ("loglik-curve", "scaled-lik-curve"):
        cs = curve_experiment(case, ec.n_list[0], ec.n_curves, ec.grid, ec.seed, n_trinary=None)
        prefix = "log-lik" if ec.experiment == "loglik-curve" else "scaled-lik"
        columns = ("a", "value", "kind", "n", "seed")
        rows = [r for r in cs.rows() if r[2].startswith(prefix)]
    elif ec.experiment == "mc-sweep":
        res = mc_error_sweep(case, ec.n_list, ec.reps, ec.seed, ec.workers)
        columns, rows = MCResult.COLUMNS, res.table()
    else:
        columns, rows = KL_COLUMNS, kl_curve(case, ec.a1, ec.a2, ec.n_list)
    out_dir = Path(ec.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / output_name(ec.experiment, case.case_id, ec.seed)
    with open(path, "w") as fh:
        write_table(fh, columns, rows, provenance_lines({**ec.to_dict(), "case_spec": case.to_dict()}, ec.seed))
    return path


def default_workers() -> int:
    """Worker count from ``LATENT_CORR_WORKERS`` (default 1)."""
    raw = os.environ.get("LATENT_CORR_WORKERS", "1")
    try:
        w = int(raw)
    except ValueError:
        raise ParameterError(f"LATENT_CORR_WORKERS must be an integer, got {raw!r}") from None
    if w < 1:
        raise ParameterError("LATENT_CORR_WORKERS must be at least 1")
    return w
