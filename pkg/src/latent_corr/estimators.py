"""Estimators of the common correlation ``a*``.

Four estimators are provided:

* :func:`trinary_moment` -- closed-form moment estimator from the interval
  frequencies of a trinary sample;
* :func:`binary_mle` -- numerical maximizer of the binary marginal likelihood;
* :func:`hidden_pairs` -- uses the latent values directly through
  differences of disjoint pairs;
* :func:`ustat_common_corr` -- the pairwise U-statistic on a fully observed
  cross-section.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from .dist import StandardizedDistribution
from .errors import DomainError
from .likelihood import log_likelihood_grid
from .model import BinarySample, LatentSample, ModelConfig, TrinarySample

CSV_COLUMNS = ("method", "a_hat", "n", "degenerate", "note")

MLE_SEARCH = (0.005, 0.955)
MLE_GRID_POINTS = 191
MLE_XTOL = 1e-6


class Method(str, Enum):
    TRINARY_MOMENT = "trinary_moment"
    BINARY_MLE = "binary_mle"
    HIDDEN_PAIRS = "hidden_pairs"
    USTATISTIC = "ustat"


@dataclass(frozen=True)
class EstimateRecord:
    """One estimate of ``a*`` with its provenance.

    ``diagnostics`` holds free-form key/value notes (flatness of the
    likelihood curve, the reason for a degenerate result, ...).
    """

    method: Method
    a_hat: float
    n: int
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def note(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.diagnostics.items())

    def csv_row(self) -> tuple:
        return (self.method.value, float(self.a_hat), self.n, int(self.degenerate), self.note)


# -- trinary moment estimator ------------------------------------------------------


def h_function(u, v, tau1: float, tau2: float, noise: StandardizedDistribution):
    """``H(u, v) = 1 - [(tau1 - tau2) / (G^{-1}(u) - G^{-1}(1 - v))]^2 * 1{(u, v) in B}``.

    ``B`` is the set ``0 < u < 1, 0 < v < 1, u + v != 1``; outside it ``H = 1``.
    Vectorized over ``u`` and ``v``.
    """
    if not tau1 < tau2:
        raise DomainError(f"need tau1 < tau2, got {tau1}, {tau2}")
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    inside = (u > 0) & (u < 1) & (v > 0) & (v < 1) & (u + v != 1)
    out = np.ones(u.shape)
    if inside.any():
        # G^{-1}(1 - v) via the survival quantile keeps precision for small v
        gap = noise._quantile(u[inside]) - noise._isf(v[inside])
        out[inside] = 1.0 - ((tau1 - tau2) / gap) ** 2
    return float(out) if out.ndim == 0 else out


def trinary_moment(sample: TrinarySample, tau1: float, tau2: float, noise: StandardizedDistribution) -> EstimateRecord:
    """Moment estimator from the lower and upper interval frequencies.

    Returns ``a_hat = 1`` with the degenerate flag when some interval is empty.
    """
    if not tau1 < tau2:
        raise DomainError(f"need tau1 < tau2, got {tau1}, {tau2}")
    k1, k2, k3 = sample.counts
    if min(k1, k2, k3) == 0:
        empty = ",".join(str(j + 1) for j, k in enumerate((k1, k2, k3)) if k == 0)
        return EstimateRecord(Method.TRINARY_MOMENT, 1.0, sample.n, True, {"empty_intervals": empty})
    n = sample.n
    a_hat = h_function(k1 / n, k3 / n, tau1, tau2, noise)
    return EstimateRecord(Method.TRINARY_MOMENT, a_hat, n)


# -- binary MLE ------------------------------------------------------------------


def binary_mle(
    sample: BinarySample,
    cfg: ModelConfig,
    search: tuple[float, float] = MLE_SEARCH,
    grid_points: int = MLE_GRID_POINTS,
    xtol: float = MLE_XTOL,
) -> EstimateRecord:
    """Maximize the binary log-likelihood over ``a`` in ``search``.

    A coarse grid locates the best cell; a bounded scalar search then refines
    within the neighbouring cells. The refined point is kept only if it does
    not fall below the best grid value.

    Parameters
    ----------
    sample : BinarySample
    cfg : ModelConfig
        Supplies the laws and the threshold ``tau``.
    search : (float, float)
        Closed search interval inside ``(0, 1 - 1e-3)``.
    grid_points : int
        Size of the coarse grid.
    xtol : float
        Absolute tolerance of the refinement.
    """
    lo, hi = float(search[0]), float(search[1])
    if not (0.0 < lo < hi < 1.0 - 1e-3):
        raise DomainError("search interval must satisfy 0 < lo < hi < 1 - 1e-3")
    if xtol <= 0 or grid_points < 3:
        raise DomainError("need xtol > 0 and at least 3 grid points")
    if sample.abar in (0.0, 1.0):
        return EstimateRecord(
            Method.BINARY_MLE, math.nan, sample.n, True, {"reason": "frequency on the boundary"}
        )

    grid = np.linspace(lo, hi, grid_points)
    vals = log_likelihood_grid(grid, sample, cfg)
    i = int(np.argmax(vals))
    flat = float((vals.max() - vals.min()) / sample.n)
    left, right = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]

    def neg(a):
        return -float(log_likelihood_grid(np.array([a]), sample, cfg)[0])

    res = optimize.minimize_scalar(neg, bounds=(left, right), method="bounded", options={"xatol": xtol})
    a_hat, best = float(res.x), -float(res.fun)
    if best < vals[i]:
        a_hat, best = float(grid[i]), float(vals[i])
    return EstimateRecord(
        Method.BINARY_MLE,
        a_hat,
        sample.n,
        False,
        {"flatness": f"{flat:.6g}", "loglik": f"{best:.12g}"},
    )


# -- estimators on latent values -----------------------------------------------------


def _as_values(x) -> np.ndarray:
    arr = x.x if isinstance(x, LatentSample) else np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError("expected a one-dimensional sequence")
    if not np.all(np.isfinite(arr)):
        raise DomainError("values must be finite")
    return arr


def hidden_pairs(latent: LatentSample | np.ndarray) -> EstimateRecord:
    """``1 - n^{-1} sum_i (x_{2i-1} - x_{2i})^2`` over the ``floor(n/2)`` disjoint pairs.

    Unbiased for ``a*`` when ``n`` is even; not clipped to (0, 1).
    """
    x = _as_values(latent)
    n = x.size
    if n < 2:
        raise DomainError("hidden-pairs estimator needs n >= 2")
    m = n // 2
    z = x[0 : 2 * m : 2] - x[1 : 2 * m : 2]
    return EstimateRecord(Method.HIDDEN_PAIRS, 1.0 - float(np.dot(z, z)) / n, n)


def ustat_common_corr(x) -> EstimateRecord:
    """Pairwise U-statistic ``1 - [2 C(m,2)]^{-1} sum_{i<j} (x_i - x_j)^2``.

    Since ``sum_{i<j} (x_i - x_j)^2 = m sum_i (x_i - xbar)^2`` this equals one
    minus the sample variance (divisor ``m - 1``), computed in O(m).
    """
    x = _as_values(x)
    m = x.size
    if m < 2:
        raise DomainError("U-statistic needs at least two values")
    d = x - x.mean()
    return EstimateRecord(Method.USTATISTIC, 1.0 - float(np.dot(d, d)) / (m - 1), m)
