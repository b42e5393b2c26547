"""Standardized (mean 0, variance 1) univariate laws.

Five families are supported, each parameterized so that the mean is zero and
the variance is one:

* ``std_normal`` -- the standard normal law.
* ``logistic`` -- logistic with scale ``sqrt(3) / pi``.
* ``laplace`` -- Laplace with scale ``1 / sqrt(2)``.
* ``gumbel`` -- Gumbel (max) with scale ``sqrt(6) / pi`` and location
  ``-euler_gamma * sqrt(6) / pi``.
* ``scaled_t`` -- Student t with ``df > 2`` degrees of freedom, rescaled by
  ``sqrt((df - 2) / df)``.

Every method is vectorized over numpy arrays; scalar input gives a float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError, ParameterError
from .quadrature import integrate_line

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LOGISTIC_SCALE = math.sqrt(3.0) / math.pi
_LAPLACE_SCALE = 1.0 / _SQRT2
_GUMBEL_SCALE = math.sqrt(6.0) / math.pi
_EULER = float(np.euler_gamma)


class Family(str, Enum):
    STD_NORMAL = "std_normal"
    LOGISTIC = "logistic"
    LAPLACE = "laplace"
    GUMBEL = "gumbel"
    SCALED_T = "scaled_t"


def _as_array(z, name: str = "z") -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr, arr.ndim == 0


def _out(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


@dataclass(frozen=True)
class StandardizedDistribution:
    """A zero-mean, unit-variance law with full support on the real line.

    Parameters
    ----------
    family : Family or str
        One of ``std_normal``, ``logistic``, ``laplace``, ``gumbel``,
        ``scaled_t``.
    df : float, optional
        Degrees of freedom, required for ``scaled_t`` (must exceed 2) and
        rejected otherwise.
    """

    family: Family
    df: float | None = None
    _t_scale: float = field(default=1.0, init=False, repr=False, compare=False)
    _t_lognorm: float = field(default=0.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ParameterError(f"unknown family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        if fam is Family.SCALED_T:
            if self.df is None or not np.isfinite(self.df) or self.df <= 2:
                raise ParameterError(f"scaled_t requires df > 2, got {self.df!r}")
            nu = float(self.df)
            object.__setattr__(self, "df", nu)
            object.__setattr__(self, "_t_scale", math.sqrt(nu / (nu - 2.0)))
            lognorm = (
                math.lgamma((nu + 1.0) / 2.0)
                - math.lgamma(nu / 2.0)
                - 0.5 * math.log((nu - 2.0) * math.pi)
            )
            object.__setattr__(self, "_t_lognorm", lognorm)
        elif self.df is not None:
            raise ParameterError(f"df is only meaningful for scaled_t, not {fam.value}")

    # -- metadata ---------------------------------------------------------

    @property
    def name(self) -> str:
        return self.family.value

    @property
    def symmetric(self) -> bool:
        return self.family is not Family.GUMBEL

    @property
    def kinks(self) -> tuple[float, ...]:
        """Points where the log-density is not differentiable."""
        return (0.0,) if self.family is Family.LAPLACE else ()

    def to_dict(self) -> dict:
        d = {"family": self.family.value}
        if self.df is not None:
            d["df"] = self.df
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizedDistribution":
        return cls(d["family"], d.get("df"))

    def __str__(self) -> str:
        if self.family is Family.SCALED_T:
            return f"scaled_t(df={self.df:g})"
        return self.family.value

    # -- unchecked kernels ------------------------------------------------

    def _logpdf(self, z: np.ndarray) -> np.ndarray:
        fam = self.family
        with np.errstate(over="ignore", invalid="ignore"):
            if fam is Family.STD_NORMAL:
                return -0.5 * z * z - _LOG_SQRT_2PI
            if fam is Family.LOGISTIC:
                x = np.abs(z) / _LOGISTIC_SCALE
                return -x - math.log(_LOGISTIC_SCALE) - 2.0 * np.log1p(np.exp(-x))
            if fam is Family.LAPLACE:
                return -0.5 * math.log(2.0) - _SQRT2 * np.abs(z)
            if fam is Family.GUMBEL:
                u = z / _GUMBEL_SCALE + _EULER
                return -math.log(_GUMBEL_SCALE) - u - np.exp(-u)
            nu = self.df
            return self._t_lognorm - 0.5 * (nu + 1.0) * np.log1p(z * z / (nu - 2.0))

    def _cdf(self, z: np.ndarray) -> np.ndarray:
        fam = self.family
        with np.errstate(over="ignore"):
            if fam is Family.STD_NORMAL:
                return special.ndtr(z)
            if fam is Family.LOGISTIC:
                return special.expit(z / _LOGISTIC_SCALE)
            if fam is Family.LAPLACE:
                x = _SQRT2 * z
                return np.where(z < 0, 0.5 * np.exp(np.minimum(x, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(x, 0.0)))
            if fam is Family.GUMBEL:
                return np.exp(-np.exp(-(z / _GUMBEL_SCALE + _EULER)))
            return special.stdtr(self.df, z * self._t_scale)

    def _sf(self, z: np.ndarray) -> np.ndarray:
        if self.symmetric:
            return self._cdf(-z)
        with np.errstate(over="ignore"):
            return -np.expm1(-np.exp(-(z / _GUMBEL_SCALE + _EULER)))

    def _logcdf(self, z: np.ndarray) -> np.ndarray:
        fam = self.family
        with np.errstate(over="ignore", divide="ignore"):
            if fam is Family.STD_NORMAL:
                return special.log_ndtr(z)
            if fam is Family.LOGISTIC:
                return -np.logaddexp(0.0, -z / _LOGISTIC_SCALE)
            if fam is Family.LAPLACE:
                x = _SQRT2 * z
                return np.where(z < 0, math.log(0.5) + x, np.log1p(-0.5 * np.exp(-np.maximum(x, 0.0))))
            if fam is Family.GUMBEL:
                return -np.exp(-(z / _GUMBEL_SCALE + _EULER))
            t = z * self._t_scale
            lower = np.log(special.stdtr(self.df, np.minimum(t, 0.0)))
            upper = np.log1p(-special.stdtr(self.df, -np.maximum(t, 0.0)))
            return np.where(t < 0, lower, upper)

    def _logsf(self, z: np.ndarray) -> np.ndarray:
        if self.symmetric:
            return self._logcdf(-z)
        with np.errstate(over="ignore", divide="ignore"):
            return np.log(-np.expm1(-np.exp(-(z / _GUMBEL_SCALE + _EULER))))

    def _quantile(self, u: np.ndarray) -> np.ndarray:
        fam = self.family
        if fam is Family.STD_NORMAL:
            return special.ndtri(u)
        if fam is Family.LOGISTIC:
            return _LOGISTIC_SCALE * special.logit(u)
        if fam is Family.LAPLACE:
            lo = np.minimum(u, 0.5)
            hi = np.maximum(u, 0.5)
            return np.where(u < 0.5, _LAPLACE_SCALE * np.log(2.0 * lo), -_LAPLACE_SCALE * np.log(2.0 * (1.0 - hi)))
        if fam is Family.GUMBEL:
            return _GUMBEL_SCALE * (-np.log(-np.log(u)) - _EULER)
        z = special.stdtrit(self.df, u) / self._t_scale
        # one Newton step polishes the inverse to the cdf's own precision
        return z - (self._cdf(z) - u) / np.exp(self._logpdf(z))

    def _isf(self, v: np.ndarray) -> np.ndarray:
        if self.symmetric:
            return -self._quantile(v)
        return _GUMBEL_SCALE * (-np.log(-np.log1p(-v)) - _EULER)

    def _dlogpdf(self, z: np.ndarray) -> np.ndarray:
        fam = self.family
        with np.errstate(over="ignore", invalid="ignore"):
            if fam is Family.STD_NORMAL:
                return -z
            if fam is Family.LOGISTIC:
                return -np.tanh(0.5 * z / _LOGISTIC_SCALE) / _LOGISTIC_SCALE
            if fam is Family.LAPLACE:
                return -_SQRT2 * np.sign(z)
            if fam is Family.GUMBEL:
                return (np.exp(-(z / _GUMBEL_SCALE + _EULER)) - 1.0) / _GUMBEL_SCALE
            nu = self.df
            return -(nu + 1.0) * z / (nu - 2.0 + z * z)

    def _d2logpdf(self, z: np.ndarray) -> np.ndarray:
        fam = self.family
        with np.errstate(over="ignore", invalid="ignore"):
            if fam is Family.STD_NORMAL:
                return -np.ones_like(z)
            if fam is Family.LOGISTIC:
                c = np.cosh(0.5 * z / _LOGISTIC_SCALE)
                return -0.5 / (_LOGISTIC_SCALE**2 * c * c)
            if fam is Family.LAPLACE:
                return np.zeros_like(z)
            if fam is Family.GUMBEL:
                return -np.exp(-(z / _GUMBEL_SCALE + _EULER)) / _GUMBEL_SCALE**2
            nu = self.df
            s = nu - 2.0 + z * z
            return -(nu + 1.0) * (nu - 2.0 - z * z) / (s * s)

    # -- public, checked --------------------------------------------------

    def pdf(self, z):
        """Density at ``z``."""
        arr, scalar = _as_array(z)
        return _out(np.exp(self._logpdf(arr)), scalar)

    def logpdf(self, z):
        arr, scalar = _as_array(z)
        return _out(self._logpdf(arr), scalar)

    def cdf(self, z):
        """Distribution function ``G(z) = P(Z <= z)``."""
        arr, scalar = _as_array(z)
        return _out(self._cdf(arr), scalar)

    def sf(self, z):
        arr, scalar = _as_array(z)
        return _out(self._sf(arr), scalar)

    def logcdf(self, z):
        arr, scalar = _as_array(z)
        return _out(self._logcdf(arr), scalar)

    def logsf(self, z):
        arr, scalar = _as_array(z)
        return _out(self._logsf(arr), scalar)

    def quantile(self, u):
        """Inverse of :meth:`cdf` on the open unit interval.

        Raises
        ------
        DomainError
            If any ``u`` is outside (0, 1).
        """
        arr = np.asarray(u, dtype=float)
        if not np.all((arr > 0.0) & (arr < 1.0)):
            raise DomainError("quantile argument must lie in the open interval (0, 1)")
        return _out(self._quantile(arr), arr.ndim == 0)

    def isf(self, v):
        """Inverse survival function: ``z`` with ``1 - G(z) = v``.

        Preferable to ``quantile(1 - v)`` when ``v`` is small.
        """
        arr = np.asarray(v, dtype=float)
        if not np.all((arr > 0.0) & (arr < 1.0)):
            raise DomainError("isf argument must lie in the open interval (0, 1)")
        return _out(self._isf(arr), arr.ndim == 0)

    def dlogpdf(self, z):
        arr, scalar = _as_array(z)
        return _out(self._dlogpdf(arr), scalar)

    def d2logpdf(self, z):
        arr, scalar = _as_array(z)
        return _out(self._d2logpdf(arr), scalar)


def std_normal() -> StandardizedDistribution:
    return StandardizedDistribution(Family.STD_NORMAL)


def logistic() -> StandardizedDistribution:
    return StandardizedDistribution(Family.LOGISTIC)


def laplace() -> StandardizedDistribution:
    return StandardizedDistribution(Family.LAPLACE)


def gumbel() -> StandardizedDistribution:
    return StandardizedDistribution(Family.GUMBEL)


def scaled_t(df: float) -> StandardizedDistribution:
    return StandardizedDistribution(Family.SCALED_T, df)


def from_name(name: str, df: float | None = None) -> StandardizedDistribution:
    """Build a law from its serialized family name."""
    return StandardizedDistribution(name.strip().lower(), df)


def moments(d: StandardizedDistribution, rtol: float = 1e-12) -> tuple[float, float, float]:
    """Total mass, mean and variance by quadrature over the compactified line."""
    mass = integrate_line(lambda z: np.exp(d._logpdf(z)), rtol=rtol)
    mean = integrate_line(lambda z: z * np.exp(d._logpdf(z)), rtol=rtol)
    second = integrate_line(lambda z: z * z * np.exp(d._logpdf(z)), rtol=rtol)
    return mass, mean, second - mean * mean


@dataclass(frozen=True)
class RegularityReport:
    """Grid-based proxies for the smoothness and tail conditions of the model.

    Attributes
    ----------
    max_abs_dgamma, argmax_dgamma
        Largest ``|d gamma / dz|`` on the grid and where it occurs.
    max_abs_d3_logcdf, max_abs_d3_logsf
        Largest ``|d^3 log G / dz^3|`` and ``|d^3 log(1 - G) / dz^3|``.
    c_ratio
        Largest ``gamma(b1 z + c1) / gamma(b2 z + c2)`` over the large-|z|
        part of the grid.
    excluded
        Grid points skipped because the noise log-density has a kink nearby.
    flags
        Names of the proxies that exceeded the threshold.
    """

    max_abs_dgamma: float
    argmax_dgamma: float
    max_abs_d3_logcdf: float
    max_abs_d3_logsf: float
    c_ratio: float
    excluded: tuple[float, ...]
    flags: tuple[str, ...]

    @property
    def diverged(self) -> bool:
        return bool(self.flags)


def _richardson(stencil, z: np.ndarray, h: float) -> np.ndarray:
    # stencil has O(h^2) error; one Richardson step cancels it
    return (4.0 * stencil(z, 0.5 * h) - stencil(z, h)) / 3.0


def check_regularity(
    noise: StandardizedDistribution,
    factor: StandardizedDistribution,
    grid: Sequence[float],
    c_params: tuple[float, float, float, float] = (2.0, 1.0, 0.0, 0.0),
    threshold: float = 1e6,
    large_fraction: float = 0.5,
    step: float = 1e-4,
) -> RegularityReport:
    """Numerically probe the smoothness/tail conditions on a grid.

    Parameters
    ----------
    noise : StandardizedDistribution
        Law of the idiosyncratic terms (supplies ``G``).
    factor : StandardizedDistribution
        Law of the shared factor (supplies ``gamma``).
    grid : sequence of float
        Sorted, finite evaluation points.
    c_params : tuple
        ``(b1, b2, c1, c2)`` with ``0 < b2 < b1`` for the tail ratio.
    threshold : float
        Any proxy above this value is flagged.
    large_fraction : float
        The tail ratio is taken over ``|z| >= large_fraction * max|grid|``.
    step : float
        Base step of the central differences.
    """
    z = np.asarray(grid, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise DomainError("grid must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(z)):
        raise DomainError("grid must be finite")
    if np.any(np.diff(z) < 0):
        raise DomainError("grid must be sorted")
    b1, b2, c1, c2 = c_params
    if not (0 < b2 < b1):
        raise DomainError("c_params require 0 < b2 < b1")

    def d_gamma(x, h):
        return (np.exp(factor._logpdf(x + h)) - np.exp(factor._logpdf(x - h))) / (2.0 * h)

    dg = np.abs(_richardson(d_gamma, z, step))
    i = int(np.argmax(dg))

    # third derivative of log G = second derivative of the hazard p/G
    def hazard_lo(x):
        return np.exp(noise._logpdf(x) - noise._logcdf(x))

    def hazard_hi(x):
        return -np.exp(noise._logpdf(x) - noise._logsf(x))

    def second_diff(fn):
        return lambda x, h: (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / (h * h)

    keep = np.ones(z.shape, dtype=bool)
    for k in noise.kinks:
        keep &= np.abs(z - k) > 4.0 * step
    zk = z[keep]
    excluded = tuple(float(v) for v in z[~keep])
    if zk.size:
        d3_lo = float(np.max(np.abs(_richardson(second_diff(hazard_lo), zk, step))))
        d3_hi = float(np.max(np.abs(_richardson(second_diff(hazard_hi), zk, step))))
    else:
        d3_lo = d3_hi = float("nan")

    zmax = float(np.max(np.abs(z)))
    big = z[np.abs(z) >= large_fraction * zmax]
    log_ratio = factor._logpdf(b1 * big + c1) - factor._logpdf(b2 * big + c2)
    with np.errstate(over="ignore"):
        c_ratio = float(np.exp(np.max(log_ratio))) if big.size else float("nan")

    flags = []
    if dg[i] > threshold:
        flags.append("A")
    if not (d3_lo <= threshold and d3_hi <= threshold):
        flags.append("B")
    if not c_ratio <= threshold:
        flags.append("C")
    return RegularityReport(
        max_abs_dgamma=float(dg[i]),
        argmax_dgamma=float(z[i]),
        max_abs_d3_logcdf=d3_lo,
        max_abs_d3_logsf=d3_hi,
        c_ratio=c_ratio,
        excluded=excluded,
        flags=tuple(flags),
    )
