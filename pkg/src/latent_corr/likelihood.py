"""Marginal likelihood of the binary sequence and its Laplace-type limits.

With ``c_a = sqrt(a / (1 - a))`` and observed frequency ``abar`` the
likelihood of a binary sample is

    L_n(a) = integral exp(n F_n(z)) gamma(z + tau / sqrt(a)) dz,
    F_n(z) = abar log(1 - G(-c_a z)) + (1 - abar) log G(-c_a z),

where ``G`` is the noise cdf and ``gamma`` the factor density. ``F_n`` is
quasi-concave with maximizer ``z* = -G^{-1}(1 - abar) / c_a``, so the
integrand is a sharp peak of width ``~ n^{-1/2}``. Integration happens in the
log domain on Gauss-Legendre panels placed around the peak of the full
integrand, with geometrically growing tail panels added until they stop
contributing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .dist import StandardizedDistribution
from .errors import DegenerateFrequencyError, DegenerateFrequencyWarning, DomainError, NumericalError
from .model import BinarySample, ModelConfig, TrinarySample
from .quadrature import gauss_legendre

# central window +-CENTRAL_HALF_WIDTH in units of the local peak scale
CENTRAL_HALF_WIDTH = 12
PANEL_NODES = 10
TAIL_RTOL = 1e-13
PANEL_RTOL = 1e-13
MAX_TAIL_PANELS = 400
MAX_BISECTIONS = 40
BATCH_ROWS = 2048


def _check_a_open(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("a must lie in (0, 1)")
    return arr


def _check_abar_interior(abar) -> np.ndarray:
    arr = np.asarray(abar, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DegenerateFrequencyError("abar must lie strictly between 0 and 1")
    return arr


def c_a(a):
    """``sqrt(a / (1 - a))``."""
    a = np.asarray(a, dtype=float)
    return np.sqrt(a / (1.0 - a))


def binary_entropy_term(abar):
    """``abar log abar + (1 - abar) log(1 - abar)`` with ``0 log 0 = 0``."""
    return special.xlogy(abar, abar) + special.xlogy(1.0 - abar, 1.0 - abar)


# -- F_n and its derivatives --------------------------------------------------


def _fn(noise: StandardizedDistribution, c, abar, z):
    w = -c * z
    with np.errstate(invalid="ignore"):
        hi = np.where(abar > 0, abar * noise._logsf(w), 0.0)
        lo = np.where(abar < 1, (1.0 - abar) * noise._logcdf(w), 0.0)
    return hi + lo


def _fn_derivs(noise: StandardizedDistribution, c, abar, z):
    w = -c * z
    with np.errstate(over="ignore", invalid="ignore"):
        lp = noise._logpdf(w)
        hs = np.exp(lp - noise._logsf(w))  # p / (1 - G)
        hc = np.exp(lp - noise._logcdf(w))  # p / G
        dlp = noise._dlogpdf(w)
        up = np.where(abar > 0, abar * hs, 0.0)
        dn = np.where(abar < 1, (1.0 - abar) * hc, 0.0)
        d1 = c * (up - dn)
        d2 = -c * c * (up * (dlp + hs) - dn * (dlp - hc))
    return d1, d2


def fn_value(a: float, abar: float, noise: StandardizedDistribution, z):
    """``F_n(z)`` for ``0 < a < 1`` and ``0 < abar < 1``."""
    _check_a_open(a)
    _check_abar_interior(abar)
    z = np.asarray(z, dtype=float)
    out = _fn(noise, c_a(a), abar, z)
    return float(out) if out.ndim == 0 else out


def fn_d1(a: float, abar: float, noise: StandardizedDistribution, z):
    """First derivative ``F_n'(z) = c_a p(-c_a z) [abar/(1-G) - (1-abar)/G]``."""
    _check_a_open(a)
    _check_abar_interior(abar)
    out = _fn_derivs(noise, c_a(a), abar, np.asarray(z, dtype=float))[0]
    return float(out) if out.ndim == 0 else out


def fn_d2(a: float, abar: float, noise: StandardizedDistribution, z):
    """Second derivative of ``F_n``."""
    _check_a_open(a)
    _check_abar_interior(abar)
    out = _fn_derivs(noise, c_a(a), abar, np.asarray(z, dtype=float))[1]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LikelihoodContext:
    """Laplace quantities of ``F_n`` at a given ``(a, abar)``."""

    a: float
    abar: float
    c_a: float
    z_star: float
    fn_at_zstar: float
    fn2_at_zstar: float


def likelihood_context(a: float, abar: float, noise: StandardizedDistribution) -> LikelihoodContext:
    _check_a_open(a)
    _check_abar_interior(abar)
    c = float(c_a(a))
    w_star = float(noise._isf(np.float64(abar)))  # G^{-1}(1 - abar)
    z_star = -w_star / c
    f0 = float(_fn(noise, c, abar, np.float64(z_star)))
    p = math.exp(float(noise._logpdf(np.float64(w_star))))
    f2 = -c * c * p * p / (abar * (1.0 - abar))
    return LikelihoodContext(a, abar, c, z_star, f0, f2)


# -- batched log-domain integration ----------------------------------------------


def _row_logsum(rows: np.ndarray, vals: np.ndarray, bsz: int) -> np.ndarray:
    """Per-row ``logsumexp`` of scattered values."""
    top = np.full(bsz, -np.inf)
    np.maximum.at(top, rows, vals)
    ref = np.where(np.isfinite(top), top, 0.0)
    acc = np.zeros(bsz)
    with np.errstate(invalid="ignore"):
        np.add.at(acc, rows, np.exp(vals - ref[rows]))
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(top), ref + np.log(acc), top)


def _panel_log(phi, rows, lo, hi, m):
    """``log`` of the m-point Gauss-Legendre estimate on each panel ``[lo, hi]``."""
    x, w = gauss_legendre(m)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    z = mid[:, None] + half[:, None] * x[None, :]
    vals = phi(z, rows)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = special.logsumexp(vals + np.log(half)[:, None] + np.log(w)[None, :], axis=1)
    return np.where(np.isnan(out), -np.inf, out), vals


def _cut(rows, edges):
    """Flatten per-row sorted edges into panels, dropping empty ones."""
    lo, hi = edges[:, :-1], edges[:, 1:]
    keep = hi > lo
    r = np.broadcast_to(rows[:, None], lo.shape)
    return r[keep], lo[keep], hi[keep]


def log_integrate_peak(
    phi: Callable[[np.ndarray, np.ndarray], np.ndarray],
    center: np.ndarray,
    scale: np.ndarray,
    breakpoints: np.ndarray | None = None,
    rtol: float = PANEL_RTOL,
) -> np.ndarray:
    """``log integral exp(phi(z)) dz`` for a batch of peaked integrands.

    Parameters
    ----------
    phi : callable
        ``phi(z, rows)`` maps abscissae ``z`` of shape ``(R, M)`` and the
        integrand index of each row, shape ``(R,)``, to log-integrand
        values of shape ``(R, M)``.
    center, scale : np.ndarray
        Shape ``(B,)``; location and width of each peak.
    breakpoints : np.ndarray, optional
        Shape ``(B, K)``; points where ``phi`` is not smooth. No panel
        straddles one.
    rtol : float
        Per-panel error allowance relative to the integrand's total.

    Notes
    -----
    The window ``center +- 12 scale`` is cut into unit panels. Beyond it,
    panels of doubling width are appended on each side until the newest one
    adds less than ``1e-13`` relative to the running total; a tail panel never
    spans more than about eight e-folds of the integrand's local decay. Every
    panel is then bisected until its 10-point estimate and the sum over its
    two halves agree.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    scale = np.atleast_1d(np.asarray(scale, dtype=float))
    bsz = center.size
    all_rows = np.arange(bsz)
    bps = np.empty((bsz, 0)) if breakpoints is None else np.asarray(breakpoints, dtype=float).reshape(bsz, -1)
    h = CENTRAL_HALF_WIDTH
    m = PANEL_NODES

    unit = np.arange(-h, h + 1, dtype=float)
    edges = center[:, None] + scale[:, None] * unit[None, :]
    inside = np.clip(bps, edges[:, :1], edges[:, -1:])
    edges = np.sort(np.concatenate([edges, inside], axis=1), axis=1)
    pr, plo, phi_hi = _cut(all_rows, edges)
    pest, _ = _panel_log(phi, pr, plo, phi_hi, m)
    total = _row_logsum(pr, pest, bsz)
    panels = [(pr, plo, phi_hi, pest)]

    log_tail = math.log(TAIL_RTOL)
    for sign in (1.0, -1.0):
        pos = center + sign * h * scale
        width = h * scale
        slope = np.zeros(bsz)
        idx = all_rows
        for _ in range(MAX_TAIL_PANELS):
            # panels may double, but never span more than ~8 e-folds of decay
            with np.errstate(divide="ignore", invalid="ignore"):
                cap = np.where(slope[idx] < 0, 8.0 / -slope[idx], np.inf)
            wdt = np.maximum(np.minimum(width[idx], cap), 0.25 * scale[idx])
            a0 = pos[idx]
            b0 = a0 + sign * wdt
            left, right = np.minimum(a0, b0), np.maximum(a0, b0)
            inner = np.clip(bps[idx], left[:, None], right[:, None])
            e = np.sort(np.concatenate([left[:, None], inner, right[:, None]], axis=1), axis=1)
            tr, tlo, thi = _cut(idx, e)
            test, vals = _panel_log(phi, tr, tlo, thi, m)
            panels.append((tr, tlo, thi, test))
            contrib = _row_logsum(tr, test, bsz)[idx]
            total[idx] = np.logaddexp(total[idx], contrib)
            # outward log-slope across the new piece, from its extreme nodes
            first = np.ones(tr.size, dtype=bool)
            first[1:] = tr[1:] != tr[:-1]
            last = np.ones(tr.size, dtype=bool)
            last[:-1] = tr[1:] != tr[:-1]
            zlo, zhi = vals[first, 0], vals[last, -1]
            xlo, xhi = _node_pos(tlo[first], thi[first], 0, m), _node_pos(tlo[last], thi[last], -1, m)
            with np.errstate(invalid="ignore", divide="ignore"):
                sl = sign * (zhi - zlo) / (xhi - xlo)
                done = ~(contrib - total[idx] > log_tail)
            slope[idx] = np.nan_to_num(sl, nan=0.0, neginf=-np.inf)
            pos[idx] = b0
            width[idx] = 2.0 * wdt
            idx = idx[~done]
            if idx.size == 0:
                break
        if idx.size:
            raise NumericalError(
                f"tail of {idx.size} integrand(s) still contributing after {MAX_TAIL_PANELS} panels"
            )

    rows = np.concatenate([p[0] for p in panels])
    lo = np.concatenate([p[1] for p in panels])
    hi = np.concatenate([p[2] for p in panels])
    est = np.concatenate([p[3] for p in panels])
    done_rows, done_vals = [], []
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        l1, _ = _panel_log(phi, rows, lo, mid, m)
        l2, _ = _panel_log(phi, rows, mid, hi, m)
        fine = np.logaddexp(l1, l2)
        ref = total[rows]
        with np.errstate(invalid="ignore", over="ignore"):
            err = np.abs(np.exp(fine - ref) - np.exp(est - ref))
        ok = ~(err > rtol)
        done_rows.append(rows[ok])
        done_vals.append(fine[ok])
        bad = ~ok
        if not bad.any():
            break
        rows = np.repeat(rows[bad], 2)
        lo, hi = (np.stack([lo[bad], mid[bad]], axis=1).ravel(), np.stack([mid[bad], hi[bad]], axis=1).ravel())
        est = np.stack([l1[bad], l2[bad]], axis=1).ravel()
    else:
        raise NumericalError(f"{rows.size} panel(s) unresolved after {MAX_BISECTIONS} bisections")
    return _row_logsum(np.concatenate(done_rows), np.concatenate(done_vals), bsz)


def _node_pos(lo, hi, j, m):
    x, _ = gauss_legendre(m)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x[j]


def _binary_log_marginal(a: np.ndarray, k: np.ndarray, n: int, noise, factor, tau: float) -> np.ndarray:
    """``log L_n(a)`` for rows of (a, k = number of ones); a in (0, 1)."""
    a, k = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(k, dtype=float))
    a = a.ravel()
    k = k.ravel()
    out = np.empty(a.size)
    for start in range(0, a.size, BATCH_ROWS):
        sl = slice(start, start + BATCH_ROWS)
        out[sl] = _binary_log_marginal_chunk(a[sl], k[sl], n, noise, factor, tau)
    return out


def _binary_log_marginal_chunk(a, k, n, noise, factor, tau):
    abar = k / n
    c = np.sqrt(a / (1.0 - a))
    shift = tau / np.sqrt(a)
    interior = (abar > 0) & (abar < 1)

    # starting point: the maximizer of F_n, or the factor mode when degenerate
    z0 = -shift.copy()
    s0 = np.ones_like(a)
    if interior.any():
        ab = abar[interior]
        w_star = noise._isf(ab)
        p = np.exp(noise._logpdf(w_star))
        z0[interior] = -w_star / c[interior]
        s0[interior] = np.sqrt(ab * (1.0 - ab)) / (math.sqrt(n) * c[interior] * p)

    c2, ab2, sh2 = c[:, None], abar[:, None], shift[:, None]

    def phi(z, rows):
        with np.errstate(over="ignore"):
            return n * _fn(noise, c2[rows], ab2[rows], z) + factor._logpdf(z + sh2[rows])

    def derivs(z):
        d1, d2 = _fn_derivs(noise, c, abar, z)
        return n * d1 + factor._dlogpdf(z + shift), n * d2 + factor._d2logpdf(z + shift)

    zc = z0.copy()
    for _ in range(100):
        g1, g2 = derivs(zc)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(g2 < 0, -g1 / g2, np.sign(g1) * s0)
        step = np.clip(np.nan_to_num(step, nan=0.0, posinf=0.0, neginf=0.0), -4 * s0, 4 * s0)
        zc = zc + step
        if np.all(np.abs(step) <= 1e-10 * s0):
            break
    _, g2 = derivs(zc)
    with np.errstate(divide="ignore", invalid="ignore"):
        sc = np.where((g2 < 0) & np.isfinite(g2), 1.0 / np.sqrt(-g2), s0)
    kinks = [-kp / c for kp in noise.kinks] + [kp - shift for kp in factor.kinks]
    bps = np.stack(kinks, axis=1) if kinks else None
    return log_integrate_peak(phi, zc, sc, bps)


def _validate_binary_sample(sample: BinarySample) -> None:
    if sample.n < 1:
        raise DomainError("sample must be nonempty")


def log_likelihood(a: float, sample: BinarySample, cfg: ModelConfig) -> float:
    """Natural log of the marginal likelihood of a binary sample at ``a``.

    ``a = 0`` gives the independent-Bernoulli value exactly. A sample with
    all zeros or all ones is still evaluated but triggers a
    :class:`DegenerateFrequencyWarning`.
    """
    _validate_binary_sample(sample)
    if not (0.0 <= a < 1.0):
        raise DomainError("a must lie in [0, 1)")
    if sample.abar in (0.0, 1.0):
        warnings.warn(
            "frequency on the boundary; the likelihood has no interior maximizer",
            DegenerateFrequencyWarning,
            stacklevel=2,
        )
    return float(_log_lik_grid(np.array([a], dtype=float), sample.count, sample.n, cfg)[0])


def _log_lik_grid(a: np.ndarray, k: int, n: int, cfg: ModelConfig) -> np.ndarray:
    out = np.empty(a.shape)
    zero = a == 0.0
    if zero.any():
        abar = k / n
        g = np.float64(cfg.tau)
        out[zero] = n * (
            (abar * cfg.noise._logsf(g) if abar > 0 else 0.0)
            + ((1.0 - abar) * cfg.noise._logcdf(g) if abar < 1 else 0.0)
        )
    if (~zero).any():
        out[~zero] = _binary_log_marginal(a[~zero], k, n, cfg.noise, cfg.factor, cfg.tau)
    return out


def log_likelihood_grid(grid: Sequence[float], sample: BinarySample, cfg: ModelConfig) -> np.ndarray:
    """Vectorized :func:`log_likelihood` over ``a`` values in [0, 1)."""
    _validate_binary_sample(sample)
    a = np.asarray(grid, dtype=float)
    if not np.all((a >= 0.0) & (a < 1.0)):
        raise DomainError("a must lie in [0, 1)")
    return _log_lik_grid(a, sample.count, sample.n, cfg)


@dataclass(frozen=True, eq=False)
class Curve:
    """A function of ``a`` sampled on a strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1:
            raise DomainError("grid and values must be 1-d of equal length")
        if np.any(np.diff(g) <= 0):
            raise DomainError("grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def rows(self):
        kind = self.meta.get("kind", "")
        n = self.meta.get("n", "")
        seed = self.meta.get("seed", "")
        for a, v in zip(self.grid, self.values):
            yield (float(a), float(v), kind, n, seed)


def normalized_loglik_curve(sample: BinarySample, cfg: ModelConfig, grid: Sequence[float], seed=None) -> Curve:
    """``n^{-1} log L_n(a)`` over ``grid``."""
    vals = log_likelihood_grid(grid, sample, cfg) / sample.n
    return Curve(np.asarray(grid, dtype=float), vals, {"kind": "log-lik", "n": sample.n, "seed": seed})


def scaled_likelihood(a: float, sample: BinarySample, cfg: ModelConfig) -> float:
    """``L_n(a) exp(-n [abar log abar + (1 - abar) log(1 - abar)])``."""
    _check_abar_interior(sample.abar)
    _check_a_open(a)
    return float(scaled_likelihood_grid(np.array([a]), sample, cfg)[0])


def scaled_likelihood_grid(grid: Sequence[float], sample: BinarySample, cfg: ModelConfig) -> np.ndarray:
    _check_abar_interior(sample.abar)
    a = _check_a_open(grid)
    logl = _binary_log_marginal(a, sample.count, sample.n, cfg.noise, cfg.factor, cfg.tau)
    return np.exp(logl - sample.n * binary_entropy_term(sample.abar))


def scaled_likelihood_curve(sample: BinarySample, cfg: ModelConfig, grid: Sequence[float], seed=None) -> Curve:
    vals = scaled_likelihood_grid(grid, sample, cfg)
    return Curve(np.asarray(grid, dtype=float), vals, {"kind": "scaled-lik", "n": sample.n, "seed": seed})


# -- limits ---------------------------------------------------------------------


def _w_of_y(a_star: float, y, tau: float):
    return (tau - math.sqrt(a_star) * np.asarray(y, dtype=float)) / math.sqrt(1.0 - a_star)


def prop1_limit(a_star: float, y, tau: float, noise: StandardizedDistribution):
    """Almost-sure limit of ``n^{-1} log L_n(a)`` given the factor value ``y``.

    Equals ``q log q + (1 - q) log(1 - q)`` with ``q = 1 - G((tau -
    sqrt(a*) y) / sqrt(1 - a*))``; it does not depend on ``a``.
    """
    _check_a_open(a_star)
    w = _w_of_y(a_star, y, tau)
    q = noise._sf(w)
    out = q * noise._logsf(w) + (1.0 - q) * noise._logcdf(w)
    return float(out) if np.ndim(out) == 0 else out


def prop2_limit(
    a,
    a_star: float,
    y,
    tau: float,
    n: int,
    noise: StandardizedDistribution,
    factor: StandardizedDistribution,
):
    """Leading term of the scaled likelihood given the factor value ``y``.

    ``sqrt((1-a)/a) gamma(u) sqrt(2 pi q (1-q) / (n p(w)^2))`` with
    ``w = (tau - sqrt(a*) y) / sqrt(1 - a*)``, ``q = 1 - G(w)`` and
    ``u = sqrt((1-a) a* / ((1-a*) a)) y + (sqrt(1-a*) - sqrt(1-a)) tau / sqrt(a (1-a*))``.
    """
    a = _check_a_open(a)
    _check_a_open(a_star)
    if n < 1:
        raise DomainError("n must be positive")
    y = np.asarray(y, dtype=float)
    u = np.sqrt((1.0 - a) * a_star / ((1.0 - a_star) * a)) * y + (
        math.sqrt(1.0 - a_star) - np.sqrt(1.0 - a)
    ) * tau / np.sqrt(a * (1.0 - a_star))
    w = _w_of_y(a_star, y, tau)
    log_val = (
        0.5 * np.log((1.0 - a) / a)
        + factor._logpdf(u)
        + 0.5 * (math.log(2.0 * math.pi) + noise._logsf(w) + noise._logcdf(w) - math.log(n))
        - noise._logpdf(w)
    )
    out = np.exp(log_val)
    return float(out) if out.ndim == 0 else out


def gaussian_prop2_maximizer(a_star: float, y: float) -> float:
    """Maximizer in ``a`` of the second-order term for Gaussian laws and tau = 0."""
    return a_star * y * y / (a_star * y * y + 1.0 - a_star)


# -- exchangeable outcome probabilities and KL ---------------------------------------


def exchangeable_outcome_logprobs(a: float, n: int, cfg: ModelConfig) -> np.ndarray:
    """``log q_k`` for ``k = 0..n``, the probability of any one sequence with ``k`` ones.

    The joint law of the binary sequence is exchangeable, so a sequence's
    probability depends only on its number of ones.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    _check_a_open(a)
    k = np.arange(n + 1, dtype=float)
    logq = _binary_log_marginal(np.full(n + 1, float(a)), k, n, cfg.noise, cfg.factor, cfg.tau)
    log_total = special.logsumexp(log_binom(n) + logq)
    if not abs(log_total) <= 1e-8:
        raise NumericalError(f"outcome probabilities sum to exp({log_total:.3e}), not 1")
    return logq


def log_binom(n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    return special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)


def kl_divergence(a1: float, a2: float, n: int, cfg: ModelConfig) -> float:
    """Kullback-Leibler divergence between the laws of the n-bit sequence at ``a1`` and ``a2``."""
    lq1 = exchangeable_outcome_logprobs(a1, n, cfg)
    if a1 == a2:
        return 0.0
    lq2 = exchangeable_outcome_logprobs(a2, n, cfg)
    w = np.exp(log_binom(n) + lq1)
    return float(max(np.sum(w * (lq1 - lq2)), 0.0))


# -- trinary likelihood ----------------------------------------------------------


def _log_interval_prob(noise: StandardizedDistribution, w1, w2):
    """``log(G(w2) - G(w1))`` for ``w1 < w2`` without cancellation."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lc1, lc2 = noise._logcdf(w1), noise._logcdf(w2)
        ls1, ls2 = noise._logsf(w1), noise._logsf(w2)
        via_cdf = lc2 + np.log1p(-np.exp(lc1 - lc2))
        via_sf = ls1 + np.log1p(-np.exp(ls2 - ls1))
    return np.where(lc2 < math.log(0.5), via_cdf, via_sf)


def trinary_log_likelihood(a: float, sample: TrinarySample, cfg: ModelConfig) -> float:
    """Log marginal likelihood of a trinary sample at ``a`` in (0, 1)."""
    _check_a_open(a)
    if not cfg.trinary:
        raise DomainError("config has no trinary break points")
    k1, k2, k3 = sample.counts
    sa, sb = math.sqrt(a), math.sqrt(1.0 - a)
    noise, factor = cfg.noise, cfg.factor

    def phi(y, rows=None):
        w1 = (cfg.tau1 - sa * y) / sb
        w2 = (cfg.tau2 - sa * y) / sb
        out = factor._logpdf(y)
        if k1:
            out = out + k1 * noise._logcdf(w1)
        if k2:
            out = out + k2 * _log_interval_prob(noise, w1, w2)
        if k3:
            out = out + k3 * noise._logsf(w2)
        return out

    coarse = np.linspace(-40.0, 40.0, 3201)
    vals = phi(coarse)
    i = int(np.argmax(vals))
    lo, hi = coarse[max(i - 1, 0)], coarse[min(i + 1, coarse.size - 1)]
    res = optimize.minimize_scalar(lambda t: -float(phi(np.float64(t))), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    yc = float(res.x)
    hstep = 1e-4
    d2 = float((phi(np.float64(yc + hstep)) - 2 * phi(np.float64(yc)) + phi(np.float64(yc - hstep))) / hstep**2)
    sc = 1.0 / math.sqrt(-d2) if d2 < 0 else 1.0
    kinks = [(t - kp * sb) / sa for kp in noise.kinks for t in (cfg.tau1, cfg.tau2)] + list(factor.kinks)
    bps = np.array([kinks]) if kinks else None
    return float(log_integrate_peak(phi, np.array([yc]), np.array([sc]), bps)[0])
