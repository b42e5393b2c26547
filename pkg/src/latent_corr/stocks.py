"""Daily stock-return pipeline: prices, log returns, rolling standardization, estimates.

Input is a long-format daily price file with columns ``date, open, high,
low, close, volume, Name`` (header matched case-insensitively); only
``close`` is used. A wide file with a ``date`` column and one close column per
ticker is also accepted. Missing or rejected cells are carried as NaN and are never
imputed: any statistic that would touch a NaN is itself masked.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from .dist import std_normal
from .errors import DataQualityWarning, DomainError, FormatError
from .estimators import binary_mle, trinary_moment, ustat_common_corr
from .model import BinarySample, ModelConfig, TrinarySample, replication_seed, simulate_latent

LONG_COLUMNS = ("date", "open", "high", "low", "close", "volume", "name")
DAILY_COLUMNS = ("date", "ustat", "trinary", "binary_mle", "note")
QQ_COLUMNS = ("theoretical", "empirical")


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Closing prices, dates x tickers; NaN marks a missing or rejected cell."""

    dates: pd.DatetimeIndex
    tickers: tuple[str, ...]
    close: np.ndarray
    rejected: int = 0
    duplicates: int = 0

    def __post_init__(self):
        if self.close.shape != (len(self.dates), len(self.tickers)):
            raise DomainError("close matrix shape does not match dates x tickers")
        if not self.dates.is_monotonic_increasing or self.dates.has_duplicates:
            raise DomainError("dates must be strictly increasing")
        present = self.close[~np.isnan(self.close)]
        if np.any(present <= 0):
            raise DomainError("closing prices must be positive")

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.close)

    def to_long(self) -> pd.DataFrame:
        """Long format with ``open = high = low = close`` and zero volume."""
        frame = pd.DataFrame(self.close, index=self.dates, columns=list(self.tickers))
        long = frame.stack().rename("close").reset_index()
        long.columns = ["date", "Name", "close"]
        long["date"] = long["date"].dt.strftime("%Y-%m-%d")
        for col in ("open", "high", "low"):
            long[col] = long["close"]
        long["volume"] = 0
        return long[["date", "open", "high", "low", "close", "volume", "Name"]]


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    dates: pd.DatetimeIndex
    tickers: tuple[str, ...]
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class StandardizedPanel:
    """Standardized returns for dates that have a full trailing window."""

    dates: pd.DatetimeIndex
    tickers: tuple[str, ...]
    values: np.ndarray
    window: int
    diagnostics: dict = field(default_factory=dict)


# -- ingestion --------------------------------------------------------------------------


def ingest_prices(path, format: str = "long") -> PricePanel:
    """Read a daily price file into a :class:`PricePanel`.

    Parameters
    ----------
    path : str, Path or file-like
    format : {"long", "wide"}
        ``long``: one row per (date, ticker) with the OHLCV columns and
        ``Name``. ``wide``: a ``date`` column followed by one close column per
        ticker.

    Rows with a nonpositive or non-numeric close are rejected; duplicate
    (date, ticker) rows keep the last occurrence. Both raise a
    :class:`DataQualityWarning` with the count.
    """
    try:
        raw = pd.read_csv(path, comment="#")
    except pd.errors.EmptyDataError:
        raise FormatError("price file is empty") from None
    # only the known column names are case-insensitive; wide-format tickers keep their case
    raw.columns = [str(c).strip().lower() if str(c).strip().lower() in LONG_COLUMNS else str(c).strip() for c in raw.columns]
    if format == "wide":
        if "date" not in raw.columns or raw.shape[1] < 2:
            raise FormatError("wide price file needs a date column and at least one ticker column")
        raw = raw.melt(id_vars="date", var_name="name", value_name="close")
    elif format == "long":
        missing = [c for c in LONG_COLUMNS if c not in raw.columns]
        if missing:
            raise FormatError(f"price file is missing column(s): {', '.join(missing)}")
    else:
        raise FormatError(f"unknown price format {format!r}")
    if raw.empty:
        raise FormatError("price file has a header but no rows")

    try:
        dates = pd.to_datetime(raw["date"].astype(str), format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise FormatError(f"unparseable date: {exc}") from None
    close = pd.to_numeric(raw["close"], errors="coerce")
    frame = pd.DataFrame({"date": dates, "name": raw["name"].astype(str), "close": close})

    bad = ~(frame["close"] > 0)
    n_bad = int(bad.sum())
    if n_bad:
        warnings.warn(f"{n_bad} row(s) with nonpositive or missing close rejected", DataQualityWarning, stacklevel=2)
        frame.loc[bad, "close"] = np.nan

    dup = frame.duplicated(["date", "name"], keep="last")
    n_dup = int(dup.sum())
    if n_dup:
        warnings.warn(f"{n_dup} duplicate (date, ticker) row(s); keeping the last", DataQualityWarning, stacklevel=2)
        frame = frame[~dup]

    wide = frame.pivot(index="date", columns="name", values="close").sort_index()
    return PricePanel(
        pd.DatetimeIndex(wide.index),
        tuple(str(c) for c in wide.columns),
        wide.to_numpy(dtype=float),
        n_bad,
        n_dup,
    )


# -- returns and standardization ----------------------------------------------------------


def log_returns(p: PricePanel) -> ReturnPanel:
    """``log(V_t / V_{t-1})`` per ticker; NaN where either price is missing."""
    if len(p.dates) < 2:
        raise DomainError("need at least two dates")
    values = np.log(p.close[1:] / p.close[:-1])
    return ReturnPanel(p.dates[1:], p.tickers, values)


def rolling_standardize(r: ReturnPanel, window: int = 100) -> StandardizedPanel:
    """Standardize each return by the mean and sample std of the previous ``window`` returns.

    Day ``t`` itself is excluded from its window. A cell is masked when the
    window or the current value has a missing entry, or when the window is
    constant (zero spread).
    """
    if window < 2:
        raise DomainError("window must be at least 2")
    t_len = r.values.shape[0]
    if t_len <= window:
        raise DomainError(f"need more than {window} return dates, got {t_len}")
    hist = sliding_window_view(r.values[:-1], window, axis=0)  # (T - window, m, window)
    cur = r.values[window:]
    mean = hist.mean(axis=-1)
    std = hist.std(axis=-1, ddof=1)
    flat = np.ptp(hist, axis=-1) == 0
    out = (cur - mean) / np.where(flat, 1.0, std)
    missing = np.isnan(out)
    out[flat] = np.nan
    diag = {"masked_missing": int(missing.sum()), "masked_zero_std": int((flat & ~missing).sum())}
    return StandardizedPanel(r.dates[window:], r.tickers, out, window, diag)


def qq_data(x) -> tuple[np.ndarray, np.ndarray]:
    """Standard normal quantiles at ``(i - 1/2) / m`` paired with the sorted sample."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 2:
        raise DomainError("Q-Q data needs at least two values")
    if not np.all(np.isfinite(x)):
        raise DomainError("Q-Q data must not contain missing values")
    m = x.size
    theo = special.ndtri((np.arange(1, m + 1) - 0.5) / m)
    return theo, np.sort(x)


# -- daily estimates -------------------------------------------------------------------------


@dataclass(frozen=True)
class DailyEstimate:
    date: pd.Timestamp
    ustat: float
    trinary: float
    binary_mle: float
    note: str = ""

    def row(self) -> tuple:
        return (self.date.strftime("%Y-%m-%d"), self.ustat, self.trinary, self.binary_mle, self.note)


def daily_estimates(
    sp: StandardizedPanel, tau: float = 0.0, tau1: float = -0.5, tau2: float = 0.5
) -> list[DailyEstimate]:
    """U-statistic, trinary and binary-MLE estimates for each complete date.

    The noise law is standard normal throughout. Dates with a masked cell
    are reported with NaN estimates and a note.
    """
    m = sp.values.shape[1]
    if m < 2:
        raise DomainError("need at least two tickers")
    g = std_normal()
    # a_star is required by the config type but plays no role in the likelihood
    cfg = ModelConfig(0.5, g, g, tau)
    out = []
    for date, x in zip(sp.dates, sp.values):
        if np.isnan(x).any():
            out.append(DailyEstimate(date, math.nan, math.nan, math.nan, f"skipped: {int(np.isnan(x).sum())} masked"))
            continue
        notes = []
        us = ustat_common_corr(x).a_hat
        cats = 1 + (x > tau1).astype(np.int8) + (x > tau2).astype(np.int8)
        tri = trinary_moment(TrinarySample.from_cats(cats), tau1, tau2, g)
        if tri.degenerate:
            notes.append("trinary degenerate")
        mle = binary_mle(BinarySample.from_bits((x > tau).astype(np.int8)), cfg)
        if mle.degenerate:
            notes.append("binary degenerate")
        out.append(DailyEstimate(date, us, tri.a_hat, mle.a_hat, "; ".join(notes)))
    return out


# -- synthetic data -----------------------------------------------------------------------------


def synthesize_prices(
    m: int = 63,
    days: int = 100,
    a_star: float = 0.5,
    seed: int = 0,
    window: int = 100,
    start: str = "2013-02-08",
) -> PricePanel:
    """Prices whose daily log returns follow the Gaussian one-factor sequence.

    Day ``t`` draws ``X^(t)`` with ``replication_seed(seed, t)``; ticker ``i``
    has return ``sigma_i X_i^(t)`` with ``sigma_i`` spread over [0.01, 0.03].
    ``window + days + 1`` price dates are produced so that ``days`` standardized
    dates remain after the warm-up.
    """
    if m < 2 or days < 1:
        raise DomainError("need m >= 2 and days >= 1")
    n_ret = window + days
    cfg = ModelConfig(a_star)
    x = np.stack([simulate_latent(cfg, m, replication_seed(seed, t)).x for t in range(n_ret)])
    sigma = np.linspace(0.01, 0.03, m)
    logp = np.vstack([np.zeros(m), np.cumsum(x * sigma, axis=0)]) + math.log(100.0)
    dates = pd.bdate_range(start, periods=n_ret + 1)
    tickers = tuple(f"S{i + 1:02d}" for i in range(m))
    return PricePanel(dates, tickers, np.exp(logp))


def write_prices(panel: PricePanel, path) -> None:
    panel.to_long().to_csv(path, index=False)
