"""Latent one-factor sequence and its binary / trinary discretizations.

Each latent value is ``X_i = sqrt(1 - a) * Y_i + sqrt(a) * Y`` with ``Y_i``
i.i.d. from the noise law and a single shared factor ``Y``.

Random numbers come from numpy's Philox-4x64-10 counter-based generator keyed
by the 64-bit seed, counter starting at zero. Each raw 64-bit output ``r`` is
mapped to the open unit interval as ``((r >> 11) + 0.5) * 2**-53``; the first
uniform drives ``Y``, the next ``n`` drive ``Y_1, ..., Y_n``, all through the
inverse cdf of the respective law.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .dist import StandardizedDistribution, std_normal
from .errors import DomainError, ParameterError

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replication_seed(seed: int, r: int) -> int:
    """Seed of replication ``r``: ``seed XOR splitmix64(r)``."""
    return (int(seed) ^ splitmix64(int(r))) & MASK64


def stream_seed(seed: int, tag: int) -> int:
    """Independent child stream for a labelled sub-experiment (e.g. a sample size)."""
    return splitmix64((int(seed) ^ splitmix64(int(tag) ^ 0xD1B54A32D192ED03)) & MASK64)


def uniform_stream(seed: int, size: int) -> np.ndarray:
    """``size`` doubles in (0, 1) from Philox keyed by ``seed``."""
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    raw = np.random.Philox(key=seed).random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class ModelConfig:
    """Parameters of the latent threshold model.

    ``tau`` is the binary threshold; ``tau1 < tau2`` (optional) are the
    trinary break points.
    """

    a_star: float
    noise: StandardizedDistribution = std_normal()
    factor: StandardizedDistribution = std_normal()
    tau: float = 0.0
    tau1: float | None = None
    tau2: float | None = None

    def __post_init__(self):
        if not (0.0 < self.a_star < 1.0):
            raise ParameterError(f"a_star must lie in (0, 1), got {self.a_star}")
        if not math.isfinite(self.tau):
            raise ParameterError("tau must be finite")
        if (self.tau1 is None) != (self.tau2 is None):
            raise ParameterError("tau1 and tau2 must be given together")
        if self.tau1 is not None and not self.tau1 < self.tau2:
            raise ParameterError(f"need tau1 < tau2, got {self.tau1}, {self.tau2}")

    @property
    def trinary(self) -> bool:
        return self.tau1 is not None

    def to_dict(self) -> dict:
        return {
            "a_star": self.a_star,
            "noise": self.noise.to_dict(),
            "factor": self.factor.to_dict(),
            "tau": self.tau,
            "tau1": self.tau1,
            "tau2": self.tau2,
        }


@dataclass(frozen=True, eq=False)
class LatentSample:
    y: float
    yi: np.ndarray
    x: np.ndarray

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class BinarySample:
    bits: np.ndarray
    abar: float

    @property
    def n(self) -> int:
        return self.bits.size

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def from_bits(cls, bits) -> "BinarySample":
        b = np.asarray(bits, dtype=np.int8)
        if b.ndim != 1 or b.size == 0 or np.any((b != 0) & (b != 1)):
            raise DomainError("bits must be a nonempty 0/1 sequence")
        b.setflags(write=False)
        return cls(b, float(b.sum()) / b.size)

    @classmethod
    def from_count(cls, n: int, k: int) -> "BinarySample":
        """A sample with ``k`` ones out of ``n`` (order is irrelevant downstream)."""
        if not 0 <= k <= n or n < 1:
            raise DomainError("need 0 <= k <= n and n >= 1")
        bits = np.zeros(n, dtype=np.int8)
        bits[:k] = 1
        return cls.from_bits(bits)


@dataclass(frozen=True, eq=False)
class TrinarySample:
    cats: np.ndarray
    counts: tuple[int, int, int]

    @property
    def n(self) -> int:
        return self.cats.size

    @property
    def abar1(self) -> float:
        return self.counts[0] / self.n

    @property
    def abar2(self) -> float:
        return self.counts[1] / self.n

    @property
    def abar3(self) -> float:
        return self.counts[2] / self.n

    @classmethod
    def from_cats(cls, cats) -> "TrinarySample":
        c = np.asarray(cats, dtype=np.int8)
        if c.ndim != 1 or c.size == 0 or np.any((c < 1) | (c > 3)):
            raise DomainError("cats must be a nonempty sequence over {1, 2, 3}")
        c.setflags(write=False)
        counts = np.bincount(c, minlength=4)[1:]
        return cls(c, tuple(int(v) for v in counts))


def simulate_latent(cfg: ModelConfig, n: int, seed: int, fixed_y: float | None = None) -> LatentSample:
    """Draw one latent sequence of length ``n``.

    ``fixed_y`` replaces the factor draw (the first uniform is still consumed,
    so the idiosyncratic terms are the same with or without it).
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    u = uniform_stream(seed, n + 1)
    y = float(cfg.factor.quantile(u[0])) if fixed_y is None else float(fixed_y)
    if not math.isfinite(y):
        raise DomainError("fixed_y must be finite")
    yi = cfg.noise.quantile(u[1:])
    x = math.sqrt(1.0 - cfg.a_star) * yi + math.sqrt(cfg.a_star) * y
    yi.setflags(write=False)
    x.setflags(write=False)
    return LatentSample(y, yi, x)


def discretize_binary(ls: LatentSample | np.ndarray, tau: float) -> BinarySample:
    x = ls.x if isinstance(ls, LatentSample) else np.asarray(ls, dtype=float)
    return BinarySample.from_bits((x > tau).astype(np.int8))


def discretize_trinary(ls: LatentSample | np.ndarray, tau1: float, tau2: float) -> TrinarySample:
    """Categories over (-inf, tau1], (tau1, tau2], (tau2, inf) coded 1, 2, 3."""
    if not tau1 < tau2:
        raise DomainError(f"need tau1 < tau2, got {tau1}, {tau2}")
    x = ls.x if isinstance(ls, LatentSample) else np.asarray(ls, dtype=float)
    cats = 1 + (x > tau1).astype(np.int8) + (x > tau2).astype(np.int8)
    return TrinarySample.from_cats(cats)


def sample_to_csv(ls: LatentSample, discrete: BinarySample | TrinarySample | None = None) -> str:
    """One row per index: ``i, y_i, x_i`` plus ``bit`` or ``cat`` when given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = []
    if isinstance(discrete, BinarySample):
        extra, col = ["bit"], discrete.bits
    elif isinstance(discrete, TrinarySample):
        extra, col = ["cat"], discrete.cats
    w.writerow(["i", "y_i", "x_i", *extra])
    for i in range(ls.n):
        row = [i + 1, repr(float(ls.yi[i])), repr(float(ls.x[i]))]
        if extra:
            row.append(int(col[i]))
        w.writerow(row)
    return buf.getvalue()


def read_sample_csv(text: str) -> tuple[np.ndarray, np.ndarray | None, str | None]:
    """Parse :func:`sample_to_csv` output; returns ``(x, discrete, kind)``.

    Lines starting with ``#`` are ignored.
    """
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    reader = csv.DictReader(rows)
    x, disc = [], []
    kind = None
    fields = reader.fieldnames or []
    if "x_i" not in fields:
        raise DomainError("sample CSV needs an x_i column")
    if "bit" in fields:
        kind = "bit"
    elif "cat" in fields:
        kind = "cat"
    for row in reader:
        x.append(float(row["x_i"]))
        if kind:
            disc.append(int(row[kind]))
    return np.asarray(x), (np.asarray(disc) if kind else None), kind
