"""Benchmark distributions, Poissonized sampling, and sample splitting.

Families with unbounded support (zipf, poisson, geometric) are restricted to
the first ``k`` symbols and renormalized.  Poissonized samples are generated
directly as independent per-symbol Poisson counts, which is exactly
equivalent to drawing ``Poisson(n)`` i.i.d. symbols and tallying them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np
from scipy import stats as _stats

__all__ = [
    "FAMILIES",
    "SPLIT_MODES",
    "Distribution",
    "Histogram",
    "SplitSample",
    "make_distribution",
    "sample_histogram",
    "split_sample",
]

FAMILIES = ("uniform", "dirichlet", "zipf", "binomial", "poisson", "geometric")
SPLIT_MODES = ("two_stream", "thinned", "shared")

_DEFAULT_PARAMS = {
    "uniform": {},
    "dirichlet": {"concentration": 2.0},
    "zipf": {"power": 1.5},
    "binomial": {"prob": 0.3},
    "poisson": {"mean": 3000.0},
    "geometric": {"prob": 0.99},
}


@dataclass(frozen=True)
class Distribution:
    """An explicit probability vector over symbols ``0..k-1``."""

    probs: np.ndarray
    family: str
    params: dict
    k: int

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class Histogram:
    """Multiset of symbol counts from one sample stream.

    Symbols with zero count are absent from the map; ``total`` is the sum
    of all counts.
    """

    counts: dict
    total: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        for sym, c in self.counts.items():
            if c < 0 or c != int(c):
                raise ValueError(f"count for {sym!r} must be a nonnegative integer")
        cleaned = {sym: int(c) for sym, c in self.counts.items() if c > 0}
        object.__setattr__(self, "counts", cleaned)
        object.__setattr__(self, "total", sum(cleaned.values()))

    @classmethod
    def from_counts(cls, counts: Mapping[Hashable, int]) -> "Histogram":
        return cls(dict(counts))

    @classmethod
    def from_array(cls, count_vector: np.ndarray) -> "Histogram":
        """Build from a dense per-symbol count vector indexed by symbol."""
        count_vector = np.asarray(count_vector)
        (nz,) = np.nonzero(count_vector)
        return cls({int(i): int(count_vector[i]) for i in nz})

    def as_arrays(self) -> tuple[list, np.ndarray]:
        """Symbols (in insertion order) and the aligned count array."""
        syms = list(self.counts.keys())
        cnts = np.fromiter(self.counts.values(), dtype=np.int64, count=len(syms))
        return syms, cnts

    def get(self, sym: Hashable) -> int:
        return self.counts.get(sym, 0)


@dataclass(frozen=True)
class SplitSample:
    """A pair of count streams plus the per-stream Poisson rate."""

    first: Histogram
    second: Histogram
    rate: float


def _normalize_log(log_mass: np.ndarray) -> np.ndarray:
    p = np.exp(log_mass - log_mass.max())
    return p / p.sum()


def make_distribution(
    family: str,
    k: int,
    params: dict | None = None,
    rng: np.random.Generator | int | None = None,
) -> Distribution:
    """Construct one of the benchmark families over ``k`` symbols.

    Conventions: zipf puts mass ``rank^(-power)`` on ranks 1..k; geometric
    puts ``(1-prob)^(x-1) * prob`` on 1..k; poisson and binomial live on
    0..k-1 (binomial with k-1 trials).  The dirichlet family draws one
    vector from a symmetric Dirichlet prior and therefore consumes ``rng``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if k < 1 or k != int(k):
        raise ValueError(f"k must be a positive integer, got {k!r}")
    k = int(k)
    merged = dict(_DEFAULT_PARAMS[family])
    merged.update(params or {})

    if family == "uniform":
        probs = np.full(k, 1.0 / k)
        probs /= probs.sum()
    elif family == "dirichlet":
        conc = float(merged["concentration"])
        if not conc > 0:
            raise ValueError("dirichlet concentration must be positive")
        if rng is None:
            raise ValueError("dirichlet family requires an rng or seed")
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        probs = gen.dirichlet(np.full(k, conc))
        probs = probs / probs.sum()
    elif family == "zipf":
        power = float(merged["power"])
        if not power > 0:
            raise ValueError("zipf power must be positive")
        probs = _normalize_log(-power * np.log(np.arange(1, k + 1, dtype=np.float64)))
    elif family == "binomial":
        prob = float(merged["prob"])
        if not 0 < prob < 1:
            raise ValueError("binomial prob must be in (0, 1)")
        if k == 1:
            probs = np.array([1.0])
        else:
            probs = _normalize_log(_stats.binom.logpmf(np.arange(k), k - 1, prob))
    elif family == "poisson":
        mean = float(merged["mean"])
        if not mean > 0:
            raise ValueError("poisson mean must be positive")
        probs = _normalize_log(_stats.poisson.logpmf(np.arange(k), mean))
    else:  # geometric
        prob = float(merged["prob"])
        if not 0 < prob < 1:
            raise ValueError("geometric prob must be in (0, 1)")
        x = np.arange(1, k + 1, dtype=np.float64)
        probs = _normalize_log((x - 1.0) * math.log1p(-prob) + math.log(prob))

    return Distribution(probs=probs, family=family, params=merged, k=k)


def sample_histogram(
    dist: Distribution,
    n: float,
    poissonized: bool = True,
    rng: np.random.Generator | None = None,
) -> Histogram:
    """Draw one count histogram of expected (or exact) size ``n``.

    Poissonized mode draws independent ``Poisson(n * p_x)`` counts per
    symbol; fixed mode draws exactly ``n`` i.i.d. symbols.
    """
    if not n > 0:
        raise ValueError(f"sample size must be positive, got {n!r}")
    if rng is None:
        raise ValueError("sampling requires an rng")
    if poissonized:
        counts = rng.poisson(dist.probs * float(n))
    else:
        counts = rng.multinomial(int(round(n)), dist.probs)
    return Histogram.from_array(counts)


def split_sample(
    dist: Distribution,
    budget: float,
    mode: str = "two_stream",
    rng: np.random.Generator | None = None,
) -> SplitSample:
    """Produce the two count streams consumed by the amplified estimator.

    ``two_stream`` draws two independent Poissonized streams of rate
    ``budget`` each (expected total ``2 * budget``).  ``thinned`` draws one
    stream of rate ``budget`` and routes each sample to a side by a fair
    coin, so each side has rate ``budget / 2``.  ``shared`` reuses a single
    rate-``budget`` stream as both sides; the sides are then fully dependent,
    which trades theory for sample thrift.
    """
    if mode not in SPLIT_MODES:
        raise ValueError(f"unknown split mode {mode!r}; choose from {SPLIT_MODES}")
    if not budget > 0:
        raise ValueError(f"budget must be positive, got {budget!r}")
    if rng is None:
        raise ValueError("sampling requires an rng")
    if mode == "two_stream":
        first = sample_histogram(dist, budget, poissonized=True, rng=rng)
        second = sample_histogram(dist, budget, poissonized=True, rng=rng)
        return SplitSample(first=first, second=second, rate=float(budget))
    if mode == "shared":
        hist = sample_histogram(dist, budget, poissonized=True, rng=rng)
        return SplitSample(first=hist, second=hist, rate=float(budget))
    # thinned
    counts = rng.poisson(dist.probs * float(budget))
    first = rng.binomial(counts, 0.5)
    return SplitSample(
        first=Histogram.from_array(first),
        second=Histogram.from_array(counts - first),
        rate=float(budget) / 2.0,
    )
