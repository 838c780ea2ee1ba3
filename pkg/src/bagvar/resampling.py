"""Bootstrap resample generation as count vectors.

A resample of size ``m_sub`` drawn with replacement from ``n`` training rows
is summarized by how many times each row was drawn.  Replicate ``b`` of a
plan gets its own random stream derived from ``(seed, b)``, so rows can be
generated in any order (or in parallel) and still match a sequential run
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb, factorial

import numpy as np

from .errors import CapacityError, ConfigError

# Stream tags keep the count draws and the learner noise of one replicate
# on disjoint generators.
_COUNT_STREAM = 0
_LEARNER_STREAM = 1

#: Largest n for which exact resample enumeration is allowed.
EXACT_ENUMERATION_LIMIT = 8


def stream_rng(*key: int) -> np.random.Generator:
    """Generator seeded from an integer key tuple (order-independent setup)."""
    return np.random.default_rng(np.random.SeedSequence(tuple(int(k) for k in key)))


def stream_seed(*key: int) -> int:
    """64-bit child seed derived from an integer key tuple."""
    ss = np.random.SeedSequence(tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def learner_seed(seed: int, replicate: int) -> int:
    """Auxiliary-noise seed for one replicate of a plan."""
    return stream_seed(seed, replicate, _LEARNER_STREAM)


@dataclass(frozen=True)
class ResamplePlan:
    """How to draw bootstrap resamples.

    Parameters
    ----------
    n : int
        Training-set size.
    B : int
        Number of replicates.
    m_sub : int, optional
        Resample size; defaults to ``n``.  Values below ``n`` give
        sub-bagging.
    seed : int
        Reproducibility seed (non-negative, below 2**64).
    """

    n: int
    B: int
    m_sub: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"plan needs n >= 1, got n={self.n}")
        if self.B < 1:
            raise ConfigError(f"plan needs B >= 1, got B={self.B}")
        if self.m_sub is not None and self.m_sub < 1:
            raise ConfigError(f"plan needs m_sub >= 1, got m_sub={self.m_sub}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit non-negative integer, got {self.seed}")

    @property
    def resample_size(self) -> int:
        return self.n if self.m_sub is None else self.m_sub


def draw_resample_counts(plan: ResamplePlan) -> np.ndarray:
    """Draw the B x n matrix of bootstrap counts for a plan.

    Row ``b`` tallies ``m_sub`` independent uniform index draws from the
    replicate stream ``(seed, b)``, so it is an exact multinomial sample
    with every row summing to ``m_sub``.

    Returns
    -------
    ndarray of int64, shape (B, n)
    """
    n, m = plan.n, plan.resample_size
    counts = np.empty((plan.B, n), dtype=np.int64)
    for b in range(plan.B):
        rng = stream_rng(plan.seed, b, _COUNT_STREAM)
        idx = rng.integers(0, n, size=m)
        counts[b] = np.bincount(idx, minlength=n)
    return counts


def validate_counts(counts: np.ndarray, m_sub: int) -> None:
    """Check the count-matrix invariants (non-negative, rows sum to m_sub)."""
    counts = np.asarray(counts)
    if counts.ndim != 2:
        raise ConfigError(f"count matrix must be 2-D, got shape {counts.shape}")
    if counts.size and counts.min() < 0:
        raise ConfigError("count matrix has negative entries")
    row_sums = counts.sum(axis=1)
    if counts.size and not np.all(row_sums == m_sub):
        bad = int(np.nonzero(row_sums != m_sub)[0][0])
        raise ConfigError(
            f"count-matrix row {bad} sums to {int(row_sums[bad])}, expected {m_sub}"
        )


@dataclass(frozen=True)
class ExactResampleSet:
    """All possible bootstrap count vectors for tiny n, with probabilities.

    ``counts`` has one row per composition of n into n non-negative parts
    (C(2n-1, n-1) rows); ``probabilities`` are the multinomial masses and
    sum to 1.
    """

    counts: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        n = self.counts.shape[1]
        expected = comb(2 * n - 1, n - 1)
        if self.counts.shape[0] != expected:
            raise ConfigError(
                f"expected {expected} resamples for n={n}, got {self.counts.shape[0]}"
            )
        if not np.all(self.counts.sum(axis=1) == n):
            raise ConfigError("exact resample count vectors must sum to n")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-12:
            raise ConfigError("exact resample probabilities must sum to 1")


def enumerate_exact_resamples(n: int) -> ExactResampleSet:
    """Enumerate every bootstrap count vector of size n with its probability.

    The count vectors are the compositions of n into n non-negative parts;
    the probability of a vector k is the multinomial mass
    n! / (k_1! ... k_n!) / n**n.

    Raises
    ------
    CapacityError
        If n exceeds the combinatorial guard (n > 8).
    """
    if n < 1:
        raise ConfigError(f"need n >= 1, got {n}")
    if n > EXACT_ENUMERATION_LIMIT:
        raise CapacityError(
            f"exact enumeration supports n <= {EXACT_ENUMERATION_LIMIT}, got n={n}"
        )
    # Stars and bars: bar positions among 2n-1 slots define one composition.
    rows = []
    for bars in combinations(range(2 * n - 1), n - 1):
        edges = (-1,) + bars + (2 * n - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(n)])
    counts = np.array(rows, dtype=np.int64)

    n_fact = factorial(n)
    denom = n**n
    probs = np.array(
        [n_fact / np.prod([factorial(int(k)) for k in row]) / denom for row in counts]
    )
    return ExactResampleSet(counts=counts, probabilities=probs)
