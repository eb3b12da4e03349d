"""Training sets, in-distribution draws and forced-feature OOD draws.

Sampling rule, per row and per feature ``i`` in increasing index order: one
uniform ``u``; the feature is ``+1`` if ``u < p_i/2``, ``-1`` if
``p_i/2 <= u < p_i`` and absent otherwise. Row ``j`` of a dataset with seed
``seed`` reads its uniforms from ``substream(seed, "row", j, "feat")`` and its
label noise from ``substream(seed, "row", j, "noise")``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .distribution import FeatureDistribution
from .errors import ConfigError, DimensionMismatch, InsufficientSingletons
from .streams import row_feature_stream, row_noise_stream


@dataclass(frozen=True, eq=False)
class GroundTruth:
    beta_star: np.ndarray

    def __post_init__(self):
        b = np.array(self.beta_star, dtype=np.float64)
        if b.ndim != 1 or b.size == 0:
            raise ConfigError("beta_star must be a non-empty 1-D vector")
        if not np.all(np.isfinite(b)):
            raise ConfigError("beta_star contains non-finite entries")
        if not np.any(b != 0):
            raise ConfigError("beta_star must have a non-zero entry")
        b.setflags(write=False)
        object.__setattr__(self, "beta_star", b)

    @property
    def d(self):
        return self.beta_star.size

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.beta_star)))


def build_ground_truth(d: int, decay: float = 0.1) -> GroundTruth:
    """``beta*_i = i**-decay`` for ``i = 1..d``."""
    if d < 1:
        raise ConfigError("d must be >= 1")
    if not math.isfinite(decay):
        raise ConfigError("decay must be finite")
    return GroundTruth(np.arange(1, d + 1, dtype=np.float64) ** (-float(decay)))


@dataclass(frozen=True, eq=False)
class SparseRow:
    """Non-zero coordinates of one ``{0, +1, -1}`` vector (0-based indices)."""

    indices: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        sg = np.asarray(self.signs, dtype=np.int8)
        if idx.shape != sg.shape or idx.ndim != 1:
            raise ValueError("indices and signs must be 1-D and the same length")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing")
        if np.any(np.abs(sg) != 1):
            raise ValueError("signs must be +1 or -1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sg)

    def __len__(self):
        return self.indices.size

    def dot(self, v):
        return float(np.dot(self.signs, v[self.indices]))

    def dense(self, d):
        out = np.zeros(d)
        out[self.indices] = self.signs
        return out


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``n`` sparse rows in CSR layout plus labels.

    Row ``j`` owns ``indices[indptr[j]:indptr[j+1]]`` and the matching slice
    of ``signs``.
    """

    d: int
    indptr: np.ndarray
    indices: np.ndarray
    signs: np.ndarray
    y: np.ndarray
    sigma: float
    seed: int

    def __post_init__(self):
        if self.indptr.size != self.y.size + 1:
            raise DimensionMismatch("indptr must have n + 1 entries")
        if self.indptr[-1] != self.indices.size or self.indices.size != self.signs.size:
            raise DimensionMismatch("indptr, indices and signs disagree")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.d):
            raise DimensionMismatch("feature index outside [0, d)")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")

    @property
    def n(self):
        return self.y.size

    def row(self, j) -> SparseRow:
        a, b = self.indptr[j], self.indptr[j + 1]
        return SparseRow(self.indices[a:b], self.signs[a:b])

    def rows(self):
        for j in range(self.n):
            yield self.row(j)

    def row_ids(self):
        """Row index of every stored non-zero, aligned with ``indices``."""
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def row_lengths(self):
        return np.diff(self.indptr)

    def matvec(self, v):
        """``X @ v`` without densifying ``X``."""
        contrib = self.signs * np.asarray(v, dtype=np.float64)[self.indices]
        return np.bincount(self.row_ids(), weights=contrib, minlength=self.n)

    def rmatvec(self, r):
        """``X.T @ r``."""
        contrib = self.signs * np.asarray(r, dtype=np.float64)[self.row_ids()]
        return np.bincount(self.indices, weights=contrib, minlength=self.d)

    def to_dense(self, columns=None):
        """Dense ``n x d`` matrix, or ``n x len(columns)`` restricted to ``columns``."""
        if columns is None:
            out = np.zeros((self.n, self.d))
            out[self.row_ids(), self.indices] = self.signs
            return out
        columns = np.asarray(columns, dtype=np.int64)
        out = np.zeros((self.n, columns.size))
        if columns.size == 0:
            return out
        pos = np.minimum(np.searchsorted(columns, self.indices), columns.size - 1)
        keep = columns[pos] == self.indices
        out[self.row_ids()[keep], pos[keep]] = self.signs[keep]
        return out

    def appearance_counts(self):
        """Number of rows in which each feature is non-zero (length ``d``)."""
        return np.bincount(self.indices, minlength=self.d)

    def noise(self):
        """Label noise ``xi = sigma * g``, regenerated from the noise substreams."""
        return self.sigma * standard_noise(self.seed, self.n)


def standard_noise(seed, n):
    return np.array([row_noise_stream(seed, j).standard_normal() for j in range(n)])


def _draw_row(p, rng):
    u = rng.random(p.size)
    idx = np.flatnonzero(u < p)
    signs = np.where(u[idx] < 0.5 * p[idx], 1, -1).astype(np.int8)
    return idx, signs


def sample_dataset(
    dist: FeatureDistribution, truth: GroundTruth, n: int, sigma: float, seed: int
) -> SampleSet:
    if dist.d != truth.d:
        raise DimensionMismatch(f"distribution has d={dist.d}, truth has d={truth.d}")
    if n < 1:
        raise ConfigError("n must be >= 1")
    if not (math.isfinite(sigma) and sigma >= 0):
        raise ConfigError("sigma must be finite and >= 0")
    p = dist.p
    idx_parts, sign_parts = [], []
    indptr = np.zeros(n + 1, dtype=np.int64)
    y = np.empty(n)
    beta = truth.beta_star
    for j in range(n):
        idx, signs = _draw_row(p, row_feature_stream(seed, j))
        idx_parts.append(idx)
        sign_parts.append(signs)
        indptr[j + 1] = indptr[j] + idx.size
        clean = float(np.dot(signs, beta[idx]))
        if sigma > 0:
            clean += sigma * row_noise_stream(seed, j).standard_normal()
        y[j] = clean
    return SampleSet(
        d=dist.d,
        indptr=indptr,
        indices=np.concatenate(idx_parts).astype(np.int64),
        signs=np.concatenate(sign_parts).astype(np.int8),
        y=y,
        sigma=float(sigma),
        seed=int(seed),
    )


@dataclass(frozen=True)
class ForcedSet:
    """Features that are non-zero in every OOD draw (0-based, sorted)."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError("forced indices must be distinct")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def check(self, d):
        if any(i < 0 or i >= d for i in self.indices):
            raise DimensionMismatch(f"forced index outside [0, {d})")
        return self

    def mask(self, d):
        m = np.zeros(d, dtype=bool)
        m[list(self.indices)] = True
        return m


EMPTY = ForcedSet(())


def forced_rates(dist: FeatureDistribution, forced: ForcedSet):
    """Per-feature non-zero rates under the OOD law (forced features at 1)."""
    forced.check(dist.d)
    q = dist.p.copy()
    q[list(forced.indices)] = 1.0
    return q


def sample_ood_point(dist: FeatureDistribution, forced: ForcedSet, rng) -> SparseRow:
    """One draw from the base law with the features of ``forced`` always on.

    Uses the same one-uniform-per-feature rule as :func:`sample_dataset`, so
    a forced feature's sign is ``+1`` iff its uniform is below 1/2.
    """
    idx, signs = _draw_row(forced_rates(dist, forced), rng)
    return SparseRow(idx, signs)


def select_singleton_features(
    samples: SampleSet, k: int, t: int, rng, isolated: bool = False
) -> ForcedSet:
    """``t`` distinct tail features (index >= k) that appear in exactly one row.

    With ``isolated=True`` only singletons whose row carries no other tail
    feature are eligible.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    eligible = singleton_tail_features(samples, k, isolated)
    if eligible.size < t:
        raise InsufficientSingletons(int(eligible.size), t)
    return ForcedSet(tuple(rng.choice(eligible, size=t, replace=False)))


def singleton_tail_features(samples: SampleSet, k: int, isolated: bool = False) -> np.ndarray:
    counts = samples.appearance_counts()
    eligible = np.flatnonzero(counts == 1)
    eligible = eligible[eligible >= k]
    if isolated and eligible.size:
        row_ids = samples.row_ids()
        tail = samples.indices >= k
        tail_per_row = np.bincount(row_ids[tail], minlength=samples.n)
        owner = row_ids[np.isin(samples.indices, eligible)]
        eligible = eligible[tail_per_row[owner] == 1]
    return eligible


def forced_from_indices(indices: Iterable[int], d: int) -> ForcedSet:
    return ForcedSet(tuple(indices)).check(d)
