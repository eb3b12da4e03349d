"""Long-tail feature-frequency model.

Features are indexed ``0..d-1`` internally. A threshold ``k`` is a *count*:
the common features are ``0..k-1`` (``1..k`` in the 1-based file formats) and the tail is
``k..d-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PowerLaw:
    s: float
    alpha: float
    z_alpha: float


@dataclass(frozen=True, eq=False)
class FeatureDistribution:
    """Independent sign-symmetric Bernoulli features with rates ``p``.

    ``provenance`` is ``None`` for an explicit vector, otherwise the
    :class:`PowerLaw` parameters the vector was built from.
    """

    p: np.ndarray
    provenance: Optional[PowerLaw] = None
    _total: float = field(init=False, repr=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ConfigError("p must be a non-empty 1-D vector")
        if not np.all(np.isfinite(p)):
            raise ConfigError("p contains non-finite entries")
        if np.any(p <= 0) or np.any(p > 1):
            raise ConfigError("every p_i must lie in (0, 1]")
        if np.any(np.diff(p) > 0):
            raise ConfigError("p must be nonincreasing")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "_total", math.fsum(p))

    @property
    def d(self) -> int:
        return self.p.size

    @property
    def total(self) -> float:
        """Expected number of non-zero features per draw, ``sum(p)``."""
        return self._total

    @property
    def s(self):
        return self.provenance.s if self.provenance else None

    @property
    def alpha(self):
        return self.provenance.alpha if self.provenance else None

    def to_dict(self):
        if self.provenance is None:
            return {"kind": "explicit", "p": [float(x) for x in self.p]}
        return {
            "kind": "power_law",
            "d": self.d,
            "s": self.provenance.s,
            "alpha": self.provenance.alpha,
        }

    @classmethod
    def from_dict(cls, data):
        if data["kind"] == "explicit":
            return explicit(data["p"])
        return build_power_law(data["d"], data["s"], data["alpha"])


def explicit(p) -> FeatureDistribution:
    return FeatureDistribution(np.asarray(p, dtype=np.float64))


def build_power_law(d: int, s: float, alpha: float) -> FeatureDistribution:
    """``p_i = min(1, s * i**-alpha / Z)`` for ``i = 1..d``, ``Z = sum_i i**-alpha``."""
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise ConfigError(f"d must be a positive integer, got {d!r}")
    d = int(d)
    for name, v in (("s", s), ("alpha", alpha)):
        if not math.isfinite(v):
            raise ConfigError(f"{name} must be finite, got {v!r}")
        if v <= 0:
            raise ConfigError(f"{name} must be positive, got {v!r}")
    powers = np.arange(1, d + 1, dtype=np.float64) ** (-float(alpha))
    # fsum: exactly rounded, so independent of summation order and blocking.
    z = math.fsum(powers)
    p = np.minimum(1.0, float(s) * powers / z)
    return FeatureDistribution(p, PowerLaw(float(s), float(alpha), z))


class TailSplit(NamedTuple):
    k: int
    p_head: float
    p_tail: float


def tail_split(dist: FeatureDistribution, k: int) -> TailSplit:
    if not 1 <= k <= dist.d:
        raise ValueError(f"k must lie in [1, {dist.d}], got {k}")
    return TailSplit(int(k), math.fsum(dist.p[:k]), math.fsum(dist.p[k:]))


def tail_masses(dist: FeatureDistribution) -> np.ndarray:
    """``out[k] = p_{>k}`` for ``k = 0..d``, by reverse cumulative sums.

    Cheaper than repeated :func:`tail_split` when scanning many ``k``; not
    exactly rounded, so use it for searches, not for reported values.
    """
    out = np.zeros(dist.d + 1)
    out[:-1] = np.cumsum(dist.p[::-1])[::-1]
    return out


class Threshold(NamedTuple):
    k: int
    saturated: bool


def choose_threshold(dist: FeatureDistribution, n: int, c_k: float = 10.0) -> Threshold:
    """Smallest ``k`` with ``n * p_k <= c_k``; ``(d, True)`` if there is none."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not c_k > 0:
        raise ValueError("c_k must be positive")
    hits = np.flatnonzero(n * dist.p <= c_k)
    if hits.size == 0:
        return Threshold(dist.d, True)
    return Threshold(int(hits[0]) + 1, False)


def threshold_for_sparse_tail(dist: FeatureDistribution, n: int, c: float = 0.1) -> Threshold:
    """Smallest ``k`` with ``n * p_{>k}**2 < c``.

    This is the regime where training rows carry at most one tail feature
    with high probability.
    """
    tails = tail_masses(dist)[1:]
    hits = np.flatnonzero(n * tails**2 < c)
    if hits.size == 0:
        return Threshold(dist.d, True)
    return Threshold(int(hits[0]) + 1, False)
