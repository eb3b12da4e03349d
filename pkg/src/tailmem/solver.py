"""Minimum-norm least squares on the observed support.

Columns no training row touches carry no information and the min-norm
solution is exactly zero on them, so the SVD runs on the ``n x |F|``
restriction of ``X`` rather than the full ``n x d`` matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .datagen import SampleSet
from .errors import DimensionMismatch, EmptySupport, NonFinite

DEFAULT_SV_REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SupportMap:
    """Observed features ``F`` (sorted, 0-based) and their column positions."""

    observed: np.ndarray

    def __len__(self):
        return self.observed.size

    @cached_property
    def inverse(self) -> dict:
        return {int(i): pos for pos, i in enumerate(self.observed)}

    def contains(self, idx):
        idx = np.asarray(idx)
        pos = np.minimum(np.searchsorted(self.observed, idx), max(self.observed.size - 1, 0))
        return self.observed[pos] == idx


def restrict_support(samples: SampleSet) -> SupportMap:
    observed = np.unique(samples.indices)
    if observed.size == 0:
        raise EmptySupport(f"all {samples.n} rows are empty")
    return SupportMap(observed)


def rank_cutoff(singular_values, shape, sv_rel_tol=DEFAULT_SV_REL_TOL):
    """Threshold at or below which a singular value counts as zero."""
    if singular_values.size == 0:
        return 0.0
    return sv_rel_tol * float(singular_values[0]) * max(shape)


def numerical_rank(a, sv_rel_tol=DEFAULT_SV_REL_TOL):
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.count_nonzero(sv > rank_cutoff(sv, a.shape, sv_rel_tol)))


@dataclass(frozen=True, eq=False)
class Estimate:
    d: int
    support: SupportMap
    beta_on_support: np.ndarray
    rank: int
    sv_tolerance: float
    residual_norm: float
    sv_max: float = float("nan")

    def dense(self):
        out = np.zeros(self.d)
        out[self.support.observed] = self.beta_on_support
        return out

    @property
    def f_size(self):
        return len(self.support)


def min_norm_solve(samples: SampleSet, sv_rel_tol: float = DEFAULT_SV_REL_TOL) -> Estimate:
    """``beta = pinv(X) @ y`` computed on the support-restricted matrix."""
    if not np.all(np.isfinite(samples.y)):
        raise NonFinite("labels contain non-finite values")
    if not (np.isfinite(sv_rel_tol) and sv_rel_tol >= 0):
        raise NonFinite("sv_rel_tol must be finite and >= 0")
    support = restrict_support(samples)
    a = samples.to_dense(support.observed)
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    tol = rank_cutoff(sv, a.shape, sv_rel_tol)
    r = int(np.count_nonzero(sv > tol))
    coef = (u[:, :r].T @ samples.y) / sv[:r]
    beta = vt[:r].T @ coef
    resid = a @ beta - samples.y
    return Estimate(
        d=samples.d,
        support=support,
        beta_on_support=beta,
        rank=r,
        sv_tolerance=tol,
        residual_norm=float(np.linalg.norm(resid)),
        sv_max=float(sv[0]),
    )


def residuals(samples: SampleSet, est: Estimate) -> np.ndarray:
    """``r_j = <beta_hat, x_j> - y_j``."""
    if est.d != samples.d:
        raise DimensionMismatch(f"estimate has d={est.d}, samples have d={samples.d}")
    return samples.matvec(est.dense()) - samples.y
