"""In-distribution and OOD losses, plus per-group recovery errors.

Coordinates of ``x`` are independent, mean zero, with ``E[x_i^2] = p_i`` (and
1 for forced features), so ``E[<delta, x>^2] = sum_i E[x_i^2] delta_i^2``.
The closed forms below are exact; :func:`monte_carlo_loss` exists to check them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datagen import EMPTY, ForcedSet, GroundTruth, forced_rates
from .distribution import FeatureDistribution
from .errors import DimensionMismatch
from .solver import Estimate


def _delta(est: Estimate, truth: GroundTruth):
    if est.d != truth.d:
        raise DimensionMismatch(f"estimate has d={est.d}, truth has d={truth.d}")
    return est.dense() - truth.beta_star


def _weighted_sq(weights, delta):
    return math.fsum(weights * delta * delta)


def in_dist_loss_closed(est: Estimate, truth: GroundTruth, dist: FeatureDistribution) -> float:
    delta = _delta(est, truth)
    if dist.d != delta.size:
        raise DimensionMismatch("distribution and estimate dimensions differ")
    return _weighted_sq(dist.p, delta)


def ood_loss_closed(
    est: Estimate, truth: GroundTruth, dist: FeatureDistribution, forced: ForcedSet
) -> float:
    delta = _delta(est, truth)
    return _weighted_sq(forced_rates(dist, forced), delta)


def monte_carlo_loss(
    est: Estimate,
    truth: GroundTruth,
    dist: FeatureDistribution,
    forced: Optional[ForcedSet] = None,
    n_draws: int = 100_000,
    rng=None,
):
    """Empirical mean and standard error of ``<beta_hat - beta*, x>^2``.

    Draws are generated column by column: feature ``i`` is non-zero in a
    ``Binomial(n_draws, q_i)`` sized uniformly random subset of the draws,
    with independent uniform signs. That is the same joint law as drawing
    ``n_draws`` rows independently, at ``O(n_draws * sum(q))`` cost.
    """
    if n_draws < 2:
        raise ValueError("n_draws must be >= 2")
    if rng is None:
        rng = np.random.default_rng(0)
    delta = _delta(est, truth)
    q = forced_rates(dist, forced or EMPTY)
    active = np.flatnonzero(delta)
    z = np.zeros(n_draws)
    counts = rng.binomial(n_draws, q[active])
    for i, m in zip(active, counts):
        if m == 0:
            continue
        signs = rng.integers(0, 2, size=m) * 2.0 - 1.0
        if m == n_draws:
            z += delta[i] * signs
        else:
            z[rng.choice(n_draws, size=m, replace=False)] += delta[i] * signs
    sq = z * z
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_draws))


@dataclass
class RecoveryReport:
    common_avg_sq_error: float
    common_avg_abs_error: float
    tail_avg_sq_error: float
    tail_avg_abs_error: float
    recovered_fraction: float
    tail_observed: int


def recovery_report(est: Estimate, truth: GroundTruth, k: int, tol_rec: float) -> RecoveryReport:
    """Errors on the common block ``[0, k)`` and on observed tail features.

    ``recovered_fraction`` counts observed features within ``tol_rec`` of the
    truth, over ``|F|``.
    """
    if not 1 <= k <= truth.d:
        raise ValueError(f"k must lie in [1, {truth.d}]")
    delta = _delta(est, truth)
    common = delta[:k]
    obs = est.support.observed
    tail_obs = obs[obs >= k]
    tail = delta[tail_obs]
    recovered = np.count_nonzero(np.abs(delta[obs]) <= tol_rec)
    nan = float("nan")
    return RecoveryReport(
        common_avg_sq_error=float(np.mean(common**2)),
        common_avg_abs_error=float(np.mean(np.abs(common))),
        tail_avg_sq_error=float(np.mean(tail**2)) if tail.size else nan,
        tail_avg_abs_error=float(np.mean(np.abs(tail))) if tail.size else nan,
        recovered_fraction=recovered / obs.size,
        tail_observed=int(tail_obs.size),
    )


def default_tol_rec(sigma):
    return 1e-6 if sigma == 0 else 3.0 * sigma


@dataclass
class EvalReport:
    in_dist_loss: float
    recovery: RecoveryReport
    ood_loss: Optional[float] = None
    forced: Optional[ForcedSet] = None
    mc_in_dist: Optional[tuple] = None
    mc_ood: Optional[tuple] = None


def evaluate(
    est: Estimate,
    truth: GroundTruth,
    dist: FeatureDistribution,
    k: int,
    tol_rec: float,
    forced: Optional[ForcedSet] = None,
    mc_draws: Optional[int] = None,
    rng=None,
) -> EvalReport:
    report = EvalReport(
        in_dist_loss=in_dist_loss_closed(est, truth, dist),
        recovery=recovery_report(est, truth, k, tol_rec),
        forced=forced,
    )
    if forced is not None:
        report.ood_loss = ood_loss_closed(est, truth, dist, forced)
    if mc_draws:
        report.mc_in_dist = monte_carlo_loss(est, truth, dist, None, mc_draws, rng)
        if forced is not None:
            report.mc_ood = monte_carlo_loss(est, truth, dist, forced, mc_draws, rng)
    return report
