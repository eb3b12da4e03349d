"""Combinatorial structure of the data matrix, recovery checks, bound formulas.

Rows are classified by how many tail features (index >= k) they carry:
``S0`` none, ``S1`` exactly one, ``S>=2`` two or more. ``F0``/``F1`` are the
features seen in ``S0``/``S1`` rows.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .datagen import GroundTruth, SampleSet, singleton_tail_features
from .distribution import FeatureDistribution, tail_split
from .solver import DEFAULT_SV_REL_TOL, Estimate, numerical_rank, residuals


@dataclass
class StructureReport:
    k: int
    n: int
    s0_count: int
    s1_count: int
    s_ge2_count: int
    f_size: int
    f0_size: int
    f1_size: int
    f01_union_size: int
    singleton_tail_count: int
    s0_rank: int
    observed: np.ndarray = field(repr=False)
    appearance_counts: np.ndarray = field(repr=False)
    row_class: np.ndarray = field(repr=False)
    f1: np.ndarray = field(repr=False)

    def summary(self):
        keys = (
            "k n s0_count s1_count s_ge2_count f_size f0_size f1_size "
            "f01_union_size singleton_tail_count s0_rank"
        ).split()
        return {key: getattr(self, key) for key in keys}


def structure_report(samples: SampleSet, k: int, sv_rel_tol: float = DEFAULT_SV_REL_TOL) -> StructureReport:
    if not 1 <= k <= samples.d:
        raise ValueError(f"k must lie in [1, {samples.d}]")
    row_ids = samples.row_ids()
    is_tail = samples.indices >= k
    tail_per_row = np.bincount(row_ids[is_tail], minlength=samples.n)
    row_class = np.minimum(tail_per_row, 2)
    entry_class = row_class[row_ids]

    f = np.unique(samples.indices)
    f0 = np.unique(samples.indices[entry_class == 0])
    f1 = np.unique(samples.indices[entry_class == 1])

    s0_rows = np.flatnonzero(row_class == 0)
    s0_block = np.zeros((s0_rows.size, k))
    in_s0 = entry_class == 0
    s0_block[np.searchsorted(s0_rows, row_ids[in_s0]), samples.indices[in_s0]] = samples.signs[in_s0]

    counts = samples.appearance_counts()
    return StructureReport(
        k=int(k),
        n=samples.n,
        s0_count=int(s0_rows.size),
        s1_count=int(np.count_nonzero(row_class == 1)),
        s_ge2_count=int(np.count_nonzero(row_class == 2)),
        f_size=int(f.size),
        f0_size=int(f0.size),
        f1_size=int(f1.size),
        f01_union_size=int(np.union1d(f0, f1).size),
        singleton_tail_count=int(np.count_nonzero(counts[k:] == 1)),
        s0_rank=numerical_rank(s0_block, sv_rel_tol),
        observed=f,
        appearance_counts=counts[f],
        row_class=row_class,
        f1=f1,
    )


@dataclass
class CheckResult:
    name: str
    status: str  # "pass", "fail" or "skipped"
    value: Optional[float] = None
    limit: Optional[float] = None
    detail: str = ""
    data: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self):
        return self.status == "pass"

    def to_dict(self):
        out = asdict(self)
        out.pop("data")
        return out


def check_noisy_structure(report: StructureReport, dist: FeatureDistribution, n: int, c: float = 0.1) -> CheckResult:
    """No row combines two tail features, asserted only when ``n p_{>k}^2 < c``."""
    p_tail = tail_split(dist, report.k).p_tail
    expected = n * p_tail**2
    if expected >= c:
        return CheckResult(
            "no_tail_combinations", "skipped", report.s_ge2_count, 0,
            f"n*p_tail^2 = {expected!r} >= {c!r}; expected S>=2 size reported only",
            {"n_p_tail_sq": expected},
        )
    status = "pass" if report.s_ge2_count == 0 else "fail"
    return CheckResult(
        "no_tail_combinations", status, report.s_ge2_count, 0,
        f"n*p_tail^2 = {expected!r} < {c!r}", {"n_p_tail_sq": expected},
    )


@dataclass
class BoundInputs:
    n: int
    d: int
    k: int
    p_tail: float
    p_k: float
    sigma: float = 0.0
    s: Optional[float] = None
    alpha: Optional[float] = None
    t: int = 0


@dataclass
class BoundReport:
    regime: str
    general_bound: float
    power_law_bound: Optional[float]
    ood_bound: float
    ood_power_law_bound: Optional[float]
    fhat_deficit: float
    inputs: BoundInputs
    dropped_terms: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def loss_bounds(params: BoundInputs) -> BoundReport:
    """Right-hand sides of the loss bounds with every hidden constant set to 1.

    Terms that divide by ``p_tail`` are dropped (and listed in
    ``dropped_terms``) when the tail is empty.
    """
    n, d, k, pt, pk, sigma = params.n, params.d, params.k, params.p_tail, params.p_k, params.sigma
    if n < 1 or d < 2 or k < 1:
        raise ValueError("need n >= 1, d >= 2, k >= 1")
    if pt < 0 or pk < 0 or not (math.isfinite(pt) and math.isfinite(pk)):
        raise ValueError("tail masses must be finite and >= 0")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma > 1:
        raise ValueError("noisy bounds assume sigma <= 1")
    ln = math.log(d)
    dropped = []

    decay = None
    if params.s is not None and params.alpha is not None:
        decay = (ln**2 / (n * params.s)) ** (1.0 - 1.0 / params.alpha)

    if pt > 0:
        deficit = max(pk / pt, pt**2 * ln**2)
    else:
        dropped.append("p_k/p_tail")
        deficit = 0.0

    if sigma == 0:
        terms = [pt, ln**4 / n, k * pt**2 * ln**4 / n, pt**3 * ln**4]
        if pt > 0:
            terms.append(k * ln**4 / (n**2 * pt))
        else:
            dropped.append("k ln^4 d / (n^2 p_tail)")
        general = math.fsum(terms)
        power_law = params.s * decay if decay is not None else None
        return BoundReport("noiseless", general, power_law, general, power_law, deficit, params, dropped)

    s2 = sigma**2
    general = pt + s2 * (k * ln / n + (k**2 * ln**2 / n + ln) * pt * ln)
    ood = pt + s2 * params.t * (k**2 * ln**2 / n + ln)
    power_law = ood_power_law = None
    if decay is not None:
        power_law = params.s * decay + s2 * decay * params.s * ln**5
        ood_power_law = params.s * decay + s2 * params.t * ln
    return BoundReport("noisy", general, power_law, ood, ood_power_law, deficit, params, dropped)


def recovery_checks(
    samples: SampleSet,
    est: Estimate,
    truth: GroundTruth,
    report: StructureReport,
    regime: Optional[str] = None,
    tol: float = 1e-6,
    noise_const: float = 100.0,
    min_fraction: float = 0.95,
) -> list:
    """Per-run recovery assertions, returned as :class:`CheckResult` objects.

    Noiseless: the common block and every tail feature of an ``S1`` row are
    exact when ``s0_rank == k``; ``S0``/``S1`` rows interpolate; the estimate
    vanishes off the support. Noisy: each singleton tail feature satisfies
    ``err^2 <= noise_const * sigma^2 * ln d`` for at least ``min_fraction`` of
    them; the largest empirical constant is reported.
    """
    if regime is None:
        regime = "noiseless" if samples.sigma == 0 else "noisy"
    k = report.k
    beta = est.dense()
    delta = beta - truth.beta_star
    out = []

    off = np.ones(samples.d, dtype=bool)
    off[est.support.observed] = False
    n_off = int(np.count_nonzero(beta[off]))
    out.append(CheckResult("zero_off_support", "pass" if n_off == 0 else "fail", n_off, 0))

    if regime == "noiseless":
        full_rank = report.s0_rank == k
        why = "" if full_rank else f"s0_rank = {report.s0_rank} < k = {k}"
        if full_rank:
            err = float(np.max(np.abs(delta[:k])))
            out.append(CheckResult("common_block_exact", "pass" if err <= tol else "fail", err, tol))
            tail1 = report.f1[report.f1 >= k]
            err = float(np.max(np.abs(delta[tail1]))) if tail1.size else 0.0
            out.append(CheckResult(
                "s1_tail_exact", "pass" if err <= tol else "fail", err, tol,
                f"{tail1.size} tail features in S1 rows",
            ))
        else:
            out.append(CheckResult("common_block_exact", "skipped", detail=why))
            out.append(CheckResult("s1_tail_exact", "skipped", detail=why))
        r = residuals(samples, est)
        limit = 1e-8 * max(1.0, float(np.max(np.abs(samples.y))))
        low = report.row_class <= 1
        worst = float(np.max(np.abs(r[low]))) if np.any(low) else 0.0
        out.append(CheckResult("s01_rows_interpolate", "pass" if worst <= limit else "fail", worst, limit))
        return out

    sigma = samples.sigma
    singles = singleton_tail_features(samples, k)
    if singles.size == 0 or sigma == 0:
        out.append(CheckResult("singleton_noise_level", "skipped", detail="no singleton tail features"))
        return out
    scale = sigma**2 * math.log(samples.d)
    ratios = delta[singles] ** 2 / scale
    frac = float(np.mean(ratios <= noise_const))
    out.append(CheckResult(
        "singleton_noise_level", "pass" if frac >= min_fraction else "fail", frac, min_fraction,
        f"empirical constant max err^2/(sigma^2 ln d) = {float(ratios.max())!r}",
        {"features": singles, "abs_errors": np.abs(delta[singles]), "c_emp": float(ratios.max())},
    ))
    return out
