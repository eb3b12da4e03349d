"""End-to-end acceptance checks at the experimental scale.

Each test prints one ``[PASS]``/``[FAIL]`` line through the ``acceptance_line``
fixture; the lines are repeated in a summary section at the end of the run.
The full sweep is computed once per module and reused.
"""
import dataclasses
import math
import time

import numpy as np
import pytest

from tailmem.datagen import build_ground_truth, sample_dataset
from tailmem.diagnostics import structure_report
from tailmem.distribution import build_power_law, tail_split, threshold_for_sparse_tail
from tailmem.harness import RunConfig, run_one, run_pipeline, sweep
from tailmem.solver import min_norm_solve, restrict_support

pytestmark = pytest.mark.acceptance

BASE = RunConfig()  # d=10000, n=1000, s=5, c_k=10, decay 0.1, seeds 1..50
ALPHAS = [1.0, 1.5, 2.0, 2.5]
SIGMAS = [0.0, 0.05, 0.1]

# tolerances
ORACLE_TOL = 1e-8
ORACLE_BUDGET_S = 10.0
RESIDUAL_REL = 1e-8
COMMON_SQ_TOL = 1e-12
MIN_FULL_RANK_SEEDS = 45
MC_SE_MULT = 4.0
MC_DRAWS = 100_000
S0_HALF_WIDTH_SDS = 5.0
MIN_S0_SEEDS = 45
SPARSE_TAIL_C = 0.1
MIN_NO_COMBINATION_SEEDS = 48
SINGLETON_CONST = 10.0
SINGLETON_FRACTION = 0.95
OOD_ENVELOPE_CONST = 20.0
NOISE_RATIO_WINDOW = (1.5, 6.0)
SWEEP_BUDGET_S = 30 * 60
BOUND_ENVELOPE = 50.0


def _oracle(samples):
    return np.linalg.pinv(samples.to_dense(), rcond=1e-10) @ samples.y


@pytest.fixture(scope="module")
def sweep_runs(tmp_path_factory):
    out = []
    for tag in ("first", "second"):
        path = tmp_path_factory.mktemp(f"sweep_{tag}")
        start = time.perf_counter()
        res = sweep(ALPHAS, SIGMAS, BASE, output_dir=path)
        out.append((res, path, time.perf_counter() - start))
    return out


def _means(result, metric):
    return {(a, s): agg[metric][0] for _, a, s, agg in result.cells}


@pytest.fixture(scope="module")
def noiseless_15():
    cfg = dataclasses.replace(BASE, alpha=1.5, sigma=0.0)
    return [run_pipeline(cfg, sd) for sd in cfg.seeds]


def test_criterion_1_oracle_equivalence(acceptance_line):
    rng = np.random.default_rng(20240601)
    worst, count = 0.0, 0
    start = time.perf_counter()
    while count < 200:
        d = int(rng.integers(1, 101))
        n = int(rng.integers(1, 31))
        alpha = float(rng.uniform(0.5, 2.5))
        sigma = float(rng.choice([0.0, 0.1]))
        samples = sample_dataset(
            build_power_law(d, min(5.0, d), alpha), build_ground_truth(d, 0.1), n, sigma, int(rng.integers(2**62))
        )
        if samples.indices.size == 0:
            continue
        worst = max(worst, float(np.max(np.abs(min_norm_solve(samples).dense() - _oracle(samples)))))
        count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= ORACLE_TOL and elapsed < ORACLE_BUDGET_S
    acceptance_line(1, ok, f"200 instances, max |diff| = {worst:.2e} (tol {ORACLE_TOL}), {elapsed:.2f} s")
    assert ok


def test_criterion_2_noiseless_interpolation(noiseless_15, acceptance_line):
    bad_residual = [a.seed for a in noiseless_15
                    if a.estimate.residual_norm > RESIDUAL_REL * np.linalg.norm(a.samples.y)]
    full = [a for a in noiseless_15 if a.structure.s0_rank == a.threshold.k]
    worst_common = max(a.evaluation.recovery.common_avg_sq_error for a in full) if full else math.nan
    ok = not bad_residual and len(full) >= MIN_FULL_RANK_SEEDS and worst_common <= COMMON_SQ_TOL
    acceptance_line(
        2, ok,
        f"residual violations {len(bad_residual)}/50, s0_rank=k in {len(full)}/50, "
        f"max common sq error {worst_common:.2e} (tol {COMMON_SQ_TOL})",
    )
    assert ok


def test_criterion_3_closed_form_vs_monte_carlo(acceptance_line):
    grid = [(a, s) for a in ALPHAS for s in SIGMAS]
    worst, fails = 0.0, 0
    for i in range(20):
        a, s = grid[i % len(grid)]
        seed = 1 + i // len(grid)
        row = run_one(dataclasses.replace(BASE, alpha=a, sigma=s, mc_draws=MC_DRAWS), seed)
        for closed, mc, se in ((row["in_dist_loss"], row["mc_in_dist"], row["mc_in_dist_se"]),
                               (row["ood_loss"], row["mc_ood"], row["mc_ood_se"])):
            z = abs(closed - mc) / se
            worst = max(worst, z)
            fails += z > MC_SE_MULT
    ok = fails == 0
    acceptance_line(3, ok, f"20 instances x 2 losses, max |closed - MC| / SE = {worst:.2f} (limit {MC_SE_MULT})")
    assert ok


def test_criterion_4a_s0_window(noiseless_15, acceptance_line):
    a0 = noiseless_15[0]
    n, p_tail = BASE.n, a0.split.p_tail
    center = n * (1 - p_tail)
    half = S0_HALF_WIDTH_SDS * math.sqrt(center)
    counts = [a.structure.s0_count for a in noiseless_15]
    inside = sum(abs(c - center) <= half for c in counts)
    ok = inside >= MIN_S0_SEEDS
    acceptance_line(
        "4a", ok,
        f"|S0| in {center:.1f} +/- {half:.1f} for {inside}/50 seeds (need {MIN_S0_SEEDS}); "
        f"observed mean {np.mean(counts):.1f}",
    )
    assert ok


def test_criterion_4a_supplement_exact_s0_law(noiseless_15, acceptance_line):
    """Supplementary: the exact Binomial law of |S0| and the one-sided lower bound."""
    a0 = noiseless_15[0]
    n, k = BASE.n, a0.threshold.k
    q = math.exp(math.fsum(np.log1p(-a0.dist.p[k:])))  # P(row has no tail feature)
    center, sd = n * q, math.sqrt(n * q * (1 - q))
    low = n * (1 - a0.split.p_tail) - S0_HALF_WIDTH_SDS * math.sqrt(n * (1 - a0.split.p_tail))
    counts = [a.structure.s0_count for a in noiseless_15]
    inside = sum(abs(c - center) <= S0_HALF_WIDTH_SDS * sd for c in counts)
    above = sum(c >= low for c in counts)
    ok = inside >= MIN_S0_SEEDS and above == len(counts)
    acceptance_line(
        "4a-exact", ok,
        f"|S0| in {center:.1f} +/- {S0_HALF_WIDTH_SDS * sd:.1f} for {inside}/50; "
        f">= {low:.1f} for {above}/50",
    )
    assert ok


def test_criterion_4b_support_census(noiseless_15, acceptance_line):
    mismatched = [a.seed for a in noiseless_15
                  if not (a.estimate.f_size == a.structure.f_size
                          == len(restrict_support(a.samples)) == np.unique(a.samples.indices).size)]
    ok = not mismatched
    acceptance_line("4b", ok, f"|F| equals union of supports on {50 - len(mismatched)}/50 seeds")
    assert ok


def test_criterion_4c_no_tail_combinations(acceptance_line):
    n, d = BASE.n, BASE.d
    dist = build_power_law(d, BASE.s, 2.5)
    truth = build_ground_truth(d, BASE.beta_decay)
    k = threshold_for_sparse_tail(dist, n, SPARSE_TAIL_C).k
    npt2 = n * tail_split(dist, k).p_tail ** 2
    clean = sum(
        structure_report(sample_dataset(dist, truth, n, 0.0, sd), k).s_ge2_count == 0 for sd in BASE.seeds
    )
    ok = npt2 < SPARSE_TAIL_C and clean >= MIN_NO_COMBINATION_SEEDS
    acceptance_line("4c", ok, f"k={k}, n p_tail^2 = {npt2:.3f}; s_ge2 = 0 in {clean}/50 seeds "
                              f"(need {MIN_NO_COMBINATION_SEEDS})")
    assert ok


def test_criterion_5_noisy_singletons_and_ood(acceptance_line):
    cfg = dataclasses.replace(BASE, alpha=2.5, sigma=0.05, ood_mode="singletons:2")
    limit = SINGLETON_CONST * cfg.sigma * math.sqrt(math.log(cfg.d))
    errs, ood, p_tail = [], [], None
    for sd in cfg.seeds:
        art = run_pipeline(cfg, sd)
        single = next(c for c in art.checks if c.name == "singleton_noise_level")
        errs.extend(single.data["abs_errors"].tolist())
        ood.append(art.evaluation.ood_loss)
        p_tail = art.split.p_tail
    frac = float(np.mean(np.asarray(errs) <= limit))
    envelope = p_tail + OOD_ENVELOPE_CONST * cfg.sigma**2 * 2 * math.log(cfg.d)
    mean_ood = float(np.mean(ood))
    ok = frac >= SINGLETON_FRACTION and mean_ood <= envelope
    acceptance_line(
        5, ok,
        f"{frac:.4f} of {len(errs)} singleton errors <= {limit:.3f}; "
        f"mean OOD {mean_ood:.4f} <= envelope {envelope:.4f}",
    )
    assert ok


def test_criterion_6a_small_alpha_is_worse(sweep_runs, acceptance_line):
    res = sweep_runs[0][0]
    bad = []
    for metric in ("in_dist_loss", "ood_loss"):
        m = _means(res, metric)
        for s in SIGMAS:
            bad += [(metric, a, s) for a in ALPHAS[1:] if not m[(1.0, s)] > m[(a, s)]]
    ok = not bad
    acceptance_line("6a", ok, f"alpha=1.0 above alpha>=1.5 for both losses at every sigma; violations {bad}")
    assert ok


def test_criterion_6b_tail_error_tracks_noise(sweep_runs, acceptance_line):
    res = sweep_runs[0][0]
    sq, ab = _means(res, "tail_avg_sq_error"), _means(res, "tail_avg_abs_error")
    ratios = {a: sq[(a, 0.1)] / sq[(a, 0.05)] for a in ALPHAS[1:]}
    abs_ratios = {a: ab[(a, 0.1)] / ab[(a, 0.05)] for a in ALPHAS[1:]}
    lo, hi = NOISE_RATIO_WINDOW
    ok = all(lo <= r <= hi for r in ratios.values())
    acceptance_line(
        "6b", ok,
        "tail sq-error ratio sigma 0.1/0.05: "
        + ", ".join(f"a={a}: {r:.2f}" for a, r in ratios.items())
        + f" (window [{lo}, {hi}]); abs-error ratios "
        + ", ".join(f"{r:.2f}" for r in abs_ratios.values()),
    )
    assert ok


def test_criterion_6c_low_noise_curves_overlap(sweep_runs, acceptance_line):
    res, _, elapsed = sweep_runs[0]
    m = _means(res, "in_dist_loss")
    gaps = {a: (abs(m[(a, 0.0)] - m[(a, 0.05)]), abs(m[(a, 0.1)] - m[(a, 0.05)])) for a in ALPHAS}
    ok = all(g0 < g1 for g0, g1 in gaps.values()) and elapsed < SWEEP_BUDGET_S
    acceptance_line(
        "6c", ok,
        "in-dist |sigma0 - sigma0.05| < |sigma0.1 - sigma0.05| at every alpha: "
        + ", ".join(f"a={a}: {g0:.2e} < {g1:.2e}" for a, (g0, g1) in gaps.items())
        + f"; sweep {elapsed:.0f} s",
    )
    assert ok


def test_bound_envelope(sweep_runs, acceptance_line):
    res = sweep_runs[0][0]
    ratios = [r["in_dist_ratio"] for r in res.rows if r["status"] == "ok"]
    worst = max(ratios)
    ok = worst <= BOUND_ENVELOPE
    acceptance_line("bound-envelope", ok, f"max in-dist loss / bound = {worst:.3g} (limit {BOUND_ENVELOPE})")
    assert ok


def test_criterion_7_byte_identical_rerun(sweep_runs, acceptance_line):
    (res1, p1, _), (res2, p2, _) = sweep_runs
    names = ["runs.csv", "aggregate.csv"] + [f.name for f in sorted(p1.glob("figure1_*"))]
    differ = [nm for nm in names if (p1 / nm).read_bytes() != (p2 / nm).read_bytes()]
    failed = sum(r["status"] != "ok" for r in res1.rows)
    ok = not differ and failed == 0
    acceptance_line(7, ok, f"{len(names)} output files compared, differing: {differ}; failed rows {failed}")
    assert ok
