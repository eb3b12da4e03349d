"""Config-driven runs and (alpha, sigma) sweeps.

One CSV row per (grid cell, seed). Rows are computed in any order but
always written sorted by (cell, seed); floats are written with ``repr`` so a
rerun of the same config reproduces the file byte for byte. Wall-clock
timings go to a separate ``timings.csv`` for that reason.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import distribution as distmod
from .datagen import (
    ForcedSet,
    build_ground_truth,
    forced_from_indices,
    sample_dataset,
    select_singleton_features,
)
from .diagnostics import (
    BoundInputs,
    check_noisy_structure,
    recovery_checks,
    structure_report,
    loss_bounds,
)
from .errors import ConfigError, RunError
from .evaluation import default_tol_rec, evaluate
from .solver import DEFAULT_SV_REL_TOL, min_norm_solve
from .streams import substream

log = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "TAILMEM_OUTPUT_DIR"
ENV_WORKERS = "TAILMEM_WORKERS"


@dataclass
class RunConfig:
    d: int = 10_000
    n: int = 1_000
    s: float = 5.0
    alpha: float = 1.5
    sigma: float = 0.0
    c_k: float = 10.0
    beta_decay: float = 0.1
    seeds: list = field(default_factory=lambda: list(range(1, 51)))
    # "none", "singletons:T", "s1_singletons:T" or "explicit:i,j,..." (1-based)
    ood_mode: str = "singletons:2"
    mc_draws: Optional[int] = None
    output_dir: str = "runs"
    # explicit feature rates; overrides (s, alpha) when given
    p: Optional[list] = None
    sv_rel_tol: float = DEFAULT_SV_REL_TOL
    noisy_c: float = 0.1

    def validate(self):
        for name in ("d", "n"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("s", "alpha", "sigma", "c_k", "beta_decay", "sv_rel_tol", "noisy_c"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
        if self.p is None and (self.s <= 0 or self.alpha <= 0):
            raise ConfigError("s and alpha must be positive")
        if not 0 <= self.sigma <= 1:
            raise ConfigError("sigma must lie in [0, 1]")
        if self.c_k <= 0:
            raise ConfigError("c_k must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for sd in self.seeds:
            if isinstance(sd, bool) or not isinstance(sd, (int, np.integer)) or not 0 <= sd < 2**64:
                raise ConfigError(f"seeds must be 64-bit non-negative integers, got {sd!r}")
        if self.mc_draws is not None and self.mc_draws < 2:
            raise ConfigError("mc_draws must be >= 2")
        if self.p is not None and len(self.p) != self.d:
            raise ConfigError(f"p has {len(self.p)} entries, expected d = {self.d}")
        parse_ood_mode(self.ood_mode)
        return self

    def distribution(self):
        if self.p is not None:
            return distmod.explicit(self.p)
        return distmod.build_power_law(self.d, self.s, self.alpha)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def parse_ood_mode(mode):
    """``"none"`` -> ``("none", None)``; ``"singletons:2"`` -> ``("singletons", 2)``;
    ``"explicit:3,7"`` -> ``("explicit", (2, 6))`` (converted to 0-based).

    ``s1_singletons:T`` draws only singletons that share their row with no
    other tail feature.
    """
    kind, _, arg = str(mode).partition(":")
    if kind == "none" and not arg:
        return "none", None
    try:
        if kind in ("singletons", "s1_singletons"):
            t = int(arg)
            if t < 1:
                raise ValueError
            return kind, t
        if kind == "explicit":
            idx = tuple(int(a) - 1 for a in arg.split(",") if a.strip())
            if not idx or min(idx) < 0:
                raise ValueError
            return "explicit", idx
    except ValueError:
        pass
    raise ConfigError(f"bad ood_mode {mode!r}; use none, singletons:T, s1_singletons:T or explicit:i,j,...")


def load_config(path, **overrides) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if os.environ.get(ENV_OUTPUT_DIR):
        data["output_dir"] = os.environ[ENV_OUTPUT_DIR]
    return RunConfig.from_dict(data).validate()


def env_workers(default=1):
    raw = os.environ.get(ENV_WORKERS)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{ENV_WORKERS} must be an integer, got {raw!r}") from None


@dataclass
class RunArtifacts:
    """Everything one (config, seed) pipeline produced."""

    config: RunConfig
    seed: int
    dist: object
    truth: object
    samples: object
    threshold: object
    split: object
    estimate: object
    forced: Optional[ForcedSet]
    evaluation: object
    structure: object
    noisy_check: object
    bounds: object
    checks: list


def pick_forced_set(config, samples, k, seed):
    kind, arg = parse_ood_mode(config.ood_mode)
    if kind == "none":
        return None
    if kind == "explicit":
        return forced_from_indices(arg, samples.d)
    return select_singleton_features(
        samples, k, arg, substream(seed, "ood", "select"), isolated=kind == "s1_singletons"
    )


def run_pipeline(config: RunConfig, seed: int) -> RunArtifacts:
    """distribution -> sample -> threshold -> solve -> evaluate -> diagnose."""
    try:
        config.validate()
        dist = config.distribution()
        truth = build_ground_truth(config.d, config.beta_decay)
        samples = sample_dataset(dist, truth, config.n, config.sigma, seed)
        threshold = distmod.choose_threshold(dist, config.n, config.c_k)
        k = threshold.k
        split = distmod.tail_split(dist, k)
        est = min_norm_solve(samples, config.sv_rel_tol)
        forced = pick_forced_set(config, samples, k, seed)
        ev = evaluate(
            est, truth, dist, k, default_tol_rec(config.sigma), forced,
            config.mc_draws, substream(seed, "mc"),
        )
        structure = structure_report(samples, k, config.sv_rel_tol)
        noisy = check_noisy_structure(structure, dist, config.n, config.noisy_c)
        bounds = loss_bounds(BoundInputs(
            n=config.n, d=config.d, k=k, p_tail=split.p_tail, p_k=float(dist.p[k - 1]),
            sigma=config.sigma, s=dist.s, alpha=dist.alpha, t=len(forced) if forced else 0,
        ))
        checks = recovery_checks(samples, est, truth, structure)
    except Exception as exc:
        ctx = {"seed": seed, "alpha": config.alpha, "sigma": config.sigma, "n": config.n, "d": config.d}
        raise RunError(ctx, exc) from exc
    return RunArtifacts(
        config, seed, dist, truth, samples, threshold, split, est, forced, ev,
        structure, noisy, bounds, checks,
    )


CONFIG_COLUMNS = ["cell", "seed", "d", "n", "s", "alpha", "sigma", "c_k", "beta_decay", "ood_mode"]
RESULT_COLUMNS = [
    "k", "k_saturated", "p_k", "p_tail",
    "f_size", "rank", "residual_norm",
    "in_dist_loss", "ood_loss", "ood_features",
    "common_avg_sq_error", "common_avg_abs_error",
    "tail_avg_sq_error", "tail_avg_abs_error", "recovered_fraction",
    "s0_count", "s1_count", "s_ge2_count",
    "f0_size", "f1_size", "f01_union_size", "singleton_tail_count", "s0_rank",
    "general_bound", "power_law_bound", "ood_bound", "ood_power_law_bound", "fhat_deficit",
    "in_dist_ratio", "ood_ratio",
    "mc_in_dist", "mc_in_dist_se", "mc_ood", "mc_ood_se",
    "checks_failed", "noisy_structure",
    "status", "error",
]
CSV_COLUMNS = CONFIG_COLUMNS + RESULT_COLUMNS
METRICS = [
    "in_dist_loss", "ood_loss", "common_avg_sq_error", "common_avg_abs_error",
    "tail_avg_sq_error", "tail_avg_abs_error", "recovered_fraction",
    "s0_count", "s1_count", "s_ge2_count", "f_size", "in_dist_ratio", "ood_ratio",
]


def _ratio(a, b):
    if a is None or b is None or b == 0:
        return None
    return a / b


def _config_part(config, seed, cell):
    return {
        "cell": cell, "seed": seed, "d": config.d, "n": config.n, "s": config.s,
        "alpha": config.alpha, "sigma": config.sigma, "c_k": config.c_k,
        "beta_decay": config.beta_decay, "ood_mode": config.ood_mode,
    }


def artifacts_to_row(art: RunArtifacts, cell=0) -> dict:
    row = _config_part(art.config, art.seed, cell)
    ev, st, bd = art.evaluation, art.structure, art.bounds
    rec = ev.recovery
    mc_in = ev.mc_in_dist or (None, None)
    mc_ood = ev.mc_ood or (None, None)
    failed = [c.name for c in art.checks if c.status == "fail"]
    row.update(
        k=art.threshold.k, k_saturated=art.threshold.saturated,
        p_k=float(art.dist.p[art.threshold.k - 1]), p_tail=art.split.p_tail,
        f_size=art.estimate.f_size, rank=art.estimate.rank,
        residual_norm=art.estimate.residual_norm,
        in_dist_loss=ev.in_dist_loss, ood_loss=ev.ood_loss,
        ood_features=" ".join(str(i + 1) for i in art.forced) if art.forced else None,
        common_avg_sq_error=rec.common_avg_sq_error,
        common_avg_abs_error=rec.common_avg_abs_error,
        tail_avg_sq_error=rec.tail_avg_sq_error,
        tail_avg_abs_error=rec.tail_avg_abs_error,
        recovered_fraction=rec.recovered_fraction,
        s0_count=st.s0_count, s1_count=st.s1_count, s_ge2_count=st.s_ge2_count,
        f0_size=st.f0_size, f1_size=st.f1_size, f01_union_size=st.f01_union_size,
        singleton_tail_count=st.singleton_tail_count, s0_rank=st.s0_rank,
        general_bound=bd.general_bound, power_law_bound=bd.power_law_bound,
        ood_bound=bd.ood_bound, ood_power_law_bound=bd.ood_power_law_bound,
        fhat_deficit=bd.fhat_deficit,
        in_dist_ratio=_ratio(ev.in_dist_loss, bd.general_bound),
        ood_ratio=_ratio(ev.ood_loss, bd.ood_bound),
        mc_in_dist=mc_in[0], mc_in_dist_se=mc_in[1], mc_ood=mc_ood[0], mc_ood_se=mc_ood[1],
        checks_failed=" ".join(failed) or None,
        noisy_structure=art.noisy_check.status,
        status="ok", error=None,
    )
    return row


def run_one(config: RunConfig, seed: int, cell=0) -> dict:
    return artifacts_to_row(run_pipeline(config, seed), cell)


def failed_row(config, seed, cell, exc) -> dict:
    row = {c: None for c in CSV_COLUMNS}
    row.update(_config_part(config, seed, cell))
    row["status"] = "failed"
    row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _safe_task(task):
    cell, config, seed = task
    start = time.perf_counter()
    try:
        row = run_one(config, seed, cell)
    except Exception as exc:  # crash isolation: one bad seed never stops a sweep
        log.warning("cell %s seed %s failed: %s", cell, seed, exc)
        row = failed_row(config, seed, cell, exc)
    return row, time.perf_counter() - start


def _init_worker():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    threadpool_limits(1)


def run_tasks(tasks, workers=None):
    """Run ``(cell, config, seed)`` tasks; results come back in task order."""
    workers = env_workers() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [_safe_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
        return list(pool.map(_safe_task, tasks, chunksize=1))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(rows, path, columns=CSV_COLUMNS):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def aggregate(rows, metrics=METRICS) -> dict:
    """Mean and variance of the mean, per metric, over successful rows."""
    out = {}
    for m in metrics:
        vals = np.array(
            [float(r[m]) for r in rows if r.get("status") == "ok" and r.get(m) is not None],
            dtype=np.float64,
        )
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            out[m] = (None, None, 0)
            continue
        mean = math.fsum(vals) / vals.size
        var_mean = math.fsum((vals - mean) ** 2) / (vals.size - 1) / vals.size if vals.size > 1 else 0.0
        out[m] = (mean, var_mean, int(vals.size))
    return out


@dataclass
class RunRecord:
    config: RunConfig
    rows: list
    aggregate: dict


def run_config(config: RunConfig, workers=None, cell=0) -> RunRecord:
    config.validate()
    results = run_tasks([(cell, config, sd) for sd in config.seeds], workers)
    rows = [r for r, _ in results]
    return RunRecord(config, rows, aggregate(rows))


FIGURE_PANELS = [
    ("common_avg_sq_error", "Average squared error, common features"),
    ("tail_avg_sq_error", "Average squared error, long-tail features"),
    ("in_dist_loss", "In-distribution test loss"),
    ("ood_loss", "Out-of-distribution test loss"),
]


@dataclass
class SweepResult:
    alphas: list
    sigmas: list
    rows: list
    cells: list  # (cell index, alpha, sigma, aggregate)
    output_dir: Optional[Path]


def sweep(alphas, sigmas, base: RunConfig, output_dir=None, workers=None, plots=True) -> SweepResult:
    """Every (alpha, sigma) pair, every seed; writes CSVs and the four panels.

    Invalid cells are not fatal: their rows carry ``status=failed``.
    """
    if not alphas or not sigmas:
        raise ConfigError("sweep grid must be non-empty")
    grid = [(a, s) for a in alphas for s in sigmas]
    tasks = []
    for cell, (a, s) in enumerate(grid):
        cfg = dataclasses.replace(base, alpha=a, sigma=s)
        tasks.extend((cell, cfg, sd) for sd in base.seeds)
    results = run_tasks(tasks, workers)
    rows = [r for r, _ in results]
    cells = []
    for cell, (a, s) in enumerate(grid):
        cells.append((cell, a, s, aggregate([r for r in rows if r["cell"] == cell])))
    result = SweepResult(list(alphas), list(sigmas), rows, cells, None)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_outputs(result, base, out, [t for _, t in results], plots)
        result.output_dir = out
    return result


AGG_COLUMNS = ["cell", "alpha", "sigma", "metric", "mean", "var_of_mean", "n_ok"]


def write_sweep_outputs(result: SweepResult, base, out: Path, timings, plots=True):
    from . import plots as plotmod

    write_csv(result.rows, out / "runs.csv")
    agg_rows = []
    for cell, a, s, agg in result.cells:
        for m, (mean, vm, cnt) in agg.items():
            agg_rows.append(dict(cell=cell, alpha=a, sigma=s, metric=m, mean=mean, var_of_mean=vm, n_ok=cnt))
    write_csv(agg_rows, out / "aggregate.csv", AGG_COLUMNS)
    with open(out / "timings.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("cell,seed,wall_seconds\n")
        for row, t in zip(result.rows, timings):
            fh.write(f"{row['cell']},{row['seed']},{t:.3f}\n")
    cfg = base.to_dict()
    cfg.update(alphas=result.alphas, sigmas=result.sigmas)
    with open(out / "sweep_config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for metric, title in FIGURE_PANELS:
        series = panel_series(result, metric)
        plotmod.write_series_csv(series, out / f"figure1_{metric}.csv")
        if plots:
            plotmod.write_svg(series, title, out / f"figure1_{metric}.svg")


def panel_series(result: SweepResult, metric):
    """``{sigma: [(alpha, mean, var_of_mean), ...]}`` ordered by alpha."""
    series = {}
    for _, a, s, agg in result.cells:
        mean, vm, _ = agg.get(metric, (None, None, 0))
        series.setdefault(s, []).append((a, mean, vm))
    return {s: sorted(v, key=lambda t: t[0]) for s, v in series.items()}
