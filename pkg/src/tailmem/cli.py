"""Command line entry point: ``tailmem <subcommand> ...``.

Failures exit with status 1 and a JSON object on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import distribution as distmod
from .datagen import build_ground_truth, sample_dataset
from .diagnostics import BoundInputs, check_noisy_structure, recovery_checks, structure_report, loss_bounds
from .errors import TailmemError
from .evaluation import default_tol_rec, evaluate
from .harness import (
    ENV_OUTPUT_DIR,
    RunConfig,
    load_config,
    pick_forced_set,
    run_config,
    sweep,
    write_csv,
)
from .io import read_estimate, read_sampleset, write_estimate, write_sampleset
from .solver import min_norm_solve
from .streams import substream


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _emit(obj):
    json.dump(_jsonable(obj), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


_FLAGS = [
    ("d", int), ("n", int), ("s", float), ("alpha", float), ("sigma", float),
    ("c_k", float), ("beta_decay", float), ("ood_mode", str), ("mc_draws", int),
    ("output_dir", str), ("sv_rel_tol", float),
]


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="JSON run-config file")
    for name, typ in _FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    p.add_argument("--seeds", type=int, nargs="+")


def _config(args) -> RunConfig:
    overrides = {name: getattr(args, name, None) for name, _ in _FLAGS}
    overrides["seeds"] = getattr(args, "seeds", None)
    if args.config is not None:
        return load_config(args.config, **overrides)
    cfg = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    if os.environ.get(ENV_OUTPUT_DIR):
        cfg.output_dir = os.environ[ENV_OUTPUT_DIR]
    return cfg.validate()


def _model(cfg, d):
    cfg = dataclasses.replace(cfg, d=d)
    return cfg, cfg.distribution(), build_ground_truth(d, cfg.beta_decay)


def cmd_generate(args):
    cfg = _config(args)
    dist = cfg.distribution()
    truth = build_ground_truth(cfg.d, cfg.beta_decay)
    samples = sample_dataset(dist, truth, cfg.n, cfg.sigma, args.seed)
    write_sampleset(samples, args.out)
    _emit({"out": str(args.out), "n": samples.n, "d": samples.d, "nnz": int(samples.indices.size)})


def cmd_solve(args):
    samples = read_sampleset(args.samples)
    kw = {} if args.sv_rel_tol is None else {"sv_rel_tol": args.sv_rel_tol}
    est = min_norm_solve(samples, **kw)
    write_estimate(est, args.out)
    _emit({"out": str(args.out), "support": est.f_size, "rank": est.rank, "residual_norm": est.residual_norm})


def _fit_context(args):
    samples = read_sampleset(args.samples)
    est = read_estimate(args.estimate)
    cfg, dist, truth = _model(_config(args), samples.d)
    k = distmod.choose_threshold(dist, samples.n, cfg.c_k).k
    return cfg, samples, est, dist, truth, k


def cmd_evaluate(args):
    cfg, samples, est, dist, truth, k = _fit_context(args)
    forced = pick_forced_set(cfg, samples, k, samples.seed)
    ev = evaluate(est, truth, dist, k, default_tol_rec(samples.sigma), forced,
                  cfg.mc_draws, substream(samples.seed, "mc"))
    out = _jsonable(ev)
    out["k"] = k
    if forced is not None:
        out["forced"] = [i + 1 for i in forced]
    _emit(out)


def cmd_diagnose(args):
    cfg, samples, est, dist, truth, k = _fit_context(args)
    rep = structure_report(samples, k, cfg.sv_rel_tol)
    checks = recovery_checks(samples, est, truth, rep)
    noisy = check_noisy_structure(rep, dist, samples.n, cfg.noisy_c)
    _emit({
        "structure": rep.summary(),
        "noisy_structure": noisy.to_dict(),
        "checks": [c.to_dict() for c in checks],
    })


def cmd_bounds(args):
    cfg = _config(args)
    dist = cfg.distribution()
    k = args.k or distmod.choose_threshold(dist, cfg.n, cfg.c_k).k
    split = distmod.tail_split(dist, k)
    rep = loss_bounds(BoundInputs(
        n=cfg.n, d=cfg.d, k=k, p_tail=split.p_tail, p_k=float(dist.p[k - 1]),
        sigma=cfg.sigma, s=dist.s, alpha=dist.alpha, t=args.t,
    ))
    _emit(rep.to_dict())


def cmd_run(args):
    cfg = _config(args)
    rec = run_config(cfg, workers=args.workers)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rec.rows, out / "runs.csv")
    summary = {m: {"mean": a[0], "var_of_mean": a[1], "n_ok": a[2]} for m, a in rec.aggregate.items()}
    _emit({"out": str(out / "runs.csv"), "aggregate": summary,
           "failed": sum(r["status"] != "ok" for r in rec.rows)})


def cmd_sweep(args):
    cfg = _config(args)
    res = sweep(args.alphas, args.sigmas, cfg, output_dir=cfg.output_dir,
                workers=args.workers, plots=not args.no_plots)
    _emit({"out": str(res.output_dir), "rows": len(res.rows),
           "failed": sum(r["status"] != "ok" for r in res.rows)})


def build_parser():
    ap = argparse.ArgumentParser(prog="tailmem", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a training set to a file")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="fit the min-norm estimator to a sample-set file")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sv-rel-tol", dest="sv_rel_tol", type=float)
    p.set_defaults(func=cmd_solve)

    for name, func, text in (("evaluate", cmd_evaluate, "closed-form losses and recovery errors"),
                             ("diagnose", cmd_diagnose, "structure report and recovery checks")):
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        p.add_argument("--samples", type=Path, required=True)
        p.add_argument("--estimate", type=Path, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("bounds", help="evaluate the loss-bound expressions")
    _add_config_flags(p)
    p.add_argument("--k", type=int, help="threshold (default: chosen from --c-k)")
    p.add_argument("--t", type=int, default=2, help="size of the forced OOD set")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("run", help="all seeds of one config -> runs.csv")
    _add_config_flags(p)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="alpha x sigma grid -> CSVs and SVG panels")
    _add_config_flags(p)
    p.add_argument("--alphas", type=float, nargs="+", default=[1.0, 1.5, 2.0, 2.5])
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 0.05, 0.1])
    p.add_argument("--workers", type=int)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except TailmemError as exc:
        json.dump(exc.to_dict(), sys.stderr)
        sys.stderr.write("\n")
        return 1
    except (OSError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
