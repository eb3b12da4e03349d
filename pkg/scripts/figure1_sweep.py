"""Reproduce the four loss/error panels over the alpha x sigma grid.

    python3 scripts/figure1_sweep.py [--config configs/figure1.json] [--workers 4]

Writes runs.csv, aggregate.csv, figure1_*.csv and figure1_*.svg under the
config's output_dir and prints a small table of the cell means.
"""
import argparse
import time
from pathlib import Path

from tailmem.harness import load_config, sweep

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "figure1.json")
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 1.5, 2.0, 2.5])
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 0.05, 0.1])
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()

    cfg = load_config(args.config)
    start = time.perf_counter()
    res = sweep(args.alphas, args.sigmas, cfg, output_dir=cfg.output_dir, workers=args.workers)
    elapsed = time.perf_counter() - start

    metrics = ["in_dist_loss", "ood_loss", "common_avg_sq_error", "tail_avg_sq_error"]
    print(f"{'alpha':>6} {'sigma':>6} " + " ".join(f"{m:>20}" for m in metrics))
    for _, a, s, agg in res.cells:
        print(f"{a:>6} {s:>6} " + " ".join(f"{agg[m][0]:>20.6g}" for m in metrics))
    failed = sum(r["status"] != "ok" for r in res.rows)
    print(f"\n{len(res.rows)} runs, {failed} failed, {elapsed:.0f} s -> {res.output_dir}")


if __name__ == "__main__":
    main()
