"""Threshold k and tail mass p_tail across alpha, next to the integral estimate.

For p_i = s i^-alpha / Z the tail mass beyond k behaves like
s k^(1 - alpha) / ((alpha - 1) Z) when alpha > 1.
"""
import argparse

from tailmem.distribution import build_power_law, choose_threshold, tail_split, threshold_for_sparse_tail


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=10_000)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--s", type=float, default=5.0)
    ap.add_argument("--c-k", type=float, default=10.0)
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 1.5, 2.0, 2.5, 3.0])
    args = ap.parse_args()

    print(f"{'alpha':>6} {'Z':>9} {'k':>5} {'p_tail':>10} {'integral':>10} {'n p_tail^2':>11} {'k_sparse':>9}")
    for a in args.alphas:
        dist = build_power_law(args.d, args.s, a)
        k = choose_threshold(dist, args.n, args.c_k).k
        pt = tail_split(dist, k).p_tail
        z = dist.provenance.z_alpha
        approx = args.s * k ** (1 - a) / ((a - 1) * z) if a > 1 else float("nan")
        ks = threshold_for_sparse_tail(dist, args.n).k
        print(f"{a:>6} {z:>9.4f} {k:>5} {pt:>10.5f} {approx:>10.5f} {args.n * pt**2:>11.3f} {ks:>9}")


if __name__ == "__main__":
    main()
