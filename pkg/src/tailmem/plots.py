"""Loss and error panels: one series per sigma against alpha, with error bars.

Error bars are the variance of the mean across seeds.
"""
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Fixed salt and no date metadata keep the SVG bytes stable across reruns.
matplotlib.rcParams["svg.hashsalt"] = "tailmem"


def write_series_csv(series, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma", "alpha", "mean", "var_of_mean"])
        for sigma in sorted(series):
            for alpha, mean, vm in series[sigma]:
                w.writerow([repr(float(sigma)), repr(float(alpha)),
                            "" if mean is None else repr(float(mean)),
                            "" if vm is None else repr(float(vm))])


def write_svg(series, title, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    for sigma in sorted(series):
        pts = [(a, m, v) for a, m, v in series[sigma] if m is not None]
        if not pts:
            continue
        a, m, v = zip(*pts)
        ax.errorbar(a, m, yerr=v, marker="o", capsize=3, label=f"sigma={sigma:g}")
    ax.set_xlabel("alpha")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
