"""Decay slopes of P_k e^{it Lambda} f for Gaussian data across shells and widths,
plus the small-p ratios of criterion 2 for k = -1, 0."""
import argparse

import numpy as np

from stratwave.norms import decay_experiment, small_p_ratios
from stratwave.spectral import GridSpec, SpectralField


def gaussian(g, w):
    x1, x2 = g.x
    return SpectralField.from_physical(g, np.exp(-(x1 ** 2 + x2 ** 2) / (2 * w * w)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=1024)
    ap.add_argument("--box-length", type=float, default=160.0)
    ap.add_argument("--times", default="4 8 16 32 64 128 256 512")
    args = ap.parse_args()
    g = GridSpec(args.grid, args.box_length)
    times = [float(t) for t in args.times.split()]
    for w in (1.0, 2.0):
        for k in (-1, 0, 1):
            c = decay_experiment(gaussian(g, w), k, times)
            note = "" if c.contaminated_from is None else f" (contaminated from t={c.contaminated_from:g})"
            print(f"width {w:g} k={k:+d}: slope {c.slope:.4f} on t={list(c.fit_times)}{note}")
    small = GridSpec(256, 80.0)
    for k in (-1, 0):
        rows = small_p_ratios(gaussian(small, 1.0), k, [(-2, 4.0), (-3, 16.0), (-4, 64.0)])
        print(f"small p, k={k:+d}: " + ", ".join(f"(p={r.p}, t={r.t:g}) {r.ratio:.3e}" for r in rows))


if __name__ == "__main__":
    main()
