"""W-norm estimate against lattice size for m0 and m_+^{+-} (criterion 10 analysis).

Prints the normalized estimate at every even lattice size up to 32 and the
relative change under each doubling.
"""
import argparse

import numpy as np

from stratwave.scans import NULL_REGIMES, _symbol_on_lattice, transform_l1
from stratwave.symbols import MultiplierSpec, eval_multiplier


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="4 8 12 16 20 24 28 32")
    args = ap.parse_args()
    shells = NULL_REGIMES["unit"]
    ref = 2.0 ** (shells.xi[0] + shells.p_max)
    sizes = [int(s) for s in args.sizes.split()]
    for spec in (MultiplierSpec("m0"), MultiplierSpec("m_plus_minus", 1, 1, -1)):
        def fn(xi, eta):
            return np.asarray(eval_multiplier(spec, xi, eta)) * shells.chi(xi, eta)
        est = {n: transform_l1(*_symbol_on_lattice(fn, shells, n)) / ref for n in sizes}
        print(spec.label)
        for n in sizes:
            line = f"  n={n:3d}  ratio {est[n]:10.2f}"
            if est.get(n // 2, 0) > 0:
                line += f"  change vs n={n // 2}: {100 * abs(est[n] - est[n // 2]) / est[n // 2]:.1f}%"
            print(line)


if __name__ == "__main__":
    main()
