"""Midpoint defect of discrete displacement interpolation.

For box pairs of fixed shape the snapped interpolant ``mu_t`` is only an
approximate ``t``-midpoint.  This prints

    defect = t ell_q(mu0, mu1) - ell_q(mu0, mu_t)

and its right-hand analogue as the grid is refined, for congruent boxes
(a translation, defect zero) and for boxes of unequal sides.

    python scripts/midpoint_defect.py --t 0.5 --resolutions 8 16 32 64
"""

import argparse

from lorentz_bm.measures import uniform_measure
from lorentz_bm.minkowski import GridSpec, grid_sample
from lorentz_bm.transport import displacement_interpolate, lq, plan_between

BOUNDS = [[0, 4], [-2, 2]]
PAIRS = {
    "congruent": ([[0.5, 1.0], [-0.5, 0.0]], [[3.0, 3.5], [0.0, 0.5]]),
    "unequal": ([[0.5, 1.0], [-0.5, 0.0]], [[2.75, 3.5], [-0.25, 0.5]]),
}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--resolutions", type=int, nargs="+", default=[8, 16, 32, 64])
    args = p.parse_args()
    t, q = args.t, args.q
    print(f"{'pair':>10} {'r':>4} {'h':>7} {'ell_q':>9} {'left defect':>12} {'right defect':>13}")
    for name, (a, b) in PAIRS.items():
        for r in args.resolutions:
            spec = GridSpec(BOUNDS, r)
            s = grid_sample(spec)
            mu0, mu1 = uniform_measure(s, spec.box_cells(a)), uniform_measure(s, spec.box_cells(b))
            mt = displacement_interpolate(plan_between(mu0, mu1, q), t)
            L = lq(mu0, mu1, q)
            left = t * L - lq(mu0, mt, q)
            right = (1 - t) * L - lq(mt, mu1, q)
            print(f"{name:>10} {r:>4} {spec.h:>7.4f} {L:>9.5f} {left:>12.2e} {right:>13.2e}")


if __name__ == "__main__":
    main()
