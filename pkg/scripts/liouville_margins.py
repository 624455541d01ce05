"""Stability margins and weighted-integral growth for radial Liouville states.

Tabulates, for a range of dimensions m, the bottom of the Hardy-weighted
stability quotient of the singular profile together with the growth
exponent of the V^{2q+1} ball integrals. The margin changes sign at the
same dimension where the q = 15/8 family of integrals switches from
saturating to diverging.

Example:
    python3 scripts/liouville_margins.py --m-min 8 --m-max 12 --q 1.8
"""
import argparse
import sys

import numpy as np

from layerlab.liouville_toda import (
    farina_exponent,
    liouville_stability_margin,
    make_singular_liouville,
    ode_residual,
    solve_radial_liouville,
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m-min", type=int, default=8)
    ap.add_argument("--m-max", type=int, default=12)
    ap.add_argument("--q", type=float, default=1.8,
                    help="weight exponent, admissible range [0, 15/8)")
    ap.add_argument("--decades", type=float, default=11.0,
                    help="half-width of the radial window in decades")
    ap.add_argument("--smooth", action="store_true",
                    help="also integrate the smooth profile and report "
                         "its equation residual")
    args = ap.parse_args(argv)
    if args.m_min < 3 or args.m_max < args.m_min:
        ap.error("need 3 <= m-min <= m-max")

    r_min, r_max = 10.0 ** -args.decades, 10.0 ** args.decades
    K = np.geomspace(r_min * 1e3, r_max / 1e3, 12)
    expo = 2.0 * (2.0 * args.q + 1.0)

    print(f"singular profiles on [{r_min:.0e}, {r_max:.0e}], q = {args.q:g}")
    print(f"{'m':>3s} {'margin':>12s} {'slope':>9s} {'exact':>9s}  growth")
    for m in range(args.m_min, args.m_max + 1):
        sol = make_singular_liouville(m, r_min=r_min, r_max=r_max)
        margin = liouville_stability_margin(sol)
        slope, _ = farina_exponent(sol, args.q, K)
        word = "diverges" if slope > 0 else "saturates"
        print(f"{m:>3d} {margin:>12.6f} {slope:>9.4f} {m - expo:>9.4f}  {word}")

    if args.smooth:
        print("\nsmooth profiles, defect of the equation itself")
        for m in range(args.m_min, args.m_max + 1):
            sol = solve_radial_liouville(m)
            print(f"{m:>3d} residual {ode_residual(sol):.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
