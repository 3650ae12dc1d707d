"""Error of the truncated slow-sweep propagator against total time.

Doubles the total time a few times, integrates with a panel count that
keeps the quadrature floor out of the way, and reports the fitted
log-log slope (the truncation analysis predicts minus two).
"""

from __future__ import annotations

import argparse

import numpy as np

from pathint import long_time as lt


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=1.0, help="static level splitting")
    ap.add_argument("--b", type=float, default=0.2, help="sweep drive strength")
    ap.add_argument("--shape", default="linear", choices=("linear", "sine"))
    ap.add_argument("--base-time", type=float, default=20.0)
    ap.add_argument("--doublings", type=int, default=3)
    args = ap.parse_args()

    ham = lt.two_level_sweep(args.a, args.b, shape=args.shape, grid=8)
    bounds = lt.adiabatic_bounds(ham)
    print(f"# gap_min={bounds.gap_min:.3f} drive_ratio={bounds.drive_ratio:.3f}")
    times = [args.base_time * 2**i for i in range(args.doublings + 1)]
    errs = []
    print("T,r,error")
    for total_time in times:
        r = max(512, int(np.ceil(2.0 * total_time**1.5)))
        err = lt.longtime_error(ham, total_time, r=r)
        errs.append(err)
        print(f"{total_time},{r},{err:.6e}")
    slope = float(np.polyfit(np.log(times), np.log(errs), 1)[0])
    print(f"# fitted slope {slope:.3f}")


if __name__ == "__main__":
    main()
