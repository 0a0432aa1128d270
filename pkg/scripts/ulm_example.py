#!/usr/bin/env python3
"""Print the uniform linear motion from bottom to top on the four-element example.

The poset has p1 isolated and p2 below p3 and p4.  The script prints the
breakpoints, the coordinate speeds, a few sample points and the flow that
certifies straightness at each face crossing.

Usage:
  python scripts/ulm_example.py
  python scripts/ulm_example.py --samples 13
"""

import argparse

import numpy as np

from lattice_dr.poset import build
from lattice_dr.ulm import straightness_at, ulm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=7)
    args = ap.parse_args()

    P = build(4, [(1, 2), (1, 3)], ["p1", "p2", "p3", "p4"])
    m = ulm(P, np.zeros(4), np.ones(4))
    names = [P.name(p) for p in range(P.n)]
    print("speeds:      " + "  ".join(f"{n}={s:.6f}" for n, s in zip(names, m.speeds)))
    print("breakpoints: " + "  ".join(f"{t:.6f}" for t in m.breakpoints))
    print()
    print("     t  " + "  ".join(f"{n:>8}" for n in names))
    for t in sorted(set(np.linspace(0, 1, args.samples).tolist()) | set(m.breakpoints)):
        print(f"{t:6.4f}  " + "  ".join(f"{v:8.5f}" for v in m(t)))
    for t in m.breakpoints[1:-1]:
        rep = straightness_at(P, m.velocity(t, "-"), m.velocity(t, "+"))
        print()
        print(f"face crossing at t={t:.6f}: straight={rep.ok}  residual={rep.residual:.2e}")
        print("  before (unit total): " + " ".join(f"{v:.4f}" for v in rep.v_minus))
        print("  after  (unit total): " + " ".join(f"{v:.4f}" for v in rep.v_plus))
        for (sign, a, b), flow in sorted(rep.witness.items()):
            print(f"  {sign} {P.name(a)} -> {P.name(b)}: {flow:.4f}")


if __name__ == "__main__":
    main()
