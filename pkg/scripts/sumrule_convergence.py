"""Commutator sum-rule residual against frequency-grid density.

Prints the relative residual for the Lorentz dielectric at |k| = 1 on nested
log grids, plus the dissipative coverage of each grid.
"""

import argparse
import time

import numpy as np

from magneto_qed import fields, pv
from magneto_qed.media import ClosedFormRegion, LorentzTerm, MediumModel


def main(points, refines, gamma):
    model = MediumModel((ClosedFormRegion("dm1", (LorentzTerm("ee", 0.5, 1.0, gamma),)),))
    print(f"{'refine':>6} {'points':>7} {'value':>22} {'relative':>10} {'coverage':>9} {'seconds':>8}")
    for r in refines:
        omega = np.geomspace(*pv.DEFAULT_SPAN, (points - 1) * r + 1)
        start = time.perf_counter()
        res = fields.sum_rule(model, [1.0, 0.0, 0.0], (1, 2), omega=omega)
        print(f"{r:6d} {omega.size:7d} {res.value.real:22.15f} {res.relative():10.2e} {res.coverage:9.6f} {time.perf_counter() - start:8.1f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=pv.DEFAULT_POINTS)
    p.add_argument("--refine", type=int, nargs="+", default=[1, 2, 4])
    p.add_argument("--gamma", type=float, default=0.1)
    a = p.parse_args()
    main(a.points, a.refine, a.gamma)
