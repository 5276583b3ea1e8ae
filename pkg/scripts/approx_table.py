"""Shrink-and-mollify schedule on the unit disk for u = 1 and u = 1 - |x|."""
import argparse
import math

import numpy as np

from aniso_robin.approx import strict_convergence_report
from aniso_robin.domain import build_raster, disk
from aniso_robin.finsler import FinslerNorm
from aniso_robin.variation import GridField, extended_variation

ap = argparse.ArgumentParser()
ap.add_argument("--h", type=float, default=1 / 256)
ap.add_argument("--taus", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
a = ap.parse_args()

F = FinslerNorm.euclidean()
g = build_raster(disk(), a.h)
fields = {"one": GridField.constant(g),
          "cone": GridField.from_function(g, lambda x: 1 - np.linalg.norm(x, axis=1))}
print("field,tau,eps,L1_rel,extTV,extTV_target,TV_rel_err,clearance")
for name, u in fields.items():
    target = extended_variation(u, F)
    mass = u.integral_abs_p(1.0)
    for r in strict_convergence_report(u, [(t, t * t) for t in a.taus], F):
        print(f"{name},{r.tau:g},{r.eps:g},{r.L1_error / mass:.5f},{r.extended_TV:.5f},{target:.5f},"
              f"{r.extended_TV / target - 1:+.4f},{r.support_clearance:.4f}")
print(f"# 2 pi = {2 * math.pi:.5f}")
