"""Print the p -> 1 gap table on the Euclidean disk.

The eigenvalues come from radial shooting and the limit from Richardson-extrapolated
set-ratio solves; pass --grid to also run the 2-D solver at the given mesh size.
"""
import argparse

from aniso_robin.domain import build_raster, disk
from aniso_robin.finsler import FinslerNorm
from aniso_robin.solvers import solve_lambda_p, solve_radial_shooting
from aniso_robin.studies import RICHARDSON_H, lambda_richardson


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--betas", type=float, nargs="+", default=[-0.5, 0.5, 2.0])
    ap.add_argument("--ps", type=float, nargs="+", default=[1.5, 1.25, 1.1, 1.05])
    ap.add_argument("--grid", type=float, default=None, help="mesh size for the 2-D solver")
    a = ap.parse_args()
    F = FinslerNorm.euclidean()
    g = build_raster(disk(), a.grid) if a.grid else None
    print("beta,p,Lambda,lambda_shoot,gap_shoot,lambda_grid,converged")
    for b in a.betas:
        Lam = lambda_richardson(disk(), F, b, RICHARDSON_H).value
        for p in a.ps:
            s = solve_radial_shooting(F, 1.0, 2, p, b).lambda_
            row = [b, p, f"{Lam:.6f}", f"{s:.6f}", f"{abs(s - Lam):.6f}", "", ""]
            if g is not None:
                r = solve_lambda_p(g, F, p, b)
                row[5:] = [f"{r.lambda_:.6f}", r.converged]
            print(",".join(map(str, row)), flush=True)


if __name__ == "__main__":
    main()
