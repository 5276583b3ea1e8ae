"""Finsler p-Laplacian Robin eigenvalues, their p -> 1 limit and anisotropic set ratios on rasters."""

__version__ = "0.1.0"

from .domain import AnalyticDomain, RasterDomain, build_raster, disk, ellipse, rectangle, wulff, annulus  # noqa: E402
from .finsler import FinslerNorm, WulffShape, anisotropic_distance, curvature_mu, eval_gradient, eval_norm, eval_polar  # noqa: E402
from .variation import CellSet, GridField, perimeter_F, ratio_R, rayleigh_J, rayleigh_Jp, total_variation_F  # noqa: E402
from .solvers import brute_force_ell, cheeger_constant, solve_Lambda, solve_lambda_p, solve_radial_shooting  # noqa: E402
