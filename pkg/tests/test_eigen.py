import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import i0, i1, j0, j1

from aniso_robin.domain import RasterDomain, build_raster, rectangle
from aniso_robin.errors import BracketError, ParameterError, UnsupportedDomainError
from aniso_robin.solvers import (EigenOptions, bessel_j0_first_root_squared, solve_lambda_p,
                                 solve_radial_shooting)
from aniso_robin.variation import rayleigh_Jp

from conftest import EUCLID, QUAD41, raster_of


def robin_disk_p2(beta: float) -> float:
    """First Robin eigenvalue of the unit disk for p = 2 from the Bessel boundary condition."""
    if beta > 0:
        k = brentq(lambda k: k * j1(k) - beta * j0(k), 1e-9, 2.404825557695773)
        return k * k
    k = brentq(lambda k: k * i1(k) + beta * i0(k), 1e-9, 50.0)
    return -k * k


# --- radial shooting -------------------------------------------------------

def test_bessel_series_root():
    assert bessel_j0_first_root_squared() == pytest.approx(2.404825557695773 ** 2, rel=1e-14)


def test_shooting_dirichlet_limit():
    lam = solve_radial_shooting(EUCLID, 1.0, 2, 2.0, 1e6).lambda_
    assert lam == pytest.approx(bessel_j0_first_root_squared(), abs=1e-2)
    assert lam == pytest.approx(5.7831744, abs=1e-6)


@pytest.mark.parametrize("beta", [-0.5, -0.2, 0.5, 1.0, 4.0])
def test_shooting_matches_bessel_oracle_p2(beta):
    assert solve_radial_shooting(EUCLID, 1.0, 2, 2.0, beta).lambda_ == pytest.approx(robin_disk_p2(beta), rel=1e-7)


@pytest.mark.parametrize("p,beta,expected", [
    (1.05, 2.0, 2.335607), (1.05, -0.5, -1.0000000), (1.25, 1.0, 1.933518), (1.5, 0.5, 0.975689),
    (2.0, -0.5, -1.135686)])
def test_shooting_frozen_values(p, beta, expected):
    res = solve_radial_shooting(EUCLID, 1.0, 2, p, beta)
    assert res.lambda_ == pytest.approx(expected, abs=2e-6)
    assert res.monotone


def test_shooting_methods_agree():
    a = solve_radial_shooting(EUCLID, 1.0, 2, 1.5, 0.5).lambda_
    b = solve_radial_shooting(EUCLID, 1.0, 2, 1.5, 0.5, method="dop853").lambda_
    assert a == pytest.approx(b, rel=1e-6)


def test_shooting_scaling_law():
    # lambda(W_R, beta) = R^-p lambda(W_1, beta R^{p-1})
    p, beta, R = 1.5, 0.8, 2.0
    lhs = solve_radial_shooting(None, R, 2, p, beta).lambda_
    rhs = R ** -p * solve_radial_shooting(None, 1.0, 2, p, beta * R ** (p - 1)).lambda_
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_shooting_profile_shape_and_trivial_case():
    lam, prof = solve_radial_shooting(EUCLID, 1.0, 2, 1.25, -0.3)
    r, phi = np.array(prof).T
    assert lam < 0 and phi[0] == 1.0 and np.all(np.diff(phi) >= -1e-14)
    lam0, prof0 = solve_radial_shooting(EUCLID, 1.0, 2, 1.7, 0.0)
    assert lam0 == 0.0 and all(v == 1.0 for _, v in prof0)


def test_shooting_approaches_gamma_limit():
    lam = {p: solve_radial_shooting(EUCLID, 1.0, 2, p, 0.5).lambda_ for p in (1.5, 1.05)}
    assert abs(lam[1.05] - 1.0) < abs(lam[1.5] - 1.0)


def test_shooting_errors():
    with pytest.raises(ParameterError):
        solve_radial_shooting(EUCLID, 1.0, 2, 1.0, 0.5)
    with pytest.raises(ParameterError):
        solve_radial_shooting(EUCLID, 1.0, 2, 2.0, -1.0)
    with pytest.raises(ParameterError):
        solve_radial_shooting(EUCLID, -1.0, 2, 2.0, 0.5)
    with pytest.raises(ParameterError):
        solve_radial_shooting(EUCLID, 1.0, 2, 2.0, 0.5, method="euler")


def test_bracket_error_surfaces(monkeypatch):
    import aniso_robin.solvers.eigen as eig
    monkeypatch.setattr(eig, "_rk4_batch", lambda lams, *a, **k: np.ones(len(lams)))
    with pytest.raises(BracketError):
        eig.solve_radial_shooting(EUCLID, 1.0, 2, 2.0, 0.5)


# --- grid solver -----------------------------------------------------------

def test_neumann_case():
    g = raster_of("ellipse", 1 / 16)
    r = solve_lambda_p(g, EUCLID, 2.0, 0.0)
    assert r.lambda_ == 0.0 and np.ptp(r.field.values) == 0.0


@pytest.mark.parametrize("p,beta", [(2.0, 1.0), (2.0, -0.5), (1.25, 1.0), (1.25, -0.5)])
def test_grid_agrees_with_shooting(p, beta):
    g = raster_of("disk", 1 / 32)
    grid = solve_lambda_p(g, EUCLID, p, beta)
    shoot = solve_radial_shooting(EUCLID, 1.0, 2, p, beta).lambda_
    assert grid.lambda_ == pytest.approx(shoot, rel=0.02)
    assert grid.converged


def test_grid_anisotropic_wulff_agrees_with_shooting():
    g = raster_of("wulff", 1 / 32, "quad41")
    grid = solve_lambda_p(g, QUAD41, 2.0, 1.0)
    assert grid.lambda_ == pytest.approx(robin_disk_p2(1.0), rel=0.02)


def test_eigen_result_invariants():
    g = raster_of("disk", 1 / 16)
    for beta in (-0.4, 0.3, 1.5):
        r = solve_lambda_p(g, EUCLID, 1.5, beta)
        assert np.sign(r.lambda_) == np.sign(beta)
        assert np.all(r.field.values >= 0)
        assert r.field.lp_norm(1.5) == pytest.approx(1.0, rel=1e-12)
        assert r.lambda_ == pytest.approx(rayleigh_Jp(r.field, EUCLID, 1.5, beta), rel=1e-12)
        assert r.iterations > 0 and len(r.residual_history) > 0
        d = r.to_dict()
        assert d["lambda"] == r.lambda_ and d["p"] == 1.5


def test_grid_monotone_in_beta():
    g = raster_of("disk", 1 / 16)
    lams = [solve_lambda_p(g, EUCLID, 2.0, b).lambda_ for b in (-0.6, -0.2, 0.2, 0.6, 1.5)]
    assert all(a < b for a, b in zip(lams, lams[1:]))


def test_descent_method_agrees():
    g = raster_of("disk", 1 / 16)
    a = solve_lambda_p(g, EUCLID, 2.0, 0.7).lambda_
    b = solve_lambda_p(g, EUCLID, 2.0, 0.7, EigenOptions(method="descent", max_iter=4000)).lambda_
    assert b == pytest.approx(a, rel=5e-3) and b >= a - 1e-9


def test_grid_errors():
    g = raster_of("disk", 1 / 16)
    for p in (1.0, 4.5):
        with pytest.raises(ParameterError):
            solve_lambda_p(g, EUCLID, p, 0.5)
    with pytest.raises(ParameterError):
        solve_lambda_p(g, EUCLID, 2.0, -1.0)
    with pytest.raises(UnsupportedDomainError):
        solve_lambda_p(build_raster(rectangle(1, 1), 1 / 16), EUCLID, 2.0, -0.5)
    with pytest.raises(UnsupportedDomainError):
        solve_lambda_p(RasterDomain.from_mask(np.ones((3, 3), bool)), EUCLID, 2.0, -0.5)


def test_nonconvergence_is_flagged_not_raised():
    g = raster_of("disk", 1 / 16)
    r = solve_lambda_p(g, EUCLID, 2.0, 0.7, EigenOptions(max_iter=2))
    assert not r.converged and math.isfinite(r.lambda_)
