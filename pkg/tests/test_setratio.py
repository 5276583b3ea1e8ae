import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aniso_robin.domain import RasterDomain, build_raster, wulff
from aniso_robin.errors import CapacityError, ConfigError, ParameterError
from aniso_robin.solvers import (LambdaOptions, annulus_ratio, brute_force_ell, cheeger_constant, divergence_demo,
                                 solve_Lambda)
from aniso_robin.variation import SetEnergy, ratio_R

from conftest import EUCLID, NORMS, QUAD41, raster_of

BETAS = (-0.5, 0.0, 0.5, 1.0, 2.0)


def square(n, m=None, h=1.0):
    return RasterDomain.from_mask(np.ones((n, m or n), bool), h)


# --- worked examples -------------------------------------------------------

def test_two_by_two_examples():
    g = square(2)
    for b in (1.0, 2.0):
        v, E = brute_force_ell(g, EUCLID, b)
        assert v == 2.0 and E.member.all()
        r = solve_Lambda(g, EUCLID, b)
        assert r.value == 2.0 and r.set.member.all()
    v, E = brute_force_ell(g, EUCLID, 0.0)
    assert v == 0.0 and E.member.all()
    assert cheeger_constant(g, EUCLID) == 2.0


@pytest.mark.parametrize("shape", [(4, 4), (5, 4)])
@pytest.mark.parametrize("beta", BETAS)
def test_oracle_equivalence_small_squares(shape, beta):
    g = square(*shape)
    v, E = brute_force_ell(g, EUCLID, beta)
    r = solve_Lambda(g, EUCLID, beta)
    assert r.value == pytest.approx(v, abs=1e-9)


def test_frozen_small_square_values():
    # full set wins on these squares; ratio = min(1, beta) * perimeter / area
    expect = {(4, 4): (-0.5, 0.0, 0.5, 1.0, 1.0), (5, 4): (-0.45, 0.0, 0.45, 0.9, 0.9)}
    for shape, vals in expect.items():
        g = square(*shape)
        for b, want in zip(BETAS, vals):
            assert solve_Lambda(g, EUCLID, b).value == pytest.approx(want, abs=1e-12)


def test_beta_zero_is_zero_everywhere():
    for g in (square(3), raster_of("ellipse", 1 / 16)):
        r = solve_Lambda(g, QUAD41, 0.0)
        assert r.value == 0.0 and r.set.member.all()


def test_wulff_beta_negative():
    g = raster_of("disk", 1 / 128)
    r = solve_Lambda(g, EUCLID, -0.5)
    assert r.value == pytest.approx(-1.0, abs=0.05)
    assert r.set.member.all() and r.annulus_radius == 0.0


@pytest.mark.parametrize("key", ["euclidean", "quad41"])
def test_cheeger_of_wulff(key):
    g = raster_of("wulff", 1 / 128, key)
    assert cheeger_constant(g, NORMS[key]) == pytest.approx(2.0, rel=0.04)


def test_wulff_beta_above_one_collapses_to_cheeger():
    g = raster_of("disk", 1 / 64)
    assert solve_Lambda(g, EUCLID, 3.0).value == solve_Lambda(g, EUCLID, 1.0).value


# --- oracle equivalence on random small rasters (hypothesis) ---------------

small_masks = st.lists(st.booleans(), min_size=12, max_size=12).map(lambda b: np.array(b).reshape(3, 4))


@settings(max_examples=30)
@given(small_masks, st.sampled_from(BETAS), st.sampled_from(sorted(NORMS)))
def test_oracle_equivalence_random_masks(mask, beta, key):
    if not mask.any():
        return
    g = RasterDomain.from_mask(mask)
    F = NORMS[key]
    for stencil in ("faces", "crofton"):
        v, _ = brute_force_ell(g, F, beta, stencil=stencil)
        r = solve_Lambda(g, F, beta, stencil=stencil)
        assert r.value == pytest.approx(v, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_oracle_equivalence_twenty_cells(seed):
    rng = np.random.default_rng(seed)
    mask = np.zeros((6, 6), bool)
    mask.ravel()[rng.choice(36, 20, replace=False)] = True
    g = RasterDomain.from_mask(mask)
    for beta in BETAS:
        v, _ = brute_force_ell(g, QUAD41, beta)
        assert solve_Lambda(g, QUAD41, beta).value == pytest.approx(v, abs=1e-9)


def test_brute_force_tie_break_prefers_larger_set():
    # two disconnected 1x2 blocks: each block and their union share the same ratio
    mask = np.array([[1, 1, 0, 1, 1]], bool)
    v, E = brute_force_ell(RasterDomain.from_mask(mask), EUCLID, 1.0)
    assert v == 3.0 and E.count == 4


def test_brute_force_capacity():
    with pytest.raises(CapacityError):
        brute_force_ell(square(5), EUCLID, 0.5)


# --- certification invariants ----------------------------------------------

@pytest.mark.parametrize("beta", [-0.5, 0.3, 0.8])
def test_result_is_certified(beta):
    g = raster_of("ellipse", 1 / 32)
    r = solve_Lambda(g, QUAD41, beta)
    assert r.value == pytest.approx(ratio_R(r.set, QUAD41, beta), abs=1e-12)
    assert r.value <= r.probed_min + 1e-15 and r.n_probed >= 1
    s = [p[0] for p in r.dinkelbach_path]
    assert all(b <= a + 1e-15 for a, b in zip(s[1:], s[2:]))
    assert r.converged
    json.dumps(r.to_dict())


def test_value_is_below_every_probed_family():
    g = raster_of("ellipse", 1 / 32)
    r = solve_Lambda(g, EUCLID, 0.5)
    e = SetEnergy.build(g, EUCLID)
    rng = np.random.default_rng(1)
    for _ in range(50):
        c = rng.uniform(-1, 1, 2)
        m = np.linalg.norm(g.centers - c, axis=1) < rng.uniform(0.1, 1.0)
        if m.any():
            assert r.value <= float(e.ratio(m, 0.5)) + 1e-12


def test_scaling_law():
    F = QUAD41
    v1 = solve_Lambda(build_raster(wulff(1.0, F), 1 / 64), F, 0.5).value
    v2 = solve_Lambda(build_raster(wulff(2.0, F), 1 / 64), F, 0.5).value
    assert v2 == pytest.approx(v1 / 2, rel=0.02)


def test_pdhg_inner_solver_agrees():
    for g, F, b in ((square(4), EUCLID, 0.5), (square(5, 4), QUAD41, -0.5), (raster_of("ellipse", 1 / 16), EUCLID, 0.7)):
        exact = solve_Lambda(g, F, b).value
        relaxed = solve_Lambda(g, F, b, LambdaOptions(inner="pdhg", inner_max_iter=3000))
        assert relaxed.value == pytest.approx(exact, abs=1e-9)
        assert 0.0 <= relaxed.field.values.min() and relaxed.field.values.max() <= 1.0


def test_option_errors():
    with pytest.raises(ParameterError):
        solve_Lambda(square(2), EUCLID, -1.0)
    with pytest.raises(ConfigError):
        solve_Lambda(square(2), EUCLID, 0.5, inner="simplex")


# --- divergence for beta < -1 ----------------------------------------------

def test_annulus_formula():
    assert annulus_ratio(0.9, 1.0, -1.5) == pytest.approx(2 * (0.9 - 1.5) / (1 - 0.81))
    assert annulus_ratio(0.0, 1.0, -1.5) == pytest.approx(-3.0)
    rs = np.linspace(0.5, 0.99, 50)
    vals = [annulus_ratio(r, 1.0, -1.5) for r in rs]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_divergence_demo():
    # at h = 1/128 the last admissible annulus only reaches about -22 analytically
    g = raster_of("disk", 1 / 256)
    rows = divergence_demo(g, EUCLID, -1.5)
    r, v = np.array(rows).T
    assert r[-1] < 1 - 3 * g.h + 1e-12
    assert v.min() < -10 * 2 / 1.0
    assert v[0] == pytest.approx(-3.0, rel=0.02)
    at = dict(divergence_demo(g, EUCLID, -1.5, radii=[0.9]))
    assert at[0.9] == pytest.approx(-6.3158, rel=0.10)
    tail = v[r > 0.5]
    assert np.all(np.diff(tail) < 0)


def test_divergence_demo_errors():
    with pytest.raises(ParameterError):
        divergence_demo(raster_of("disk", 1 / 16), EUCLID, -0.5)
    with pytest.raises(ParameterError):
        divergence_demo(raster_of("ellipse", 1 / 16), EUCLID, -1.5)
