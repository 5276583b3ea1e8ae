import functools
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aniso_robin.domain import build_raster, disk, ellipse, rectangle, wulff
from aniso_robin.finsler import FinslerNorm

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EUCLID = FinslerNorm.euclidean()
QUAD41 = FinslerNorm.quadratic([4.0, 0.0, 0.0, 1.0])
NORMS = {
    "euclidean": EUCLID,
    "q3": FinslerNorm.qnorm(3.0),
    "q1.5w": FinslerNorm.qnorm(1.5, (1.0, 2.0)),
    "quad41": QUAD41,
    "quad_off": FinslerNorm.quadratic([2.0, 0.5, 0.5, 1.0]),
}


@functools.lru_cache(maxsize=None)
def raster_of(kind: str, h: float, norm: str = "euclidean"):
    """Cached rasters shared across test modules."""
    F = NORMS[norm]
    dom = {"disk": lambda: disk(),
           "wulff": lambda: wulff(1.0, F),
           "ellipse": lambda: ellipse(2 ** 0.5, 2 ** -0.5),
           "square": lambda: rectangle(1.0, 1.0, center=(0.0, 0.0)),
           "rect21": lambda: rectangle(2.0, 1.0, center=(0.0, 0.0))}[kind]()
    return build_raster(dom, h)


@pytest.fixture(params=list(NORMS), ids=list(NORMS))
def any_norm(request):
    return NORMS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(970)
