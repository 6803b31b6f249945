import pytest

from ictd import training
from ictd.mrp import gen_boyan
from ictd.numerics import make_rng
from ictd.verify import random_prompt


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def prompt(rng):
    return random_prompt(rng, n=6, d=3)


@pytest.fixture
def boyan_task(rng):
    return gen_boyan(10, 4, rng)


@pytest.fixture
def small_params():
    """Random 3-layer shared parameters for a d=2 prompt."""
    rng = make_rng(99)
    P = 0.3 * rng.uniform(-1.0, 1.0, size=(5, 5))
    Q = 0.3 * rng.uniform(-1.0, 1.0, size=(5, 5))
    return P, Q


@pytest.fixture(autouse=True)
def clear_alpha_cache():
    training._VTD_ALPHA_CACHE.clear()
    yield
    training._VTD_ALPHA_CACHE.clear()
