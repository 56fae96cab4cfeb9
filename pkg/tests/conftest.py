import pytest
from testfixtures import TempDirectory

from app.database.variance_store import reset_variance_store
from app.models.params import FluidAntennaGeometry, NetworkParams, QuadratureSpec
from app.services.channel_estimation import build_pilot_budget


@pytest.fixture(autouse=True)
def variance_cache():
    """Every test gets its own variance cache file."""
    with TempDirectory() as d:
        store = reset_variance_store(d.getpath("variance_cache.jsonl"))
        yield store
    reset_variance_store(None)


@pytest.fixture
def params():
    return NetworkParams()


@pytest.fixture
def fa():
    return FluidAntennaGeometry(N=4)


@pytest.fixture
def budget(params, fa):
    return build_pilot_budget(params, fa)


@pytest.fixture
def fast_spec():
    return QuadratureSpec(rel_tol=1e-4, gamma_nodes=8, t_nodes=6, li_nodes=4, nesting_tol=5e-3)
