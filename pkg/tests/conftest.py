import numpy as np
import pytest

from rdcov import datasets as hs
from rdcov.ingest import from_arrays

requires_headstart = pytest.mark.skipif(
    not hs.headstart_available(),
    reason=f"Head Start file not found (set {hs.ENV_VAR} or install the 'headstart' extra)",
)


def make_rd(n=800, seed=0, tau=1.0, slope=(0.5, -0.3), curv=(0.2, 0.4), noise=0.5, with_cov=False):
    """Smooth two-sided DGP with a jump of ``tau`` at zero and an optional covariate."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, n)
    z = rng.standard_normal(n)
    left = slope[0] * x + curv[0] * x**2
    right = tau + slope[1] * x + curv[1] * x**2
    y = np.where(x >= 0, right, left) + noise * rng.standard_normal(n)
    if with_cov:
        y = y + 0.8 * z
        return from_arrays(x, y, covariates={"z": z, "w": rng.standard_normal(n)})
    return from_arrays(x, y)


@pytest.fixture
def rd_data():
    return make_rd()


@pytest.fixture
def rd_cov():
    return make_rd(with_cov=True, seed=3)


@pytest.fixture(scope="session")
def headstart():
    return hs.load_headstart()
