import numpy as np
import pytest

from rdcov.errors import InsufficientDataError, RankDeficiencyError
from rdcov.ingest import from_arrays
from rdcov.local_fit import (FitSpec, covariate_coefficients, fit_covariate_adjusted, fit_interacted,
                             fit_pooled, fit_side, intercept_difference)


def poly_data(deg, n=300, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, n)
    cl = rng.standard_normal(deg + 1)
    cr = rng.standard_normal(deg + 1)
    y = np.where(x >= 0, np.polynomial.polynomial.polyval(x, cr), np.polynomial.polynomial.polyval(x, cl))
    return from_arrays(x, y), cl, cr


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("kernel", ["triangular", "uniform", "epanechnikov"])
def test_polynomial_reproduction(p, kernel):
    # degree-p and degree-q fits reproduce a noiseless polynomial of degree <= their order
    for deg in (p, p + 1):
        d, cl, cr = poly_data(deg)
        spec = FitSpec(p=p, kernel=kernel, h=0.7)
        left = fit_side(d, spec, "left", deg)
        right = fit_side(d, spec, "right", deg)
        np.testing.assert_allclose(left.coefficients, cl, atol=1e-9)
        np.testing.assert_allclose(right.coefficients, cr, atol=1e-9)
        assert intercept_difference(left, right) == pytest.approx(cr[0] - cl[0], abs=1e-9)


@pytest.mark.parametrize("degree", [1, 2])
def test_pooled_equals_separate_fits(rd_data, degree):
    spec = FitSpec(h=0.6)
    pooled = fit_pooled(rd_data, spec, degree)
    left = fit_side(rd_data, spec, "left", degree)
    right = fit_side(rd_data, spec, "right", degree)
    assert pooled.coef("T") == pytest.approx(intercept_difference(left, right), abs=1e-10)
    assert pooled.coef("1") == pytest.approx(left.coefficients[0], abs=1e-10)
    # HC3 variance of the jump also decomposes: the design is block-separable
    v_sep = left.linear_variance(0) + right.linear_variance(0)
    assert pooled.linear_variance(0) == pytest.approx(v_sep, rel=1e-10)


def test_interacted_equals_per_group_fits():
    rng = np.random.default_rng(5)
    n = 600
    x = rng.uniform(-1, 1, n)
    g = (rng.uniform(size=n) < 0.4).astype(float)
    y = (x >= 0) * (1 + g) + x + rng.standard_normal(n) * 0.3
    d = from_arrays(x, y, group=g, group_name="g")
    spec = FitSpec(h=0.8)
    fit, levels = fit_interacted(d, spec, "g", 2)
    assert levels == [0.0, 1.0]
    for lev in levels:
        sub = d.subset(g == lev)
        ref = fit_pooled(sub, spec, 2)
        assert fit.coef(f"T@{lev:g}") == pytest.approx(ref.coef("T"), abs=1e-10)


def test_covariate_adjusted_fit_recovers_common_coefficient(rd_cov):
    fit = fit_covariate_adjusted(rd_cov, FitSpec(h=0.8, covariates=("z",)))
    gam = covariate_coefficients(fit)
    assert set(gam) == {"z"}
    assert gam["z"] == pytest.approx(0.8, abs=0.1)


def test_collinear_covariate_is_reported():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 200)
    d = from_arrays(x, x + (x >= 0), covariates={"a": x * 3.0 + 0.0})
    with pytest.raises(RankDeficiencyError, match="collinear"):
        fit_pooled(d, FitSpec(h=0.9), 1, covariates=["a"])


def test_constant_covariate_is_dropped(caplog):
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 200)
    d = from_arrays(x, x + (x >= 0), covariates={"k": np.ones(200)})
    fit = fit_pooled(d, FitSpec(h=0.9), 1, covariates=["k"])
    assert "k" not in fit.names
    assert "no variation" in caplog.text


def test_too_few_points_in_window(rd_data):
    with pytest.raises(InsufficientDataError):
        fit_side(rd_data, FitSpec(h=0.002), "left", 2)


def test_spec_validation():
    with pytest.raises(ValueError):
        FitSpec(p=-1)
    with pytest.raises(ValueError):
        FitSpec(h=0.0)
    with pytest.raises(ValueError):
        FitSpec(kernel="gaussian")
    assert FitSpec(p=2).q == 3
