import numpy as np
import pytest

from rdcov.bandwidth import coverage_shrinkage_report, pilot_window, select_bandwidth
from rdcov.errors import InsufficientDataError
from rdcov.ingest import from_arrays
from rdcov.local_fit import FitSpec

from conftest import make_rd


def test_pilot_window_formula():
    x = np.random.default_rng(0).normal(size=1000)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25], method="averaged_inverted_cdf"))
    expect = 2.576 * min(sd, iqr / 1.349) * 1000 ** (-0.2)
    assert pilot_window(x, "triangular") == pytest.approx(expect)


def test_selected_bandwidth_is_positive_and_within_span(rd_data):
    rep = select_bandwidth(rd_data)
    assert 0 < rep.h_mse <= np.abs(rd_data.running).max()
    assert rep.b_pilot > 0
    assert rep.variance > 0


def test_more_data_gives_smaller_bandwidth():
    hs = [np.median([select_bandwidth(make_rd(n=n, seed=s, curv=(2.0, -2.0))).h_mse for s in range(5)])
          for n in (500, 5000)]
    assert hs[1] < hs[0]


def test_scale_equivariance(rd_data):
    a = select_bandwidth(rd_data).h_mse
    b = select_bandwidth(from_arrays(10 * rd_data.score, rd_data.outcome)).h_mse
    assert b == pytest.approx(10 * a, rel=1e-8)


def test_outcome_shift_invariance(rd_data):
    a = select_bandwidth(rd_data).h_mse
    b = select_bandwidth(from_arrays(rd_data.score, rd_data.outcome + 5.0)).h_mse
    assert b == pytest.approx(a, rel=1e-9)


def test_covariates_enter_selection(rd_cov):
    a = select_bandwidth(rd_cov).h_mse
    b = select_bandwidth(rd_cov, FitSpec(covariates=("z",))).h_mse
    assert a != b


def test_report_serializes(rd_data):
    d = select_bandwidth(rd_data).to_dict()
    assert {"h_mse", "b_pilot", "regularization_active"} <= set(d)


def test_needs_enough_rows_per_side():
    x = np.r_[np.linspace(-1, -0.1, 50), [0.1, 0.2, 0.3]]
    with pytest.raises(InsufficientDataError):
        select_bandwidth(from_arrays(x, x))


def test_coverage_shrinkage_sign(rd_cov):
    from rdcov.inference import estimate_rd

    can = estimate_rd(rd_cov, FitSpec(h=0.7))
    adj = estimate_rd(rd_cov, FitSpec(h=0.7, covariates=("z",)))
    chg = coverage_shrinkage_report(can, adj)
    assert chg == pytest.approx(100 * (adj.ci_length / can.ci_length - 1))
    assert chg < 0
