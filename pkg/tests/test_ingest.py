import numpy as np
import pandas as pd
import pytest

from rdcov.errors import DataError, InsufficientDataError
from rdcov.ingest import ColumnMap, discretize_covariate, from_arrays, from_frame, load_table


def frame():
    return pd.DataFrame({
        "s": ["1.0", "-2", "", "3", "0", "bad"],
        "y": ["1", "2", "3", "", "5", "6"],
        "c": ["0.1", "", "0.3", "0.4", "0.5", "0.6"],
    })


def test_rows_missing_score_or_outcome_are_dropped_and_counted():
    d = from_frame(frame(), {"score": "s", "outcome": "y", "covariates": "c"}, cutoff=0.0)
    assert d.n == 3
    assert d.dropped == 3
    assert d.dropped_rows == (2, 3, 5)
    # covariate missingness is kept as NaN, not dropped at load time
    assert np.isnan(d.column("c")[1])


def test_strict_mode_rejects_non_numeric_cells():
    with pytest.raises(DataError, match="non-numeric"):
        from_frame(frame(), ColumnMap("s", "y"), cutoff=0.0, strict=True)


def test_missing_column_is_named():
    with pytest.raises(DataError, match="nope"):
        from_frame(frame(), ColumnMap("s", "nope"), cutoff=0.0)


def test_cutoff_centering_and_treatment_side():
    d = from_arrays([1.0, 2.0, 3.0], [0, 0, 0], cutoff=2.0)
    np.testing.assert_array_equal(d.x, [-1, 0, 1])
    np.testing.assert_array_equal(d.treated, [False, True, True])
    b = from_arrays([1.0, 2.0, 3.0], [0, 0, 0], cutoff=2.0, treated_below=True)
    np.testing.assert_array_equal(b.treated, [True, True, False])


def test_dataset_is_immutable():
    d = from_arrays([1.0, -1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        d.score[0] = 5.0
    with pytest.raises(Exception):
        d.cutoff = 3.0


def test_non_finite_values_rejected_and_cutoff_checked():
    with pytest.raises(DataError):
        from_arrays([1.0, np.nan], [0.0, 1.0])
    with pytest.raises(DataError):
        from_arrays([1.0, 2.0], [0.0, 1.0], cutoff=np.inf)


def test_all_rows_dropped_is_insufficient():
    f = pd.DataFrame({"s": ["", ""], "y": ["1", "2"]})
    with pytest.raises(InsufficientDataError):
        from_frame(f, ColumnMap("s", "y"), cutoff=0.0)


def test_discretize_keeps_source_and_propagates_missing():
    d = from_arrays([-1.0, 0.0, 1.0], [1.0, 2.0, 3.0], covariates={"pop": [5.0, np.nan, 20.0]})
    g = discretize_covariate(d, "pop", 10.0, "big")
    np.testing.assert_array_equal(g.column("big"), [0.0, np.nan, 1.0])
    np.testing.assert_array_equal(g.column("pop"), [5.0, np.nan, 20.0])


def test_load_table_with_delimiter(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("s\ty\tz\n-1\t1\t0\n1\t2\t1\n", encoding="utf-8")
    d = load_table(p, {"score": "s", "outcome": "y", "covariates": ["z"]}, cutoff=0.0, delimiter="\t")
    assert d.n == 2 and d.n_left == 1 and d.n_right == 1
    with pytest.raises(DataError, match="not found"):
        load_table(tmp_path / "missing.csv", ColumnMap("s", "y"), 0.0)


def test_complete_cases_and_with_outcome():
    d = from_arrays([-1.0, 0.5, 1.0], [1.0, 2.0, 3.0], covariates={"c": [1.0, np.nan, 2.0]})
    assert d.complete_cases(["c"]).n == 2
    w = d.complete_cases(["c"]).with_outcome("c")
    np.testing.assert_array_equal(w.outcome, [1.0, 2.0])
