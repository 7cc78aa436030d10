"""Replication pipeline on the Head Start county file (skipped when absent)."""

import json

import pytest

from rdcov import cli
from rdcov import datasets as hs
from rdcov.heterogeneity import estimate_hte
from rdcov.inference import estimate_rd
from rdcov.local_fit import FitSpec
from rdcov.rdplot import build_rdplot
from rdcov.replicate import load_expected, plot_series, run_replication, write_outputs

from conftest import requires_headstart

pytestmark = [requires_headstart, pytest.mark.headstart]


def test_file_shape(headstart):
    assert headstart.n == 3103
    assert (headstart.n_left, headstart.n_right) == (2809, 294)
    assert set(hs.ALL_COVARIATES) <= set(headstart.covariates)
    assert headstart.group_name == hs.GROUP and headstart.group_levels == [0.0, 1.0]


def test_expected_ledger_is_well_formed():
    exp = load_expected()
    ids = [c["id"] for c in exp["cells"]]
    assert len(ids) == len(set(ids))
    for c in exp["cells"]:
        assert c["kind"] in exp["tolerances"]
        assert c["provenance"]


def test_env_var_locates_file(monkeypatch, tmp_path):
    src = hs.find_headstart()
    monkeypatch.setenv(hs.ENV_VAR, str(src))
    assert hs.find_headstart() == src
    monkeypatch.setenv(hs.ENV_VAR, str(tmp_path / "none.csv"))
    with pytest.raises(Exception):
        hs.find_headstart()


def test_figure_plot_data_counts(headstart):
    g = build_rdplot(headstart)
    assert (g.left.counts.size, g.right.counts.size) == (48, 20)
    loc = build_rdplot(headstart, window=6.717)
    assert (loc.n_left, loc.n_right) == (231, 179)
    small = build_rdplot(headstart, subset=(hs.GROUP, 0.0))
    large = build_rdplot(headstart, subset=(hs.GROUP, 1.0))
    assert small.n_left + large.n_left == 2809


def test_interacted_and_subgroup_agree_on_headstart(headstart):
    res = estimate_hte(headstart, hs.GROUP, FitSpec(h=6.864), mode="common")
    for lev, v in res.interacted.items():
        assert v == pytest.approx(res.per_group[lev].tau_bc, abs=1e-10)


def test_joint_mode_covariate_fit_is_a_single_regression(headstart):
    e = estimate_rd(headstart, FitSpec(h=6.765, covariates=hs.EFFICIENCY_COVARIATES))
    assert e.covariate_mode == "fixed"
    assert set(e.gamma) == set(hs.EFFICIENCY_COVARIATES)


def test_outputs_written(tmp_path):
    rep = run_replication()
    out = write_outputs(rep, tmp_path, plot_series())
    for name in ("table1.txt", "table2.txt", "results.json", "ledger.csv", "ledger.txt"):
        assert (out / name).exists()
    assert len(list((out / "plots").glob("*.json"))) == 8
    json.loads((out / "results.json").read_text())


def test_replicate_command_exit_code_reflects_ledger(tmp_path, capsys):
    code = cli.main(["replicate", "--out", str(tmp_path)])
    text = capsys.readouterr().out
    assert code == (0 if "FAIL" not in text else 4)
    assert "cells pass" in text
