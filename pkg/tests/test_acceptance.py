"""Acceptance criteria, one test and one PASS/FAIL line per criterion.

Criteria 1-4 need the Head Start county file; 5 and 6 are self-contained.
Every line lists the sub-checks that failed, if any.
"""

import time

import numpy as np
import pytest

from rdcov import datasets as hs
from rdcov.inference import InferenceConfig, estimate_rd
from rdcov.ingest import from_arrays
from rdcov.local_fit import FitSpec, fit_interacted, fit_pooled, fit_side
from rdcov.kernels import boundary_moments
from rdcov.rdplot import bin_side
from rdcov.replicate import run_replication
from rdcov.simulate import SimConfig, run_all
from rdcov.wls import wls_fit

from conftest import make_rd, requires_headstart
from test_rdplot import brute_force_bins
from test_wls import normal_equations_mp


@pytest.fixture
def announce(capsys):
    def emit(n, title, failures):
        with capsys.disabled():
            mark = "PASS" if not failures else "FAIL"
            detail = "" if not failures else " -- " + "; ".join(failures)
            print(f"\n[acceptance] {mark} criterion {n}: {title}{detail}")
        assert not failures, "; ".join(failures)
    return emit


@pytest.fixture(scope="module")
def replication():
    t0 = time.perf_counter()
    rep = run_replication()
    return rep, time.perf_counter() - t0


def _ledger_failures(rep, prefixes, exclude=()):
    out = []
    for r in rep.ledger:
        if r.id.startswith(prefixes) and not r.id.endswith(exclude):
            if not r.passed:
                out.append(f"{r.id} expected {r.expected} got {r.actual:.6g} ({r.tolerance})"
                           if isinstance(r.actual, float) else f"{r.id} expected {r.expected} got {r.actual}")
    return out


@requires_headstart
def test_criterion_1_table1_fixed_bandwidths(replication, announce):
    rep, _ = replication
    d = hs.load_headstart()
    t0 = time.perf_counter()
    for h, covs in ((6.717, ()), (6.765, hs.EFFICIENCY_COVARIATES), (6.973, hs.ALL_COVARIATES)):
        estimate_rd(d, FitSpec(h=h, covariates=covs))
    elapsed = time.perf_counter() - t0
    fails = _ledger_failures(rep, ("t1.",), exclude=(".h", ".regularization_active"))
    if elapsed >= 5:
        fails.append(f"runtime {elapsed:.2f}s >= 5s")
    announce(1, f"Table 1 at fixed h (runtime {elapsed:.2f}s)", fails)


@requires_headstart
def test_criterion_2_bandwidth_selector(replication, announce):
    rep, _ = replication
    fails = _ledger_failures(rep, ("t1.canonical.h", "t1.efficiency.h", "t1.all.h"))
    for key in ("canonical", "efficiency", "all"):
        b = rep.auto[f"t1.{key}"].bandwidth
        if b.regularization_active:
            fails.append(f"{key}: regularization flag on")
    hs_ = ", ".join(f"{rep.auto[f't1.{k}'].h_used:.3f}" for k in ("canonical", "efficiency", "all"))
    announce(2, f"selected h = {hs_} within 10% and regularization off", fails)


@requires_headstart
def test_criterion_3_table2(replication, announce):
    rep, _ = replication
    fails = _ledger_failures(rep, ("t2.",))
    excluded = {c["id"] for c in rep.excluded}
    assert not any(f.split()[0] in excluded for f in fails)
    announce(3, f"Table 2 panels A and B ({len(excluded)} cells excluded)", fails)


@requires_headstart
def test_criterion_4_falsification(replication, announce):
    rep, _ = replication
    f = rep.falsification
    fails = _ledger_failures(rep, ("falsification.",))
    announce(4, f"large-county placebo tau={f.tau:.4f} p={f.p_value:.4f}", fails)


def test_criterion_5_property_suite(announce):
    fails = []
    rng = np.random.default_rng(123)

    # polynomial reproduction at degrees p and q
    x = rng.uniform(-1, 1, 400)
    for deg in (1, 2):
        cl, cr = rng.standard_normal(deg + 1), rng.standard_normal(deg + 1)
        y = np.where(x >= 0, np.polynomial.polynomial.polyval(x, cr), np.polynomial.polynomial.polyval(x, cl))
        d = from_arrays(x, y)
        for side, c in (("left", cl), ("right", cr)):
            err = np.max(np.abs(fit_side(d, FitSpec(h=0.8), side, deg).coefficients - c))
            if err > 1e-9:
                fails.append(f"polynomial reproduction deg {deg} {side}: {err:.2e}")

    # pooled vs separate
    d = make_rd(seed=5)
    spec = FitSpec(h=0.6)
    for deg in (1, 2):
        pooled = fit_pooled(d, spec, deg).coef("T")
        sep = fit_side(d, spec, "right", deg).coefficients[0] - fit_side(d, spec, "left", deg).coefficients[0]
        if abs(pooled - sep) > 1e-10:
            fails.append(f"pooled vs separate deg {deg}: {abs(pooled - sep):.2e}")
    g = (rng.uniform(size=d.n) < 0.5).astype(float)
    dg = from_arrays(d.score, d.outcome, group=g, group_name="g")
    fit, levels = fit_interacted(dg, spec, "g", 2)
    for lev in levels:
        ref = fit_pooled(dg.subset(g == lev), spec, 2).coef("T")
        if abs(fit.coef(f"T@{lev:g}") - ref) > 1e-10:
            fails.append("interacted vs subgroup")

    # rho = 1 equivalence of the two bias-correction constructions
    a = estimate_rd(d, spec)
    b = estimate_rd(d, spec, InferenceConfig(construction="two_fit"))
    if abs(a.tau_bc - b.tau_bc) > 1e-10 or abs(a.se_robust - b.se_robust) > 1e-10:
        fails.append("rho=1 construction mismatch")

    # WLS vs normal-equations oracle
    X = np.vander(x[:60], 3, increasing=True)
    yy = rng.standard_normal(60)
    w = rng.uniform(0.1, 1.0, 60)
    beta = wls_fit(X, yy, w).coefficients
    ref = normal_equations_mp(X, yy, w)
    if np.max(np.abs(beta - ref) / np.maximum(np.abs(ref), 1e-300)) > 1e-10:
        fails.append("WLS vs normal equations")

    # HC3 hand oracle (6 points): delegated to the exact-arithmetic unit test
    from test_wls import test_hc3_six_point_hand_oracle
    try:
        test_hc3_six_point_hand_oracle()
    except AssertionError as exc:
        fails.append(f"HC3 hand oracle: {exc}")

    # covariate location/scale invariance
    dc = make_rd(with_cov=True, seed=8)
    s = FitSpec(h=0.7, covariates=("z",))
    for mode in ("fixed", "joint"):
        cfg = InferenceConfig(covariate_mode=mode)
        t0 = estimate_rd(dc, s, cfg).tau
        moved = from_arrays(dc.score, dc.outcome, covariates={"z": 40.0 - 7.5 * dc.column("z")})
        if abs(estimate_rd(moved, s, cfg).tau - t0) > 1e-9:
            fails.append(f"covariate invariance ({mode})")

    # kernel moments vs symbolic uniform values: int_0^1 u^k / 2 = 1 / (2(k+1))
    m = boundary_moments("uniform", 2)
    sym = np.array([[1 / (2 * (i + j + 1)) for j in range(3)] for i in range(3)])
    if np.max(np.abs(m.gamma - sym)) > 1e-10 or np.max(np.abs(m.psi - sym / 2)) > 1e-10:
        fails.append("uniform kernel moments")

    # binning vs brute force (exact)
    r = np.r_[np.linspace(0, 2, 11), rng.uniform(0, 2, 300)]
    yy = rng.standard_normal(r.size)
    _, _, _, counts = bin_side(r, yy, 0.0, 2.0, 10)
    bc, _ = brute_force_bins(r, yy, 0.0, 2.0, 10)
    if not np.array_equal(counts, bc):
        fails.append("binning vs brute force")

    # leverage trace identity
    f = wls_fit(X, yy[:60], w)
    if abs(f.leverages.sum() - X.shape[1]) > 1e-10:
        fails.append("leverage trace")

    announce(5, "property suite (reproduction, pooling, rho=1, WLS/HC3 oracles, invariance, moments, "
                "binning, leverage)", fails)


@pytest.mark.slow
def test_criterion_6_monte_carlo(announce):
    t0 = time.perf_counter()
    rep = run_all(SimConfig(seed=1, n=2000, reps_coverage=2000, reps_efficiency=500, reps_equality=500))
    elapsed = time.perf_counter() - t0
    cov, eff, eq = rep.coverage, rep.efficiency, rep.equality
    fails = []
    if not 92.5 <= cov["coverage"] <= 97.5:
        fails.append(f"coverage {cov['coverage']:.2f}%")
    if eff["mean_r2_partial"] < 0.5 - 0.02:
        fails.append(f"DGP partial R2 {eff['mean_r2_partial']:.3f}")
    if eff["share_shorter"] < 90:
        fails.append(f"shorter CI in {eff['share_shorter']:.1f}%")
    if eff["share_within_one_se"] < 95:
        fails.append(f"|adj - canonical| < 1 SE in {eff['share_within_one_se']:.1f}%")
    if not 2.5 <= eq["size"] <= 7.5:
        fails.append(f"size {eq['size']:.1f}%")
    if eq["power"] < 80:
        fails.append(f"power {eq['power']:.1f}%")
    if elapsed >= 120:
        fails.append(f"runtime {elapsed:.0f}s")
    announce(6, f"Monte Carlo: coverage {cov['coverage']:.2f}%, shorter {eff['share_shorter']:.1f}%, "
                f"within-SE {eff['share_within_one_se']:.1f}%, size {eq['size']:.1f}%, power {eq['power']:.1f}%, "
                f"{elapsed:.0f}s", fails)
