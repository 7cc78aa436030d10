"""Seeded Monte Carlo checks of coverage, covariate efficiency and the equality test.

The regression function is the two-sided quintic fitted to U.S. House
election data that is standard in RD simulation work (jump 0.04, noise sd
0.1295, scores ``2 Beta(2, 4) - 1``). Replication ``i`` draws from
``numpy.random.default_rng([seed, i])``, so results do not depend on the
order or grouping in which replications run.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import RDError
from .heterogeneity import estimate_hte
from .inference import InferenceConfig, estimate_rd
from .ingest import from_arrays
from .local_fit import FitSpec

LEFT = (0.48, 1.27, 7.18, 20.21, 21.54, 7.33)
RIGHT = (0.52, 0.84, -3.00, 7.99, -9.01, 3.56)
TAU = 0.04
SIGMA = 0.1295


def regression_function(x: np.ndarray) -> np.ndarray:
    left = np.polynomial.polynomial.polyval(x, LEFT)
    right = np.polynomial.polynomial.polyval(x, RIGHT)
    return np.where(x >= 0, right, left)


def draw(rng: np.random.Generator, n: int, beta: float = 0.0, tau_shift: float = 0.0):
    """Scores, outcomes and one covariate ``z`` entering the outcome as ``beta z``."""
    x = 2 * rng.beta(2, 4, n) - 1
    z = rng.standard_normal(n)
    y = regression_function(x) + tau_shift * (x >= 0) + beta * z + SIGMA * rng.standard_normal(n)
    return x, y, z


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    n: int = 2000
    reps_coverage: int = 2000
    reps_efficiency: int = 500
    reps_equality: int = 500
    # covariate loading: beta = SIGMA gives the covariate half of the outcome's
    # conditional variance
    beta: float = SIGMA
    gap_in_se: float = 3.0
    level: float = 0.95
    workers: int = 1


@dataclass
class SimReport:
    config: dict
    coverage: dict = field(default_factory=dict)
    efficiency: dict = field(default_factory=dict)
    equality: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _coverage_rep(args):
    seed, i, n, level = args
    rng = np.random.default_rng([seed, i])
    x, y, _ = draw(rng, n)
    try:
        e = estimate_rd(from_arrays(x, y), FitSpec(), InferenceConfig(level=level))
    except RDError:
        return None
    return (e.ci[0] <= TAU <= e.ci[1], e.ci_length, e.h_used)


def _efficiency_rep(args):
    seed, i, n, beta = args
    rng = np.random.default_rng([seed, i])
    x, y, z = draw(rng, n, beta=beta)
    d = from_arrays(x, y, covariates={"z": z})
    try:
        can = estimate_rd(d, FitSpec())
        # same bandwidth isolates the adjustment; own bandwidth is the full pipeline
        same = estimate_rd(d, FitSpec(h=can.h_used, covariates=("z",)))
        own = estimate_rd(d, FitSpec(covariates=("z",)))
    except RDError:
        return None
    win = np.abs(x) <= can.h_used
    r2 = np.corrcoef(y[win], z[win])[0, 1] ** 2
    r2_partial = np.corrcoef(y[win] - regression_function(x[win]), z[win])[0, 1] ** 2
    se = can.se_robust
    return (same.ci_length < can.ci_length, abs(same.tau - can.tau) < se, same.ci_length / can.ci_length,
            own.ci_length < can.ci_length, abs(own.tau - can.tau) < se, own.ci_length / can.ci_length,
            r2, r2_partial)


def _equality_rep(args):
    seed, i, n, h, shift = args
    rng = np.random.default_rng([seed, i])
    x0, y0, _ = draw(rng, n // 2)
    x1, y1, _ = draw(rng, n - n // 2, tau_shift=shift)
    g = np.r_[np.zeros(x0.size), np.ones(x1.size)]
    d = from_arrays(np.r_[x0, x1], np.r_[y0, y1], group=g, group_name="g")
    try:
        res = estimate_hte(d, "g", FitSpec(h=h), mode="common")
    except RDError:
        return None
    return (res.equality_p < 0.05, math.sqrt(res.joint_cov.trace()))


def _map(fn, jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs, chunksize=32))
    return [fn(j) for j in jobs]


def _summ(ok: list) -> tuple[list, int]:
    good = [r for r in ok if r is not None]
    return good, len(ok) - len(good)


def run_coverage(cfg: SimConfig) -> dict:
    jobs = [(cfg.seed, i, cfg.n, cfg.level) for i in range(cfg.reps_coverage)]
    res, failed = _summ(_map(_coverage_rep, jobs, cfg.workers))
    cover = np.array([r[0] for r in res], dtype=float)
    return {
        "reps": len(res), "failed": failed, "n": cfg.n, "level": cfg.level,
        "coverage": float(100 * cover.mean()),
        "mc_se": float(100 * math.sqrt(cover.mean() * (1 - cover.mean()) / len(cover))),
        "mean_ci_length": float(np.mean([r[1] for r in res])),
        "mean_h": float(np.mean([r[2] for r in res])),
    }


def run_efficiency(cfg: SimConfig) -> dict:
    seed = cfg.seed + 1_000_003  # stream distinct from the coverage run
    jobs = [(seed, i, cfg.n, cfg.beta) for i in range(cfg.reps_efficiency)]
    res, failed = _summ(_map(_efficiency_rep, jobs, cfg.workers))
    a = np.array(res, dtype=float)
    return {
        "reps": len(res), "failed": failed, "beta": cfg.beta,
        "share_shorter": float(100 * a[:, 0].mean()),
        "share_within_one_se": float(100 * a[:, 1].mean()),
        "mean_length_ratio": float(a[:, 2].mean()),
        "own_bandwidth": {
            "share_shorter": float(100 * a[:, 3].mean()),
            "share_within_one_se": float(100 * a[:, 4].mean()),
            "mean_length_ratio": float(a[:, 5].mean()),
        },
        "mean_r2_covariate": float(a[:, 6].mean()),
        "mean_r2_partial": float(a[:, 7].mean()),
    }


def run_equality(cfg: SimConfig) -> dict:
    seed = cfg.seed + 2_000_003
    # one bandwidth for every replication, from a single pilot draw
    x, y, _ = draw(np.random.default_rng([seed, 10**9]), cfg.n)
    h = estimate_rd(from_arrays(x, y), FitSpec()).h_used
    null = [(seed, i, cfg.n, h, 0.0) for i in range(cfg.reps_equality)]
    res0, f0 = _summ(_map(_equality_rep, null, cfg.workers))
    se = float(np.mean([r[1] for r in res0]))
    gap = cfg.gap_in_se * se
    alt = [(seed + 1, i, cfg.n, h, gap) for i in range(cfg.reps_equality)]
    res1, f1 = _summ(_map(_equality_rep, alt, cfg.workers))
    return {
        "reps": len(res0), "failed": f0 + f1, "h": h, "se_difference": se, "gap": gap,
        "size": float(100 * np.mean([r[0] for r in res0])),
        "power": float(100 * np.mean([r[0] for r in res1])),
        "nominal_power": float(100 * (stats.norm.sf(1.96 - cfg.gap_in_se) + stats.norm.cdf(-1.96 - cfg.gap_in_se))),
    }


def run_all(cfg: SimConfig | None = None, which=("coverage", "efficiency", "equality")) -> SimReport:
    cfg = cfg or SimConfig()
    rep = SimReport(config=asdict(cfg))
    if "coverage" in which:
        rep.coverage = run_coverage(cfg)
    if "efficiency" in which:
        rep.efficiency = run_efficiency(cfg)
    if "equality" in which:
        rep.equality = run_equality(cfg)
    return rep
