"""RD effects by a discrete pre-intervention group.

Per-group estimates come from subgroup fits. With ``mode="separate"`` each
group gets its own bandwidth; with ``mode="common"`` one bandwidth, selected on
the pooled sample, is shared. Group effects are compared with a Wald test on
the bias-corrected estimates; subgroup fits use disjoint rows, so their joint
covariance is diagonal.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .bandwidth import select_bandwidth
from .errors import DataError, InsufficientDataError
from .ingest import Dataset
from .kernels import localized_weights
from .inference import InferenceConfig, RdEstimate, estimate_rd
from .local_fit import FitSpec, _pooled_columns, fit_interacted
from .wls import WaldResult, wald_test, wls_fit

log = logging.getLogger(__name__)

COMMON_BANDWIDTH_CAVEAT = (
    "a single bandwidth across groups ignores that the bias-variance trade-off may differ "
    "between subsamples; separate bandwidths are generally preferable"
)


@dataclass(frozen=True)
class HteResult:
    per_group: dict[float, RdEstimate]
    joint_cov: np.ndarray
    equality: WaldResult
    bandwidth_mode: str
    group: str
    covariates: tuple[str, ...] = ()
    interacted: dict[float, float] = field(default_factory=dict)

    @property
    def levels(self) -> list[float]:
        return sorted(self.per_group)

    @property
    def equality_p(self) -> float:
        return self.equality.p_value

    def estimates(self) -> np.ndarray:
        return np.array([self.per_group[g].tau_bc for g in self.levels])

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "bandwidth_mode": self.bandwidth_mode,
            "covariates": list(self.covariates),
            "per_group": {f"{g:g}": self.per_group[g].to_dict() for g in self.levels},
            "joint_cov": self.joint_cov.tolist(),
            "equality": {"statistic": self.equality.statistic, "df": self.equality.df,
                         "p_value": self.equality.p_value, "f_statistic": self.equality.f_statistic},
            "interacted": {f"{g:g}": v for g, v in self.interacted.items()},
        }


def _group_data(d: Dataset, group: str) -> tuple[Dataset, list[float]]:
    g = d.column(group)
    d = d.subset(np.isfinite(g)) if not np.all(np.isfinite(g)) else d
    if d.group_name != group:
        d = replace(d, group=d.column(group), group_name=group)
    levels = d.group_levels
    if len(levels) < 2:
        raise DataError(f"group {group!r} has {len(levels)} level(s); heterogeneity needs at least 2")
    return d, levels


def test_effect_equality(res: HteResult) -> WaldResult:
    """Wald test that every group's bias-corrected effect is the same."""
    k = len(res.per_group)
    if k < 2:
        raise DataError("equality test needs at least two group estimates")
    R = np.zeros((k - 1, k))
    R[:, 0] = 1.0
    R[np.arange(k - 1), np.arange(1, k)] = -1.0
    return wald_test(res.estimates(), res.joint_cov, R)


test_effect_equality.__test__ = False  # not a pytest test despite the name


def estimate_hte(d: Dataset, group: str, spec: FitSpec | None = None, cfg: InferenceConfig | None = None,
                 mode: str = "separate", covariates: Sequence[str] = (),
                 h_by_group: Mapping[float, float] | None = None) -> HteResult:
    """Group-specific RD effects.

    ``spec.h``, when set, is used for every group (and implies common
    bandwidths). ``h_by_group`` fixes per-group bandwidths in separate mode.
    Covariates, if any, enter each group's regression with a common
    coefficient across the cutoff; the default covariate mode here is
    ``"joint"``.
    """
    spec = spec or FitSpec()
    cfg = cfg or InferenceConfig(covariate_mode="joint")
    if mode not in ("separate", "common"):
        raise ValueError("mode must be 'separate' or 'common'")
    covariates = tuple(covariates) or tuple(spec.covariates)
    if group in covariates:
        raise DataError(f"group column {group!r} cannot also be an adjustment covariate")
    spec = replace(spec, covariates=covariates)
    d, levels = _group_data(d, group)
    d = d.complete_cases(covariates)

    if mode == "common":
        log.info("common bandwidth: %s", COMMON_BANDWIDTH_CAVEAT)
        if spec.h is None:
            spec = spec.with_bandwidth(select_bandwidth(d, spec).h_mse, spec.b)

    per_group: dict[float, RdEstimate] = {}
    g = d.column(group)
    for lev in levels:
        sub = d.subset(g == lev)
        s = spec
        if mode == "separate" and h_by_group and lev in h_by_group:
            s = spec.with_bandwidth(h_by_group[lev], spec.b)
        try:
            per_group[lev] = estimate_rd(sub, s, cfg)
        except InsufficientDataError as exc:
            raise InsufficientDataError(f"group {group}={lev:g}: {exc}") from None

    V = np.diag([per_group[lev].se_robust ** 2 for lev in levels])
    interacted = {}
    hs = {per_group[lev].h_used for lev in levels}
    if len(hs) == 1 and (not covariates or cfg.covariate_mode == "joint"):
        fit, _ = fit_interacted(d, spec, group, spec.q, covariates=covariates, h=hs.pop())
        interacted = {lev: fit.coef(f"T@{lev:g}") for lev in levels}
    res = HteResult(per_group, V, WaldResult(0.0, len(levels) - 1, 1.0), mode, group, covariates, interacted)
    return replace(res, equality=test_effect_equality(res))


def estimate_hte_with_covariates(d: Dataset, group: str, covariates: Sequence[str], spec: FitSpec | None = None,
                                 cfg: InferenceConfig | None = None, mode: str = "separate",
                                 h_by_group: Mapping[float, float] | None = None,
                                 source: str | None = None) -> HteResult:
    """:func:`estimate_hte` with adjustment covariates; ``source`` (the column the
    group was derived from) is refused as a covariate as well."""
    covariates = tuple(covariates)
    if source is not None and source in covariates:
        raise DataError(f"{source!r} defines the groups and cannot be an adjustment covariate")
    return estimate_hte(d, group, spec, cfg, mode, covariates, h_by_group)


@dataclass(frozen=True)
class ModeratorResult:
    """Experimental: linear interaction of the jump with a continuous moderator."""

    slope: float
    se: float
    p_value: float
    tau_at_mean: float
    moderator_mean: float
    h: float
    experimental: bool = True


def estimate_continuous_moderator(d: Dataset, column: str, spec: FitSpec) -> ModeratorResult:
    """EXPERIMENTAL. Jump allowed to vary linearly in a centred continuous moderator.

    Regresses the outcome, at degree q and bandwidth ``spec.h``, on the usual
    side-wise polynomial plus ``Zc`` and ``T * Zc`` (``Zc`` = moderator minus its
    in-window mean). The ``T * Zc`` coefficient is the change in the jump per
    unit of the moderator; its robust SE comes from that same regression.
    """
    if spec.h is None:
        raise ValueError("continuous-moderator fit needs a fixed bandwidth")
    log.warning("continuous-moderator heterogeneity is experimental")
    d = d.complete_cases([column])
    r = d.running
    lw = localized_weights(r, spec.kernel, spec.h, "both")
    z = d.column(column)
    zbar = float(np.average(z[lw.index]))
    zc = z - zbar
    cols, names = _pooled_columns(r, spec.q)
    T = (r >= 0).astype(float)
    X = np.column_stack(cols + [zc, T * zc])
    fit = wls_fit(X, d.outcome, lw.weights, vce=spec.vce, names=names + ["Zc", "T*Zc"])
    j = fit.names.index("T*Zc")
    se = float(np.sqrt(fit.robust_cov[j, j]))
    slope = float(fit.coefficients[j])
    return ModeratorResult(slope, se, float(2 * stats.norm.sf(abs(slope) / se)), fit.coef("T"), zbar, float(spec.h))
