"""Robust bias-corrected RD estimates.

With ``b = h`` the bias-corrected estimate is the jump of degree ``q = p+1``
fits at ``h`` and its robust standard error is that regression's sandwich
standard error. The textbook construction (degree-``p`` estimate minus a
plug-in bias from a degree-``q`` fit at ``b``) is available through
``construction="two_fit"`` and is the only path when ``b != h``.

Covariates enter in one of two ways:

``"fixed"``
    The common coefficient ``gamma`` is estimated once, from the restricted
    degree-``p`` regression, and both the point estimate and the robust
    inference are computed on ``y - Z gamma``.
``"joint"``
    The restricted regression is re-estimated at each degree and the robust
    inference is read off the degree-``q`` regression, covariates included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .bandwidth import BandwidthReport, select_bandwidth
from .errors import NumericalError
from .ingest import Dataset
from .kernels import localized_weights
from .local_fit import FitSpec, covariate_coefficients, fit_covariate_adjusted, fit_side
from .wls import _hc_scale

COVARIATE_MODES = ("fixed", "joint")


@dataclass(frozen=True)
class InferenceConfig:
    level: float = 0.95
    rho: float = 1.0
    covariate_mode: str = "fixed"
    construction: str = "direct"

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ValueError("confidence level must lie in (0, 1)")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.covariate_mode not in COVARIATE_MODES:
            raise ValueError(f"covariate_mode must be one of {COVARIATE_MODES}")
        if self.construction not in ("direct", "two_fit"):
            raise ValueError("construction must be 'direct' or 'two_fit'")

    @property
    def z(self) -> float:
        return float(stats.norm.ppf(0.5 + self.level / 2))


@dataclass(frozen=True)
class RdEstimate:
    tau: float
    tau_bc: float
    se_robust: float
    ci: tuple[float, float]
    p_value: float
    h_used: float
    b_used: float
    n_eff: tuple[int, int]
    left_intercept: float
    control_mean: float
    pct_effect: float
    se_conventional: float
    level: float = 0.95
    p: int = 1
    kernel: str = "triangular"
    vce: str = "HC3"
    outcome: str = "y"
    covariates: tuple[str, ...] = ()
    covariate_mode: str | None = None
    gamma: dict = field(default_factory=dict)
    n: int = 0
    bandwidth: BandwidthReport | None = None

    @property
    def ci95(self) -> tuple[float, float]:
        return self.ci

    @property
    def ci_length(self) -> float:
        return self.ci[1] - self.ci[0]

    @property
    def z_robust(self) -> float:
        return self.tau_bc / self.se_robust

    def to_dict(self) -> dict:
        out = {
            "tau": self.tau, "tau_bc": self.tau_bc, "se_robust": self.se_robust,
            "se_conventional": self.se_conventional, "ci": list(self.ci), "level": self.level,
            "p_value": self.p_value, "h": self.h_used, "b": self.b_used,
            "n_eff": list(self.n_eff), "left_intercept": self.left_intercept,
            "control_mean": self.control_mean, "pct_effect": self.pct_effect,
            "p": self.p, "kernel": self.kernel, "vce": self.vce, "outcome": self.outcome,
            "covariates": list(self.covariates), "covariate_mode": self.covariate_mode,
            "gamma": dict(self.gamma), "n": self.n,
        }
        if self.bandwidth is not None:
            out["bandwidth"] = self.bandwidth.to_dict()
        return out


def _two_fit_side(d, spec, side, h, b, y):
    """Bias-corrected intercept for one side as a linear form in ``y``.

    Returns ``(estimate, variance, n_eff)`` where the variance uses the
    residuals and leverages of the degree-q fit at ``b``.
    """
    p, q = spec.p, spec.q
    fp = fit_side(d, spec, side, p, h=h, y=y)
    fq = fit_side(d, spec, side, q, h=b, y=y)
    # bias of the degree-p intercept per unit of the (p+1)-th coefficient
    xp1 = d.running[fp.rows] ** (p + 1)
    c = float(fp.bread[0] @ (fp.X.T @ (fp.weights * xp1)))
    n_all = d.n
    omega = np.zeros(n_all)
    omega[fp.rows] += fp.effective_weights(0)
    omega[fq.rows] -= c * fq.effective_weights(p + 1)
    if np.any(omega[np.setdiff1d(np.arange(n_all), fq.rows)] != 0):
        raise ValueError("two-fit construction needs b >= h")
    s, _ = _hc_scale(fq, spec.vce)
    var = float(np.sum(omega[fq.rows] ** 2 * s))
    yy = d.outcome if y is None else y
    est = float(omega @ yy)
    return fp, est, var


def estimate_rd(d: Dataset, spec: FitSpec, cfg: InferenceConfig | None = None) -> RdEstimate:
    """Conventional and robust bias-corrected RD estimate for ``spec``.

    When ``spec.h`` is unset the MSE-optimal bandwidth is selected first.
    """
    cfg = cfg or InferenceConfig()
    covs = tuple(spec.covariates)
    d = d.complete_cases(covs)
    report = None
    if spec.h is None:
        report = select_bandwidth(d, spec)
        spec = spec.with_bandwidth(report.h_mse, spec.b)
    h = float(spec.h)
    b = float(spec.b) if spec.b is not None else h / cfg.rho
    p, q = spec.p, spec.q
    two_fit = cfg.construction == "two_fit" or b != h

    y = d.outcome
    gamma = {}
    mode = cfg.covariate_mode if covs else None
    if mode == "joint":
        if two_fit:
            raise ValueError("joint covariate adjustment supports only b = h with the direct construction")
        fp = fit_covariate_adjusted(d, spec, p, h=h)
        fq = fit_covariate_adjusted(d, spec, q, h=h)
        tau = fp.coef("T")
        se_conv = math.sqrt(fp.linear_variance(0))
        tau_bc = fq.coef("T")
        var_bc = fq.linear_variance(0)
        gamma = covariate_coefficients(fp)
    else:
        if mode == "fixed":
            fp_adj = fit_covariate_adjusted(d, spec, p, h=h)
            gamma = covariate_coefficients(fp_adj)
            if gamma:
                y = y - d.covariate_matrix(list(gamma)) @ np.array(list(gamma.values()))
        left_p = fit_side(d, spec, "left", p, h=h, y=y)
        right_p = fit_side(d, spec, "right", p, h=h, y=y)
        tau = float(right_p.coefficients[0] - left_p.coefficients[0])
        se_conv = math.sqrt(left_p.linear_variance(0) + right_p.linear_variance(0))
        if two_fit:
            _, mr, vr = _two_fit_side(d, spec, "right", h, b, y)
            _, ml, vl = _two_fit_side(d, spec, "left", h, b, y)
            tau_bc, var_bc = mr - ml, vr + vl
        else:
            left_q = fit_side(d, spec, "left", q, h=h, y=y)
            right_q = fit_side(d, spec, "right", q, h=h, y=y)
            tau_bc = float(right_q.coefficients[0] - left_q.coefficients[0])
            var_bc = left_q.linear_variance(0) + right_q.linear_variance(0)

    se = math.sqrt(max(var_bc, 0.0))
    # an exact fit leaves only rounding noise in the residuals
    if not se > 1e-10 * max(1.0, float(np.abs(d.outcome).max())):
        raise NumericalError("robust standard error is zero; the data carry no sampling variation")
    z = cfg.z
    pval = float(2 * stats.norm.sf(abs(tau_bc) / se))

    lw = localized_weights(d.running, spec.kernel, h, "both")
    left_raw = fit_side(d, spec, "left", p, h=h)
    r = d.running
    ctrl = (r < 0) & (r >= -h)
    control_mean = float(d.outcome[ctrl].mean())
    pct = 100.0 * tau / abs(control_mean) if control_mean != 0 else float("nan")

    return RdEstimate(
        tau=float(tau), tau_bc=float(tau_bc), se_robust=se, ci=(tau_bc - z * se, tau_bc + z * se),
        p_value=pval, h_used=h, b_used=b, n_eff=(lw.n_left, lw.n_right),
        left_intercept=float(left_raw.coefficients[0]), control_mean=control_mean, pct_effect=pct,
        se_conventional=float(se_conv), level=cfg.level, p=p, kernel=spec.kernel.value, vce=spec.vce,
        outcome=d.outcome_name, covariates=covs, covariate_mode=mode, gamma=gamma, n=d.n,
        bandwidth=report,
    )


def falsification_estimate(d: Dataset, covariate: str, spec: FitSpec, cfg: InferenceConfig | None = None) -> RdEstimate:
    """RD estimate with a pre-intervention column in place of the outcome.

    The tested column is removed from the adjustment set.
    """
    dd = d.with_outcome(covariate)
    spec = replace(spec, covariates=tuple(c for c in spec.covariates if c != covariate))
    return estimate_rd(dd, spec, cfg)
