"""Plug-in MSE-optimal bandwidth for the boundary RD estimator.

The main bandwidth minimises the leading MSE of the jump estimate,

    h = [ V / (2(p+1) (B^2 + lambda)) ]^(1/(2p+3)),

where, for each side, V is the sandwich variance of the degree-p intercept at
a rule-of-thumb pilot window (rescaled to be free of that window), B is the
finite-sample leading-bias constant times the (p+1)-th coefficient, and lambda
is a multiple of the estimated variance of B. Everything is computed from
local fits, so V already carries the 1/n factor.

The (p+1)-th coefficient is taken from a degree-q fit at a pilot bandwidth b,
selected by the same rule one order up; b in turn uses a degree-(q+1)
coefficient from a degree-(q+2) fit at a bandwidth d chosen without
regularization from fits over each side's full range. Three stages in all.

With covariates the outcome is replaced, stage by stage and side by side, by
``y - Z gamma`` with ``gamma`` from the pilot-window regression of y on the
stage polynomial plus Z.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import InsufficientDataError
from .ingest import Dataset
from .kernels import Kernel, boundary_moments, kernel_value
from .local_fit import FitSpec
from .wls import wls_fit

# pilot-window constants: h_pilot = C * min(sd, IQR/1.349) * n^(-1/5)
PILOT_WINDOW_CONST = {
    Kernel.TRIANGULAR: 2.576,
    Kernel.UNIFORM: 1.843,
    Kernel.EPANECHNIKOV: 2.34,
}
# multiple of Var(B) added to B^2 in the denominator
REGULARIZATION_SCALE = 3.0


@dataclass(frozen=True)
class PilotEstimates:
    sigma2_left: float  # kernel-weighted mean squared residual in the pilot window
    sigma2_right: float
    deriv_left: float  # (p+1)-th derivative at the cutoff, from the degree-q fit at b
    deriv_right: float
    deriv_var_left: float
    deriv_var_right: float
    density_at_cutoff: float  # uniform-kernel estimate over the pilot window
    density_window: float
    higher_deriv_left: float  # (q+1)-th derivative, from the fit at d
    higher_deriv_right: float


@dataclass(frozen=True)
class BandwidthReport:
    h_mse: float
    b_pilot: float
    pilot: PilotEstimates
    bias_const: float  # asymptotic boundary bias constant of the degree-p intercept
    var_const: float  # asymptotic boundary variance constant
    bias: float  # B (right minus left)
    variance: float  # V (left plus right)
    regularization: float  # lambda
    regularization_active: bool  # lambda > B^2
    capped: bool
    n: int
    p: int
    kernel: str
    covariates: tuple[str, ...] = ()
    d_pilot: float = float("nan")

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "pilot"}
        out["pilot"] = {k: float(v) for k, v in self.pilot.__dict__.items()}
        out["covariates"] = list(self.covariates)
        return out


@dataclass(frozen=True)
class _SideTerms:
    variance: float
    bias: float
    reg: float
    coef: float  # the (o+1)-th coefficient
    coef_var: float
    sigma2: float


def pilot_window(r: np.ndarray, kernel) -> float:
    """Rule-of-thumb pilot window ``C_K min(sd, IQR/1.349) n^(-1/5)``."""
    kernel = Kernel.coerce(kernel)
    q25, q75 = np.percentile(r, [25, 75], method="averaged_inverted_cdf")
    spread = min(np.std(r, ddof=1), (q75 - q25) / 1.349)
    if not spread > 0:
        raise InsufficientDataError("the score has no spread; cannot choose a pilot window")
    return PILOT_WINDOW_CONST[kernel] * spread * r.size ** (-1 / 5)


def _side_terms(r, y, Z, kernel, vce, o, nu, h_v, h_b) -> _SideTerms:
    """Variance, bias and regularization pieces of one stage on one side.

    ``r`` holds that side's scores only.
    """
    u = np.abs(r)
    w = np.where(u <= h_v, kernel_value(kernel, r / h_v), 0.0)
    k = np.count_nonzero(w)
    if k < o + 2:
        raise InsufficientDataError(f"{k} observations within the pilot window {h_v:g} on one side; need {o + 2}")
    X = np.vander(r, o + 1, increasing=True)
    if Z.shape[1]:
        full = wls_fit(np.column_stack([X, Z]), y, w, vce="HC0")
        y = y - Z @ full.coefficients[o + 1:]
    fv = wls_fit(X, y, w, vce=vce)
    variance = (2 * nu + 1) * h_v ** (2 * nu + 1) * fv.robust_cov[nu, nu]
    # finite-sample bias of coefficient nu per unit of the (o+1)-th coefficient
    lead = fv.bread @ (fv.X.T @ (fv.weights * (r[fv.rows] / h_v) ** (o + 1)))
    bconst = h_v**nu * lead[nu]
    sigma2 = float(np.sum(fv.weights * fv.residuals**2) / np.sum(fv.weights))

    wb = np.where(u <= h_b, kernel_value(kernel, r / h_b), 0.0)
    if np.count_nonzero(wb) < o + 3:
        raise InsufficientDataError(f"pilot bandwidth {h_b:g} leaves too few observations on one side")
    fb = wls_fit(np.vander(r, o + 2, increasing=True), y, wb, vce=vce)
    coef, coef_var = fb.coefficients[o + 1], fb.robust_cov[o + 1, o + 1]
    return _SideTerms(float(variance), float(bconst * coef), float(bconst**2 * coef_var),
                      float(coef), float(coef_var), sigma2)


def _stage(sides, kernel, vce, o, nu, h_v, h_b, scale):
    left = _side_terms(*sides[0], kernel, vce, o, nu, h_v, h_b[0])
    right = _side_terms(*sides[1], kernel, vce, o, nu, h_v, h_b[1])
    V = left.variance + right.variance
    B2 = 2 * (o + 1 - nu) * (right.bias - left.bias) ** 2
    lam = scale * 2 * (o + 1 - nu) * (left.reg + right.reg)
    if not B2 + lam > 0:
        raise InsufficientDataError("estimated bias is exactly zero with no regularization; bandwidth undefined")
    bw = (V / (B2 + lam)) ** (1 / (2 * o + 3))
    return bw, V, B2, lam, left, right


def select_bandwidth(d: Dataset, spec: FitSpec | None = None, covariates=None) -> BandwidthReport:
    """MSE-optimal main bandwidth ``h`` for ``spec`` (its ``h`` is ignored)."""
    spec = spec or FitSpec()
    covariates = tuple(spec.covariates if covariates is None else covariates)
    d = d.complete_cases(covariates)
    p, q = spec.p, spec.q
    kernel = Kernel.coerce(spec.kernel)
    vce = spec.vce
    r = d.running
    n = d.n
    masks = (r < 0, r >= 0)
    for name, m in zip(("left", "right"), masks):
        if m.sum() < q + 4:
            raise InsufficientDataError(f"{m.sum()} observations {name} of the cutoff; need {q + 4}")
    Z = d.covariate_matrix(covariates)
    sides = [(r[m], d.outcome[m], Z[m]) for m in masks]
    ranges = [float(np.max(np.abs(s[0]))) for s in sides]
    span = max(ranges)

    h_v = min(pilot_window(r, kernel), span)
    near = np.abs(r) <= h_v
    f = near.sum() / (2 * h_v * n)
    if f <= 0:
        raise InsufficientDataError("no observations in the pilot window around the cutoff")

    # stage 1: d for the (q+1)-th coefficient, fits over each side's full range
    dbw, *_, dl, dr = _stage(sides, kernel, vce, q + 1, q + 1, h_v, ranges, 0.0)
    dbw = min(dbw, span)
    # stage 2: b for the (p+1)-th coefficient
    b, *_, bl, br = _stage(sides, kernel, vce, q, p + 1, h_v, (dbw, dbw), REGULARIZATION_SCALE)
    b = min(b, span)
    # stage 3: h for the jump
    h, V, B2, lam, hl, hr = _stage(sides, kernel, vce, p, 0, h_v, (b, b), REGULARIZATION_SCALE)
    capped = h > span
    h = min(h, span)

    fq = factorial(q + 1)
    fp = factorial(p + 1)
    pilot = PilotEstimates(
        hl.sigma2, hr.sigma2, fp * hl.coef, fp * hr.coef, fp**2 * hl.coef_var, fp**2 * hr.coef_var,
        float(f), float(h_v), fq * dl.coef, fq * dr.coef,
    )
    mp = boundary_moments(kernel, p)
    return BandwidthReport(
        h_mse=float(h), b_pilot=float(b), pilot=pilot, bias_const=mp.bias_constant(0),
        var_const=mp.variance_constant(0), bias=float(np.sign(hr.bias - hl.bias) * np.sqrt(B2 / (2 * (p + 1)))),
        variance=float(V), regularization=float(lam / (2 * (p + 1))),
        regularization_active=bool(lam > B2), capped=bool(capped), n=n, p=p, kernel=kernel.value,
        covariates=covariates, d_pilot=float(dbw),
    )


def coverage_shrinkage_report(canonical, adjusted) -> float:
    """Percent change in confidence-interval length of ``adjusted`` relative to ``canonical``."""
    return 100.0 * (adjusted.ci_length / canonical.ci_length - 1.0)
