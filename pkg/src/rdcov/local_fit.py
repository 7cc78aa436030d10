"""Local polynomial regressions at the cutoff.

Every fit regresses on raw powers of the signed centred score, so slope
coefficients read as derivatives at the cutoff. Treatment is ``T = 1{x >= 0}``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientDataError, RankDeficiencyError
from .ingest import Dataset
from .kernels import Kernel, localized_weights
from .wls import LocalFit, wls_fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitSpec:
    """Estimation settings shared by every fit in one analysis."""

    p: int = 1
    kernel: Kernel = Kernel.TRIANGULAR
    h: float | None = None
    b: float | None = None
    vce: str = "HC3"
    covariates: tuple[str, ...] = ()

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("polynomial degree p must be >= 0")
        object.__setattr__(self, "kernel", Kernel.coerce(self.kernel))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "vce", self.vce.upper())
        for name in ("h", "b"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"bandwidth {name} must be positive, got {v}")

    @property
    def q(self) -> int:
        return self.p + 1

    def with_bandwidth(self, h: float, b: float | None = None) -> FitSpec:
        return replace(self, h=float(h), b=None if b is None else float(b))


def _require_h(spec: FitSpec, h):
    h = spec.h if h is None else h
    if h is None:
        raise ValueError("no bandwidth: set FitSpec.h or select one first")
    return float(h)


def poly_names(degree: int, prefix: str = "") -> list[str]:
    return [f"{prefix}1" if j == 0 else f"{prefix}x^{j}" if j > 1 else f"{prefix}x" for j in range(degree + 1)]


def fit_side(d: Dataset, spec: FitSpec, side: str, degree: int | None = None, *, h=None, y=None) -> LocalFit:
    """Kernel-weighted fit of the outcome on ``(1, x, ..., x^degree)`` on one side.

    The intercept estimates that side's limit at the cutoff.
    """
    degree = spec.p if degree is None else degree
    h = _require_h(spec, h)
    r = d.running
    y = d.outcome if y is None else np.asarray(y, dtype=float)
    lw = localized_weights(r, spec.kernel, h, side)
    n_side = lw.n_left if side == "left" else lw.n_right
    if n_side < degree + 2:
        raise InsufficientDataError(
            f"{n_side} positive-weight observations {side} of the cutoff at h={h:g}; need {degree + 2}"
        )
    X = np.vander(r, degree + 1, increasing=True)
    return wls_fit(X, y, lw.weights, vce=spec.vce, names=poly_names(degree))


def intercept_difference(left: LocalFit, right: LocalFit) -> float:
    """Right limit minus left limit."""
    return float(right.coefficients[0] - left.coefficients[0])


def _pooled_columns(r, degree):
    T = (r >= 0).astype(float)
    cols = [T] + [r**j for j in range(degree + 1)] + [T * r**j for j in range(1, degree + 1)]
    names = ["T"] + poly_names(degree) + [f"T*{n}" for n in poly_names(degree)[1:]]
    return cols, names


def _drop_constant(Zw: np.ndarray, names: Sequence[str]) -> list[int]:
    keep = []
    for j, name in enumerate(names):
        if np.ptp(Zw[:, j]) == 0:
            log.warning("covariate %r has no variation inside the window; dropped", name)
        else:
            keep.append(j)
    return keep


def fit_pooled(d: Dataset, spec: FitSpec, degree: int | None = None, *, covariates: Sequence[str] = (),
               h=None, y=None) -> LocalFit:
    """One regression on ``(T, 1, x..x^degree, T*x..T*x^degree, Z)``.

    Polynomial terms are fully interacted with ``T``; covariates enter with a
    single coefficient common to both sides. Rows with a missing covariate are
    excluded, and covariates constant inside the window are dropped with a warning.
    """
    degree = spec.p if degree is None else degree
    h = _require_h(spec, h)
    covariates = list(covariates)
    if covariates:
        mask = np.ones(d.n, dtype=bool)
        for c in covariates:
            mask &= np.isfinite(d.column(c))
        if not mask.all():
            if y is not None:
                y = np.asarray(y, dtype=float)[mask]
            d = d.subset(mask)
    r = d.running
    y = d.outcome if y is None else np.asarray(y, dtype=float)
    lw = localized_weights(r, spec.kernel, h, "both")
    for side, cnt in (("left", lw.n_left), ("right", lw.n_right)):
        if cnt < degree + 2:
            raise InsufficientDataError(f"{cnt} positive-weight observations {side} of the cutoff at h={h:g}")
    cols, names = _pooled_columns(r, degree)
    if covariates:
        Z = d.covariate_matrix(covariates)
        keep = _drop_constant(Z[lw.index], covariates)
        covariates = [covariates[j] for j in keep]
        cols += [Z[:, j] for j in keep]
        names += covariates
    try:
        return wls_fit(np.column_stack(cols), y, lw.weights, vce=spec.vce, names=names)
    except RankDeficiencyError as exc:
        if exc.name in covariates:
            raise RankDeficiencyError(exc.column, exc.name,
                                      f"covariate {exc.name!r} is collinear with the other regressors") from None
        raise


def fit_covariate_adjusted(d: Dataset, spec: FitSpec, degree: int | None = None, *,
                           covariates: Sequence[str] | None = None, h=None, y=None) -> LocalFit:
    """Restricted regression with a common covariate coefficient; ``T`` coefficient is the estimate."""
    covariates = spec.covariates if covariates is None else tuple(covariates)
    if not covariates:
        raise ValueError("covariate-adjusted fit needs at least one covariate")
    return fit_pooled(d, spec, degree, covariates=covariates, h=h, y=y)


def covariate_coefficients(fit: LocalFit) -> dict[str, float]:
    """Common covariate coefficients of a pooled fit."""
    out = {}
    for j, name in enumerate(fit.names):
        if name == "T" or name == "1" or name == "x" or name.startswith("x^") or name.startswith("T*"):
            continue
        out[name] = float(fit.coefficients[j])
    return out


def fit_interacted(d: Dataset, spec: FitSpec, group: str, degree: int | None = None, *,
                   covariates: Sequence[str] = (), h=None, y=None) -> tuple[LocalFit, list[float]]:
    """Pooled regression with every regressor interacted with group indicators.

    Returns the fit and the sorted group levels; the coefficient named
    ``T@<level>`` is that group's effect. Covariates get group-specific
    coefficients, so the fit decomposes into independent subgroup fits.
    """
    degree = spec.p if degree is None else degree
    h = _require_h(spec, h)
    need = [group, *covariates]
    mask = np.ones(d.n, dtype=bool)
    for c in need:
        mask &= np.isfinite(d.column(c))
    if y is not None:
        y = np.asarray(y, dtype=float)[mask]
    d = d.subset(mask) if not mask.all() else d
    r = d.running
    y = d.outcome if y is None else y
    g = d.column(group)
    levels = sorted(np.unique(g).tolist())
    lw = localized_weights(r, spec.kernel, h, "both")
    base, base_names = _pooled_columns(r, degree)
    Z = d.covariate_matrix(covariates)
    cols, names = [], []
    for lev in levels:
        ind = (g == lev).astype(float)
        pos = lw.weights * ind > 0
        for side_mask, side in ((r < 0, "left"), (r >= 0, "right")):
            if np.count_nonzero(pos & side_mask) < degree + 2:
                raise InsufficientDataError(f"group {lev:g}: too few observations {side} of the cutoff at h={h:g}")
        cols += [c * ind for c in base]
        names += [f"{n}@{lev:g}" for n in base_names]
        keep = _drop_constant(Z[pos], covariates) if covariates else []
        cols += [Z[:, j] * ind for j in keep]
        names += [f"{covariates[j]}@{lev:g}" for j in keep]
    fit = wls_fit(np.column_stack(cols), y, lw.weights, vce=spec.vce, names=names)
    return fit, levels
