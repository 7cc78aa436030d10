"""Weighted least squares with leverages, HC sandwich covariances and Wald tests."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .errors import InsufficientDataError, NumericalError, RankDeficiencyError

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
COND_WARN = 1e8
# Leverage this close to one makes HC2/HC3 undefined for the row.
LEVERAGE_ONE_TOL = 1e-10

HC_FLAVORS = ("HC0", "HC1", "HC2", "HC3")


class LeverageWarning(RuntimeWarning):
    pass


@dataclass
class LocalFit:
    """One solved weighted least-squares problem.

    Only rows with positive weight are stored; ``rows`` maps them back to the
    caller's indexing.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    leverages: np.ndarray
    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    rows: np.ndarray
    bread: np.ndarray  # (X'WX)^-1
    vce: str = "HC3"
    names: tuple[str, ...] = ()
    condition: float = 1.0
    robust_cov: np.ndarray | None = None
    fallback_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def design_dim(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def effective_weights(self, a) -> np.ndarray:
        """Vector ``omega`` (one entry per stored row) with ``a'beta = sum omega_i y_i``.

        ``a`` is a coefficient vector or a column index.
        """
        if np.ndim(a) == 0:
            idx = int(a)
            a = np.zeros(self.design_dim)
            a[idx] = 1.0
        return self.weights * (self.X @ (self.bread @ np.asarray(a, dtype=float)))

    def linear_variance(self, a, flavor: str | None = None) -> float:
        """Sandwich variance of ``a'beta``."""
        cov = self.robust_cov if flavor is None or flavor == self.vce else sandwich_cov(self, flavor)
        if np.ndim(a) == 0:
            return float(cov[int(a), int(a)])
        a = np.asarray(a, dtype=float)
        return float(a @ cov @ a)


def wls_fit(X, y, w, vce: str = "HC3", names=None) -> LocalFit:
    """Minimise ``sum w_i (y_i - X_i beta)^2``.

    Solved through a QR factorisation of the sqrt(w)-scaled design after each
    column is scaled to unit norm; a column whose diagonal entry in R falls
    below ``RANK_TOL`` is reported as linearly dependent on the columns before it.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (X.shape[0] == y.shape[0] == w.shape[0]):
        raise ValueError("X, y and w must have the same number of rows")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    rows = np.flatnonzero(w > 0)
    k = X.shape[1]
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(k))
    if rows.size < k:
        raise InsufficientDataError(f"{rows.size} positive-weight rows for {k} coefficients")
    Xp, yp, wp = X[rows], y[rows], w[rows]
    sw = np.sqrt(wp)
    A = Xp * sw[:, None]
    norms = np.linalg.norm(A, axis=0)
    for j in np.flatnonzero(norms == 0):
        raise RankDeficiencyError(int(j), names[j], f"column {j} ({names[j]}) is identically zero in the window")
    As = A / norms
    Q, R = linalg.qr(As, mode="economic")
    diag = np.abs(np.diag(R))
    bad = np.flatnonzero(diag < RANK_TOL * max(diag.max(), 1.0))
    if bad.size:
        j = int(bad[0])
        raise RankDeficiencyError(j, names[j])
    z = Q.T @ (yp * sw)
    beta = linalg.solve_triangular(R, z) / norms
    resid = yp - Xp @ beta
    lev = np.einsum("ij,ij->i", Q, Q)
    Rinv = linalg.solve_triangular(R, np.eye(k))
    bread = (Rinv @ Rinv.T) / np.outer(norms, norms)
    cond = float(np.linalg.cond(R))
    if cond > COND_WARN:
        log.warning("weighted design is ill-conditioned (condition number %.3g)", cond)
    fit = LocalFit(beta, resid, lev, Xp, yp, wp, rows, bread, vce=vce, names=names, condition=cond)
    fit.robust_cov = sandwich_cov(fit, vce)
    return fit


def _hc_scale(fit: LocalFit, flavor: str):
    e2 = fit.residuals**2
    n, k = fit.X.shape
    if flavor == "HC0":
        return e2, np.empty(0, dtype=int)
    if flavor == "HC1":
        return e2 * n / max(n - k, 1), np.empty(0, dtype=int)
    one_minus = 1.0 - fit.leverages
    bad = np.flatnonzero(one_minus < LEVERAGE_ONE_TOL)
    safe = np.where(one_minus < LEVERAGE_ONE_TOL, 1.0, one_minus)
    power = 1 if flavor == "HC2" else 2
    scaled = e2 / safe**power
    if bad.size:
        warnings.warn(
            f"{bad.size} row(s) with leverage 1: {flavor} undefined there, using HC1 for those rows",
            LeverageWarning, stacklevel=3,
        )
        scaled[bad] = e2[bad] * n / max(n - k, 1)
    return scaled, bad


def sandwich_cov(fit: LocalFit, flavor: str = "HC3") -> np.ndarray:
    """``(X'WX)^-1 X'W S WX (X'WX)^-1`` with ``S = diag`` of scaled squared residuals.

    Rows with leverage one get the HC1 scaling under HC2/HC3; their indices
    are recorded in ``fit.fallback_rows``.
    """
    flavor = flavor.upper()
    if flavor not in HC_FLAVORS:
        raise ValueError(f"unknown variance flavour {flavor!r}")
    s, bad = _hc_scale(fit, flavor)
    M = fit.X * (fit.weights * np.sqrt(s))[:, None]
    meat = M.T @ M
    cov = fit.bread @ meat @ fit.bread
    cov = (cov + cov.T) / 2.0
    if flavor == fit.vce:
        fit.fallback_rows = bad
    return cov


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    df: int
    p_value: float

    @property
    def f_statistic(self) -> float:
        """Same test in F form (numerator df = ``df``, infinite denominator df)."""
        return self.statistic / self.df


def wald_test(estimates, cov, R, r=None) -> WaldResult:
    """Chi-square Wald test of ``R theta = r``."""
    theta = np.atleast_1d(np.asarray(estimates, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    r = np.zeros(R.shape[0]) if r is None else np.atleast_1d(np.asarray(r, dtype=float))
    if np.linalg.matrix_rank(R) < R.shape[0]:
        raise ValueError("restriction matrix must have full row rank")
    diff = R @ theta - r
    middle = R @ cov @ R.T
    try:
        c = linalg.cho_factor(middle)
    except linalg.LinAlgError:
        raise NumericalError("R cov R' is singular; Wald statistic undefined") from None
    stat = float(diff @ linalg.cho_solve(c, diff))
    stat = max(stat, 0.0)
    df = R.shape[0]
    return WaldResult(stat, df, float(stats.chi2.sf(stat, df)))
