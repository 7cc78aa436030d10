"""Compact kernels, bandwidth-localized weights and boundary kernel moments."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import InsufficientDataError

# Gauss-Legendre with 64 nodes integrates polynomials up to degree 127 exactly,
# which covers every (polynomial) kernel moment used here.
_QUAD_NODES = 64


class Kernel(str, enum.Enum):
    TRIANGULAR = "triangular"
    UNIFORM = "uniform"
    EPANECHNIKOV = "epanechnikov"

    @classmethod
    def coerce(cls, k) -> Kernel:
        if isinstance(k, Kernel):
            return k
        try:
            return cls(str(k).lower())
        except ValueError:
            raise ValueError(f"unknown kernel {k!r}; choose from {[m.value for m in cls]}") from None

    def __call__(self, u):
        return kernel_value(self, u)


def kernel_value(k, u):
    """Evaluate the kernel at ``u`` (scalar or array). Zero outside ``[-1, 1]``."""
    k = Kernel.coerce(k)
    a = np.abs(np.asarray(u, dtype=float))
    inside = a <= 1.0
    if k is Kernel.TRIANGULAR:
        out = np.where(inside, 1.0 - a, 0.0)
    elif k is Kernel.UNIFORM:
        out = np.where(inside, 0.5, 0.0)
    else:
        out = np.where(inside, 0.75 * (1.0 - a * a), 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LocalWeights:
    """Kernel weights for every row plus the rows that receive positive weight."""

    weights: np.ndarray
    index: np.ndarray
    n_left: int
    n_right: int


def localized_weights(x, k, h: float, side: str = "both") -> LocalWeights:
    """Weights ``K(x/h)`` restricted to ``side`` of the cutoff.

    ``x`` is the signed centred score (treated iff ``x >= 0``). The support is
    closed: a row at exactly ``|x| = h`` is in the window. For the triangular
    kernel such a row has weight zero and is therefore not counted.
    """
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    x = np.asarray(getattr(x, "running", x), dtype=float)
    k = Kernel.coerce(k)
    w = np.asarray(kernel_value(k, x / h), dtype=float).reshape(x.shape)
    w[np.abs(x) > h] = 0.0
    right = x >= 0
    if side == "left":
        w[right] = 0.0
    elif side == "right":
        w[~right] = 0.0
    elif side != "both":
        raise ValueError("side must be 'left', 'right' or 'both'")
    pos = w > 0
    n_left = int(np.count_nonzero(pos & ~right))
    n_right = int(np.count_nonzero(pos & right))
    if side in ("left", "both") and n_left == 0:
        raise InsufficientDataError(f"no observations with positive weight left of the cutoff at h={h:g}")
    if side in ("right", "both") and n_right == 0:
        raise InsufficientDataError(f"no observations with positive weight right of the cutoff at h={h:g}")
    return LocalWeights(w, np.flatnonzero(pos), n_left, n_right)


@dataclass(frozen=True)
class BoundaryMoments:
    """Kernel moment matrices on ``[0, 1]`` for a degree-``p`` boundary fit.

    gamma = int r r' K, theta = int r u^(p+1) K, psi = int r r' K^2,
    with r(u) = (1, u, ..., u^p).
    """

    gamma: np.ndarray
    theta: np.ndarray
    psi: np.ndarray

    def bias_constant(self, nu: int = 0) -> float:
        """``nu! e_nu' Gamma^-1 theta``."""
        return factorial(nu) * float(np.linalg.solve(self.gamma, self.theta)[nu])

    def variance_constant(self, nu: int = 0) -> float:
        """``(nu!)^2 e_nu' Gamma^-1 Psi Gamma^-1 e_nu``."""
        gi = np.linalg.inv(self.gamma)
        return factorial(nu) ** 2 * float((gi @ self.psi @ gi)[nu, nu])


@lru_cache(maxsize=64)
def boundary_moments(k, p: int) -> BoundaryMoments:
    k = Kernel.coerce(k)
    nodes, wq = np.polynomial.legendre.leggauss(_QUAD_NODES)
    u = (nodes + 1.0) / 2.0
    wq = wq / 2.0
    kv = kernel_value(k, u)
    r = np.vstack([u**j for j in range(p + 1)])
    gamma = (r * (kv * wq)) @ r.T
    theta = (r * (kv * u ** (p + 1) * wq)).sum(axis=1)
    psi = (r * (kv**2 * wq)) @ r.T
    for a in (gamma, theta, psi):
        a.setflags(write=False)
    return BoundaryMoments(gamma, theta, psi)
