"""Binned-means RD plots: plot data only, no rendering.

Each side of the cutoff is cut into evenly spaced bins over that side's
plotted range (the full support, or ``[-h, 0)`` / ``[0, h]`` for a local
plot). Overlays are unweighted global polynomial fits per side, sampled at
``OVERLAY_POINTS`` evenly spaced positions. Positions are reported on the
original score scale.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InsufficientDataError
from .ingest import Dataset
from .wls import wls_fit

SCHEMA_VERSION = "1.0"
OVERLAY_POINTS = 200
MIN_ROWS_AUTO = 10


@dataclass(frozen=True)
class SideBins:
    edges: np.ndarray
    centers: np.ndarray
    means: np.ndarray  # NaN for empty bins
    counts: np.ndarray
    overlay_x: np.ndarray
    overlay_y: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class BinnedSeries:
    left: SideBins
    right: SideBins
    cutoff: float
    overlay_degree: int
    outcome: str
    window: float | None = None
    subset: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_left(self) -> int:
        return self.left.n

    @property
    def n_right(self) -> int:
        return self.right.n

    def to_dict(self) -> dict:
        def side(s: SideBins) -> dict:
            return {
                "bin_edges": s.edges.tolist(),
                "bin_centers": s.centers.tolist(),
                "bin_means": [None if not math.isfinite(v) else float(v) for v in s.means],
                "bin_counts": s.counts.astype(int).tolist(),
                "overlay": {"x": s.overlay_x.tolist(), "y": s.overlay_y.tolist()},
                "n": s.n,
            }

        window = None if self.window is None else [self.cutoff - self.window, self.cutoff + self.window]
        return {
            "schema_version": SCHEMA_VERSION,
            "outcome": self.outcome,
            "cutoff": self.cutoff,
            "overlay_degree": self.overlay_degree,
            "window": window,
            "subset": self.subset,
            "left": side(self.left),
            "right": side(self.right),
            **({"meta": self.meta} if self.meta else {}),
        }


def auto_bin_count(d: Dataset | int, side: str | None = None) -> int:
    """Default number of evenly spaced bins, ``ceil(2 n^(2/5))``.

    ``d`` is a Dataset (counted on ``side``) or a row count.
    """
    if isinstance(d, Dataset):
        n = d.n_left if side == "left" else d.n_right
    else:
        n = int(d)
    if n < MIN_ROWS_AUTO:
        raise InsufficientDataError(f"{n} rows on this side; automatic binning needs at least {MIN_ROWS_AUTO}")
    return math.ceil(2 * n**0.4)


def bin_side(r: np.ndarray, y: np.ndarray, lo: float, hi: float, nbins: int):
    """Evenly spaced bins on ``[lo, hi]``; the last bin is closed on the right."""
    edges = np.linspace(lo, hi, nbins + 1)
    idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, nbins - 1)
    counts = np.bincount(idx, minlength=nbins).astype(float)
    sums = np.bincount(idx, weights=y, minlength=nbins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.where(counts > 0, counts, 1.0), np.nan)
    return edges, (edges[:-1] + edges[1:]) / 2, means, counts


def _overlay(r, y, lo, hi, degree):
    xs = np.linspace(lo, hi, OVERLAY_POINTS)
    deg = min(degree, np.unique(r).size - 1)
    fit = wls_fit(np.vander(r, deg + 1, increasing=True), y, np.ones(r.size), vce="HC0")
    return xs, np.vander(xs, deg + 1, increasing=True) @ fit.coefficients


def build_rdplot(d: Dataset, bins="auto", overlay_degree: int = 1, window: float | None = None,
                 subset: tuple[str, float] | None = None, outcome: str | None = None) -> BinnedSeries:
    """Binned means and global polynomial overlays on each side of the cutoff.

    ``bins`` is ``"auto"``, an int for both sides, or a ``(left, right)`` pair.
    ``window`` restricts the plot to ``|x| <= window``. ``subset=(column,
    value)`` keeps only rows whose column equals value. ``outcome`` plots
    another column (for example a pre-intervention covariate) instead.
    """
    if overlay_degree < 0:
        raise ValueError("overlay_degree must be >= 0")
    label = None
    if outcome is not None and outcome != d.outcome_name:
        d = d.with_outcome(outcome)
    if subset is not None:
        col, val = subset
        d = d.subset(d.column(col) == val)
        label = f"{col}=={val:g}"
    r = d.running
    y = d.outcome
    keep = np.ones(d.n, dtype=bool) if window is None else np.abs(r) <= window
    if window is not None and not window > 0:
        raise ValueError("window must be positive")

    sides = []
    for name, m in (("left", (r < 0) & keep), ("right", (r >= 0) & keep)):
        if not m.any():
            raise InsufficientDataError(f"no observations {name} of the cutoff in the plotted range")
        rs, ys = r[m], y[m]
        if isinstance(bins, str):
            if bins != "auto":
                raise ValueError("bins must be 'auto', an int or a (left, right) pair")
            nb = auto_bin_count(rs.size)
        elif np.ndim(bins) == 0:
            nb = int(bins)
        else:
            nb = int(bins[0] if name == "left" else bins[1])
        if nb < 1:
            raise ValueError("bin count must be >= 1")
        if name == "left":
            lo, hi = (-window if window is not None else float(rs.min())), 0.0
        else:
            lo, hi = 0.0, (window if window is not None else float(rs.max()))
        edges, centers, means, counts = bin_side(rs, ys, lo, hi, nb)
        ox, oy = _overlay(rs, ys, lo, hi, overlay_degree)
        sides.append((edges, centers, means, counts, ox, oy))

    # back to the score scale
    sign = -1.0 if d.treated_below else 1.0
    c = d.cutoff
    out = []
    for edges, centers, means, counts, ox, oy in sides:
        out.append(SideBins(c + sign * edges, c + sign * centers, means, counts, c + sign * ox, oy))
    return BinnedSeries(out[0], out[1], c, overlay_degree, d.outcome_name, window, label,
                        meta={"bins_left": int(out[0].counts.size), "bins_right": int(out[1].counts.size)})


def write_plot_json(series: BinnedSeries, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(series.to_dict(), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def write_plot_csv(series: BinnedSeries, path) -> Path:
    """Long format: one row per bin and per overlay sample."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"# schema_version={SCHEMA_VERSION}", f"outcome={series.outcome}", f"cutoff={series.cutoff!r}"])
        w.writerow(["kind", "side", "x", "y", "count", "lo", "hi"])
        for name, s in (("left", series.left), ("right", series.right)):
            for j in range(s.counts.size):
                m = "" if not math.isfinite(s.means[j]) else repr(float(s.means[j]))
                w.writerow(["bin", name, repr(float(s.centers[j])), m, int(s.counts[j]),
                            repr(float(s.edges[j])), repr(float(s.edges[j + 1]))])
            for x, y in zip(s.overlay_x, s.overlay_y):
                w.writerow(["overlay", name, repr(float(x)), repr(float(y)), "", "", ""])
        if series.window is not None:
            for x in (series.cutoff - series.window, series.cutoff + series.window):
                w.writerow(["window", "", repr(float(x)), "", "", "", ""])
    return path


def load_plot_json(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported plot-data schema {data.get('schema_version')!r}")
    return data
