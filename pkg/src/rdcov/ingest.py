"""Loading and validating study data.

A :class:`Dataset` holds one outcome, one running score with its cutoff,
optional named covariates and an optional discrete group column. Rows with a
missing score or outcome never enter a Dataset; missing covariate cells are
kept as NaN and only dropped by analyses that use that covariate.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, InsufficientDataError

log = logging.getLogger(__name__)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ColumnMap:
    """Which file column plays which role."""

    score: str
    outcome: str
    covariates: tuple[str, ...] = ()
    group: str | None = None

    @classmethod
    def coerce(cls, schema) -> ColumnMap:
        if isinstance(schema, ColumnMap):
            return schema
        if not isinstance(schema, Mapping):
            raise TypeError("schema must be a ColumnMap or a mapping of role -> column")
        try:
            score, outcome = schema["score"], schema["outcome"]
        except KeyError as exc:
            raise DataError(f"schema is missing the {exc.args[0]!r} role") from None
        covs = schema.get("covariates") or ()
        if isinstance(covs, str):
            covs = tuple(c.strip() for c in covs.split(",") if c.strip())
        return cls(score, outcome, tuple(covs), schema.get("group"))

    def columns(self) -> list[str]:
        cols = [self.score, self.outcome, *self.covariates]
        if self.group:
            cols.append(self.group)
        return list(dict.fromkeys(cols))


@dataclass(frozen=True)
class Dataset:
    """Immutable study data, one row per unit.

    ``x`` is the score centred at the cutoff (``score - cutoff``). Treatment
    is ``x >= 0`` unless ``treated_below`` is set, in which case units at or
    below the cutoff are treated; :attr:`running` folds that choice into a
    signed score so that downstream code always treats ``running >= 0``.
    """

    score: np.ndarray
    outcome: np.ndarray
    cutoff: float
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)
    group: np.ndarray | None = None
    group_name: str | None = None
    outcome_name: str = "y"
    score_name: str = "x"
    treated_below: bool = False
    dropped: int = 0
    dropped_rows: tuple[int, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.cutoff):
            raise DataError("cutoff must be finite")
        score, outcome = _frozen(self.score), _frozen(self.outcome)
        if score.ndim != 1 or score.shape != outcome.shape:
            raise DataError("score and outcome must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(score)) and np.all(np.isfinite(outcome))):
            raise DataError("score and outcome must be finite on every retained row")
        covs = {}
        for name, col in self.covariates.items():
            col = _frozen(col)
            if col.shape != score.shape:
                raise DataError(f"covariate {name!r} has {col.size} rows, expected {score.size}")
            covs[name] = col
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "covariates", covs)
        if self.group is not None:
            g = _frozen(self.group)
            if g.shape != score.shape:
                raise DataError("group column length differs from score")
            object.__setattr__(self, "group", g)
        x = _frozen(score - self.cutoff)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.score.size

    @property
    def running(self) -> np.ndarray:
        """Signed centred score; treated units are exactly those with ``running >= 0``."""
        return -self.x if self.treated_below else self.x

    @property
    def treated(self) -> np.ndarray:
        return self.running >= 0

    @property
    def n_left(self) -> int:
        return int(np.count_nonzero(~self.treated))

    @property
    def n_right(self) -> int:
        return int(np.count_nonzero(self.treated))

    @property
    def group_levels(self) -> list[float]:
        if self.group is None:
            return []
        g = self.group[np.isfinite(self.group)]
        return sorted(np.unique(g).tolist())

    def column(self, name: str) -> np.ndarray:
        """Covariate, group, or outcome column by name."""
        if name in self.covariates:
            return self.covariates[name]
        if self.group is not None and name == self.group_name:
            return self.group
        if name == self.outcome_name:
            return self.outcome
        raise DataError(f"unknown column {name!r}")

    def subset(self, mask) -> Dataset:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.score.shape:
            raise DataError("mask length differs from dataset")
        return replace(
            self,
            score=self.score[mask],
            outcome=self.outcome[mask],
            covariates={k: v[mask] for k, v in self.covariates.items()},
            group=None if self.group is None else self.group[mask],
        )

    def complete_cases(self, names: Sequence[str]) -> Dataset:
        """Drop rows with a missing value in any of ``names``."""
        if not names:
            return self
        mask = np.ones(self.n, dtype=bool)
        for name in names:
            mask &= np.isfinite(self.column(name))
        return self if mask.all() else self.subset(mask)

    def with_outcome(self, name: str) -> Dataset:
        """Treat column ``name`` as the outcome; rows where it is missing are dropped."""
        col = self.column(name)
        keep = np.isfinite(col)
        d = self.subset(keep) if not keep.all() else self
        covs = {k: v for k, v in d.covariates.items() if k != name}
        return replace(d, outcome=d.column(name), outcome_name=name, covariates=covs)

    def covariate_matrix(self, names: Sequence[str]) -> np.ndarray:
        if not names:
            return np.empty((self.n, 0))
        return np.column_stack([self.column(c) for c in names])


def from_arrays(score, outcome, cutoff: float = 0.0, covariates=None, group=None,
                group_name: str | None = None, treated_below: bool = False) -> Dataset:
    """Build a Dataset from in-memory arrays (no row filtering)."""
    covs = dict(covariates or {})
    if group is not None and group_name is None:
        group_name = "group"
    return Dataset(score=score, outcome=outcome, cutoff=float(cutoff), covariates=covs,
                   group=group, group_name=group_name, treated_below=treated_below)


def from_frame(frame: pd.DataFrame, schema, cutoff: float, *, treated_below: bool = False,
               strict: bool = False) -> Dataset:
    """Validate a DataFrame against ``schema`` and build a Dataset.

    Rows whose score or outcome is missing or non-numeric are dropped and
    counted. With ``strict=True`` a non-numeric (as opposed to empty) cell in
    any mapped column raises instead, naming the row.
    """
    cmap = ColumnMap.coerce(schema)
    if not math.isfinite(cutoff):
        raise DataError("cutoff must be finite")
    missing = [c for c in cmap.columns() if c not in frame.columns]
    if missing:
        raise DataError(f"mapped column(s) not in header: {', '.join(missing)}")

    parsed = {}
    for col in cmap.columns():
        raw = frame[col]
        num = pd.to_numeric(raw, errors="coerce").astype(float)
        bad = num.isna() & raw.notna() & (raw.astype(str).str.strip() != "")
        if bad.any():
            rows = np.flatnonzero(bad.to_numpy())
            if strict:
                raise DataError(f"non-numeric value {raw.iloc[rows[0]]!r} in column {col!r} at row {rows[0]}")
            log.warning("column %r: non-numeric cells at rows %s treated as missing", col, rows.tolist())
        parsed[col] = num.to_numpy()

    score, outcome = parsed[cmap.score], parsed[cmap.outcome]
    keep = np.isfinite(score) & np.isfinite(outcome)
    dropped_rows = tuple(np.flatnonzero(~keep).tolist())
    if not keep.any():
        raise InsufficientDataError("no rows survive validation (score and outcome all missing)")
    if dropped_rows:
        log.info("dropped %d row(s) with missing score or outcome", len(dropped_rows))

    covs = {}
    for c in cmap.covariates:
        col = parsed[c][keep]
        col[~np.isfinite(col)] = np.nan
        covs[c] = col
    group = parsed[cmap.group][keep] if cmap.group else None
    return Dataset(
        score=score[keep], outcome=outcome[keep], cutoff=float(cutoff), covariates=covs,
        group=group, group_name=cmap.group, outcome_name=cmap.outcome, score_name=cmap.score,
        treated_below=treated_below, dropped=len(dropped_rows), dropped_rows=dropped_rows,
    )


def load_table(path, schema, cutoff: float, *, delimiter: str = ",", treated_below: bool = False,
               strict: bool = False) -> Dataset:
    """Read a delimited text file with a header row into a :class:`Dataset`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    frame = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=True, encoding="utf-8")
    frame.columns = [c.strip() for c in frame.columns]
    return from_frame(frame, schema, cutoff, treated_below=treated_below, strict=strict)


def discretize_covariate(d: Dataset, column: str, threshold: float, name: str | None = None) -> Dataset:
    """Add the binary group ``1{column >= threshold}``; the source column is kept.

    Rows with a missing source value get a missing group.
    """
    if not math.isfinite(threshold):
        raise DataError("threshold must be finite")
    src = d.column(column)
    g = np.where(np.isfinite(src), (src >= threshold).astype(float), np.nan)
    name = name or f"{column}_ge_{threshold:g}"
    out = replace(d, group=g, group_name=name)
    if len(out.group_levels) < 2:
        log.warning("group %r is degenerate: a single level %s", name, out.group_levels)
    return out
