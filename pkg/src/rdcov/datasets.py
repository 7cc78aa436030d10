"""Locating and loading the Head Start county file.

The file is not shipped here. It is looked up, in order, inside a
caller-given directory, at ``$RDCOV_HEADSTART_CSV``, and inside the
installed ``rdhonest`` distribution (``pip install rdhonest``), which
redistributes the public replication data as ``rdhonest/data/headst.csv``.
"""

from __future__ import annotations

import os
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, distribution
from pathlib import Path

import numpy as np

from .errors import DataError
from .ingest import ColumnMap, Dataset, discretize_covariate, load_table

ENV_VAR = "RDCOV_HEADSTART_CSV"
FILENAME = "headst.csv"

SCORE = "povrate"  # 1960 poverty rate, already centred at the 59.1984 cutoff
OUTCOME = "mortHS"  # child mortality per 100,000 from Head Start-susceptible causes
CUTOFF = 0.0
RAW_CUTOFF = 59.1984
EFFICIENCY_COVARIATES = ("pop1417", "pop534", "pop25", "sch1417", "sch534", "hs60", "urban", "black")
POPULATION = "pop"
ALL_COVARIATES = EFFICIENCY_COVARIATES + (POPULATION,)
GROUP = "large"
GROUP_THRESHOLD = 10_000.0


def find_headstart(data_dir=None) -> Path:
    """Locate the county file: ``data_dir``, else ``$RDCOV_HEADSTART_CSV``, else the rdhonest package.

    An explicitly given location that does not hold the file is an error
    rather than a silent fall-through to the next source.
    """
    if data_dir is not None:
        p = Path(data_dir)
        for c in (p, p / FILENAME):
            if c.is_file():
                return c
        raise DataError(f"{FILENAME} not found in {p}")
    env = os.environ.get(ENV_VAR)
    if env:
        if Path(env).is_file():
            return Path(env)
        raise DataError(f"{ENV_VAR}={env} is not a file")
    try:
        c = Path(distribution("rdhonest").locate_file(f"rdhonest/data/{FILENAME}"))
        if c.is_file():
            return c
    except PackageNotFoundError:
        pass
    raise DataError(
        f"Head Start file not found; set {ENV_VAR}, pass a data directory containing {FILENAME}, "
        "or `pip install rdhonest`"
    )


def load_headstart(data_dir=None, outcome: str = OUTCOME, covariates=ALL_COVARIATES) -> Dataset:
    """Head Start counties with the population group attached.

    With ``outcome="pop"`` rows missing the mortality outcome are kept, which
    is what the population falsification check uses.
    """
    path = find_headstart(data_dir)
    covs = tuple(c for c in covariates if c != outcome)
    if outcome != POPULATION and POPULATION not in covs:
        covs = covs + (POPULATION,)
    d = load_table(path, ColumnMap(SCORE, outcome, covs), CUTOFF)
    src = d.outcome if outcome == POPULATION else d.column(POPULATION)
    g = np.where(np.isfinite(src), (src >= GROUP_THRESHOLD).astype(float), np.nan)
    return replace(d, group=g, group_name=GROUP)


def large_county_indicator(d: Dataset) -> Dataset:
    """Population-group indicator as the outcome (rows with unknown population dropped)."""
    if d.group_name != GROUP:
        d = discretize_covariate(d, POPULATION, GROUP_THRESHOLD, GROUP)
    return d.with_outcome(GROUP)


def headstart_available(data_dir=None) -> bool:
    try:
        find_headstart(data_dir)
    except DataError:
        return False
    return True
