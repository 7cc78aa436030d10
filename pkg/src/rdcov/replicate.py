"""End-to-end Head Start replication with a pass/fail ledger.

Expected values and tolerances live in ``data/expected_headstart.json``;
each cell carries its provenance, so tolerances change without code edits.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import datasets as hs
from .bandwidth import coverage_shrinkage_report
from .heterogeneity import HteResult, estimate_hte
from .inference import InferenceConfig, RdEstimate, estimate_rd
from .local_fit import FitSpec
from .rdplot import build_rdplot, write_plot_csv, write_plot_json
from .report import dumps, estimate_json, format_table, round_sig

EFFICIENCY = tuple(hs.EFFICIENCY_COVARIATES)
ALL = tuple(hs.ALL_COVARIATES)
JOINT = InferenceConfig(covariate_mode="joint")


def load_expected(path=None) -> dict:
    if path is None:
        text = resources.files("rdcov").joinpath("data/expected_headstart.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


@dataclass
class LedgerRow:
    id: str
    kind: str
    mode: str
    provenance: str
    expected: object
    actual: object
    tolerance: str
    passed: bool

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.id:<42} expected {self.expected!s:>9}  got {_show(self.actual):>11}  ({self.tolerance})"


def _show(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def check(expected, actual, tol: dict) -> tuple[bool, str]:
    if "exact" in tol:
        return actual == expected, "exact"
    if actual is None or (isinstance(actual, float) and not math.isfinite(actual)):
        return False, "missing"
    if "rel" in tol:
        return abs(actual / expected - 1) <= tol["rel"] + 1e-12, f"±{100 * tol['rel']:g}%"
    return abs(actual - expected) <= tol["abs"] + 1e-12, f"±{tol['abs']:g}"


@dataclass
class Replication:
    fixed: dict[str, RdEstimate] = field(default_factory=dict)
    auto: dict[str, RdEstimate] = field(default_factory=dict)
    hte_fixed: dict[str, HteResult] = field(default_factory=dict)
    hte_auto: dict[str, HteResult] = field(default_factory=dict)
    falsification: RdEstimate | None = None
    ledger: list[LedgerRow] = field(default_factory=list)
    excluded: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.ledger)

    def actual_cells(self) -> dict:
        out = {}

        def put(prefix, e: RdEstimate, chg=None):
            out.update({
                f"{prefix}.tau": e.tau, f"{prefix}.ci_lo": e.ci[0], f"{prefix}.ci_hi": e.ci[1],
                f"{prefix}.p": e.p_value, f"{prefix}.n_left": e.n_eff[0], f"{prefix}.n_right": e.n_eff[1],
                f"{prefix}.pct": e.pct_effect,
            })
            if chg is not None:
                out[f"{prefix}.ci_change"] = chg

        f = self.fixed
        put("t1.canonical", f["t1.canonical"])
        put("t1.efficiency", f["t1.efficiency"], coverage_shrinkage_report(f["t1.canonical"], f["t1.efficiency"]))
        put("t1.all", f["t1.all"], coverage_shrinkage_report(f["t1.canonical"], f["t1.all"]))
        for panel in ("A", "B"):
            can, cov = self.hte_fixed[f"{panel}.canonical"], self.hte_fixed[f"{panel}.covariates"]
            for lev, name in ((0.0, "small"), (1.0, "large")):
                put(f"t2.{panel}.canonical.{name}", can.per_group[lev])
                put(f"t2.{panel}.covariates.{name}", cov.per_group[lev],
                    coverage_shrinkage_report(can.per_group[lev], cov.per_group[lev]))
            out[f"t2.{panel}.canonical.equality_p"] = can.equality_p
            out[f"t2.{panel}.covariates.equality_p"] = cov.equality_p
        for key in ("canonical", "efficiency", "all"):
            out[f"t1.{key}.h"] = self.auto[f"t1.{key}"].h_used
            out[f"t1.{key}.regularization_active"] = self.auto[f"t1.{key}"].bandwidth.regularization_active
        for key in ("canonical", "covariates"):
            res = self.hte_auto[f"A.{key}"]
            out[f"t2.A.{key}.small.h"] = res.per_group[0.0].h_used
            out[f"t2.A.{key}.large.h"] = res.per_group[1.0].h_used
        out["falsification.tau"] = self.falsification.tau
        out["falsification.p"] = self.falsification.p_value
        return out


def run_replication(data_dir=None, expected_path=None) -> Replication:
    exp = load_expected(expected_path)
    H = exp["fixed_bandwidths"]
    d = hs.load_headstart(data_dir)
    rep = Replication()

    rep.fixed["t1.canonical"] = estimate_rd(d, FitSpec(h=H["t1.canonical"]))
    rep.fixed["t1.efficiency"] = estimate_rd(d, FitSpec(h=H["t1.efficiency"], covariates=EFFICIENCY))
    rep.fixed["t1.all"] = estimate_rd(d, FitSpec(h=H["t1.all"], covariates=ALL))
    rep.auto["t1.canonical"] = estimate_rd(d, FitSpec())
    rep.auto["t1.efficiency"] = estimate_rd(d, FitSpec(covariates=EFFICIENCY))
    rep.auto["t1.all"] = estimate_rd(d, FitSpec(covariates=ALL))

    g = hs.GROUP
    rep.hte_fixed["A.canonical"] = estimate_hte(d, g, FitSpec(), JOINT, "separate", h_by_group={
        0.0: H["t2.A.canonical.small"], 1.0: H["t2.A.canonical.large"]})
    rep.hte_fixed["A.covariates"] = estimate_hte(d, g, FitSpec(), JOINT, "separate", EFFICIENCY, h_by_group={
        0.0: H["t2.A.covariates.small"], 1.0: H["t2.A.covariates.large"]})
    rep.hte_fixed["B.canonical"] = estimate_hte(d, g, FitSpec(h=H["t2.B.canonical"]), JOINT, "common")
    rep.hte_fixed["B.covariates"] = estimate_hte(d, g, FitSpec(h=H["t2.B.covariates"]), JOINT, "common", EFFICIENCY)
    rep.hte_auto["A.canonical"] = estimate_hte(d, g, FitSpec(), JOINT, "separate")
    rep.hte_auto["A.covariates"] = estimate_hte(d, g, FitSpec(), JOINT, "separate", EFFICIENCY)
    rep.hte_auto["B.canonical"] = estimate_hte(d, g, FitSpec(), JOINT, "common")
    rep.hte_auto["B.covariates"] = estimate_hte(d, g, FitSpec(), JOINT, "common", EFFICIENCY)

    pop = hs.load_headstart(data_dir, outcome=hs.POPULATION)
    rep.falsification = estimate_rd(hs.large_county_indicator(pop), FitSpec())

    actual = rep.actual_cells()
    tols = exp["tolerances"]
    for cell in exp["cells"]:
        a = actual.get(cell["id"])
        ok, tol = check(cell["expected"], a, tols[cell["kind"]])
        rep.ledger.append(LedgerRow(cell["id"], cell["kind"], cell["mode"], cell["provenance"],
                                    cell["expected"], a, tol, bool(ok)))
    rep.excluded = [dict(c, actual=actual.get(c["id"])) for c in exp.get("excluded", [])]
    return rep


def plot_series(data_dir=None, h_fixed: float = 6.717, h_groups=(6.413, 6.943)) -> dict:
    """Plot data for the four figure panels plus the population falsification plots."""
    d = hs.load_headstart(data_dir)
    out = {
        "fig1a_global": build_rdplot(d),
        "fig1b_local": build_rdplot(d, window=h_fixed),
    }
    for lev, name, h in ((0.0, "small", h_groups[0]), (1.0, "large", h_groups[1])):
        out[f"fig2a_global_{name}"] = build_rdplot(d, subset=(hs.GROUP, lev))
        out[f"fig2b_local_{name}"] = build_rdplot(d, window=h, subset=(hs.GROUP, lev))
    pop = hs.large_county_indicator(hs.load_headstart(data_dir, outcome=hs.POPULATION))
    fh = estimate_rd(pop, FitSpec()).h_used
    out["falsification_global"] = build_rdplot(pop)
    out["falsification_local"] = build_rdplot(pop, window=fh)
    return out


def _table2_panel(rep: Replication, panel: str) -> str:
    can, cov = rep.hte_fixed[f"{panel}.canonical"], rep.hte_fixed[f"{panel}.covariates"]
    cols = []
    for res, lab in ((can, "canonical"), (cov, "covariates")):
        for lev, name in ((0.0, "pop<10k"), (1.0, "pop>=10k")):
            chg = None if res is can else coverage_shrinkage_report(can.per_group[lev], res.per_group[lev])
            cols.append((f"{lab} {name}", res.per_group[lev], chg))
    title = {"A": "Panel A: separate bandwidths", "B": "Panel B: common bandwidth"}[panel]
    footer = [("p-value (equality)", f"canonical {can.equality_p:.6g}; covariates {cov.equality_p:.6g}")]
    return format_table(cols, title, footer)


def write_outputs(rep: Replication, out_dir, plots: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    f = rep.fixed
    t1 = format_table([
        ("canonical", f["t1.canonical"], None),
        ("efficiency covs", f["t1.efficiency"], coverage_shrinkage_report(f["t1.canonical"], f["t1.efficiency"])),
        ("all covs", f["t1.all"], coverage_shrinkage_report(f["t1.canonical"], f["t1.all"])),
    ], "Table 1 (published bandwidths)")
    t1a = format_table([(k.split(".")[1], e, None) for k, e in rep.auto.items()], "Table 1 (selected bandwidths)")
    (out / "table1.txt").write_text(t1 + "\n" + t1a, encoding="utf-8")
    (out / "table2.txt").write_text(_table2_panel(rep, "A") + "\n" + _table2_panel(rep, "B"), encoding="utf-8")
    results = {
        "schema_version": "1.0",
        "fixed": {k: estimate_json(e) for k, e in rep.fixed.items()},
        "auto": {k: estimate_json(e) for k, e in rep.auto.items()},
        "hte_fixed": {k: v.to_dict() for k, v in rep.hte_fixed.items()},
        "hte_auto": {k: v.to_dict() for k, v in rep.hte_auto.items()},
        "falsification": estimate_json(rep.falsification),
    }

    (out / "results.json").write_text(dumps(round_sig(results)), encoding="utf-8")
    with (out / "ledger.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "kind", "mode", "provenance", "expected", "actual", "tolerance", "passed"])
        for r in rep.ledger:
            w.writerow([r.id, r.kind, r.mode, r.provenance, r.expected, _show(r.actual), r.tolerance, r.passed])
    (out / "ledger.txt").write_text(ledger_text(rep), encoding="utf-8")
    if plots:
        pdir = out / "plots"
        pdir.mkdir(exist_ok=True)
        for name, s in plots.items():
            write_plot_json(s, pdir / f"{name}.json")
            write_plot_csv(s, pdir / f"{name}.csv")
    return out


def ledger_text(rep: Replication) -> str:
    lines = [r.line() for r in rep.ledger]
    n_pass = sum(r.passed for r in rep.ledger)
    lines.append(f"{n_pass}/{len(rep.ledger)} cells pass")
    for c in rep.excluded:
        lines.append(f"EXCL  {c['id']:<42} expected {c['expected']!s:>9}  got {_show(c['actual']):>11}  (not checked)")
    return "\n".join(lines) + "\n"
