"""Text and JSON rendering of estimates in the usual RD table layout."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence

import numpy as np

from .inference import RdEstimate

SCHEMA_VERSION = "1.0"
ROWS = ("tau", "rci", "ci_change", "p_value", "h", "n_eff", "pct_effect")
ROW_LABELS = {
    "tau": "tau",
    "rci": "95% robust CI",
    "ci_change": "CI length change (%)",
    "p_value": "p-value",
    "h": "h",
    "n_eff": "N- | N+",
    "pct_effect": "% treatment effect",
}


def fmt(v: float, digits: int = 6) -> str:
    """Six significant digits; the same rounding is used for JSON output."""
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "-"
    return f"{v:.{digits}g}"


def round_sig(v, digits: int = 6):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        return float(fmt(v, digits)) if math.isfinite(v) else None
    if isinstance(v, dict):
        return {k: round_sig(x, digits) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [round_sig(x, digits) for x in v]
    return v


def cells(e: RdEstimate, ci_change: float | None = None) -> dict[str, str]:
    return {
        "tau": fmt(e.tau),
        "rci": f"[{fmt(e.ci[0])}, {fmt(e.ci[1])}]",
        "ci_change": fmt(ci_change) if ci_change is not None else "-",
        "p_value": fmt(e.p_value),
        "h": fmt(e.h_used),
        "n_eff": f"{e.n_eff[0]} | {e.n_eff[1]}",
        "pct_effect": fmt(e.pct_effect),
    }


def format_table(columns: Sequence[tuple[str, RdEstimate, float | None]], title: str = "",
                 footer: Sequence[tuple[str, str]] = ()) -> str:
    """Aligned text table, one column per estimate, rows in the fixed order."""
    heads = [c[0] for c in columns]
    body = [cells(e, chg) for _, e, chg in columns]
    lab_w = max(len(ROW_LABELS[r]) for r in ROWS)
    lab_w = max([lab_w] + [len(k) for k, _ in footer])
    col_w = [max(len(h), *(len(b[r]) for r in ROWS)) for h, b in zip(heads, body)]
    lines = []
    if title:
        lines.append(title)
    lines.append(" " * lab_w + "  " + "  ".join(h.rjust(w) for h, w in zip(heads, col_w)))
    lines.append("-" * (lab_w + 2 + sum(col_w) + 2 * (len(col_w) - 1)))
    for r in ROWS:
        lines.append(ROW_LABELS[r].ljust(lab_w) + "  " + "  ".join(b[r].rjust(w) for b, w in zip(body, col_w)))
    for k, v in footer:
        lines.append(k.ljust(lab_w) + "  " + v)
    return "\n".join(lines) + "\n"


def estimate_json(e: RdEstimate, ci_change: float | None = None, **extra) -> dict:
    out = {"schema_version": SCHEMA_VERSION, **round_sig(e.to_dict())}
    if ci_change is not None:
        out["ci_change"] = round_sig(float(ci_change))
    out.update(round_sig(extra))
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"
