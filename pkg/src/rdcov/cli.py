"""Command-line interface: ``rdcov {estimate,hte,plot,falsify,replicate,simulate}``.

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 replication-ledger mismatch. Errors print one line to stderr of the form
``rdcov: error[<code>]: <reason>``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from scipy import linalg

from .bandwidth import coverage_shrinkage_report
from .errors import DataError, NumericalError
from .heterogeneity import COMMON_BANDWIDTH_CAVEAT, estimate_hte
from .inference import InferenceConfig, estimate_rd
from .ingest import ColumnMap, discretize_covariate, load_table
from .local_fit import FitSpec
from .rdplot import build_rdplot, write_plot_csv, write_plot_json
from .report import dumps, estimate_json, format_table, round_sig

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_LEDGER = 0, 2, 3, 4

log = logging.getLogger("rdcov")


class ValidationError(DataError):
    pass


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Keys use option names (``-`` or ``_``)."""
    out = {}
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    for i, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{p}:{i}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _csv_list(s) -> tuple[str, ...]:
    if not s:
        return ()
    return tuple(c.strip() for c in str(s).split(",") if c.strip())


def _add_data_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("data")
    g.add_argument("--input", help="delimited text file with a header row")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--score", help="running-variable column")
    g.add_argument("--outcome", help="outcome column")
    g.add_argument("--cutoff", type=float, help="cutoff on the score scale")
    g.add_argument("--covariates", default="", help="comma-separated adjustment covariates")
    g.add_argument("--treated-below", action="store_true",
                   help="treat units with score at or below the cutoff (default: at or above)")
    g.add_argument("--strict", action="store_true", help="fail on non-numeric cells instead of dropping rows")


def _add_fit_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("estimation")
    g.add_argument("--kernel", default="triangular", choices=["triangular", "uniform", "epanechnikov"])
    g.add_argument("--p", type=int, default=1, help="local polynomial degree")
    g.add_argument("--h", type=float, help="main bandwidth (default: MSE-optimal selection)")
    g.add_argument("--b", type=float, help="bias bandwidth (default: equal to h)")
    g.add_argument("--vce", default="HC3", choices=["HC0", "HC1", "HC2", "HC3", "hc0", "hc1", "hc2", "hc3"])
    g.add_argument("--level", type=float, default=0.95)
    g.add_argument("--covariate-mode", default=None, choices=["fixed", "joint"],
                   help="how covariates enter the bias-corrected fit")
    g.add_argument("--format", default="text", choices=["text", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdcov", description="Sharp regression-discontinuity estimation, heterogeneity and plot data.",
        epilog="exit codes: 0 ok, 2 validation error, 3 numerical failure, 4 replication ledger mismatch")
    parser.add_argument("--config", help="key = value file supplying defaults for any long option")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="RD effect, canonical or covariate-adjusted")
    _add_data_args(p)
    _add_fit_args(p)

    p = sub.add_parser("hte", help="effects by a discrete group and the equality test")
    _add_data_args(p)
    _add_fit_args(p)
    p.add_argument("--group", required=False, help="group column (or source column with --threshold)")
    p.add_argument("--threshold", type=float, help="split the group column into 1{value >= threshold}")
    p.add_argument("--mode", default="separate", choices=["separate", "common"])
    p.add_argument("--group-h", default="", help="per-group bandwidths, e.g. '0=6.413,1=6.943'")

    p = sub.add_parser("plot", help="binned-means plot data (JSON and CSV)")
    _add_data_args(p)
    p.add_argument("--bins", default="auto", help="'auto', N, or 'L,R'")
    p.add_argument("--overlay-degree", type=int, default=1)
    p.add_argument("--window", type=float, help="plot only |score - cutoff| <= window")
    p.add_argument("--subset", help="keep rows with column == value, e.g. 'large=1'")
    p.add_argument("--threshold", type=float, help="with --subset, first split its column at this value")
    p.add_argument("--out", required=False, help="output path prefix (writes PREFIX.json and PREFIX.csv)")

    p = sub.add_parser("falsify", help="RD estimate with a pre-intervention covariate as the outcome")
    _add_data_args(p)
    _add_fit_args(p)
    p.add_argument("--covariate", required=False, help="column to test")
    p.add_argument("--threshold", type=float, help="test the indicator 1{covariate >= threshold} instead")

    p = sub.add_parser("replicate", help="Head Start tables, falsification, plot data and ledger")
    p.add_argument("--data-dir", help="directory holding headst.csv (default: search, see docs)")
    p.add_argument("--out", default="replication", help="output directory")
    p.add_argument("--expected", help="alternative expected-values ledger (JSON)")

    p = sub.add_parser("simulate", help="seeded Monte Carlo report")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--reps-coverage", type=int, default=2000)
    p.add_argument("--reps-efficiency", type=int, default=500)
    p.add_argument("--reps-equality", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--which", default="coverage,efficiency,equality")
    p.add_argument("--out", help="write the JSON report here as well as to stdout")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(conf) - known)
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
        defaults = {}
        for a in sub._actions:
            if a.dest in conf:
                v = conf[a.dest]
                if isinstance(a, argparse._StoreTrueAction):
                    defaults[a.dest] = v.lower() in ("1", "true", "yes", "on")
                else:
                    defaults[a.dest] = a.type(v) if a.type else v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise ValidationError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _load(args, extra: tuple[str, ...] = (), outcome: str | None = None):
    _require(args, "input", "score", "cutoff")
    outcome = outcome or args.outcome
    if not outcome:
        raise ValidationError("missing required option: --outcome")
    covs = tuple(c for c in dict.fromkeys(_csv_list(args.covariates) + extra) if c != outcome)
    cmap = ColumnMap(args.score, outcome, covs)
    return load_table(args.input, cmap, args.cutoff, delimiter=args.delimiter,
                      treated_below=args.treated_below, strict=args.strict)


def _spec(args, covariates=()) -> FitSpec:
    return FitSpec(p=args.p, kernel=args.kernel, h=args.h, b=args.b, vce=args.vce, covariates=tuple(covariates))


def _cfg(args, default_mode="fixed") -> InferenceConfig:
    return InferenceConfig(level=args.level, covariate_mode=args.covariate_mode or default_mode)


def cmd_estimate(args) -> int:
    covs = _csv_list(args.covariates)
    d = _load(args)
    cfg = _cfg(args)
    est = estimate_rd(d, _spec(args, covs), cfg)
    chg = None
    if covs:
        can = estimate_rd(d, _spec(args), cfg)
        chg = coverage_shrinkage_report(can, est)
    if args.format == "json":
        sys.stdout.write(dumps(estimate_json(est, chg, dropped_rows=d.dropped)))
    else:
        label = "with covariates" if covs else "canonical"
        sys.stdout.write(format_table([(label, est, chg)]))
        if d.dropped:
            sys.stdout.write(f"rows dropped (missing score or outcome): {d.dropped}\n")
    return EXIT_OK


def _group_h(s) -> dict[float, float]:
    out = {}
    for part in _csv_list(s):
        if "=" not in part:
            raise ValidationError(f"--group-h entries must look like level=h, got {part!r}")
        k, v = part.split("=", 1)
        out[float(k)] = float(v)
    return out


def cmd_hte(args) -> int:
    _require(args, "group")
    covs = _csv_list(args.covariates)
    d = _load(args, extra=(args.group,))
    group = args.group
    if args.threshold is not None:
        group = f"{args.group}_ge_{args.threshold:g}"
        d = discretize_covariate(d, args.group, args.threshold, group)
        if args.group in covs:
            raise ValidationError(f"{args.group!r} defines the groups and cannot be an adjustment covariate")
    if args.mode == "common":
        sys.stderr.write(f"note: {COMMON_BANDWIDTH_CAVEAT}\n")
    cfg = _cfg(args, "joint")
    res = estimate_hte(d, group, _spec(args), cfg, args.mode, covs, _group_h(args.group_h) or None)
    chg = {}
    if covs:
        base = estimate_hte(d, group, _spec(args), cfg, args.mode, (), _group_h(args.group_h) or None)
        chg = {g: coverage_shrinkage_report(base.per_group[g], res.per_group[g]) for g in res.levels}
    if args.format == "json":
        out = round_sig(res.to_dict())
        out["schema_version"] = "1.0"
        if chg:
            out["ci_change"] = {f"{g:g}": round_sig(v) for g, v in chg.items()}
        sys.stdout.write(dumps(out))
    else:
        cols = [(f"{group}={g:g}", res.per_group[g], chg.get(g)) for g in res.levels]
        eq = res.equality
        foot = [("p-value (equality)", f"{eq.p_value:.6g} (chi2={eq.statistic:.6g}, df={eq.df})")]
        sys.stdout.write(format_table(cols, f"bandwidths: {args.mode}", foot))
    return EXIT_OK


def cmd_plot(args) -> int:
    _require(args, "out")
    extra = ()
    subset = None
    if args.subset:
        if "=" not in args.subset:
            raise ValidationError("--subset must look like column=value")
        col, val = args.subset.split("=", 1)
        extra = (col,)
        subset = (col, float(val))
    d = _load(args, extra=extra)
    if subset is not None and args.threshold is not None:
        name = f"{subset[0]}_ge_{args.threshold:g}"
        d = discretize_covariate(d, subset[0], args.threshold, name)
        subset = (name, subset[1])
    bins = args.bins
    if bins != "auto":
        parts = _csv_list(bins)
        bins = int(parts[0]) if len(parts) == 1 else (int(parts[0]), int(parts[1]))
    s = build_rdplot(d, bins, args.overlay_degree, args.window, subset)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_plot_json(s, prefix.with_suffix(".json"))
    write_plot_csv(s, prefix.with_suffix(".csv"))
    sys.stdout.write(f"bins: left {s.left.counts.size}, right {s.right.counts.size}; "
                     f"rows: left {s.n_left}, right {s.n_right}\n"
                     f"wrote {prefix.with_suffix('.json')} and {prefix.with_suffix('.csv')}\n")
    return EXIT_OK


def cmd_falsify(args) -> int:
    _require(args, "covariate")
    covs = _csv_list(args.covariates)
    # load with the tested column as the outcome so rows missing the main outcome are kept
    d = _load(args, outcome=args.covariate)
    target = args.covariate
    if args.threshold is not None:
        target = f"{args.covariate}_ge_{args.threshold:g}"
        d = discretize_covariate(d, args.covariate, args.threshold, target)
        d = d.with_outcome(target)
    est = estimate_rd(d, _spec(args, tuple(c for c in covs if c not in (args.covariate, target))), _cfg(args))
    if args.format == "json":
        sys.stdout.write(dumps(estimate_json(est, tested=target)))
    else:
        sys.stdout.write(format_table([(f"outcome: {target}", est, None)]))
    return EXIT_OK


def cmd_replicate(args) -> int:
    from .replicate import ledger_text, plot_series, run_replication, write_outputs

    rep = run_replication(args.data_dir, args.expected)
    out = write_outputs(rep, args.out, plot_series(args.data_dir))
    text = ledger_text(rep)
    sys.stdout.write(text)
    sys.stdout.write(f"outputs in {out}\n")
    return EXIT_OK if rep.passed else EXIT_LEDGER


def cmd_simulate(args) -> int:
    from .simulate import SimConfig, run_all

    cfg = SimConfig(seed=args.seed, n=args.n, reps_coverage=args.reps_coverage,
                    reps_efficiency=args.reps_efficiency, reps_equality=args.reps_equality, workers=args.workers)
    text = run_all(cfg, _csv_list(args.which)).to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate, "hte": cmd_hte, "plot": cmd_plot, "falsify": cmd_falsify,
    "replicate": cmd_replicate, "simulate": cmd_simulate,
}


def _fail(code: int, kind: str, exc: BaseException) -> int:
    msg = " ".join(str(exc).split()) or exc.__class__.__name__
    sys.stderr.write(f"rdcov: error[{code}]: {kind}: {msg}\n")
    return code


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except (DataError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="rdcov: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    except (linalg.LinAlgError, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    except (DataError, ValueError, KeyError, FileNotFoundError) as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
