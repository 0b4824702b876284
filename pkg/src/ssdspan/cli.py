"""Command-line interface: one subcommand per pipeline stage.

Config precedence is flags > config file > defaults; the config file is flat
``key = value`` text using the flag destination names. Every run directory
receives a manifest with the resolved configuration, input digests and seed,
so seeded runs are bit-reproducible. Progress goes to stderr; stdout carries
data only when ``--out -`` is used.

Exit codes: 0 success, 2 validation/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .backtest import BacktestConfig, run_backtest
from .errors import NumericalError, SsdSpanError
from .inference import SubsampleConfig, nondominance_test, subsample_ci
from .metrics import DEFAULT_TRC, performance_report
from .panel import load_panel
from .regress import ols
from .spanning import SpanningConfig, fss_select, loss_curve
from .synth import McDesign, run_experiment

SCHEMA_VERSION = 1


def _status(msg: str) -> None:
    print(msg, file=sys.stderr)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_config_file(path: str) -> dict:
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise SsdSpanError(f"{path}, line {lineno}: expected key = value")
            key, _, val = text.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _emit(args, payload: dict, main_name: str, inputs: list[str], t0: float,
          extra_files: dict[str, str] | None = None) -> None:
    """Write the main JSON payload plus a manifest (or stream to stdout)."""
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out == "-":
        print(text)
        return
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, main_name), "w") as fh:
        fh.write(text + "\n")
    if extra_files:
        for name, content in extra_files.items():
            with open(os.path.join(args.out, name), "w") as fh:
                fh.write(content)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": args.subcommand,
        "config": {k: v for k, v in sorted(vars(args).items())
                   if k not in ("func", "subcommand") and not callable(v)},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "input_digests": {path: _sha256(path) for path in inputs if path},
        "wall_clock_seconds": round(time.time() - t0, 3),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _status(f"wrote {main_name} and manifest.json to {args.out}")


def _csv_text(rows: list[list]) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerows(rows)
    return buf.getvalue()


def _spanning_config(args) -> SpanningConfig:
    return SpanningConfig(
        q_max=args.q_max, iteration_cap=args.iteration_cap,
        loss_tolerance=args.loss_tolerance, n1=args.n1, n2=args.n2,
        theory_mode=args.theory_mode, backend=args.backend,
    )


def _add_spanning_flags(sub) -> None:
    sub.add_argument("--q-max", type=int, default=10, help="sparsity cap (default 10)")
    sub.add_argument("--iteration-cap", type=int, default=None,
                     help="theory-mode iteration budget (default ceil(q ln(T+1)))")
    sub.add_argument("--loss-tolerance", type=float, default=1e-6,
                     help="loss treated as spanning (default 1e-6)")
    sub.add_argument("--n1", type=int, default=10, help="outcome grid size (default 10)")
    sub.add_argument("--n2", type=int, default=5, help="weight lattice size (default 5)")
    sub.add_argument("--theory-mode", action="store_true",
                     help="iterate past q-max up to the iteration cap")
    sub.add_argument("--backend", default="dual", choices=("dual", "highs"),
                     help="LP backend (default dual)")


def _add_common_flags(sub) -> None:
    sub.add_argument("--out", default="-", help="output directory, or - for stdout")
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--seed", type=int, default=0, help="root random seed (default 0)")
    sub.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                     help="worker count (default: available parallelism)")


def _cmd_span(args) -> None:
    t0 = time.time()
    panel = load_panel(args.input)
    result = fss_select(panel, _spanning_config(args))
    trace_csv = _csv_text([["iteration", "asset", "loss_after"]]
                          + [[i + 1, s.asset_name, repr(s.loss_after)]
                             for i, s in enumerate(result.trace)])
    _emit(args, result.to_dict(), "spanning.json", [args.input], t0,
          {"trace.csv": trace_csv})


def _cmd_loss_curve(args) -> None:
    t0 = time.time()
    panel = load_panel(args.input)
    qs = [int(q) for q in args.q_values.split(",")]
    curve = loss_curve(panel, qs, _spanning_config(args))
    if args.ci:
        from .inference import sparse_threshold_optimizers
        from .utility import build_grid
        from .panel import array_bounds

        grid = build_grid(array_bounds(panel.values), args.n1).points
        cis = []
        for support in curve.supports:
            cfg = SubsampleConfig(block_length=args.block_length, alpha=args.alpha,
                                  n1=args.n1)
            kmap = sparse_threshold_optimizers(panel, support, grid)
            cis.append(subsample_ci(panel, None, kappa_map=kmap, config=cfg))
            _status(f"confidence interval done for q={len(support)}")
        curve.confidence_intervals = cis
    payload = curve.to_dict()
    curve_csv = _csv_text([["q", "loss"]] + [[q, repr(l)] for q, l in
                                             zip(curve.q_values, curve.losses)])
    _emit(args, payload, "loss_curve.json", [args.input], t0, {"loss_curve.csv": curve_csv})


def _cmd_ci(args) -> None:
    t0 = time.time()
    panel = load_panel(args.input)
    result = fss_select(panel, _spanning_config(args), compute_per_utility=False)
    cfg = SubsampleConfig(block_length=args.subsample_length, alpha=args.alpha,
                          n1=args.n1, trim=args.trim)
    ci = subsample_ci(panel, result, config=cfg)
    payload = {"schema_version": SCHEMA_VERSION, "spanning": result.to_dict(),
               "confidence_interval": ci.to_dict()}
    _emit(args, payload, "ci.json", [args.input], t0)


def _cmd_test_dominance(args) -> None:
    t0 = time.time()
    panel = load_panel(args.input)
    try:
        i_b = panel.assets.index(args.benchmark)
        i_c = panel.assets.index(args.candidate)
    except ValueError as exc:
        raise SsdSpanError(f"column not found in {args.input}: {exc}") from None
    result = nondominance_test(
        panel.values[:, i_b], panel.values[:, i_c],
        block_length=args.block_length, replications=args.replications,
        seed=args.seed, recenter=not args.no_recenter, n1=args.n1, trim=args.trim,
        alpha=args.alpha,
    )
    _emit(args, result.to_dict(), "dominance.json", [args.input], t0)


def _cmd_backtest(args) -> None:
    t0 = time.time()
    panel = load_panel(args.input)
    config = BacktestConfig(window=args.window, spanning=_spanning_config(args),
                            trc=args.trc, rf=args.rf)
    out = run_backtest(panel, config)
    records_rows = [["date", "n_assets_training", "q_achieved", "loss",
                     "realized_return", "support"]]
    for rec in out.records:
        records_rows.append([rec.date, rec.n_assets_training, rec.q_achieved,
                             repr(rec.loss), repr(rec.realized_return),
                             ";".join(rec.support)])
    wealth_rows = [["date"] + [f"wealth_{s}" for s in out.wealth]
                   ] + [[d] + [repr(float(out.wealth[s][i])) for s in out.wealth]
                        for i, d in enumerate(out.dates)]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "metadata": out.metadata,
        "dates": out.dates,
        "reports": {s: r.to_dict() for s, r in out.reports.items()},
    }
    _emit(args, payload, "report.json", [args.input], t0,
          {"records.csv": _csv_text(records_rows), "wealth.csv": _csv_text(wealth_rows)})


def _read_column(path: str, column: str | None):
    panel = load_panel(path)
    if column is None:
        return panel, panel.values[:, 0], panel.assets[0]
    try:
        idx = panel.assets.index(column)
    except ValueError:
        raise SsdSpanError(f"column {column!r} not in {path} "
                           f"(available: {', '.join(panel.assets)})") from None
    return panel, panel.values[:, idx], column


def _rf_series(path: str | None, length: int):
    if path is None:
        return 0.0, None
    panel = load_panel(path)
    if "RF" not in panel.assets:
        _status(f"warning: no RF column in {path}; using a zero risk-free rate")
        return 0.0, panel
    rf = panel.values[:, panel.assets.index("RF")]
    if rf.size != length:
        raise SsdSpanError(f"RF series length {rf.size} != returns length {length}")
    return rf, panel


def _cmd_metrics(args) -> None:
    t0 = time.time()
    _, series, name = _read_column(args.returns, args.column)
    rf, _ = _rf_series(args.factors, series.size)
    bench = None
    if args.benchmark:
        _, bench, _ = _read_column(args.returns, args.benchmark)
    weights = None
    if args.weights:
        wpanel = load_panel(args.weights)
        weights = wpanel.values
    report = performance_report(series, rf=rf, weights_history=weights, trc=args.trc,
                                benchmark_returns=bench)
    payload = {"strategy": name, **report.to_dict()}
    flat = payload.copy()
    rows = [["measure", "value"]]
    for key in ("average", "standard_deviation", "skewness", "kurtosis", "sharpe",
                "downside_sharpe", "var95", "es95", "up_ratio", "turnover", "return_loss"):
        rows.append([key, "" if flat[key] is None else repr(flat[key])])
    for key, val in flat["ceq"].items():
        rows.append([f"ceq_{key}", "" if val is None else repr(val)])
    if flat["opportunity_cost"]:
        for key, val in flat["opportunity_cost"].items():
            rows.append([f"opportunity_cost_{key}", "" if val is None else repr(val)])
    inputs = [args.returns, args.factors, args.weights]
    _emit(args, payload, "report.json", [p for p in inputs if p], t0,
          {"report.csv": _csv_text(rows)})


def _cmd_mc(args) -> None:
    t0 = time.time()
    design = McDesign(
        experiment=args.experiment, n_assets=args.n_assets, t_obs=args.t,
        q=args.q, replications=args.reps, seed=args.seed,
        mean=args.mean, sd=args.sd, n1=args.n1, n2=args.n2,
        loss_tolerance=args.loss_tolerance,
    )
    report = run_experiment(design, n_jobs=args.threads,
                            progress=lambda done, total:
                            _status(f"replication {done}/{total}"))
    rows = [["experiment", "n_assets", "t_obs", "q", "replications",
             "average_selected", "sd_selected", "average_loss", "loss_standard_error",
             "dominant_block_rate"],
            [design.experiment, design.n_assets, design.t_obs, design.q,
             design.replications, repr(report.average_selected), repr(report.sd_selected),
             repr(report.average_loss), repr(report.loss_standard_error),
             "" if report.dominant_block_rate is None else repr(report.dominant_block_rate)]]
    _emit(args, report.to_dict(), "mc_report.json", [], t0,
          {"mc_report.csv": _csv_text(rows)})


def _cmd_regress(args) -> None:
    t0 = time.time()
    _, series, name = _read_column(args.returns, args.column)
    factors = load_panel(args.factors)
    if factors.n_periods != series.size:
        raise SsdSpanError(f"factor rows {factors.n_periods} != returns length {series.size}")
    model_cols = [c.strip() for c in args.model.split(",") if c.strip()]
    missing = [c for c in model_cols if c not in factors.assets]
    if missing:
        raise SsdSpanError(f"factors not found in {args.factors}: {missing}")
    rf, _ = _rf_series(args.factors, series.size)
    rf_arr = np.broadcast_to(np.asarray(rf, dtype=float), series.shape)
    X = np.column_stack([factors.values[:, factors.assets.index(c)] for c in model_cols])
    result = ols(series - rf_arr, X, se_kind=args.se_kind, nw_lags=args.nw_lags,
                 names=model_cols)
    rows = [["term", "coef", "t_stat", "p_value"]]
    for i, term in enumerate(result.names):
        rows.append([term, repr(float(result.params[i])), repr(float(result.t_stats[i])),
                     repr(float(result.p_values[i]))])
    payload = {"strategy": name, "model": model_cols, **result.to_dict()}
    _emit(args, payload, "regression.json", [args.returns, args.factors], t0,
          {"table.csv": _csv_text(rows)})


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="ssdspan",
        description="Sparse spanning portfolio selection, inference and backtesting",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    sp = subs.add_parser("span", help="greedy sparse-support selection on a return panel")
    sp.add_argument("--input", required=True, help="return CSV (date,ASSET1,...)")
    _add_spanning_flags(sp)
    _add_common_flags(sp)
    sp.set_defaults(func=_cmd_span)

    lc = subs.add_parser("loss-curve", help="diversification loss along the greedy path")
    lc.add_argument("--input", required=True)
    lc.add_argument("--q-values", required=True, help="comma-separated sparsity levels")
    lc.add_argument("--ci", action="store_true",
                    help="attach a subsampling confidence interval per sparsity level")
    lc.add_argument("--alpha", type=float, default=0.05)
    lc.add_argument("--block-length", type=int, default=None)
    _add_spanning_flags(lc)
    _add_common_flags(lc)
    lc.set_defaults(func=_cmd_loss_curve)

    ci = subs.add_parser("ci", help="fast subsampling confidence interval for the loss")
    ci.add_argument("--input", required=True)
    ci.add_argument("--alpha", type=float, default=0.05, help="significance level (<0.5)")
    ci.add_argument("--subsample-length", type=int, default=None,
                    help="subsample block length b (default floor(T^0.6))")
    ci.add_argument("--trim", type=float, default=0.0,
                    help="lift the threshold grid floor above the sample minimum")
    _add_spanning_flags(ci)
    _add_common_flags(ci)
    ci.set_defaults(func=_cmd_ci)

    td = subs.add_parser("test-dominance", help="pairwise non-dominance bootstrap test")
    td.add_argument("--input", required=True, help="CSV with both return columns")
    td.add_argument("--benchmark", required=True, help="benchmark column name")
    td.add_argument("--candidate", required=True, help="candidate dominator column name")
    td.add_argument("--replications", type=int, default=1000)
    td.add_argument("--block-length", type=int, default=None,
                    help="bootstrap block length (default ceil(T^(1/3)))")
    td.add_argument("--alpha", type=float, default=0.05)
    td.add_argument("--n1", type=int, default=10, help="threshold grid size")
    td.add_argument("--trim", type=float, default=0.0)
    td.add_argument("--no-recenter", action="store_true",
                    help="bootstrap the raw statistic instead of the recentered one")
    _add_common_flags(td)
    td.set_defaults(func=_cmd_test_dominance)

    bt = subs.add_parser("backtest", help="rolling-window out-of-sample harness")
    bt.add_argument("--input", required=True)
    bt.add_argument("--window", type=int, default=240, help="training window (months)")
    bt.add_argument("--trc", type=float, default=DEFAULT_TRC,
                    help="proportional transaction cost (default 0.0035)")
    bt.add_argument("--rf", type=float, default=0.0, help="constant risk-free rate")
    _add_spanning_flags(bt)
    bt.set_defaults(q_max=45)
    _add_common_flags(bt)
    bt.set_defaults(func=_cmd_backtest)

    mt = subs.add_parser("metrics", help="performance report for a return series")
    mt.add_argument("--returns", required=True, help="CSV of realized returns")
    mt.add_argument("--column", default=None, help="series column (default: first)")
    mt.add_argument("--benchmark", default=None, help="benchmark column for theta")
    mt.add_argument("--factors", default=None, help="factor CSV providing RF")
    mt.add_argument("--weights", default=None, help="CSV of weight history for turnover")
    mt.add_argument("--trc", type=float, default=DEFAULT_TRC)
    _add_common_flags(mt)
    mt.set_defaults(func=_cmd_metrics)

    mc = subs.add_parser("mc", help="Monte Carlo recovery experiments")
    mc.add_argument("--experiment", required=True, choices=("one", "two"))
    mc.add_argument("--n-assets", type=int, default=50)
    mc.add_argument("--t", type=int, required=True, help="time-series length")
    mc.add_argument("--q", type=int, required=True, help="sparsity cap")
    mc.add_argument("--reps", type=int, default=50)
    mc.add_argument("--mean", type=float, default=0.01, help="experiment-one mean")
    mc.add_argument("--sd", type=float, default=0.05, help="experiment-one volatility")
    mc.add_argument("--n1", type=int, default=10)
    mc.add_argument("--n2", type=int, default=5)
    mc.add_argument("--loss-tolerance", type=float, default=1e-6)
    _add_common_flags(mc)
    mc.set_defaults(func=_cmd_mc)

    rg = subs.add_parser("regress", help="OLS factor regression of excess returns")
    rg.add_argument("--returns", required=True)
    rg.add_argument("--column", default=None, help="strategy column (default: first)")
    rg.add_argument("--factors", required=True, help="factor CSV (RF column optional)")
    rg.add_argument("--model", required=True, help="comma-separated factor columns")
    rg.add_argument("--se-kind", default="plain", choices=("plain", "newey_west"))
    rg.add_argument("--nw-lags", type=int, default=None)
    _add_common_flags(rg)
    rg.set_defaults(func=_cmd_regress)

    registry.update({"span": sp, "loss-curve": lc, "ci": ci, "test-dominance": td,
                     "backtest": bt, "metrics": mt, "mc": mc, "regress": rg})
    return parser, registry


def main(argv=None) -> int:
    parser, registry = build_parser()
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        overrides = _load_config_file(args.config)
        sub = registry[args.subcommand]
        actions = {a.dest: a for a in sub._actions}
        typed: dict = {}
        for key, raw in overrides.items():
            if key not in actions:
                _status(f"error: unknown config key {key!r} for {args.subcommand}")
                return 2
            action = actions[key]
            if isinstance(action, argparse._StoreTrueAction):
                typed[key] = raw.lower() in ("1", "true", "yes")
            elif action.type is not None:
                typed[key] = action.type(raw)
            else:
                typed[key] = raw
        sub.set_defaults(**typed)
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NumericalError as exc:
        _status(f"numerical failure: {exc}")
        return 3
    except SsdSpanError as exc:
        _status(f"error: {exc}")
        return 2
    except FileNotFoundError as exc:
        _status(f"error: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
