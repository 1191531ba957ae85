"""Command-line front end.

Subcommands: simulate | fit | wald | lyapunov | mc | identifiability.
Input series are CSV (header row, optional date column); reports are
written both as an aligned text table and as a JSON document that
round-trips the in-memory fit result.  Exit codes: 0 success, 2 parse,
3 invalid spec, 4 optimization, 5 inference.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CccApgarchError, NonPositivePrice, ParseError
from .estimate import FitOptions, FitResult, fit_qmle
from .inference import IllConditionedJ, SandwichCovariance, sandwich, wald_test
from .montecarlo import McDesign, WaldDesign, emit_boxplot_data, run_design
from .params import (
    DeltaEstimated,
    DeltaKnown,
    ModelOrders,
    ParamVector,
    load_spec,
    param_names,
    unpack,
)
from .simulate import simulate
from .stationarity import estimate_lyapunov, spectral_radius_b
from .volatility import check_identifiability

try:  # version string for report provenance
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("ccc-apgarch")
except Exception:  # pragma: no cover - not installed
    VERSION = "0.1.0"

MISSING_TOKENS = {"", "na", "nan", "null", "none"}


@dataclass
class SeriesFile:
    """Description of an input CSV series."""

    path: str
    has_header: bool = True
    date_column: Optional[str] = None
    value_columns: Optional[list] = None
    kind: str = "returns"  # "returns" or "prices"
    scale: float = 100.0


@dataclass
class LoadedSeries:
    returns: np.ndarray
    columns: list
    dropped_rows: int


def load_series(series: SeriesFile) -> LoadedSeries:
    """Read a CSV series; prices become scaled log-returns.

    Rows containing a missing cell (empty/NA/NaN/null) are dropped and
    counted; any other non-numeric cell raises
    :class:`~ccc_apgarch.errors.ParseError` with its location.  With
    ``kind="prices"`` the returns are ``scale * (log p_t - log p_{t-1})``
    computed on the surviving rows.
    """
    try:
        with open(series.path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {series.path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{series.path} is empty")

    if series.has_header:
        header = [name.strip() for name in rows[0]]
        body = rows[1:]
        first_data_row = 2
    else:
        header = [f"col{i + 1}" for i in range(len(rows[0]))]
        body = rows
        first_data_row = 1

    columns = list(series.value_columns) if series.value_columns else [
        name for name in header if name != series.date_column
    ]
    try:
        idx = [header.index(name) for name in columns]
    except ValueError as exc:
        raise ParseError(f"unknown column in {columns}: {exc}") from exc

    values = []
    dropped = 0
    for k, row in enumerate(body):
        if len(row) < len(header):
            raise ParseError("row has too few cells", row=first_data_row + k)
        cells = [row[i].strip() for i in idx]
        if any(cell.lower() in MISSING_TOKENS for cell in cells):
            dropped += 1
            continue
        parsed = []
        for name, cell in zip(columns, cells):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a number",
                                 row=first_data_row + k, column=name) from None
        values.append(parsed)
    if not values:
        raise ParseError(f"{series.path} contains no usable rows")
    data = np.asarray(values, dtype=float)

    if series.kind == "prices":
        if np.any(data <= 0):
            bad = np.argwhere(data <= 0)[0]
            raise NonPositivePrice(
                f"price {data[tuple(bad)]} is not positive", row=int(bad[0] + first_data_row),
                column=columns[int(bad[1])],
            )
        if data.shape[0] < 2:
            raise ParseError("need at least two price rows to form returns")
        data = series.scale * np.diff(np.log(data), axis=0)
    elif series.kind != "returns":
        raise ParseError(f"kind must be 'returns' or 'prices', got {series.kind!r}")
    return LoadedSeries(returns=data, columns=columns, dropped_rows=dropped)


def split_windows(n: int, k: int) -> list:
    """k equal consecutive windows; the remainder goes to the last one."""
    if k < 1 or k > n:
        raise ValueError(f"cannot split {n} rows into {k} windows")
    base = n // k
    bounds = []
    start = 0
    for i in range(k):
        stop = start + base if i < k - 1 else n
        bounds.append((start, stop))
        start = stop
    return bounds


# --- report -----------------------------------------------------------------

def build_report(fit: FitResult, cov: Optional[SandwichCovariance], se_status: str,
                 seed: int, options: dict) -> dict:
    orders = fit.v_hat.orders
    mode = fit.v_hat.mode
    names = param_names(orders, mode)
    se = cov.std_errors if cov is not None else [None] * len(names)
    estimates = [
        {"name": name, "value": float(val),
         "std_error": (float(s) if s is not None else None)}
        for name, val, s in zip(names, fit.v_hat.values, se)
    ]
    spec_hat = unpack(fit.v_hat, check_correlation=False)
    try:
        lyap = estimate_lyapunov(spec_hat, n_steps=3000, n_replications=25, seed=seed)
        gamma = {"gamma_hat": _json_float(lyap.gamma_hat), "std_error": lyap.std_error}
    except CccApgarchError as exc:
        gamma = {"gamma_hat": None, "std_error": None, "note": str(exc)}
    report = {
        "orders": {"m": orders.m, "p": orders.p, "q": orders.q},
        "mode": "estimate" if isinstance(mode, DeltaEstimated) else "known",
        "n": fit.n,
        "estimates": estimates,
        "objective": fit.objective,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "diagnostics": {
            "lyapunov": gamma,
            "spectral_radius_b": spectral_radius_b(spec_hat),
            "boundary_active": [names[i] for i in fit.boundary_active],
            "std_error_status": se_status,
            "j_condition": cov.j_condition if cov is not None else None,
        },
        "provenance": {"seed": seed, "version": VERSION, "options": options},
    }
    if isinstance(mode, DeltaKnown):
        report["delta"] = mode.delta.tolist()
    if cov is not None:
        report["sigma_hat"] = cov.sigma_hat.tolist()
    return report


def _json_float(x):
    return None if x is None or not math.isfinite(x) else float(x)


def format_report_table(report: dict) -> str:
    lines = []
    orders = report["orders"]
    lines.append(
        f"model m={orders['m']} p={orders['p']} q={orders['q']}  "
        f"mode={report['mode']}  n={report['n']}"
    )
    lines.append(f"objective {report['objective']:.6f}  converged={report['converged']}")
    lines.append(f"{'parameter':<16}{'estimate':>12}  {'std_error':>10}")
    for est in report["estimates"]:
        se = "unavailable" if est["std_error"] is None else f"{est['std_error']:.5f}"
        lines.append(f"{est['name']:<16}{est['value']:>12.5f}  {se:>10}")
    diag = report["diagnostics"]
    g = diag["lyapunov"]["gamma_hat"]
    lines.append(
        f"gamma_hat {'-inf' if g is None else format(g, '.4f')}  "
        f"rho_B {diag['spectral_radius_b']:.4f}  "
        f"boundary_active {diag['boundary_active'] or 'none'}"
    )
    return "\n".join(lines)


# --- subcommands --------------------------------------------------------------

def _cmd_simulate(args) -> int:
    spec, _ = load_spec(args.spec)
    out = simulate(spec, n=args.n, burn_in=args.burn_in, seed=args.seed)
    m = spec.orders.m
    header = ["t"] + [f"eps_{i + 1}" for i in range(m)]
    cols = [np.arange(1, args.n + 1), out.returns]
    if args.with_volatility:
        header += [f"h_{i + 1}" for i in range(m)]
        cols.append(out.volatility.h)
    if args.with_eta:
        header += [f"eta_{i + 1}" for i in range(m)]
        cols.append(out.eta_tilde)
    table = np.column_stack(cols)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in table:
            writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
    print(f"wrote {args.n} rows to {args.out} (seed {args.seed}, burn-in {args.burn_in})")
    return 0


def _parse_delta(text: Optional[str], m: int):
    if text is None:
        return None
    try:
        vals = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise ParseError(f"cannot parse delta {text!r}") from exc
    if len(vals) == 1:
        vals = vals * m
    if len(vals) != m:
        raise ParseError(f"delta needs {m} entries, got {len(vals)}")
    return np.asarray(vals)


def _cmd_fit(args) -> int:
    series = SeriesFile(
        path=args.data,
        has_header=not args.no_header,
        date_column=args.date_column,
        value_columns=args.columns.split(",") if args.columns else None,
        kind=args.kind,
        scale=args.scale,
    )
    loaded = load_series(series)
    data = loaded.returns
    m = data.shape[1]
    orders = ModelOrders(m=m, p=args.p, q=args.q)
    if args.delta_mode == "known":
        delta = _parse_delta(args.delta, m)
        if delta is None:
            delta = 2.0 * np.ones(m)
        mode = DeltaKnown(delta)
    else:
        mode = DeltaEstimated()

    if loaded.dropped_rows:
        print(f"dropped {loaded.dropped_rows} rows with missing values", file=sys.stderr)

    windows = split_windows(data.shape[0], args.subperiods)
    reports = []
    for w, (start, stop) in enumerate(windows):
        fit = fit_qmle(
            data[start:stop],
            orders,
            FitOptions(mode=mode, starts=args.starts, seed=args.seed),
        )
        cov = None
        se_status = "ok"
        try:
            cov = sandwich(fit, data[start:stop])
        except CccApgarchError as exc:
            se_status = f"unavailable: {type(exc).__name__}: {exc}"
        report = build_report(
            fit, cov, se_status, args.seed,
            options={
                "command": "fit", "data": args.data, "kind": args.kind,
                "starts": args.starts, "subperiods": args.subperiods,
                "scale": args.scale, "window": [start, stop],
            },
        )
        report["window"] = {"index": w, "start": start, "stop": stop}
        reports.append(report)
        if len(windows) > 1:
            print(f"--- window {w + 1}/{len(windows)} rows [{start}, {stop}) ---")
        print(format_report_table(report))

    doc = reports[0] if len(reports) == 1 else {"windows": reports}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"report written to {args.out}")
    return 0


def _load_constraints(path: str, s0: int):
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    c_rows, c_vals = [], []
    for k, row in enumerate(rows):
        if len(row) != s0 + 1:
            raise ParseError(
                f"constraint rows need {s0 + 1} cells (C row then c)", row=k + 1
            )
        try:
            nums = [float(cell) for cell in row]
        except ValueError as exc:
            raise ParseError(f"bad constraint value: {exc}", row=k + 1) from None
        c_rows.append(nums[:-1])
        c_vals.append(nums[-1])
    return np.asarray(c_rows), np.asarray(c_vals)


def _fit_from_report(report: dict):
    orders = ModelOrders(**report["orders"])
    if report["mode"] == "known":
        mode = DeltaKnown(np.asarray(report["delta"], float))
    else:
        mode = DeltaEstimated()
    values = np.asarray([est["value"] for est in report["estimates"]], float)
    fit = FitResult(
        v_hat=ParamVector(values, mode, orders),
        objective=report["objective"],
        converged=report["converged"],
        iterations=report["iterations"],
        start_index=0,
        n=report["n"],
    )
    return fit


def _cmd_wald(args) -> int:
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read report {args.report}: {exc}") from exc
    if "windows" in report:
        report = report["windows"][args.window]
    if "sigma_hat" not in report:
        raise IllConditionedJ(float("inf"))
    fit = _fit_from_report(report)
    sigma = np.asarray(report["sigma_hat"], float)
    se = np.sqrt(np.clip(np.diag(sigma), 0.0, None) / fit.n)
    cov = SandwichCovariance(
        i_hat=None, j_hat=None, sigma_hat=sigma, std_errors=se,
        j_condition=report["diagnostics"].get("j_condition") or float("nan"),
    )
    c_matrix, c_vector = _load_constraints(args.constraints, fit.v_hat.values.size)
    outcome = wald_test(fit, cov, c_matrix, c_vector)
    print(f"statistic {outcome.statistic:.6f}  df {outcome.df}  p-value {outcome.p_value:.6g}")
    for level, reject in sorted(outcome.reject_at.items(), reverse=True):
        print(f"  reject at {int(level * 100)}%: {'yes' if reject else 'no'}")
    return 0


def _cmd_lyapunov(args) -> int:
    spec, _ = load_spec(args.spec)
    est = estimate_lyapunov(
        spec, n_steps=args.steps, n_replications=args.replications, seed=args.seed
    )
    gamma = "-inf" if est.gamma_hat == -np.inf else f"{est.gamma_hat:.6f}"
    print(f"gamma_hat {gamma}  std_error {est.std_error:.6f}  "
          f"(steps {est.n_steps}, replications {est.n_replications})")
    if est.is_stationary(args.confidence):
        print(f"verdict: strictly stationary (gamma < 0 at {args.confidence} std errors)")
    elif est.gamma_hat - args.confidence * est.std_error > 0:
        print(f"verdict: non-stationary (gamma > 0 at {args.confidence} std errors)")
    else:
        print("verdict: inconclusive at this precision")
    return 0


def _cmd_identifiability(args) -> int:
    spec, _ = load_spec(args.spec)
    report = check_identifiability(spec)
    print(f"automatic (p=0): {report.automatic}")
    print(f"left-coprimeness check skipped: {report.left_coprime_skipped}")
    print(f"nonzero lag-coefficient sum: {report.nonzero_sum}")
    print(f"rank of highest-lag coefficient matrix: {report.rank_m} "
          f"(full rank: {report.full_rank})")
    return 0


def _cmd_mc(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config {args.config}: {exc}") from exc
    from .params import spec_from_config

    spec, mode = spec_from_config(cfg["spec"])
    wald = None
    if "wald" in cfg:
        wald = WaldDesign(
            c_matrix=np.asarray(cfg["wald"]["c_matrix"], float),
            c_vector=np.asarray(cfg["wald"]["c_vector"], float),
            level=float(cfg["wald"].get("level", 0.05)),
        )
    design = McDesign(
        truth=spec,
        n=int(cfg["n"]),
        replications=int(cfg["replications"]),
        mode=mode,
        seed=int(cfg.get("seed", 0)) if args.seed is None else args.seed,
        wald=wald,
        burn_in=int(cfg.get("burn_in", 1000)),
        starts=int(cfg.get("starts", 1)),
        check_stationarity=bool(cfg.get("check_stationarity", True)),
    )
    summary = run_design(design)

    header = f"{'parameter':<16}{'true':>9}{'bias':>10}{'rmse':>10}{'median':>10}"
    lines = [header]
    for ps in summary.per_parameter:
        lines.append(f"{ps.name:<16}{ps.true_value:>9.4f}{ps.bias:>10.5f}"
                     f"{ps.rmse:>10.5f}{ps.median:>10.4f}")
    lines.append(f"replications used {summary.n_used}, failures {summary.failures}")
    if summary.rejection_pct is not None:
        lines.append(f"Wald rejection frequency: {summary.rejection_pct:.1f}%")
    print("\n".join(lines))

    if args.out_prefix:
        with open(f"{args.out_prefix}_summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "true_value", "bias", "rmse",
                             "q1", "median", "q3", "min", "max"])
            for ps in summary.per_parameter:
                writer.writerow([ps.name, ps.true_value, ps.bias, ps.rmse,
                                 ps.q1, ps.median, ps.q3, ps.min, ps.max])
        with open(f"{args.out_prefix}_boxplot.csv", "w") as fh:
            fh.write(emit_boxplot_data(summary))
        if args.dump_estimates:
            with open(f"{args.out_prefix}_estimates.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(summary.names)
                for row in summary.estimates:
                    writer.writerow([repr(float(v)) for v in row])
        print(f"wrote {args.out_prefix}_summary.csv and {args.out_prefix}_boxplot.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccc-apgarch",
        description="Simulation, QML estimation, and inference for CCC asymmetric "
                    "power GARCH vector models.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads (best effort)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a trajectory to CSV")
    sim.add_argument("--spec", required=True, help="spec config JSON")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--burn-in", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--with-volatility", action="store_true")
    sim.add_argument("--with-eta", action="store_true")
    sim.set_defaults(func=_cmd_simulate)

    fit = sub.add_parser("fit", help="fit a model to a CSV series")
    fit.add_argument("--data", required=True)
    fit.add_argument("--kind", choices=["returns", "prices"], default="returns")
    fit.add_argument("--no-header", action="store_true")
    fit.add_argument("--date-column", default=None)
    fit.add_argument("--columns", default=None, help="comma-separated value columns")
    fit.add_argument("--scale", type=float, default=100.0,
                     help="log-return scaling for price inputs")
    fit.add_argument("--p", type=int, required=True)
    fit.add_argument("--q", type=int, required=True)
    fit.add_argument("--delta-mode", choices=["known", "estimate"], default="known")
    fit.add_argument("--delta", default=None, help="comma-separated powers (known mode)")
    fit.add_argument("--starts", type=int, default=1)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--subperiods", type=int, default=1,
                     help="split the sample into this many equal windows")
    fit.add_argument("--out", default=None, help="write the JSON report here")
    fit.set_defaults(func=_cmd_fit)

    wald = sub.add_parser("wald", help="Wald test from a fit report")
    wald.add_argument("--report", required=True, help="JSON report from fit")
    wald.add_argument("--constraints", required=True,
                      help="CSV: each row is a C row followed by its c entry")
    wald.add_argument("--window", type=int, default=0,
                      help="window index for subperiod reports")
    wald.set_defaults(func=_cmd_wald)

    lyap = sub.add_parser("lyapunov", help="top Lyapunov exponent of a spec")
    lyap.add_argument("--spec", required=True)
    lyap.add_argument("--steps", type=int, default=10_000)
    lyap.add_argument("--replications", type=int, default=100)
    lyap.add_argument("--seed", type=int, default=0)
    lyap.add_argument("--confidence", type=float, default=3.0)
    lyap.set_defaults(func=_cmd_lyapunov)

    ident = sub.add_parser("identifiability", help="rank condition report for a spec")
    ident.add_argument("--spec", required=True)
    ident.set_defaults(func=_cmd_identifiability)

    mc = sub.add_parser("mc", help="run a Monte Carlo experiment config")
    mc.add_argument("--config", required=True)
    mc.add_argument("--out-prefix", default=None)
    mc.add_argument("--seed", type=int, default=None, help="override the config seed")
    mc.add_argument("--dump-estimates", action="store_true")
    mc.set_defaults(func=_cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        try:
            from threadpoolctl import threadpool_limits

            threadpool_limits(limits=args.threads)
        except ImportError:
            print("threadpoolctl not available; --threads ignored", file=sys.stderr)
    try:
        return args.func(args)
    except CccApgarchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
