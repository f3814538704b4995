"""Command-line entry points.

Exit codes: 0 on success, 1 for input/validation problems (including bad
flags), 2 for unexpected internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .forecast import ForecastScenario, exit_probability, median_stay, optimize_c2, run_forecast
from .kernels import Bandwidths
from .model import fit_panel, load_model, save_model
from .panel import PanelValidationError, emit_csv, ingest_csv
from .service import create_app, resolve_port
from .simulate import TrueModel, run_study, simulate_cohorts


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract here is usage + exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _parse_bandwidths(text: str):
    if text == "auto":
        return "auto"
    parts = text.split(",")
    if len(parts) != 2:
        raise PanelValidationError(f"--bandwidths expects 'auto' or 'b1,b2', got {text!r}")
    try:
        return Bandwidths(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise PanelValidationError(f"bad bandwidths {text!r}: {exc}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pandemon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a panel CSV and write it back in canonical form")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None, help="normalized CSV destination (default: stdout summary only)")

    p = sub.add_parser("fit", help="fit hazard surfaces from a panel CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="model directory to create")
    p.add_argument("--bandwidths", default="auto", help="'auto' or explicit 'b1,b2' in days")
    p.add_argument("--window", type=int, default=None, help="largest tracked stay duration in days")

    p = sub.add_parser("indicators", help="stay-length indicators from a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--type", choices=["median", "exitprob"], default="median")
    p.add_argument("--cause", choices=["recovery", "death"], default="death")
    p.add_argument("--days-in", type=int, default=0)
    p.add_argument("--out", default=None, help="JSON destination (default: stdout)")

    p = sub.add_parser("forecast", help="death forecast under C1/C2 indicators")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--admissions", default=None, help="CSV file with one admission count per horizon day")
    p.add_argument("--out", default=None, help="JSON destination (default: stdout); a .csv sibling is written too")

    p = sub.add_parser("backtest", help="grid-search C2 against a held-out tail of the panel")
    p.add_argument("--input", required=True)
    p.add_argument("--cutoff", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--bandwidths", default="auto")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--c2-grid", default=None, help="min:max:step, default 0.25:4.0:0.05")
    p.add_argument("--cumulative", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="generate a synthetic panel (and optionally stay records)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", type=float, default=10000, help="expected total admissions")
    p.add_argument("--days", type=int, default=120)
    p.add_argument("--hazard-scale", type=float, default=40.0)
    p.add_argument("--outside-ratio", type=float, default=0.0)
    p.add_argument("--out", required=True, help="panel CSV destination")
    p.add_argument("--records", default=None, help="optional stay-records CSV destination")

    p = sub.add_parser("study", help="Monte-Carlo error study of the two fitting routes")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--sizes", default="10000,40000")
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--days", type=int, default=120)
    p.add_argument("--hazard-scale", type=float, default=40.0)
    p.add_argument("--out", required=True, help="CSV destination; a .json sibling is written too")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", default=None, help="directory with built dashboard assets to serve at /")

    return parser


def _write_or_print(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_ingest(args) -> int:
    panel = ingest_csv(args.input)
    if args.out:
        emit_csv(panel, args.out)
    summary = {
        "n_days": panel.T,
        "start_date": panel.start_date.isoformat(),
        "admissions": int(panel.n2.sum()),
        "exits": int(panel.exits.sum()),
        "has_n1": panel.n1 is not None,
        "has_n_out": panel.n_out is not None,
        "final_occupancy": int(panel.occupancy()[-1]),
    }
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0


def _cmd_fit(args) -> int:
    panel = ingest_csv(args.input)
    model = fit_panel(panel, bandwidths=_parse_bandwidths(args.bandwidths), window=args.window)
    save_model(model, args.out)
    sys.stdout.write(
        json.dumps(
            {
                "model_dir": str(args.out),
                "b1": model.bandwidths.b1,
                "b2": model.bandwidths.b2,
                "window": model.window,
                "iterations": model.diagnostics.iterations,
                "converged": model.diagnostics.converged,
            },
            indent=2,
        )
        + "\n"
    )
    return 0


def _cmd_indicators(args) -> int:
    model = load_model(args.model)
    series = []
    for s in range(model.panel.T):
        day = {"day": s, "date": model.panel.date_of(s).isoformat()}
        if args.type == "median":
            value = median_stay(model.surface_all, s)
            day.update({"value": value, "defined": value is not None})
        else:
            split = exit_probability(model.surface_recovery, model.surface_death, s, days_in=args.days_in)
            day.update({"value": split.for_cause(args.cause), "truncated_mass": split.truncated_mass})
        series.append(day)
    payload = {"type": args.type, "cause": args.cause if args.type == "exitprob" else None, "series": series}
    _write_or_print(json.dumps(payload, indent=2), args.out)
    return 0


def _load_admissions_csv(path: str, horizon: int) -> list[float]:
    values = []
    for line in Path(path).read_text(encoding="utf-8").strip().splitlines():
        cell = line.split(",")[-1].strip()
        if cell and not cell.lstrip("-").replace(".", "", 1).isdigit():
            continue  # header row
        if cell:
            values.append(float(cell))
    if len(values) != horizon:
        raise PanelValidationError(f"admissions file has {len(values)} values; horizon needs {horizon}")
    return values


def _cmd_forecast(args) -> int:
    model = load_model(args.model)
    scenario = ForecastScenario(cutoff=model.panel.T, horizon=args.horizon, c1=args.c1, c2=args.c2)
    override = _load_admissions_csv(args.admissions, args.horizon) if args.admissions else None
    result = run_forecast(model, scenario, admissions_override=override)
    text = json.dumps(result.to_json_dict(), indent=2)
    _write_or_print(text, args.out)
    if args.out:
        result.to_csv(Path(args.out).with_suffix(".csv"))
    return 0


def _parse_grid(text: Optional[str]):
    if text is None:
        return None
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise PanelValidationError(f"--c2-grid expects min:max:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise PanelValidationError(f"bad c2 grid {text!r}")
    return np.round(np.arange(lo, hi + 1e-9, step), 10)


def _cmd_backtest(args) -> int:
    panel_full = ingest_csv(args.input)
    truncated = panel_full.truncated(args.cutoff)
    model = fit_panel(truncated, bandwidths=_parse_bandwidths(args.bandwidths), window=args.window)
    search = optimize_c2(
        model,
        panel_full,
        horizon=args.horizon,
        c2_grid=_parse_grid(args.c2_grid),
        cumulative=args.cumulative,
    )
    payload = {
        "c2_star": search.c2_star,
        "cutoff": args.cutoff,
        "horizon": args.horizon,
        "sse_curve": [{"c2": float(c), "sse": float(s)} for c, s in zip(search.grid, search.sse)],
    }
    _write_or_print(json.dumps(payload, indent=2), args.out)
    return 0


def _cmd_simulate(args) -> int:
    model = TrueModel.benchmark(
        T_sim=args.days,
        expected_admissions=args.size,
        hazard_scale=args.hazard_scale,
        outside_ratio=args.outside_ratio,
    )
    data = simulate_cohorts(model, args.seed)
    emit_csv(data.panel, args.out)
    if args.records:
        lines = ["admit_day,exit_day,cause"]
        for admit, exit_day, cause in data.records:
            lines.append(f"{admit},{'' if exit_day is None else exit_day},{cause or ''}")
        Path(args.records).write_text("\n".join(lines) + "\n", encoding="utf-8")
    sys.stdout.write(
        json.dumps({"panel": args.out, "admissions": int(data.arrivals.sum()), "exits": int(data.panel.exits.sum())})
        + "\n"
    )
    return 0


def _cmd_study(args) -> int:
    sizes = [float(s) for s in args.sizes.split(",") if s.strip()]
    model = TrueModel.benchmark(T_sim=args.days, hazard_scale=args.hazard_scale)
    report = run_study(model, sizes=sizes, replicates=args.replicates, seed=args.seed)
    Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    Path(args.out).with_suffix(".json").write_text(
        json.dumps(report.to_json_dict(), indent=2), encoding="utf-8"
    )
    sys.stdout.write(report.to_csv())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    app = create_app(static_dir=args.static)
    uvicorn.run(app, host=args.host, port=resolve_port(args.port))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "fit": _cmd_fit,
    "indicators": _cmd_indicators,
    "forecast": _cmd_forecast,
    "backtest": _cmd_backtest,
    "simulate": _cmd_simulate,
    "study": _cmd_study,
    "serve": _cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (PanelValidationError, ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
