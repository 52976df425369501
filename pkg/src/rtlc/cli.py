"""Command-line harness: single runs, four-way comparisons and rTLC sweeps.

Outputs per run ``<label>.csv`` (control-instant log), ``<label>_dense.csv``
(substep audit) and one ``summary.json`` per invocation. Wall-clock timings
go to the printed table always, and into the files only with ``--timing``,
so that repeated invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .acc import METHODS, AccParams, AccState
from .constraints import EventRegion
from .sim import SimConfig, run_simulation

# rTLC (delta_t, dt) pairs swept by default
DEFAULT_SWEEP = ((0.85, 0.1), (0.5, 0.5), (0.1, 0.1))

TRAJ_HEADER = ["t", "v", "z", "u", "delta", "h", "row_lhs", "qp_status", "solve_time_s"]
DENSE_HEADER = ["t_sub", "h_sub"]
SUMMARY_KEYS = ["method", "delta_t", "dt", "min_h", "mean_solve_time_s", "std_solve_time_s",
                "infeasible_steps", "triggers"]

_PARAM_KEYS = {f.name for f in dataclasses.fields(AccParams)} - {"region"}
_CONFIG_KEYS = _PARAM_KEYS | {"x_lower", "x_up", "method", "horizon", "substeps", "seed", "x0",
                              "mode", "sweep_deltas", "out", "timing"}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunSpec:
    mode: str
    config: SimConfig
    sweep_deltas: tuple = DEFAULT_SWEEP
    output_dir: Path = Path("rtlc_out")
    timing: bool = False

    def __post_init__(self):
        if self.mode not in ("run", "compare", "sweep"):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.mode == "sweep":
            if not self.sweep_deltas:
                raise UsageError("sweep mode needs at least one (delta_t, dt) pair")
            for big, small in self.sweep_deltas:
                if small > big:
                    raise UsageError(f"sweep pair ({big}, {small}) violates dt <= delta_t")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rtlc", description="ACC safety-filter simulations (HOCBF, TLC, event-driven TLC, rTLC).")
    p.add_argument("--mode", choices=("run", "compare", "sweep"))
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--delta-t", type=float, dest="delta_t", help="constraint horizon (s)")
    p.add_argument("--dt", type=float, help="control application interval (s)")
    p.add_argument("--horizon", type=float, help="simulated time (s)")
    p.add_argument("--substeps", type=int, help="RK4 substeps per dt")
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--p-sl", type=float, dest="p_sl", help="slack weight")
    p.add_argument("--sweep", help="sweep pairs as 'delta_t:dt,delta_t:dt,...'")
    p.add_argument("--config", help="JSON file with parameter overrides")
    p.add_argument("--out", help="output directory")
    p.add_argument("--timing", action="store_true", default=None,
                   help="write wall-clock solve times into the CSV/JSON outputs")
    return p


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _parse_pairs(text: str) -> tuple:
    try:
        pairs = tuple(tuple(float(x) for x in item.split(":")) for item in text.split(",") if item.strip())
    except ValueError as exc:
        raise UsageError(f"malformed --sweep value {text!r}") from exc
    if any(len(pair) != 2 for pair in pairs):
        raise UsageError(f"malformed --sweep value {text!r}")
    return pairs


def parse_run_spec(argv: Sequence[str], config_file: Optional[str] = None) -> RunSpec:
    """Merge defaults, the JSON config (``--config`` or ``config_file``) and flags.

    Raises
    ------
    UsageError
        Unknown flags or config keys, malformed values, or ``dt > delta_t``.
    """
    args = build_parser().parse_args(list(argv))
    path = args.config or config_file
    merged = _load_config(path) if path else {}
    for key in ("mode", "method", "delta_t", "dt", "horizon", "substeps", "p1", "p2", "p_sl", "out", "timing"):
        val = getattr(args, key)
        if val is not None:
            merged[key] = val
    if args.sweep is not None:
        merged["sweep_deltas"] = _parse_pairs(args.sweep)

    try:
        kwargs = {k: merged[k] for k in _PARAM_KEYS if k in merged}
        if "x_lower" in merged or "x_up" in merged:
            kwargs["region"] = EventRegion(merged.get("x_lower", (0.5, 1.0)), merged.get("x_up", (0.5, 1.0)))
        delta_t = kwargs.get("delta_t", AccParams.delta_t)
        dt = kwargs.get("dt", AccParams.dt)
        if dt > delta_t:
            raise UsageError(f"dt = {dt} must not exceed delta_t = {delta_t}")
        params = AccParams(**kwargs)
        x0 = merged.get("x0", (24.0, 90.0))
        if isinstance(x0, dict):
            x0 = (x0["v"], x0["z"])
        config = SimConfig(
            method=merged.get("method", "rtlc"),
            params=params,
            x0=AccState(*x0),
            horizon=float(merged.get("horizon", 30.0)),
            substeps=int(merged.get("substeps", 10)),
            seed=int(merged.get("seed", 0)),
        )
        pairs = merged.get("sweep_deltas", DEFAULT_SWEEP)
        return RunSpec(
            mode=merged.get("mode", "run"),
            config=config,
            sweep_deltas=tuple((float(a), float(b)) for a, b in pairs),
            output_dir=Path(merged.get("out", "rtlc_out")),
            timing=bool(merged.get("timing", False)),
        )
    except UsageError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    return "" if np.isnan(x) else repr(x)


def trajectory_csv(traj, timing: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJ_HEADER)
    for i in range(len(traj.t)):
        w.writerow([
            _fmt(traj.t[i]), _fmt(traj.v[i]), _fmt(traj.z[i]), _fmt(traj.u[i]), _fmt(traj.delta[i]),
            _fmt(traj.h[i]), _fmt(traj.row_lhs[i]), traj.qp_status[i],
            _fmt(traj.solve_time[i]) if timing else "",
        ])
    return buf.getvalue()


def dense_csv(traj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DENSE_HEADER)
    for t, h in zip(traj.t_sub, traj.h_sub):
        w.writerow([_fmt(t), _fmt(h)])
    return buf.getvalue()


def summary_record(summary, timing: bool) -> dict:
    return {
        "method": summary.method,
        "delta_t": summary.delta_t,
        "dt": summary.dt,
        "min_h": summary.min_h,
        "mean_solve_time_s": summary.mean_solve_time if timing else None,
        "std_solve_time_s": summary.std_solve_time if timing else None,
        "infeasible_steps": summary.infeasible_steps,
        "triggers": summary.triggers,
    }


@dataclass
class Report:
    rows: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def _execute(jobs, spec: RunSpec) -> Report:
    """Run ``(label, SimConfig)`` jobs; failures are recorded and the rest continue."""
    out = spec.output_dir
    out.mkdir(parents=True, exist_ok=True)
    report = Report()
    for label, config in jobs:
        try:
            traj, summary = run_simulation(config)
        except (ArithmeticError, ValueError) as exc:
            report.errors[label] = str(exc)
            rec = {k: None for k in SUMMARY_KEYS}
            rec.update(method=config.method, delta_t=config.params.delta_t, dt=config.params.dt,
                       error=str(exc))
            report.rows.append((label, rec))
            continue
        (out / f"{label}.csv").write_text(trajectory_csv(traj, spec.timing))
        (out / f"{label}_dense.csv").write_text(dense_csv(traj))
        report.summaries[label] = summary
        report.rows.append((label, summary_record(summary, spec.timing)))
    payload = [rec for _, rec in report.rows]
    (out / "summary.json").write_text(json.dumps(payload, indent=2) + "\n")
    return report


def run_single(spec: RunSpec) -> Report:
    return _execute([(spec.config.method, spec.config)], spec)


def run_compare(spec: RunSpec) -> Report:
    """All four methods on the shared configuration."""
    jobs = [(m, dataclasses.replace(spec.config, method=m)) for m in METHODS]
    return _execute(jobs, spec)


def run_sweep(spec: RunSpec) -> Report:
    """rTLC over the ``(delta_t, dt)`` pairs."""
    jobs = []
    for big, small in spec.sweep_deltas:
        params = dataclasses.replace(spec.config.params, delta_t=big, dt=small)
        config = dataclasses.replace(spec.config, method="rtlc", params=params)
        jobs.append((f"rtlc_dt{big:g}_{small:g}", config))
    return _execute(jobs, spec)


_NAMES = {"hocbf": "Time-driven HOCBF", "tlc": "Time-driven TLC", "etlc": "Event-driven TLC", "rtlc": "rTLC"}


def format_table(report: Report) -> str:
    lines = [f"{'Method':<32s} {'min h(x)':>12s}   {'Compute time (s)':<24s} {'infeasible':>10s}",
             "-" * 84]
    for label, rec in report.rows:
        name = _NAMES.get(rec["method"], rec["method"])
        if rec["method"] == "rtlc":
            name = f"{name} Δt = {rec['delta_t']:g}, dt = {rec['dt']:g}"
        summary = report.summaries.get(label)
        if summary is None:
            lines.append(f"{name:<32s} {'error':>12s}   {report.errors[label]}")
            continue
        timing = f"{summary.mean_solve_time:.4f}±{summary.std_solve_time:.4e}"
        lines.append(f"{name:<32s} {summary.min_h:>12.4e}   {timing:<24s} {summary.infeasible_steps:>10d}")
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        spec = parse_run_spec(argv)
    except UsageError as exc:
        print(f"rtlc: usage error: {exc}", file=sys.stderr)
        return 2
    runner = {"run": run_single, "compare": run_compare, "sweep": run_sweep}[spec.mode]
    report = runner(spec)
    print(format_table(report))
    print(f"\noutputs written to {spec.output_dir}")
    return 0 if report.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
