"""Scenario runner: ``python3 -m torus_ma <command> --config FILE``.

Commands: ``solve``, ``path``, ``estimates``, ``curvature``, ``selftest``.
Every run writes ``report.json`` (also on failure), ``path.csv`` and
``estimates.csv`` into the output directory.  The exit status is 0 iff every
non-skipped check passed and, for path runs, ``t_min`` was reached.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np
import scipy

from . import __version__, fieldio
from .config import ScenarioConfig, load_config
from .errors import TorusMAError
from .estimates import EstimateReport, _jsonable, family_suite, state_checks, synthetic_suite
from .grid import set_threads
from .path import (PATH_COLUMNS, PathEntry, PathSchedule, PathTrace, choose_t1, extrapolate_volume,
                   proxy_growth, run_path, w_cauchy)
from .solver import FLOOR_FACTOR, solve_at_t

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "path", "estimates", "curvature", "selftest")


def versions() -> dict:
    return {"torus_ma": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


class _Run:
    """Mutable report under construction; written out whatever happens."""

    def __init__(self, command, cfg, out, threads, seed, strict):
        self.out = Path(out)
        self.report = {
            "command": command,
            "config": cfg.to_dict() if cfg is not None else None,
            "versions": versions(),
            "threads": threads,
            "seed": seed,
            "strict": strict,
            "timings": {},
            "failures": [],
        }
        self._t0 = time.perf_counter()

    def time(self, key, start):
        self.report["timings"][key] = time.perf_counter() - start

    def fail(self, kind, **info):
        self.report["failures"].append({"kind": kind, **info})

    def write_csv(self, name, text):
        (self.out / name).write_text(text)

    def finish(self, exit_code):
        self.report["timings"]["total"] = time.perf_counter() - self._t0
        self.report["exit_code"] = exit_code
        (self.out / "report.json").write_text(json.dumps(_jsonable(self.report), indent=2))
        return exit_code


def _entry_json(entry: PathEntry) -> dict:
    d = entry.to_dict()
    if isinstance(entry.report, dict):
        d.update(entry.report)
    return d


def _state_extras(state) -> dict:
    return {
        "newton_trace": state.trace,
        "linear_iters": state.linear_iters,
        "quadratic_constant_raw": state.quadratic_constant(floor=0.0),
    }


def _quadratic_block(entries) -> list:
    return [{"t": e.t, "C_q": e.quadratic_constant,
             "C_q_raw": (e.report or {}).get("quadratic_constant_raw"),
             "residual_floor": e.residual_floor, "floor_factor": FLOOR_FACTOR}
            for e in entries]


def _record_checks(run: _Run, est: EstimateReport, strict: bool):
    run.report["estimates"] = est.to_dict()
    for r in est.failures(strict):
        run.fail("check", name=r.name, t=r.t, status=r.status, worst_margin=r.worst_margin,
                 tolerance=r.tolerance, location=r.location)


def _dump_fields(run: _Run, cfg: ScenarioConfig, named: dict):
    if not cfg.fields:
        return
    d = run.out / "fields"
    d.mkdir(exist_ok=True)
    for name, f in named.items():
        fieldio.save(d / f"{name}.bin", cfg.grid, f)


def _t1(cfg: ScenarioConfig, p) -> float:
    return choose_t1(p, cfg.margin) if cfg.t1 == "auto" else float(cfg.t1)


def _cmd_solve(run, cfg, strict):
    p = cfg.problem()
    t0 = time.perf_counter()
    ks = p.kappa(cfg.suite.kappa_samples)
    run.time("curvature", t0)
    run.report["kappa"] = ks.to_dict()
    trace = PathTrace()
    t0 = time.perf_counter()
    try:
        state = solve_at_t(p, cfg.t_solve, None, cfg.solver)
    except TorusMAError as exc:
        run.time("solve", t0)
        run.fail("solver", t=cfg.t_solve, error=type(exc).__name__, message=str(exc))
        trace.failures.append({"t": cfg.t_solve, "error": type(exc).__name__, "message": str(exc)})
        trace.events.append(("fail", trace.failures[-1]))
        run.write_csv("path.csv", trace.to_csv())
        run.write_csv("estimates.csv", EstimateReport().to_csv())
        return 1
    run.time("solve", t0)
    entry = PathEntry.from_state(state)
    entry.report = _state_extras(state)
    trace.entries.append(entry)
    trace.events.append(("ok", entry))
    run.report["state"] = _entry_json(entry)
    run.report["quadratic_constants"] = _quadratic_block([entry])
    t0 = time.perf_counter()
    est = EstimateReport(state_checks(state, cfg.t_solve, cfg.suite, ks))
    run.time("estimates", t0)
    _record_checks(run, est, strict)
    run.write_csv("path.csv", trace.to_csv())
    run.write_csv("estimates.csv", est.to_csv())
    _dump_fields(run, cfg, {"u": state.u, "omega_t": state.omega_t})
    return 0 if not run.report["failures"] else 1


def _cmd_path(run, cfg, strict):
    p = cfg.problem()
    t0 = time.perf_counter()
    ks = p.kappa(cfg.suite.kappa_samples)
    run.time("curvature", t0)
    run.report["kappa"] = ks.to_dict()
    t1 = _t1(cfg, p)
    run.report["t1"] = t1
    sched = PathSchedule(t1, cfg.t_min, cfg.ratio, cfg.min_step_ratio)
    members, records = [], []
    last = {}

    def on_state(state):
        members.append((state.t, state.u))
        records.extend(state_checks(state, cfg.t_min, cfg.suite, ks))
        last["u"], last["omega_t"] = state.u, state.omega_t
        return _state_extras(state)

    t0 = time.perf_counter()
    trace = run_path(p, sched, cfg.solver, callback=on_state)
    run.time("path", t0)
    run.report["path"] = {"status": trace.status, "last_good_t": trace.last_good_t,
                          "t_min_reached": trace.status == "complete",
                          "entries": [_entry_json(e) for e in trace.entries],
                          "failures": trace.failures}
    run.report["quadratic_constants"] = _quadratic_block(trace.entries)
    for f in trace.failures:
        run.fail("solver", t=f["t"], error=f["error"], message=f["message"])
    if trace.status != "complete":
        run.fail("path", status=trace.status, last_good_t=trace.last_good_t, t_min=cfg.t_min)
    try:
        fit = extrapolate_volume(trace, cfg.n)
        run.report["fit"] = fit.to_dict()
    except TorusMAError as exc:
        run.report["fit"] = {"error": type(exc).__name__, "message": str(exc)}
    try:
        run.report["proxy_growth"] = proxy_growth(trace)
    except TorusMAError as exc:
        run.report["proxy_growth"] = {"error": type(exc).__name__, "message": str(exc)}
    run.report["w_cauchy"] = w_cauchy(members) if members else None
    t0 = time.perf_counter()
    est = family_suite(p, t1, members, cfg.suite, ks, records)
    run.time("estimates", t0)
    _record_checks(run, est, strict)
    run.write_csv("path.csv", trace.to_csv())
    run.write_csv("estimates.csv", est.to_csv())
    if last:
        _dump_fields(run, cfg, last)
    # solver failures that the step control recovered from do not fail the run
    hard = [f for f in run.report["failures"] if f["kind"] != "solver"]
    return 0 if not hard else 1


def _cmd_estimates(run, cfg, strict):
    seeds = range(cfg.seed, cfg.seed + cfg.synthetic_seeds)
    t0 = time.perf_counter()
    est = synthetic_suite(cfg.grid, cfg.metric_field(), seeds, cfg.suite)
    run.time("estimates", t0)
    run.report["seeds"] = list(seeds)
    _record_checks(run, est, strict)
    run.write_csv("path.csv", ",".join(PATH_COLUMNS) + "\n")
    run.write_csv("estimates.csv", est.to_csv())
    return 0 if not run.report["failures"] else 1


def _cmd_curvature(run, cfg, strict):
    p = cfg.problem()
    t0 = time.perf_counter()
    ks = p.kappa(cfg.suite.kappa_samples)
    run.time("curvature", t0)
    run.report["kappa"] = ks.to_dict()
    (run.out / "curvature.json").write_text(ks.to_json())
    run.write_csv("path.csv", ",".join(PATH_COLUMNS) + "\n")
    run.write_csv("estimates.csv", EstimateReport().to_csv())
    _dump_fields(run, cfg, {"sup_H": ks.sup_H_field, "kappa_field": ks.kappa_field})
    return 0


def _cmd_selftest(run, cfg, strict):
    from .acceptance import run_all

    results = run_all(echo=True)
    run.report["acceptance"] = [r.to_dict() for r in results]
    for r in results:
        if not r.passed:
            run.fail("acceptance", criterion=r.number, name=r.name, detail=r.detail)
    return 0 if all(r.passed for r in results) else 1


_RUNNERS = {"solve": _cmd_solve, "path": _cmd_path, "estimates": _cmd_estimates,
            "curvature": _cmd_curvature, "selftest": _cmd_selftest}


def run_scenario(command: str, cfg: ScenarioConfig | None, out=None, threads: int = 1,
                 seed: int | None = None, strict: bool = False) -> int:
    """Run one command and write its artifacts; returns the exit status."""
    if command not in _RUNNERS:
        raise ValueError(f"unknown command {command!r}")
    if cfg is None and command != "selftest":
        raise ValueError(f"{command} needs a configuration")
    if cfg is not None and seed is not None:
        cfg.seed = seed
    out = Path(out if out is not None else (cfg.out_dir if cfg is not None else "out"))
    out.mkdir(parents=True, exist_ok=True)
    set_threads(threads)
    run = _Run(command, cfg, out, threads, seed, strict)
    try:
        code = _RUNNERS[command](run, cfg, strict)
    except TorusMAError as exc:
        run.fail("error", error=type(exc).__name__, message=str(exc),
                 traceback=traceback.format_exc())
        code = 1
    return run.finish(code)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torus_ma", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="scenario file (INI); required except for selftest")
    ap.add_argument("--out", help="output directory (default: [output] dir of the config)")
    ap.add_argument("--threads", type=int, default=1, help="FFT worker threads; 1 is bit-reproducible")
    ap.add_argument("--seed", type=int, help="seed for randomized suites (overrides [run] seed)")
    ap.add_argument("--strict", action="store_true",
                    help="count skips whose hypothesis held (vanishing denominators) as failures")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    if args.config is not None:
        try:
            cfg = load_config(args.config)
        except (TorusMAError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            out = Path(args.out or "out")
            out.mkdir(parents=True, exist_ok=True)
            run = _Run(args.command, None, out, args.threads, args.seed, args.strict)
            run.fail("config", error=type(exc).__name__, message=str(exc),
                     line=getattr(exc, "line", None), field=getattr(exc, "field", None),
                     min_eig=getattr(exc, "min_eig", None))
            return run.finish(2)
    elif args.command != "selftest":
        print("error: --config is required for this command", file=sys.stderr)
        return 2
    return run_scenario(args.command, cfg, args.out, args.threads, args.seed, args.strict)


if __name__ == "__main__":
    sys.exit(main())
