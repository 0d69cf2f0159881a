"""Scenario configuration files (INI syntax, read with :mod:`configparser`).

Example::

    [problem]
    n = 1
    N = 32
    metric = perturbed          ; flat | perturbed | file
    modes =
        0.02  1 0  0.0          ; amplitude, 2n integer frequencies, optional phase
        0.01  1 1  0.3
    # file = omega.bin          ; Hermitian field written by torus_ma.fieldio

    [schedule]
    t1 = auto                   ; or a number > t_min
    t_min = 0.05
    ratio = 0.7
    margin = 1.1
    min_step_ratio = 1e-3

    [solver]
    tol = 1e-10

    [estimates]
    checks = all
    rel_tol = 1e-8
    abs_tol = 1e-10
    beta_grid = 0.05, 0.1, 0.2, 0.5, 1, 2, 5

    [output]
    dir = out
    fields = false

    [run]
    t = 1.0                     ; used by the solve subcommand
    seed = 0
    synthetic_seeds = 20

Only ``[problem] n``, ``[problem] N`` and ``[schedule] t_min`` are required.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidMetric, ParseError
from .estimates import CHECKS, SuiteConfig, Tolerance
from .grid import TorusGrid, min_eigenvalue
from .solver import ProblemData, SolverConfig
from .testbeds import CosineMode, CosinePotential

SECTIONS = ("problem", "schedule", "solver", "estimates", "output", "run")
_KEY = re.compile(r"^\s*([^=:\s\[;#][^=:]*?)\s*[=:]")
_SECTION = re.compile(r"^\s*\[([^\]]+)\]")


@dataclass
class ScenarioConfig:
    n: int
    N: int
    t_min: float
    metric: str = "flat"
    modes: list = field(default_factory=list)
    file: str | None = None
    scale: float = 1.0
    t1: float | str = "auto"
    ratio: float = 0.7
    margin: float = 1.1
    min_step_ratio: float = 1e-3
    solver: SolverConfig = field(default_factory=SolverConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    out_dir: str = "out"
    fields: bool = False
    t_solve: float = 1.0
    seed: int = 0
    synthetic_seeds: int = 20
    source: str | None = None
    min_eig: float | None = None

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.n, self.N)

    def metric_field(self) -> np.ndarray:
        grid = self.grid
        if self.metric == "flat":
            return grid.identity(self.scale)
        if self.metric == "perturbed":
            return CosinePotential(self.modes, self.n).grid_metric(grid, self.scale)
        from . import fieldio

        path = Path(self.file)
        if not path.is_absolute() and self.source is not None:
            path = Path(self.source).parent / path
        fgrid, g = fieldio.load(path)
        if fgrid != grid or g.shape != grid.shape + (self.n, self.n):
            raise ParseError(f"metric file {path} holds a field on n={fgrid.n}, N={fgrid.N}, "
                             f"expected a Hermitian field on n={self.n}, N={self.N}", field="file")
        return g

    def problem(self) -> ProblemData:
        return ProblemData.from_metric(self.grid, self.metric_field())

    def to_dict(self) -> dict:
        return {
            "problem": {"n": self.n, "N": self.N, "metric": self.metric, "scale": self.scale,
                        "modes": [{"amplitude": m.amplitude, "freq": list(m.freq), "phase": m.phase}
                                  for m in self.modes],
                        "file": self.file, "min_eig": self.min_eig},
            "schedule": {"t1": self.t1, "t_min": self.t_min, "ratio": self.ratio,
                         "margin": self.margin, "min_step_ratio": self.min_step_ratio},
            "solver": self.solver.to_dict(),
            "estimates": {"checks": list(self.suite.checks), "rel_tol": self.suite.tol.rel,
                          "abs_tol": self.suite.tol.abs, "beta_grid": list(self.suite.beta_grid),
                          "bound_factor": self.suite.bound_factor,
                          "kappa_samples": self.suite.kappa_samples},
            "output": {"dir": self.out_dir, "fields": self.fields},
            "run": {"t": self.t_solve, "seed": self.seed, "synthetic_seeds": self.synthetic_seeds},
            "source": self.source,
        }


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    out = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), lineno)
            continue
        if section is None or line[:1].isspace():
            continue
        m = _KEY.match(line)
        if m:
            out.setdefault((section, m.group(1).strip()), lineno)
    return out


class _Reader:
    def __init__(self, cp, lines):
        self.cp = cp
        self.lines = lines

    def line(self, section, key=None):
        return self.lines.get((section, key), self.lines.get((section, None)))

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def raw(self, section, key, required=False):
        if not self.cp.has_option(section, key):
            if required:
                raise ParseError(f"missing required field '{key}' in [{section}]",
                                 line=self.line(section), field=key)
            return None
        return self.cp.get(section, key)

    def convert(self, section, key, conv, default=None, required=False):
        s = self.raw(section, key, required)
        if s is None:
            return default
        try:
            return conv(s.strip())
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad value for '{key}' in [{section}]: {exc}",
                             line=self.line(section, key), field=key) from None


def _bool(s):
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in re.split(r"[,\s]+", s.strip()) if x)


def _parse_modes(text, n, first_line):
    modes = []
    for k, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        tok = line.split()
        lineno = None if first_line is None else first_line + k
        if len(tok) not in (1 + 2 * n, 2 + 2 * n):
            raise ParseError(f"mode '{line}' needs an amplitude, {2 * n} frequencies and an optional phase",
                             line=lineno, field="modes")
        try:
            amp = float(tok[0])
            freq = tuple(int(x) for x in tok[1:1 + 2 * n])
            phase = float(tok[1 + 2 * n]) if len(tok) == 2 + 2 * n else 0.0
        except ValueError as exc:
            raise ParseError(f"bad mode '{line}': {exc}", line=lineno, field="modes") from None
        modes.append(CosineMode(amp, freq, phase))
    return modes


def parse_config(text: str, source: str | None = None, validate: bool = True) -> ScenarioConfig:
    """Parse and validate configuration text.

    Raises :class:`ParseError` (with a line number when one applies) and
    :class:`InvalidMetric` when the declared metric is not positive on the grid.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive: 'n' and 'N' differ
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError(f"syntax error: {exc.errors[0][1] if exc.errors else exc}", line=lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before the first [section]", line=exc.lineno) from None
    for s in cp.sections():
        if s not in SECTIONS:
            raise ParseError(f"unknown section [{s}]", line=_key_lines(text).get((s, None)))
    for s in SECTIONS:
        if not cp.has_section(s):
            cp.add_section(s)
    r = _Reader(cp, _key_lines(text))

    n = r.convert("problem", "n", int, required=True)
    N = r.convert("problem", "N", int, required=True)
    try:
        TorusGrid(n, N)
    except ValueError as exc:
        raise ParseError(str(exc), line=r.line("problem", "n"), field="N") from None

    cfg = ScenarioConfig(n=n, N=N, t_min=r.convert("schedule", "t_min", float, required=True),
                         source=source)
    cfg.metric = r.convert("problem", "metric", str.lower, "flat")
    if cfg.metric not in ("flat", "perturbed", "file"):
        raise ParseError(f"metric must be flat, perturbed or file, got '{cfg.metric}'",
                         line=r.line("problem", "metric"), field="metric")
    cfg.scale = r.convert("problem", "scale", float, 1.0)
    if cfg.metric == "perturbed":
        cfg.modes = _parse_modes(r.raw("problem", "modes", required=True), n, r.line("problem", "modes"))
    if cfg.metric == "file":
        cfg.file = r.raw("problem", "file", required=True).strip()

    t1 = r.raw("schedule", "t1")
    if t1 is None or t1.strip().lower() == "auto":
        cfg.t1 = "auto"
    else:
        cfg.t1 = r.convert("schedule", "t1", float)
    cfg.ratio = r.convert("schedule", "ratio", float, 0.7)
    cfg.margin = r.convert("schedule", "margin", float, 1.1)
    cfg.min_step_ratio = r.convert("schedule", "min_step_ratio", float, 1e-3)
    if not cfg.t_min > 0:
        raise ParseError("t_min must be positive", line=r.line("schedule", "t_min"), field="t_min")
    for key in ("ratio", "min_step_ratio"):
        if not 0 < getattr(cfg, key) < 1:
            raise ParseError(f"{key} must lie in (0, 1)", line=r.line("schedule", key), field=key)
    if not cfg.margin > 1:
        raise ParseError("margin must exceed 1", line=r.line("schedule", "margin"), field="margin")
    if cfg.t1 != "auto" and not cfg.t1 > cfg.t_min:
        raise ParseError("t1 must exceed t_min", line=r.line("schedule", "t1"), field="t1")

    sc = SolverConfig()
    for key, conv in (("tol", float), ("max_newton", int), ("max_backtracks", int),
                      ("linear_tol", float), ("pos_floor", float), ("max_linear", int),
                      ("damp_start", _bool)):
        setattr(sc, key, r.convert("solver", key, conv, getattr(sc, key)))
    cfg.solver = sc

    suite = SuiteConfig()
    checks = r.raw("estimates", "checks")
    if checks is not None and checks.strip().lower() != "all":
        names = tuple(c.strip() for c in checks.split(",") if c.strip())
        bad = [c for c in names if c not in CHECKS]
        if bad:
            raise ParseError(f"unknown checks {bad}", line=r.line("estimates", "checks"), field="checks")
        suite.checks = names
    suite.tol = Tolerance(r.convert("estimates", "rel_tol", float, suite.tol.rel),
                          r.convert("estimates", "abs_tol", float, suite.tol.abs))
    suite.beta_grid = r.convert("estimates", "beta_grid", _floats, suite.beta_grid)
    if not suite.beta_grid or min(suite.beta_grid) <= 0:
        raise ParseError("beta_grid needs positive values", line=r.line("estimates", "beta_grid"),
                         field="beta_grid")
    suite.bound_factor = r.convert("estimates", "bound_factor", float, suite.bound_factor)
    suite.kappa_samples = r.convert("estimates", "kappa_samples", int, suite.kappa_samples)
    cfg.suite = suite

    cfg.out_dir = r.convert("output", "dir", str, cfg.out_dir)
    cfg.fields = r.convert("output", "fields", _bool, False)
    cfg.t_solve = r.convert("run", "t", float, 1.0)
    cfg.seed = r.convert("run", "seed", int, 0)
    cfg.synthetic_seeds = r.convert("run", "synthetic_seeds", int, 20)

    if validate:
        cfg.min_eig = min_eigenvalue(cfg.metric_field())
        if not cfg.min_eig > 0:
            raise InvalidMetric(cfg.min_eig)
    return cfg


def load_config(path, validate: bool = True) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=str(path), validate=validate)
