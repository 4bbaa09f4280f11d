"""Command-line front end for convergence studies and steady-state runs.

Examples::

    wgbiot --scenario manufactured --k 1 --levels 3,4,5 --r-policy FixedPlus2 --out runs/k1
    wgbiot --scenario heterogeneous --k0 1e-6 --k 2 --levels 4 --r-policy FixedPlus2 --out runs/s2
    wgbiot --config run.cfg --out runs/from-file

A config file holds ``key = value`` lines whose keys are the RunConfig field
names; ``#`` starts a comment.  Command-line flags override the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import compute_orders, errors_vs_exact, format_table, write_csv
from .exceptions import ConfigError, WGError
from .mesh import CutStyle, build_nonconvex_grid
from .sampling import sample_fields, uniform_grid
from .scenarios import SCENARIOS, heterogeneous_steady, manufactured_biot
from .stepper import INIT_MODES, Problem, SteadinessMonitor, initialize, run
from .weakops import RPolicy

log = logging.getLogger("wgbiot")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


@dataclass
class RunConfig:
    scenario: str = "manufactured"
    k: int = 1
    nu: float = 0.25
    k0: float = 1.0
    levels: list[int] = field(default_factory=lambda: [3, 4, 5])
    r_policy: str = "Theory"
    cut_style: str = "Chevron"
    dt: float | None = None
    steps: int | None = None
    final_time: float | None = None
    init: str = "equilibrium"
    grid: int = 101
    out: str = "wgbiot-out"
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
        if self.k not in (1, 2, 3):
            raise ConfigError(f"k must be 1, 2 or 3, got {self.k}")
        if not self.levels or any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError(f"levels must be a non-empty ascending list, got {self.levels}")
        if not all(1 <= lv <= 8 for lv in self.levels):
            raise ConfigError(f"levels must lie in 1..8, got {self.levels}")
        try:
            RPolicy(self.r_policy)
            CutStyle(self.cut_style)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.steps is not None and self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.steps is not None and self.final_time is not None:
            raise ConfigError("give either steps or final_time, not both")
        if self.final_time is not None and not self.final_time > 0:
            raise ConfigError(f"final_time must be positive, got {self.final_time}")
        if not 0.0 < self.nu < 0.5:
            raise ConfigError(f"nu must lie in (0, 1/2), got {self.nu}")
        if not self.k0 > 0:
            raise ConfigError(f"k0 must be positive, got {self.k0}")
        if self.grid < 2:
            raise ConfigError(f"grid must be at least 2, got {self.grid}")
        return self

    def time_protocol(self) -> tuple[float, int]:
        """Step size and step count; defaults depend on the scenario."""
        if self.scenario == "manufactured":
            dt = 1e-5 if self.dt is None else self.dt
            default_steps = 5
        else:
            dt = 0.05 if self.dt is None else self.dt
            default_steps = None
        if self.steps is not None:
            return dt, self.steps
        if self.final_time is not None:
            return dt, max(1, int(round(self.final_time / dt)))
        if default_steps is not None:
            return dt, default_steps
        return dt, max(1, int(round(1.0 / dt)))


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float | None":
            return None if raw.lower() == "none" else float(raw)
        if kind == "int | None":
            return None if raw.lower() == "none" else int(raw)
        if kind == "list[int]":
            return [int(tok) for tok in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file into RunConfig keyword arguments."""
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wgbiot", description="Weak Galerkin Biot solver: convergence and steady-state runs")
    ap.add_argument("--config", help="key = value file with RunConfig fields")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--scenario", choices=sorted(SCENARIOS))
    ap.add_argument("--k", type=int, help="polynomial degree (1..3)")
    ap.add_argument("--nu", type=float, help="Poisson ratio for the manufactured scenario")
    ap.add_argument("--levels", help="comma-separated grid levels, e.g. 3,4,5")
    ap.add_argument("--r-policy", choices=[p.value for p in RPolicy])
    ap.add_argument("--cut-style", choices=[c.value for c in CutStyle])
    ap.add_argument("--dt", type=float)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--final-time", type=float)
    ap.add_argument("--init", choices=INIT_MODES, help="initial-state construction")
    ap.add_argument("--k0", type=float, help="band conductivity for the heterogeneous scenario")
    ap.add_argument("--seed", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = read_config(args.config) if args.config else {}
    for name in ("out", "scenario", "k", "nu", "r_policy", "cut_style", "dt", "steps", "final_time", "init", "k0", "seed"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.levels is not None:
        values["levels"] = _convert("levels", args.levels)
    if "levels" not in values and values.get("scenario") == "heterogeneous":
        values["levels"] = [4]
    return RunConfig(**values).validate()


def run_convergence(cfg: RunConfig) -> list:
    """March the manufactured problem on every level and write CSV plus table."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario = manufactured_biot(cfg.nu)
    dt, steps = cfg.time_protocol()
    records = []
    for level in cfg.levels:
        try:
            problem = Problem.setup(scenario, build_nonconvex_grid(level, cfg.cut_style), cfg.k, cfg.r_policy)
            state = run(initialize(problem, mode=cfg.init), dt, steps, problem)
            records.append(errors_vs_exact(state, problem))
        except WGError as exc:
            raise type(exc)(f"level {level}: {exc}") from exc
        finally:
            if records:
                write_csv(compute_orders(records), out / "convergence.csv")
        log.info("level %d done", level)
    records = compute_orders(records)
    title = f"k={cfg.k} nu={cfg.nu:g} r-policy={cfg.r_policy} dt={dt:g} steps={steps}"
    table = format_table(records, title)
    (out / "table.txt").write_text(table + "\n")
    print(table)
    return records


def run_steady(cfg: RunConfig) -> tuple[np.ndarray, float]:
    """March the heterogeneous problem on the last configured level and dump sampled fields."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    level = cfg.levels[-1]
    dt, steps = cfg.time_protocol()
    problem = Problem.setup(heterogeneous_steady(cfg.k0), build_nonconvex_grid(level, cfg.cut_style), cfg.k, cfg.r_policy)
    monitor = SteadinessMonitor(problem)
    state = run(initialize(problem, mode="projection"), dt, steps, problem, [monitor])
    data = sample_fields(problem.disc, state.u, state.p, uniform_grid(cfg.grid))
    np.savetxt(out / "fields.txt", data, fmt="%.6f %.6f %.12e %.12e %.12e")
    summary = (
        f"K0 = {cfg.k0:g}\nlevel = {level}\nk = {cfg.k}\nr_policy = {cfg.r_policy}\n"
        f"t = {state.t:.12g}\nsteps = {steps}\nsteadiness = {monitor.measure:.6e}\n"
    )
    (out / "steady.txt").write_text(summary)
    print(summary, end="")
    return data, monitor.measure


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if cfg.scenario == "manufactured":
            run_convergence(cfg)
        else:
            run_steady(cfg)
    except WGError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
