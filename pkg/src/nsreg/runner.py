"""Experiment orchestration: config parsing, runs, sweeps and report files."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .diagnostics import (
    CSV_FIELDS,
    CriterionSpec,
    RunMonitor,
    diagnose,
    exponent_budget,
    identity_residual,
    parse_exponent,
)
from .inequalities import LemmaReport, default_beta_grid, lemma1_verify, random_mean_zero_field
from .snapshot import read_snapshot, write_snapshot
from .solver import SolverConfig, SolverState, initial_random_divfree, initial_taylor_green, step
from .spectral import Grid, VectorField

__all__ = [
    "ConfigError",
    "SimConfig",
    "RunResult",
    "load_config",
    "run_simulation",
    "check_criterion",
    "sweep_identity",
    "sweep_lemma",
    "identity_field",
]


class ConfigError(ValueError):
    pass


def _format(x: float) -> str:
    return format(x, ".17g")


def _json_float(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass
class SimConfig:
    n: int
    viscosity: float
    dt: float
    t_end: float
    initial_condition: dict
    criterion: dict = field(default_factory=lambda: {"p": "inf", "q": 6, "b": 6})
    floors: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    cfl_limit: float = 0.5
    gronwall: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def epsilon_rel(self) -> float:
        return float(self.floors.get("epsilon_rel", 1e-12))

    @property
    def mask_delta(self) -> float:
        return float(self.floors.get("mask_delta", 1e-2))

    def path(self, key: str) -> Path | None:
        value = self.outputs.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "SimConfig":
        known = {"n", "viscosity", "dt", "t_end", "initial_condition", "criterion",
                 "floors", "outputs", "cfl_limit", "gronwall"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"n", "viscosity", "dt", "t_end", "initial_condition"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            cfg = cls(base_dir=base_dir or Path.cwd(), **data)
            cfg.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def validate(self) -> None:
        Grid(int(self.n))
        SolverConfig(float(self.viscosity), float(self.dt), float(self.t_end), float(self.cfl_limit))
        steps = self.t_end / self.dt
        if self.t_end <= 0 or abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError("t_end must be a positive integer multiple of dt")
        kind = self.initial_condition.get("type")
        if kind not in ("taylor_green", "random", "snapshot"):
            raise ConfigError(f"unknown initial_condition type {kind!r}")
        if not 0 < self.mask_delta < 1 or not self.epsilon_rel > 0:
            raise ConfigError("floors need epsilon_rel > 0 and 0 < mask_delta < 1")
        every = self.outputs.get("snapshot_every", 0)
        if not isinstance(every, int) or every < 0:
            raise ConfigError("snapshot_every must be a non-negative integer")
        if every and "snapshot_dir" not in self.outputs:
            raise ConfigError("snapshot_every needs outputs.snapshot_dir")
        self.budget()

    def budget(self):
        crit = self.criterion
        monitor_only = bool(crit.get("monitor_only", False))
        spec = CriterionSpec(crit.get("p", "inf"), crit.get("q", 6))
        if not spec.admissible and not monitor_only:
            raise ConfigError(
                "criterion is inadmissible (" + "; ".join(spec.violations())
                + "); set criterion.monitor_only to track it anyway"
            )
        budget = exponent_budget(spec.p, spec.q, crit.get("b", 6), require_admissible=False)
        if not 0 < budget.theta <= 1:
            raise ConfigError(f"exponent budget has theta = {budget.theta}, outside (0, 1]")
        return budget


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return SimConfig.from_dict(data, base_dir=path.parent)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _initial_state(cfg: SimConfig) -> tuple[SolverState, dict | None]:
    ic = cfg.initial_condition
    grid = Grid(int(cfg.n))
    kind = ic["type"]
    if kind == "taylor_green":
        return SolverState(0.0, initial_taylor_green(grid)), None
    if kind == "random":
        try:
            u = initial_random_divfree(
                grid,
                int(ic.get("seed", 0)),
                int(ic.get("spectrum_peak", 2)),
                float(ic.get("amplitude", 1.0)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return SolverState(0.0, u), None
    path = Path(ic["path"])
    path = path if path.is_absolute() else cfg.base_dir / path
    u, t = read_snapshot(path)
    if u.grid.n != grid.n:
        raise ConfigError(f"snapshot grid n={u.grid.n} does not match config n={grid.n}")
    step_index = int(ic.get("step_index", 0))
    monitor_state = None
    side = _sidecar(path)
    if ic.get("resume", True) and side.exists():
        meta = json.loads(side.read_text())
        step_index = meta["step_index"]
        monitor_state = meta["monitor"]
    return SolverState(t, u, step_index), monitor_state


@dataclass
class RunResult:
    records: list
    summary: dict
    state: SolverState


def run_simulation(cfg: SimConfig) -> RunResult:
    """Step to ``t_end`` emitting one record per step.

    Writes the CSV (if ``outputs.csv_path``), snapshots every
    ``outputs.snapshot_every`` steps with a JSON sidecar holding the monitor
    state, and the JSON summary (if ``outputs.json_path``).  Rows already
    written are kept when the run fails part way.
    """
    budget = cfg.budget()
    solver_cfg = SolverConfig(float(cfg.viscosity), float(cfg.dt), float(cfg.t_end), float(cfg.cfl_limit))
    state, monitor_state = _initial_state(cfg)
    gron = cfg.gronwall
    monitor = RunMonitor(
        budget,
        float(cfg.viscosity),
        slack=float(gron.get("slack", 1e-8)),
        constant=gron.get("constant"),
    )
    floors = dict(epsilon_rel=cfg.epsilon_rel, mask_delta=cfg.mask_delta)
    if monitor_state is not None:
        monitor.restore(monitor_state)
    monitor.start(diagnose(state.velocity, state.time, budget, **floors))

    csv_path = cfg.path("csv_path")
    json_path = cfg.path("json_path")
    snap_dir = cfg.path("snapshot_dir")
    every = int(cfg.outputs.get("snapshot_every", 0))
    for p in (csv_path, json_path):
        if p is not None:
            p.parent.mkdir(parents=True, exist_ok=True)
    if snap_dir is not None:
        snap_dir.mkdir(parents=True, exist_ok=True)

    records = []
    fh = open(csv_path, "w", newline="") if csv_path else None
    try:
        writer = csv.writer(fh, lineterminator="\n") if fh else None
        if writer:
            writer.writerow(CSV_FIELDS)
        remaining = int(round((solver_cfg.t_end - state.time) / solver_cfg.dt))
        for _ in range(max(0, remaining)):
            state = step(state, solver_cfg)
            rec = monitor.update(diagnose(state.velocity, state.time, budget, **floors))
            records.append(rec)
            if writer:
                writer.writerow([_format(x) for x in rec.row()])
            if every and state.step_index % every == 0:
                snap = snap_dir / f"step_{state.step_index:06d}.nsrg"
                write_snapshot(snap, state.velocity, state.time)
                _sidecar(snap).write_text(
                    json.dumps({"step_index": state.step_index, "monitor": monitor.state()})
                )
    finally:
        if fh:
            fh.close()

    summary = {
        "steps": len(records),
        "final_step_index": state.step_index,
        "final_time": state.time,
        "criterion": {
            "p": budget.p,
            "q": budget.q,
            "admissible": CriterionSpec(budget.p, budget.q).admissible,
        },
        "budget": budget.as_dict(),
        **monitor.summary(),
    }
    if json_path:
        json_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return RunResult(records, summary, state)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return _json_float(obj)


def check_criterion(p, q) -> tuple[bool, list[tuple[str, bool, str]]]:
    spec = CriterionSpec(parse_exponent(p), parse_exponent(q))
    return spec.admissible, spec.constraints()


IDENTITY_FIELDS = ("taylor_green", "random", "constant")


def identity_field(name: str, grid: Grid, seed: int = 7, spectrum_peak: int | None = None) -> VectorField:
    """Named test velocity sampled on ``grid``."""
    import numpy as np

    if name == "taylor_green":
        return initial_taylor_green(grid)
    if name == "random":
        peak = spectrum_peak if spectrum_peak is not None else max(1, int(grid.cutoff) // 3)
        return initial_random_divfree(grid, seed, peak, 1.0)
    if name == "constant":
        values = np.zeros((3,) + grid.real_shape)
        values[0] = 1.0
        return VectorField(grid, values)
    raise ValueError(f"unknown field {name!r}; choose from {', '.join(IDENTITY_FIELDS)}")


def sweep_identity(
    resolutions: Sequence[int],
    field_name: str,
    seed: int = 7,
    mask_delta: float = 1e-2,
) -> dict:
    """Identity residual of one continuum field sampled at each resolution.

    The field is built on the finest grid and restricted to coarser grids by
    taking every s-th sample, so all resolutions see the same function.
    """
    resolutions = [int(n) for n in resolutions]
    if not resolutions or any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise ValueError("resolutions must be strictly ascending")
    finest = Grid(resolutions[-1])
    for n in resolutions:
        Grid(n)
    u_fine = identity_field(field_name, finest, seed=seed)
    rows = []
    for n in resolutions:
        s = finest.n // n
        u = VectorField(Grid(n), u_fine.values[:, ::s, ::s, ::s])
        rows.append({"n": n, "residual": identity_residual(u, mask_delta=mask_delta)})
    residuals = [r["residual"] for r in rows]
    monotone = all(b <= a for a, b in zip(residuals, residuals[1:]))
    return {"field": field_name, "mask_delta": mask_delta, "rows": rows, "monotone": monotone}


def random_ensemble(grid: Grid, size: int, seed: int = 0, spectrum_peak: int = 2):
    return [random_mean_zero_field(grid, seed + i, spectrum_peak) for i in range(size)]


def sweep_lemma(
    r_values: Sequence[float],
    n: int = 32,
    size: int = 50,
    seed: int = 0,
    spectrum_peak: int = 2,
    beta_grid=None,
    out_dir=None,
) -> list[LemmaReport]:
    """One LemmaReport per r over a seeded ensemble; optionally written as JSON."""
    for r in r_values:
        if not 2 <= r < 6:
            raise ValueError(f"r = {r} lies outside [2, 6)")
    if size <= 0:
        raise ValueError("ensemble is empty")
    grid = Grid(n)
    ensemble = random_ensemble(grid, size, seed, spectrum_peak)
    names = [f"seed-{seed + i}" for i in range(size)]
    betas = default_beta_grid() if beta_grid is None else beta_grid
    reports = [lemma1_verify(ensemble, r, betas, names) for r in r_values]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for rep in reports:
            data = rep.as_dict()
            data.pop("constants")
            data["ensemble"] = {"n": n, "size": size, "seed": seed, "spectrum_peak": spectrum_peak}
            data["domain"] = "periodic box [0, 2pi)^3"
            (out / f"lemma_r{rep.r:g}.json").write_text(json.dumps(data, indent=2) + "\n")
    return reports
