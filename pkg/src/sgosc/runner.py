"""Run scenarios to disk: CSV trajectories, SVG figure, JSON report."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .config import scenario_to_tree
from .controllers import Controller, Law
from .errors import SgoscError
from .figure import FigureStyle, emit_figure
from .integrator import Scenario, Trajectory, simulate
from .lindblad import max_discrepancy, simulate_lindblad

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ("t", "E", "Q", "P", "u", "n", "W", "V1", "speed")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(traj: Trajectory, path) -> None:
    table = np.column_stack([traj.times, traj.states, traj.controls, traj.monitors])
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(",".join(_fmt(x) for x in row) for row in table.tolist())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path) -> dict:
    """Columns of a trajectory CSV as float arrays keyed by header name."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else x


@dataclass
class RunReport:
    scenario: str
    status: str
    parameters: dict
    assumptions: list
    terminal_error: Optional[float] = None
    min_n: Optional[float] = None
    positivity: Optional[dict] = None
    stability_condition_dr: Optional[bool] = None
    runs: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    error: Optional[dict] = None

    @property
    def exit_code(self) -> int:
        return 0 if self.error is None else self.error["exit_code"]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "status": self.status,
            "parameters": self.parameters,
            "assumptions": self.assumptions,
            "terminal_error": self.terminal_error,
            "min_n": self.min_n,
            "positivity": self.positivity,
            "stability_condition_dr": self.stability_condition_dr,
            "runs": self.runs,
            "files": self.files,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def certificates(scenario: Scenario) -> dict:
    """Verdicts that need no simulation."""
    ctrl = scenario.controller
    params = scenario.params
    gains = ctrl.gains
    out = {"positivity": None, "stability_condition_dr": None}
    if ctrl.law is Law.SGA_D:
        verdicts = []
        for e0 in scenario.initial_energies:
            v = analysis.positivity_verdict(e0, ctrl.e_star, params.omega0, gains.gamma2)
            entry = {"e0": e0, **(v.to_dict() if v else {"mode": "equilibrium"})}
            if v is not None and v.mode == "cooling":
                entry["cooling_floor"] = analysis.cooling_floor(v.alpha, e0)
            verdicts.append(entry)
        out["positivity"] = {
            "gamma2": gains.gamma2,
            "satisfied": all(v.get("satisfied", True) for v in verdicts),
            "cases": verdicts,
        }
    if ctrl.law is Law.SGA_DR:
        out["stability_condition_dr"] = analysis.stability_condition_dr(
            params.gamma, gains.gamma1, gains.gamma2
        )
    return out


def _run_member(
    scenario: Scenario, out_dir: Path, stem: str, oracle_dim: Optional[int]
) -> tuple[dict, Trajectory]:
    traj = simulate(scenario)
    csv_path = out_dir / f"{stem}.csv"
    write_csv(traj, csv_path)
    run = {
        "initial_energy": scenario.initial_energies[0],
        "terminal_error": traj.terminal_error(),
        "min_n": traj.min_n,
        "negative_n_samples": int(np.count_nonzero(traj.n < 0)),
        "rate_fit": None,
        "oracle": None,
        "csv": csv_path.name,
    }
    if scenario.controller.law is Law.SGA_DR:
        target = Controller(scenario.controller, scenario.params).target
        fit = analysis.exponential_rate_fit(traj, analysis.equilibrium_point(target))
        run["rate_fit"] = {
            k: _finite_or_none(v) if isinstance(v, float) else v
            for k, v in fit.to_dict().items()
        }
    if oracle_dim is not None:
        oracle_scenario = dataclasses.replace(scenario, oracle_dim=oracle_dim)
        oracle = simulate_lindblad(oracle_scenario, traj)
        oracle_path = out_dir / f"{stem}-oracle.csv"
        write_csv(oracle, oracle_path)
        diag = dict(oracle.diagnostics)
        run["oracle"] = {
            "dim": oracle_dim,
            "max_discrepancy": max_discrepancy(traj, oracle),
            "weights": diag["weights"],
            "max_trace_drift": diag["max_trace_drift"],
            "max_hermiticity": diag["max_hermiticity"],
            "min_eigenvalue": diag["min_eigenvalue"],
            "max_tail_mass": diag["max_tail_mass"],
            "csv": oracle_path.name,
        }
    return run, traj


def run_scenario(
    scenario: Scenario,
    out_dir,
    oracle_dim: Optional[int] = None,
    figure: bool = True,
) -> RunReport:
    """Simulate every member of ``scenario`` and write its artifacts.

    Files go to ``out_dir``: ``trajectory.csv`` (or ``trajectory-NN.csv``
    for batches), ``*-oracle.csv`` when the oracle runs, ``figure.svg``
    and ``report.json``. Simulation errors are captured in the report.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle_dim = oracle_dim if oracle_dim is not None else scenario.oracle_dim
    certs = certificates(scenario)
    report = RunReport(
        scenario=scenario.id,
        status="ok",
        parameters=scenario_to_tree(scenario),
        assumptions=list(scenario.notes),
        positivity=certs["positivity"],
        stability_condition_dr=certs["stability_condition_dr"],
    )
    members = scenario.members()
    trajectories = []
    try:
        for i, member in enumerate(members):
            stem = "trajectory" if len(members) == 1 else f"trajectory-{i:02d}"
            run, traj = _run_member(member, out_dir, stem, oracle_dim)
            report.runs.append(run)
            trajectories.append(traj)
    except SgoscError as exc:
        logger.error("%s failed: %s", scenario.id, exc)
        report.status = "failed"
        report.error = {"type": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    if report.runs:
        report.terminal_error = max(r["terminal_error"] for r in report.runs)
        report.min_n = min(r["min_n"] for r in report.runs)
    report.files["csv"] = [r["csv"] for r in report.runs]
    if figure and trajectories:
        svg = emit_figure(trajectories, FigureStyle(title=scenario.id))
        (out_dir / "figure.svg").write_text(svg, encoding="utf-8")
        report.files["figure"] = "figure.svg"
    report.files["report"] = "report.json"
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report
