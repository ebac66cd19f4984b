"""Run orchestration and oracle comparison."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coupled import run_coupled
from .evolution import Trajectory, evolve
from .oracle import OutsideValidity, oracle_cell_average, safe_pulse
from .output import FieldHistory, RunReport, write_report, write_trajectory_csv
from .scenario import Scenario
from .stationary import NonConvergence

__all__ = [
    "EXIT_CLEAN",
    "EXIT_BLOWUP",
    "EXIT_CLOGGED",
    "EXIT_SOLVER",
    "simulate",
    "run",
    "compare",
    "ErrorRow",
    "refinement_study",
]

logger = logging.getLogger(__name__)

EXIT_CLEAN, EXIT_BLOWUP, EXIT_CLOGGED, EXIT_SOLVER = 0, 2, 3, 4


def simulate(sc: Scenario) -> Trajectory:
    """Integrate a scenario; raises :class:`NonConvergence` with ``.trajectory`` on failure."""
    if sc.pressure_driven:
        return run_coupled(sc)
    return evolve(sc.operator(), sc.grid_law, sc.initial_field(), sc.source_function(), sc.time_grid, sc.solver)


def _report(sc: Scenario, traj: Trajectory, wall: float, failure: str = "") -> RunReport:
    blow_knot, blow = traj.blowup_knot_time, traj.blowup_time
    clogged = bool(traj.clogged.any()) if traj.clogged is not None else False
    if failure:
        status, code = "solver_failure", EXIT_SOLVER
    elif traj.status == "clogged_halt":
        status, code = "clogged_halt", EXIT_CLOGGED
    elif blow_knot is not None:
        status, code = "blowup", EXIT_BLOWUP
    else:
        status, code = "clean", EXIT_CLEAN
    margin = None
    if sc.oracle:
        margin = safe_pulse(sc.advection_scenario())[1]
    return RunReport(
        scenario=sc.name,
        digest=sc.digest(),
        status=status,
        exit_code=code,
        cells=sc.grid.n_cells,
        steps=sc.steps,
        steps_completed=traj.n_steps,
        tol=sc.solver.tol,
        iterations=[int(i) for i in traj.iterations],
        mass_defect=traj.mass_defect,
        mass_tolerance=traj.n_steps * sc.solver.tol,
        max_S=float(traj.max_S.max()),
        blowup_time=blow,
        blowup_knot_time=blow_knot,
        extended_branch_time=traj.extended_branch_time,
        clogged=clogged,
        q_first=None if traj.q is None else float(traj.q[0]),
        q_last=None if traj.q is None else float(traj.q[-1]),
        quadrature_defect=traj.quadrature_defect,
        safe_margin=margin,
        wall_time=wall,
        message=failure or "; ".join(traj.notes),
    )


def run(sc: Scenario, out_dir) -> tuple[RunReport, Trajectory]:
    """Run, write the CSV and report into ``out_dir``, return both."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    failure = ""
    try:
        traj = simulate(sc)
    except NonConvergence as exc:
        traj = exc.trajectory
        failure = str(exc)
        logger.error("%s: %s", sc.name, exc)
    report = _report(sc, traj, time.perf_counter() - t0, failure)
    write_trajectory_csv(out / sc.output.csv, traj, sc.output.every)
    write_report(out / sc.output.report, report)
    logger.info("%s: %s (max S %.4g, mass defect %.3g)", sc.name, report.status, report.max_S,
                report.mass_defect)
    return report, traj


@dataclass(frozen=True)
class ErrorRow:
    t: float
    variable: str
    L1: float
    Linf: float
    cells: int


def _knot_index(times: np.ndarray, t: float) -> int:
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t:g} is not a recorded knot (nearest {times[k]:g})")
    return k


def compare(sc: Scenario, history: FieldHistory | Trajectory, times, variables=("u", "chi", "S"),
            x_range: tuple[float, float] | None = None) -> list[ErrorRow]:
    """L1 and Linf errors against the advection oracle.

    By default the comparison uses the cells of ``(0, D_max)`` on which the
    oracle is valid at each time (behind the pulse tail it is not).  An
    explicit ``x_range`` must lie entirely inside the valid window.
    """
    if isinstance(history, Trajectory):
        history = FieldHistory.from_trajectory(history)
    adv = sc.advection_scenario()
    adv.check_hypothesis()
    grid = sc.grid
    if history.x.shape != (grid.n_cells,) or not np.allclose(history.x, grid.centers, rtol=0, atol=1e-12 * grid.h):
        raise ValueError("trajectory grid does not match the scenario grid")
    faces = grid.faces
    rows = []
    for t in times:
        k = _knot_index(history.times, t)
        t = float(history.times[k])
        tail = adv.q * t - adv.L
        inside = faces[:-1] >= sc.x_left - 1e-12 * grid.h
        if x_range is not None:
            lo, hi = x_range
            if lo < tail or lo < sc.x_left or hi > sc.x_right:
                raise OutsideValidity(
                    f"x range ({lo:g}, {hi:g}) at t={t:g} reaches behind the pulse tail at {tail:g}"
                )
            inside &= (faces[:-1] >= lo - 1e-12) & (faces[1:] <= hi + 1e-12)
        cells = np.flatnonzero(inside & (faces[:-1] >= tail))
        if cells.size == 0:
            raise OutsideValidity(f"no cell of (0, {sc.x_right:g}) is behind the pulse tail at t={t:g}")
        for var in variables:
            num = getattr(history, var)[k, cells]
            ref = oracle_cell_average(adv, grid, t, var, cells)
            err = np.abs(num - ref)
            rows.append(ErrorRow(t, var, float(grid.h * err.sum()), float(err.max()), int(cells.size)))
    return rows


def refinement_study(sc: Scenario, cells_list, t: float, cfl: float = 0.5, variable: str = "u"):
    """Errors at time ``t`` over a family of grids with ``dt = cfl * h / |q|``.

    Returns ``(errors, ratios)`` where ``ratios[i] = errors[i] / errors[i+1]``.
    """
    errors = []
    q = abs(float(sc.velocity))
    for n in cells_list:
        h = (sc.x_right - sc.x_left) / n
        fine = sc.with_overrides(cells=n, t_end=t, dt=cfl * h / q)
        traj = simulate(fine)
        (row,) = compare(fine, traj, [t], variables=(variable,))
        errors.append(row.L1)
    errors = np.array(errors)
    return errors, errors[:-1] / errors[1:]
