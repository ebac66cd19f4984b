"""Loosely coupled transport-pressure loop.

At every knot ``n``: saturation from ``u_n`` -> permeability -> Darcy
flux ``q_n`` -> transport operator with velocity ``q_n`` -> one backward
Euler step to ``u_{n+1}``.  The pressure solve uses beginning-of-step
saturation and there is no inner iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .discrete_operator import Grid, OperatorCoefficients, assemble_operator
from .evolution import TimeGrid, Trajectory, _Recorder, _quadrature_defect, _source, step
from .phase_graph import PhaseLaw
from .pressure import FluidParams, PressureSolution, permeability, solve_pressure_1d
from .stationary import NonConvergence, StationaryParams

__all__ = ["CoupledProblem", "CoupledState", "run_coupled", "coupled_states"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CoupledProblem:
    grid: Grid
    law: PhaseLaw
    coeffs: OperatorCoefficients  # velocity is ignored, it comes from the pressure solve
    fluid: FluidParams
    p_left: float
    p_right: float
    u0: np.ndarray
    F: object
    time_grid: TimeGrid
    params: StationaryParams = StationaryParams()
    freeze_permeability: bool = False


@dataclass(frozen=True, eq=False)
class CoupledState:
    n: int
    u: np.ndarray
    S: np.ndarray
    kappa: np.ndarray
    q: float
    p_star: np.ndarray
    clogged: bool


def _pressure(pb: CoupledProblem, kappa) -> PressureSolution:
    return solve_pressure_1d(pb.grid, kappa, pb.fluid, pb.p_left, pb.p_right)


def run_coupled(problem) -> Trajectory:
    """Run the staggered loop; accepts a :class:`CoupledProblem` or anything with ``coupled_problem()``."""
    pb: CoupledProblem = problem if isinstance(problem, CoupledProblem) else problem.coupled_problem()
    graph = pb.law.on_cells(pb.grid.centers)
    times = pb.time_grid.times
    u = np.asarray(pb.u0, dtype=float)
    rec = _Recorder(pb.grid, graph, float(times[0]), u)
    qs, ps, clog = [], [], []

    frozen = permeability(pb.fluid, graph.saturation(u)) if pb.freeze_permeability else None

    def knot_pressure(u_n):
        kappa = frozen if frozen is not None else permeability(pb.fluid, graph.saturation(u_n))
        sol = _pressure(pb, kappa)
        qs.append(sol.q)
        ps.append(sol.p_star)
        clog.append(sol.clogged)
        return sol

    def finish(status, quad):
        traj = rec.build(quad)
        traj.q, traj.p_star, traj.clogged = np.array(qs), np.array(ps), np.array(clog)
        traj.status = status
        return traj

    quad = 0.0
    pres = knot_pressure(u)
    for j in range(1, len(times)):
        if pres.clogged and pb.coeffs.diffusion == 0.0:
            logger.warning("flow path sealed at t=%g with no diffusion; halting", times[j - 1])
            traj = finish("clogged_halt", quad)
            traj.notes.append(f"halted at t={times[j - 1]!r}: q = 0 and D = 0")
            return traj
        t, dt = float(times[j]), float(times[j] - times[j - 1])
        op = assemble_operator(pb.grid, replace(pb.coeffs, velocity=pres.q))
        F_j = _source(pb.F, t, pb.grid.n_cells)
        quad += _quadrature_defect(pb.F, times[j - 1], t, F_j, pb.grid.h)
        try:
            sol = step(op, graph, u, dt, F_j, pb.params, u_start=u)
        except NonConvergence as exc:
            exc.trajectory = finish("failed", quad)
            raise
        rec.add(t, op, sol, F_j)
        u = sol.u
        pres = knot_pressure(u)
    return finish("complete", quad)


def coupled_states(traj: Trajectory, fluid: FluidParams, law: PhaseLaw) -> Iterator[CoupledState]:
    """Replay the per-knot records as :class:`CoupledState` objects."""
    graph = law.on_cells(traj.grid.centers)
    for n in range(len(traj.q)):
        s = graph.saturation(traj.u[n])
        yield CoupledState(n, traj.u[n], s, permeability(fluid, s), float(traj.q[n]),
                           traj.p_star[n], bool(traj.clogged[n]))
