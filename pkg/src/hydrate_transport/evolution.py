"""Backward-Euler evolution of ``du/dt + A g(u) = F`` (epsilon-solutions).

Each knot solves the stationary problem with ``step_lambda = dt_j`` and
``f = u_{j-1} + dt_j F(t_j)``.  The trajectory keeps every knot together
with the per-step boundary fluxes and source integrals needed to close the
discrete mass ledger.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discrete_operator import DiscreteOperator, Grid, apply, l1h
from .phase_graph import CellGraph, ShiftedGraph
from .stationary import NonConvergence, StationaryParams, StationarySolution, as_graph, solve_stationary

__all__ = [
    "TimeGrid",
    "Trajectory",
    "BoundaryTranslation",
    "evolve",
    "step",
    "translate_boundary",
    "blowup_crossing",
    "mass_defect",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    knots: tuple[float, ...]
    max_step: float | None = None

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.size < 2:
            raise ValueError("a time grid needs at least two knots")
        if np.any(np.diff(k) <= 0.0):
            raise ValueError("time knots must be strictly increasing")
        if self.max_step is not None and np.diff(k).max() > self.max_step * (1 + 1e-12):
            raise ValueError(f"step exceeds the declared bound {self.max_step:g}")

    @classmethod
    def uniform(cls, t0: float, t_end: float, steps: int, max_step: float | None = None) -> "TimeGrid":
        if steps < 1:
            raise ValueError("steps must be >= 1")
        knots = t0 + (t_end - t0) * np.arange(steps + 1) / steps
        knots[-1] = t_end
        return cls(tuple(float(t) for t in knots), max_step)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.knots, dtype=float)

    @property
    def steps(self) -> int:
        return len(self.knots) - 1


def blowup_crossing(times, max_s) -> tuple[float | None, float | None]:
    """First knot with ``max S >= 1`` and the linearly interpolated crossing time."""
    times = np.asarray(times, dtype=float)
    max_s = np.asarray(max_s, dtype=float)
    hit = np.flatnonzero(max_s >= 1.0)
    if hit.size == 0:
        return None, None
    j = int(hit[0])
    if j == 0:
        return float(times[0]), float(times[0])
    s0, s1 = max_s[j - 1], max_s[j]
    frac = (1.0 - s0) / (s1 - s0)
    return float(times[j]), float(times[j - 1] + frac * (times[j] - times[j - 1]))


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    u: np.ndarray
    chi: np.ndarray
    S: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    flux_left: np.ndarray
    flux_right: np.ndarray
    source_mass: np.ndarray
    reaction_mass: np.ndarray
    q: np.ndarray | None = None
    p_star: np.ndarray | None = None
    clogged: np.ndarray | None = None
    quadrature_defect: float = 0.0
    extended_branch_time: float | None = None
    status: str = "complete"
    notes: list[str] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def mass(self) -> np.ndarray:
        return self.grid.h * self.u.sum(axis=1)

    @property
    def max_S(self) -> np.ndarray:
        return self.S.max(axis=1)

    @property
    def blowup_knot_time(self) -> float | None:
        return blowup_crossing(self.times, self.max_S)[0]

    @property
    def blowup_time(self) -> float | None:
        return blowup_crossing(self.times, self.max_S)[1]

    @property
    def mass_defect(self) -> float:
        return mass_defect(self.times, self.mass, self.flux_left, self.flux_right,
                           self.source_mass, self.reaction_mass)


def mass_defect(times, mass, flux_left, flux_right, source_mass, reaction_mass) -> float:
    dt = np.diff(np.asarray(times, dtype=float))
    budget = np.sum(dt * (np.asarray(source_mass) - (np.asarray(flux_right) - np.asarray(flux_left))
                          - np.asarray(reaction_mass)))
    return float(abs(mass[-1] - mass[0] - budget))


def _saturation(graph, u):
    sat = getattr(graph, "saturation", None)
    return sat(u) if sat is not None else np.zeros_like(u)


def _extended(graph, u) -> bool:
    base = getattr(graph, "base", graph)
    shift = getattr(graph, "u0", 0.0)
    return bool(np.any((u + shift) / base.phi > base.R))


def step(op: DiscreteOperator, law, u_prev, dt: float, F_j, params: StationaryParams | None = None,
         *, u_start=None) -> StationarySolution:
    """One backward-Euler step: ``u + dt A chi = u_prev + dt F_j``."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    f = np.asarray(u_prev, dtype=float) + dt * np.asarray(F_j, dtype=float)
    return solve_stationary(op, law, dt, f, params, u_start=u_start)


def _source(F, t: float, n: int) -> np.ndarray:
    if F is None:
        return np.zeros(n)
    if callable(F):
        return np.asarray(F(t), dtype=float) * np.ones(n)
    return np.asarray(F, dtype=float) * np.ones(n)


class _Recorder:
    def __init__(self, grid, graph, t0, u0):
        self.grid = grid
        self.graph = graph
        self.times = [t0]
        self.u = [np.asarray(u0, dtype=float)]
        self.chi = [graph.inverse(u0)]
        self.S = [_saturation(graph, u0)]
        self.iterations, self.residuals = [], []
        self.fl, self.fr, self.src, self.rxn = [], [], [], []
        self.extended_time = t0 if _extended(graph, u0) else None

    def add(self, t, op, sol: StationarySolution, F_j):
        h = self.grid.h
        self.times.append(t)
        self.u.append(sol.u)
        self.chi.append(sol.chi)
        self.S.append(_saturation(self.graph, sol.u))
        self.iterations.append(sol.report.iterations)
        self.residuals.append(sol.report.residual)
        fl, fr = op.boundary_fluxes(sol.chi)
        self.fl.append(fl)
        self.fr.append(fr)
        self.src.append(h * F_j.sum())
        self.rxn.append(h * (op.coeffs.cell_reaction(op.grid) * sol.chi).sum())
        if self.extended_time is None and sol.report.extended_cells:
            self.extended_time = t

    def build(self, quad_defect=0.0) -> Trajectory:
        return Trajectory(
            grid=self.grid,
            times=np.array(self.times),
            u=np.array(self.u),
            chi=np.array(self.chi),
            S=np.array(self.S),
            iterations=np.array(self.iterations, dtype=int),
            residuals=np.array(self.residuals),
            flux_left=np.array(self.fl),
            flux_right=np.array(self.fr),
            source_mass=np.array(self.src),
            reaction_mass=np.array(self.rxn),
            quadrature_defect=quad_defect,
            extended_branch_time=self.extended_time,
        )


def _quadrature_defect(F, t0, t1, F_j, h) -> float:
    # Simpson estimate of int ||F(t) - F_j||_L1 dt over one step
    if not callable(F):
        return 0.0
    tm = 0.5 * (t0 + t1)
    n = F_j.size
    vals = [l1h(_source(F, t, n) - F_j, h) for t in (t0, tm)]
    return (t1 - t0) * (vals[0] + 4.0 * vals[1]) / 6.0


def evolve(op_provider: DiscreteOperator | Callable[[int, float], DiscreteOperator], law, u0,
           F, tg: TimeGrid, params: StationaryParams | None = None) -> Trajectory:
    """Advance ``u0`` over the knots of ``tg``.

    ``op_provider`` is a fixed operator or ``callable(j, t_j)`` giving the
    operator used on step ``j`` (``1 <= j <= N``); ``F`` is ``None``, a cell
    array, or ``callable(t)``.  On solver failure the partial trajectory is
    attached to the raised :class:`NonConvergence` as ``.trajectory``.
    """
    params = params or StationaryParams()
    times = tg.times
    get_op = op_provider if callable(op_provider) else (lambda j, t: op_provider)
    op1 = get_op(1, times[1])
    graph = as_graph(law, op1)
    u = np.asarray(u0, dtype=float)
    if u.shape != (op1.n,) or not np.all(np.isfinite(u)):
        raise ValueError("initial data must be a finite field on the grid")
    rec = _Recorder(op1.grid, graph, float(times[0]), u)
    quad = 0.0
    for j in range(1, len(times)):
        t, dt = float(times[j]), float(times[j] - times[j - 1])
        op = op1 if j == 1 else get_op(j, t)
        F_j = _source(F, t, op.n)
        quad += _quadrature_defect(F, times[j - 1], t, F_j, op.grid.h)
        try:
            sol = step(op, graph, u, dt, F_j, params, u_start=u)
        except NonConvergence as exc:
            exc.trajectory = rec.build(quad)
            raise
        rec.add(t, op, sol, F_j)
        u = sol.u
    return rec.build(quad)


@dataclass(frozen=True, eq=False)
class BoundaryTranslation:
    """Shift of a Dirichlet problem to homogeneous boundary data.

    ``v0`` is the affine (discrete-harmonic) lifting of the boundary values,
    ``u0`` a selection of the graph at ``v0``.  The shifted problem uses the
    homogeneous operator, the graph ``xi -> beta(v0 + xi) - u0`` and the
    source ``F - A v0``.
    """

    op: DiscreteOperator
    op_homogeneous: DiscreteOperator
    graph: ShiftedGraph
    v0: np.ndarray
    u0: np.ndarray
    A_v0: np.ndarray

    def shift_state(self, u):
        return np.asarray(u, dtype=float) - self.u0

    def shift_source(self, F):
        return np.asarray(F, dtype=float) - self.A_v0

    def shift_rhs(self, f, lam: float):
        """Right-hand side of a stationary step ``u + lam A chi = f``."""
        return np.asarray(f, dtype=float) - self.u0 - lam * self.A_v0

    def restore(self, u_shifted, chi_shifted):
        return np.asarray(u_shifted) + self.u0, np.asarray(chi_shifted) + self.v0


def translate_boundary(op: DiscreteOperator, law) -> BoundaryTranslation:
    graph = as_graph(law, op)
    if not isinstance(graph, CellGraph):
        raise TypeError("translate_boundary expects an untranslated phase law")
    c = op.coeffs
    x = op.grid.centers
    gl, gr = c.dirichlet_left, c.dirichlet_right
    if gl is not None and gr is not None:
        xl, xr = op.grid.x_left, op.grid.x_right
        v0 = gl + (gr - gl) * (x - xl) / (xr - xl)
    elif gl is not None or gr is not None:
        v0 = np.full(op.n, float(gl if gl is not None else gr))
    else:
        v0 = np.zeros(op.n)
    u0, _ = graph.interval(v0)
    return BoundaryTranslation(
        op=op,
        op_homogeneous=op.homogeneous(),
        graph=ShiftedGraph(graph, v0, u0),
        v0=v0,
        u0=u0,
        A_v0=apply(op, v0),
    )
