"""Semilinear stationary problem ``u + lam * A chi = f`` with ``u in beta(x, chi)``.

This is the equation solved once per backward-Euler step.  Two independent
routes are provided:

``newton``
    Semismooth Newton on the single-valued form ``u + lam A g(u) = f`` where
    ``g`` is the graph inverse.  The Jacobian ``I + lam M diag(g'(u))`` is a
    tridiagonal M-matrix, so every step is a banded solve.

``fixed_point``
    The regularized construction: for a decreasing schedule of
    ``(eps, lam_y)`` the solution of ``eps v + A' v + beta_lam_y(v) = f`` is
    the fixed point of

        v <- (1 + lam_y eps)^{-1} (I + lam_y/(1 + lam_y eps) A')^{-1}
                 (lam_y f + (I + lam_y beta)^{-1} v),

    ``A' = lam A``.  The map contracts only by ``(1 + lam_y eps)^{-1}``, so
    a few literal sweeps are followed by a Newton solve of the equivalent
    regularized equation; each stage is certified by applying the map once
    more.  The ``(eps, lam_y) -> 0`` limit is taken exactly: the graph is
    piecewise linear, so with the branch pattern of the last stage frozen
    the limit is one linear solve, accepted only if it satisfies the
    unregularized equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_banded

from .discrete_operator import DiscreteOperator, l1h
from .phase_graph import PhaseLaw

__all__ = [
    "StationaryParams",
    "StationaryReport",
    "StationarySolution",
    "NonConvergence",
    "as_graph",
    "solve_stationary",
    "fixed_point_sweep",
    "stationary_residual",
]

logger = logging.getLogger(__name__)

METHODS = ("newton", "fixed_point", "both")


def _default_schedule(eps: float, lam: float, stages: int = 7) -> tuple[tuple[float, float], ...]:
    return tuple((eps * 4.0**-j, lam * 4.0**-j) for j in range(stages))


@dataclass(frozen=True)
class StationaryParams:
    eps: float = 1e-2
    yosida_lambda: float = 1e-2
    tol: float = 1e-10
    max_iters: int = 60
    continuation: tuple[tuple[float, float], ...] | None = None
    method: str = "newton"
    sweeps_per_stage: int = 3
    extra_stages: int = 10

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not (self.eps > 0.0 and self.yosida_lambda > 0.0):
            raise ValueError("eps and yosida_lambda must be positive")
        sched = self.schedule
        for (e0, l0), (e1, l1) in zip(sched, sched[1:]):
            if not (e1 < e0 and l1 < l0):
                raise ValueError("continuation schedule must be strictly decreasing")
        if any(e <= 0.0 or lam <= 0.0 for e, lam in sched):
            raise ValueError("continuation entries must be positive")

    @property
    def schedule(self) -> tuple[tuple[float, float], ...]:
        if self.continuation is not None:
            return tuple((float(e), float(lam)) for e, lam in self.continuation)
        return _default_schedule(self.eps, self.yosida_lambda)


@dataclass
class StationaryReport:
    method: str
    iterations: int = 0
    residual: float = np.nan
    stages: list[dict] = field(default_factory=list)
    final_eps: float | None = None
    final_yosida_lambda: float | None = None
    regularization_gap: float | None = None
    discrepancy: float | None = None
    extended_cells: int = 0


class StationarySolution(NamedTuple):
    u: np.ndarray
    chi: np.ndarray
    report: StationaryReport


class NonConvergence(RuntimeError):
    """Iteration budget exhausted; carries the best iterate found."""

    def __init__(self, message, u=None, chi=None, residual=np.inf, report=None):
        super().__init__(message)
        self.u = u
        self.chi = chi
        self.residual = residual
        self.report = report


def as_graph(law, op: DiscreteOperator):
    """Sample a :class:`PhaseLaw` on the operator grid; pass graph objects through."""
    if isinstance(law, PhaseLaw):
        return law.on_cells(op.grid.centers)
    if getattr(law, "size", op.n) != op.n:
        raise ValueError("graph and operator live on different grids")
    return law


def stationary_residual(op: DiscreteOperator, lam: float, u, chi, f) -> np.ndarray:
    return u + lam * (op.matvec(chi) + op.offset) - f


def _jacobian(op: DiscreteOperator, lam: float, d: np.ndarray) -> np.ndarray:
    # I + lam * M * diag(d), banded layout
    ab = np.zeros((3, op.n))
    ab[0, 1:] = lam * op.upper * d[1:]
    ab[1, :] = 1.0 + lam * op.diag * d
    ab[2, :-1] = lam * op.lower * d[:-1]
    return ab


def _damped_newton(resid, slope, jac, u, tol, max_iters, h):
    """Armijo-damped Newton; returns ``(u, chi, iterations, err, converged)``.

    Stops early once the line search has stalled for a few consecutive
    steps, which happens when every step crosses a kink of the inverse.
    """
    r, chi = resid(u)
    err = l1h(r, h)
    best = (u, chi, err)
    stalled = 0
    for it in range(max_iters):
        if err <= tol:
            return u, chi, it, err, True
        du = solve_banded((1, 1), jac(slope(u)), -r, check_finite=False)
        merit = r @ r
        alpha = 1.0
        while True:
            un = u + alpha * du
            rn, chin = resid(un)
            if rn @ rn <= (1.0 - 1e-4 * alpha) * merit or alpha < 1e-6:
                break
            alpha *= 0.5
        u, r, chi = un, rn, chin
        err = l1h(r, h)
        if err < best[2]:
            best = (u, chi, err)
        stalled = stalled + 1 if alpha < 1e-3 else 0
        if stalled == 4:
            u, chi, err = best
            return u, chi, it + 1, err, False
    return u, chi, max_iters, err, err <= tol


def _homotopy(resid, jac, kinks, slopes, u, max_pieces):
    """Follow ``F(u(t)) = (1 - t) F(u_start)``, ``t in [0, 1]``, exactly.

    ``F`` is piecewise linear with one kink pattern per cell and every
    Jacobian is a nonsingular M-matrix, so ``F`` is a homeomorphism and the
    path is a polygon: on each piece ``du/dt`` solves ``J du = -F(u_start)``
    and a piece ends where the first cell reaches a kink.
    """
    n = u.size
    rows = np.arange(n)
    lo = np.column_stack([np.full(n, -np.inf), kinks])
    hi = np.column_stack([kinks, np.full(n, np.inf)])
    region = (u > kinks[:, 0]).astype(int) + (u > kinks[:, 1])
    rhs = -resid(u)[0]
    t = 0.0
    for _ in range(max_pieces):
        du = solve_banded((1, 1), jac(slopes[rows, region]), rhs, check_finite=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(du > 0, (hi[rows, region] - u) / du, np.where(du < 0, (lo[rows, region] - u) / du, np.inf))
        tau = np.maximum(tau, 0.0)
        step = tau.min()
        if t + step >= 1.0:
            return u + (1.0 - t) * du
        u = u + step * du
        t += step
        hit = tau <= step * (1.0 + 1e-12) + 1e-300
        up = hit & (du > 0)
        down = hit & (du < 0)
        u[up] = hi[rows, region][up]
        u[down] = lo[rows, region][down]
        region = region + up - down
    return u


def _newton(op, lam, f, inverse, inverse_slope, tol, max_iters, u_start=None, eps=0.0,
            kinks=None, slopes=None):
    """Semismooth Newton for ``u + (eps I + lam A) g(u) = f``.

    When the damped iteration stalls and the kink table of ``g`` is given,
    the piecewise-linear homotopy supplies a new start for a final Newton
    polish.
    """
    h = op.grid.h
    u = np.array(f if u_start is None else u_start, dtype=float)

    def resid(u):
        chi = inverse(u)
        return stationary_residual(op, lam, u, chi, f) + eps * chi, chi

    def jac(d):
        ab = _jacobian(op, lam, d)
        ab[1, :] += eps * d
        return ab

    u, chi, its, err, ok = _damped_newton(resid, inverse_slope, jac, u, tol, max_iters, h)
    if not ok and kinks is not None:
        logger.debug("Newton stalled at residual %.3e; following the homotopy", err)
        start = np.array(f if u_start is None else u_start, dtype=float)
        u = _homotopy(resid, jac, kinks, slopes, start, 10 * op.n + 100)
        u, chi, more, err, ok = _damped_newton(resid, inverse_slope, jac, u, tol, max_iters, h)
        its += more
    if ok:
        return u, chi, its, err
    raise NonConvergence(
        f"Newton did not reach tol={tol:g} in {max_iters} iterations (residual {err:.3e})",
        u=u, chi=chi, residual=err,
    )


def fixed_point_sweep(v, op: DiscreteOperator, law, step_lambda: float, eps: float,
                      yosida_lambda: float, f) -> np.ndarray:
    """One application of the regularized fixed-point map.

    The boundary offset of ``A`` is moved into the data, which keeps the
    resolvent of the linear part homogeneous.
    """
    if not (eps > 0.0 and yosida_lambda > 0.0):
        raise ValueError("eps and yosida_lambda must be positive")
    graph = as_graph(law, op)
    ly = yosida_lambda
    z = ly * (np.asarray(f, dtype=float) - step_lambda * op.offset) + graph.resolvent(ly, v)
    return solve_banded((1, 1), op.banded(ly * step_lambda, 1.0 + ly * eps), z, check_finite=False)


def _stage_solve(op, graph, lam, f, eps, ly, v, tol, max_iters):
    """Fixed point of the regularized map at one ``(eps, ly)``.

    Solved in ``y = beta_ly(v)``, using ``v = g(y) + ly * y`` (``g`` the graph
    inverse); in ``v`` itself the residual is arctan-shaped and Newton cycles.
    """
    y0 = (v - graph.resolvent(ly, v)) / ly
    y, _, its, _ = _newton(
        op, lam, f,
        lambda y: graph.inverse(y) + ly * y,
        lambda y: graph.inverse_slope(y) + ly,
        tol, max_iters, u_start=y0, eps=eps,
        kinks=graph.kinks(), slopes=graph.branch_slopes() + ly,
    )
    v = graph.inverse(y) + ly * y
    w = fixed_point_sweep(v, op, graph, lam, eps, ly, f)
    return w, its, l1h(w - v, op.grid.h)


def _fixed_point_path(op, graph, lam, f, params: StationaryParams, report: StationaryReport):
    h = op.grid.h
    tol = params.tol
    v = np.zeros(op.n)
    schedule = list(params.schedule)
    e_last, l_last = schedule[-1]
    schedule += [(e_last * 4.0**-k, l_last * 4.0**-k) for k in range(1, params.extra_stages + 1)]
    n_declared = len(params.schedule)
    best = None
    for j, (eps, ly) in enumerate(schedule):
        for _ in range(params.sweeps_per_stage):
            v = fixed_point_sweep(v, op, graph, lam, eps, ly, f)
        v, its, gap = _stage_solve(op, graph, lam, f, eps, ly, v, 1e-3 * tol, params.max_iters)
        u_reg = (v - graph.resolvent(ly, v)) / ly
        report.stages.append(
            {"eps": eps, "yosida_lambda": ly, "sweeps": params.sweeps_per_stage,
             "newton": its, "fixed_point_gap": gap}
        )
        report.iterations += params.sweeps_per_stage + its
        report.final_eps, report.final_yosida_lambda = eps, ly
        if j + 1 < n_declared:
            continue
        # exact limit with the branch pattern of this stage frozen
        r = stationary_residual(op, lam, u_reg, graph.inverse(u_reg), f)
        du = solve_banded((1, 1), _jacobian(op, lam, graph.inverse_slope(u_reg)), -r, check_finite=False)
        u = u_reg + du
        chi = graph.inverse(u)
        err = l1h(stationary_residual(op, lam, u, chi, f), h)
        if best is None or err < best[2]:
            best = (u, chi, err)
        if err <= tol:
            report.regularization_gap = l1h(u_reg - u, h)
            return u, chi, err
        logger.debug("limit step rejected at eps=%g lam=%g (residual %.3e)", eps, ly, err)
    raise NonConvergence(
        f"fixed-point continuation did not settle (best residual {best[2]:.3e})",
        u=best[0], chi=best[1], residual=best[2], report=report,
    )


def solve_stationary(op: DiscreteOperator, law, step_lambda: float, f,
                     params: StationaryParams | None = None, *, u_start=None) -> StationarySolution:
    """Solve ``u + step_lambda * A chi = f``, ``u in beta(x, chi)``.

    ``law`` is a :class:`PhaseLaw` or a sampled graph (``CellGraph``,
    ``ShiftedGraph``).  Returns ``(u, chi, report)``; the L1 residual of the
    equation is at most ``params.tol``.
    """
    params = params or StationaryParams()
    if not step_lambda > 0.0:
        raise ValueError("step_lambda must be positive")
    f = np.asarray(f, dtype=float)
    if f.shape != (op.n,):
        raise ValueError("right-hand side does not match the grid")
    if not np.all(np.isfinite(f)):
        raise ValueError("right-hand side must be finite")
    graph = as_graph(law, op)
    report = StationaryReport(method=params.method)

    if params.method in ("newton", "both"):
        try:
            u, chi, its, err = _newton(op, step_lambda, f, graph.inverse, graph.inverse_slope,
                                       params.tol, params.max_iters, u_start,
                                       kinks=graph.kinks(), slopes=graph.branch_slopes())
        except NonConvergence as exc:
            exc.report = report
            raise
        report.iterations, report.residual = its, err
        if params.method == "both":
            fp = StationaryReport(method="fixed_point")
            u2, _, _ = _fixed_point_path(op, graph, step_lambda, f, params, fp)
            report.stages = fp.stages
            report.final_eps, report.final_yosida_lambda = fp.final_eps, fp.final_yosida_lambda
            report.regularization_gap = fp.regularization_gap
            report.discrepancy = l1h(u - u2, op.grid.h)
            if report.discrepancy > 2.0 * params.tol:
                logger.warning("solver paths disagree: L1 gap %.3e > 2 tol", report.discrepancy)
    else:
        u, chi, err = _fixed_point_path(op, graph, step_lambda, f, params, report)
        report.residual = err

    base = getattr(graph, "base", graph)
    shift = getattr(graph, "u0", 0.0)
    report.extended_cells = int(np.count_nonzero((u + shift) / base.phi > base.R))
    return StationarySolution(u, chi, report)
