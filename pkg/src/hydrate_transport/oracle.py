"""Closed-form solution of the pure-advection pulse problem.

A pulse ``u(x, 0) = chi_L H(-x)`` of length ``L`` sits upstream of the
reservoir ``(0, D_max)`` and is carried in by a constant flux ``q > 0``.
With an affine, decreasing solubility ceiling the solution has three
zones at each time:

* ``G-``: ``0 < x < min(qt, x_L)``, undersaturated, ``chi = chi_L``;
* ``G0``: ``x_L <= x <= qt``, saturated, hydrate grows linearly in time;
* ``G+``: ``x > qt``, nothing has arrived yet.

The formulas assume uninterrupted supply, so an evaluation at ``(x, t)`` is
only accepted while the pulse tail has not reached ``x``: ``t < (x+L)/q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete_operator import Grid
from .phase_graph import PhaseLaw

__all__ = [
    "AdvectionScenario",
    "HypothesisViolated",
    "OutsideValidity",
    "free_boundary_xL",
    "oracle_chi",
    "oracle_S",
    "oracle_u",
    "blowup_time",
    "earliest_blowup",
    "safe_pulse",
    "valid_mask",
    "zones",
    "oracle_cell_average",
]


class HypothesisViolated(ValueError):
    """``chi*(0) > chi_L >= min chi*`` fails, so there is no free boundary in the reservoir."""


class OutsideValidity(ValueError):
    """Requested point lies behind the pulse tail or outside ``(-L, D_max]``."""


@dataclass(frozen=True)
class AdvectionScenario:
    chi_L: float
    L: float
    q: float
    law: PhaseLaw
    D_max: float = 1.0

    def __post_init__(self):
        if not self.q > 0.0:
            raise ValueError("the oracle needs q > 0")
        if self.L < 0.0:
            raise ValueError("pulse length must be non-negative")
        if not self.D_max > 0.0:
            raise ValueError("D_max must be positive")
        cs = self.law.chi_star
        if cs.table is not None or not cs.slope < 0.0:
            raise ValueError("the oracle needs an affine, strictly decreasing chi*")
        phi = self.law.phi
        if phi.table is not None or phi.slope != 0.0:
            raise ValueError("the oracle needs constant porosity")

    @property
    def a(self) -> float:
        return float(self.law.chi_star.intercept)

    @property
    def b(self) -> float:
        return float(self.law.chi_star.slope)

    @property
    def phi(self) -> float:
        return float(self.law.phi.intercept)

    @property
    def R(self) -> float:
        return float(self.law.R)

    def chi_star(self, x):
        return self.a + self.b * np.asarray(x, dtype=float)

    def check_hypothesis(self) -> None:
        top, bottom = self.chi_star(0.0), self.chi_star(self.D_max)
        if not (top > self.chi_L >= bottom):
            raise HypothesisViolated(
                f"need chi*(0) = {top:g} > chi_L = {self.chi_L:g} >= min chi* = {bottom:g}"
            )


def free_boundary_xL(sc: AdvectionScenario) -> float:
    """Point where the inflow fraction meets the ceiling: ``chi_L = chi*(x_L)``."""
    sc.check_hypothesis()
    x_l = (sc.chi_L - sc.a) / sc.b
    return float(min(max(x_l, 0.0), sc.D_max))


def _at_or_past_xL(x, x_l):
    # x_L is computed from the ceiling and carries rounding; S jumps there
    return np.asarray(x, dtype=float) >= x_l - 1e-12 * max(1.0, abs(x_l))


def valid_mask(sc: AdvectionScenario, x, t) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x >= -sc.L) & (x <= sc.D_max) & (t < (x + sc.L) / sc.q)


def _require_valid(sc, x, t):
    ok = valid_mask(sc, x, t)
    if not np.all(ok):
        bad = np.asarray(x, dtype=float)[~ok] if np.ndim(x) else x
        raise OutsideValidity(
            f"t={t:g} is past the pulse tail (or outside the domain) at x={np.min(bad):g}; "
            f"need t < (x + L)/q"
        )


def zones(sc: AdvectionScenario, x, t) -> np.ndarray:
    """Zone index per point: -1 for ``G-``, 0 for ``G0``, 1 for ``G+`` (``x_L`` belongs to ``G0``)."""
    x = np.asarray(x, dtype=float)
    x_l = free_boundary_xL(sc)
    front = sc.q * t
    return np.where(x > front, 1, np.where(_at_or_past_xL(x, x_l), 0, -1))


def oracle_chi(sc: AdvectionScenario, x, t: float):
    _require_valid(sc, x, t)
    x = np.asarray(x, dtype=float)
    chi = np.where(x <= sc.q * t, np.minimum(sc.chi_L, sc.chi_star(x)), 0.0)
    return chi if chi.ndim else float(chi)


def oracle_S(sc: AdvectionScenario, x, t: float):
    _require_valid(sc, x, t)
    x = np.asarray(x, dtype=float)
    z = zones(sc, x, t)
    growth = np.maximum(t - x / sc.q, 0.0) * sc.q * (-sc.b) / (sc.phi * (sc.R - sc.chi_star(x)))
    s = np.where(z == 0, growth, 0.0)
    return s if s.ndim else float(s)


def oracle_u(sc: AdvectionScenario, x, t: float):
    chi = np.asarray(oracle_chi(sc, x, t))
    s = np.asarray(oracle_S(sc, x, t))
    u = sc.phi * ((1.0 - s) * chi + sc.R * s)
    return u if u.ndim else float(u)


def blowup_time(sc: AdvectionScenario, x: float) -> float:
    """Time at which ``S(x, .)`` reaches 1 (``x >= x_L``)."""
    x_l = free_boundary_xL(sc)
    if not _at_or_past_xL(x, x_l):
        raise ValueError(f"x={x:g} lies upstream of the free boundary x_L={x_l:g}; S stays 0 there")
    if sc.b == 0.0:
        return float("inf")
    return float(x / sc.q + sc.phi * (sc.chi_star(x) - sc.R) / (sc.q * sc.b))


def earliest_blowup(sc: AdvectionScenario) -> tuple[float, float]:
    """``(x, t*)`` minimizing the blow-up time over ``[x_L, D_max]``.

    For affine ``chi*`` the blow-up time increases with ``x`` (slope
    ``(1 + phi)/q``), so the minimum sits at the free boundary.
    """
    x_l = free_boundary_xL(sc)
    return x_l, blowup_time(sc, x_l)


def safe_pulse(sc: AdvectionScenario) -> tuple[bool, float]:
    """Return ``(margin < 1, margin)`` with ``margin = max L(-chi*')/(phi (R - chi*))`` over ``[x_L, D_max]``."""
    x_l = free_boundary_xL(sc)
    # affine chi*: R - chi* increases with x, so the endpoint x_L dominates
    ends = np.array([x_l, sc.D_max])
    margin = float(np.max(sc.L * (-sc.b) / (sc.phi * (sc.R - sc.chi_star(ends)))))
    return margin < 1.0, margin


def oracle_cell_average(sc: AdvectionScenario, grid: Grid, t: float, field: str = "u",
                        cells=None, points: int = 8) -> np.ndarray:
    """Cell averages of an oracle field, splitting cells at ``x_L`` and the front."""
    func = {"u": oracle_u, "chi": oracle_chi, "S": oracle_S}[field]
    idx = np.arange(grid.n_cells) if cells is None else np.asarray(cells)
    faces = grid.faces
    breaks = [free_boundary_xL(sc), sc.q * t]
    xg, wg = np.polynomial.legendre.leggauss(points)
    out = np.empty(idx.size)
    for k, i in enumerate(idx):
        a, b = faces[i], faces[i + 1]
        pts = [a] + sorted(p for p in breaks if a < p < b) + [b]
        total = 0.0
        for lo, hi in zip(pts, pts[1:]):
            xs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
            total += 0.5 * (hi - lo) * np.dot(wg, func(sc, xs, t))
        out[k] = total / (b - a)
    return out
