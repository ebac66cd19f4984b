"""Phase-equilibrium graph linking dissolved methane fraction to total content.

At a point ``x`` the total methane content ``u`` and the dissolved mass
fraction ``chi`` are related by the maximal monotone graph

    u in phi(x) * { chi                          chi < chi*(x)
                  { [chi*(x), R]                 chi = chi*(x)
                  { R + slope * (chi - chi*(x))  chi > chi*(x)

The vertical segment carries the hydrate saturation ``S in [0, 1]``; the
affine branch above ``R`` is the monotone continuation that keeps the graph
maximal once the physical range is left.  Everything single-valued that the
solvers need (inverse, resolvent, Yosida approximation) is closed-form and
piecewise linear.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Profile",
    "PhaseLaw",
    "GraphValue",
    "PositiveIndicator",
    "CellGraph",
    "ShiftedGraph",
    "graph_eval",
    "graph_inverse",
    "saturation_from_u",
    "graph_resolvent",
    "yosida_apply",
    "moreau_envelope",
]

# branch labels shared by the resolvent and the inverse
BELOW, SEGMENT, ABOVE = 0, 1, 2


@dataclass(frozen=True)
class Profile:
    """A scalar function of position: affine or piecewise-linear table.

    Tables are evaluated by linear interpolation and held constant outside
    the tabulated range.
    """

    intercept: float = 0.0
    slope: float = 0.0
    table: tuple[tuple[float, float], ...] | None = None

    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls(intercept=float(value), slope=0.0)

    @classmethod
    def affine(cls, intercept: float, slope: float) -> "Profile":
        return cls(intercept=float(intercept), slope=float(slope))

    @classmethod
    def tabulated(cls, points: Sequence[Sequence[float]]) -> "Profile":
        pts = tuple((float(a), float(b)) for a, b in points)
        if len(pts) < 1:
            raise ValueError("a tabulated profile needs at least one point")
        xs = [p[0] for p in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("table abscissae must be strictly increasing")
        return cls(table=pts)

    @property
    def is_affine(self) -> bool:
        return self.table is None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.table is None:
            return self.intercept + self.slope * x
        xs = np.array([p[0] for p in self.table])
        vs = np.array([p[1] for p in self.table])
        return np.interp(x, xs, vs)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.table is None:
            return np.full_like(x, self.slope)
        xs = np.array([p[0] for p in self.table])
        vs = np.array([p[1] for p in self.table])
        if len(xs) == 1:
            return np.zeros_like(x)
        slopes = np.diff(vs) / np.diff(xs)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
        inside = (x >= xs[0]) & (x <= xs[-1])
        return np.where(inside, slopes[idx], 0.0)

    def extremes(self, x_left: float, x_right: float) -> tuple[float, float]:
        """Min and max over ``[x_left, x_right]`` (exact for piecewise-linear data)."""
        probe = [x_left, x_right]
        if self.table is not None:
            probe += [p[0] for p in self.table if x_left < p[0] < x_right]
        vals = self(np.array(probe))
        return float(vals.min()), float(vals.max())

    def is_nonincreasing(self, x_left: float, x_right: float) -> bool:
        if self.table is None:
            return self.slope <= 0.0
        probe = [x_left] + [p[0] for p in self.table if x_left < p[0] < x_right] + [x_right]
        vals = self(np.array(probe))
        return bool(np.all(np.diff(vals) <= 0.0))


class GraphValue(NamedTuple):
    """Closed interval ``[lo, hi]`` of admissible ``u`` at one ``(x, chi)``."""

    lo: float
    hi: float

    def __contains__(self, u) -> bool:  # type: ignore[override]
        return self.lo <= u <= self.hi


def _check_lambda(lam) -> None:
    if np.any(np.asarray(lam) <= 0.0):
        raise ValueError(f"regularization parameter must be positive, got {lam!r}")


@dataclass(frozen=True)
class PhaseLaw:
    """Solubility profile, hydrate ceiling and porosity defining the graph."""

    chi_star: Profile
    R: float
    phi: Profile = Profile.constant(1.0)
    extension_slope: float = 1.0

    def __post_init__(self):
        if not self.R > 0.0:
            raise ValueError("R must be positive")
        if not self.extension_slope > 0.0:
            raise ValueError("extension_slope must be positive")

    def violations(self, x_left: float, x_right: float, *, nonincreasing: bool = False) -> list[str]:
        """Return human-readable invariant failures on ``[x_left, x_right]``."""
        out = []
        lo, hi = self.chi_star.extremes(x_left, x_right)
        if lo <= 0.0:
            out.append(f"chi_star must be positive on the domain (min {lo:g})")
        if hi >= self.R:
            out.append(f"chi <= chi*(x) < R violated: max chi_star {hi:g} >= R = {self.R:g}")
        plo, _ = self.phi.extremes(x_left, x_right)
        if plo <= 0.0:
            out.append(f"porosity must be positive (min {plo:g})")
        if nonincreasing and not self.chi_star.is_nonincreasing(x_left, x_right):
            out.append("chi_star declared non-increasing but increases somewhere")
        return out

    def on_cells(self, centers) -> "CellGraph":
        centers = np.asarray(centers, dtype=float)
        return CellGraph(
            chi_star=self.chi_star(centers),
            phi=self.phi(centers),
            R=self.R,
            slope=self.extension_slope,
        )


@dataclass(frozen=True, eq=False)
class CellGraph:
    """A :class:`PhaseLaw` sampled at cell centers; all methods are vectorized."""

    chi_star: np.ndarray
    phi: np.ndarray
    R: float
    slope: float

    @property
    def size(self) -> int:
        return self.chi_star.size

    def interval(self, chi):
        chi = np.asarray(chi, dtype=float)
        cs, phi = self.chi_star, self.phi
        above = self.R + self.slope * (chi - cs)
        lo = np.where(chi < cs, chi, np.where(chi == cs, cs, above))
        hi = np.where(chi < cs, chi, np.where(chi == cs, self.R, above))
        return phi * lo, phi * hi

    def inverse(self, u):
        u = np.asarray(u, dtype=float) / self.phi
        cs = self.chi_star
        return np.where(u <= cs, u, np.where(u <= self.R, cs, cs + (u - self.R) / self.slope))

    def inverse_slope(self, u):
        # left-branch slope at the kinks
        u = np.asarray(u, dtype=float) / self.phi
        d = np.where(u <= self.chi_star, 1.0, np.where(u <= self.R, 0.0, 1.0 / self.slope))
        return d / self.phi

    def kinks(self) -> np.ndarray:
        """Break points of the inverse in ``u``, shape ``(n, 2)``."""
        return np.column_stack([self.phi * self.chi_star, self.phi * np.full_like(self.chi_star, self.R)])

    def branch_slopes(self) -> np.ndarray:
        """Slope of the inverse on each of the three branches, shape ``(n, 3)``."""
        inv = 1.0 / self.phi
        return np.column_stack([inv, np.zeros_like(inv), inv / self.slope])

    def resolvent_branch(self, lam, r):
        r = np.asarray(r, dtype=float)
        lp = lam * self.phi
        cs = self.chi_star
        return np.where(r < (1.0 + lp) * cs, BELOW, np.where(r <= cs + lp * self.R, SEGMENT, ABOVE))

    def resolvent(self, lam, r):
        _check_lambda(lam)
        r = np.asarray(r, dtype=float)
        lp = lam * self.phi
        cs, R, s = self.chi_star, self.R, self.slope
        below = r / (1.0 + lp)
        above = (r - lp * (R - s * cs)) / (1.0 + lp * s)
        br = self.resolvent_branch(lam, r)
        return np.where(br == BELOW, below, np.where(br == SEGMENT, cs, above))

    def resolvent_slope(self, lam, r):
        lp = lam * self.phi
        br = self.resolvent_branch(lam, r)
        return np.where(br == BELOW, 1.0 / (1.0 + lp), np.where(br == SEGMENT, 0.0, 1.0 / (1.0 + lp * self.slope)))

    def saturation(self, u):
        """Hydrate saturation ``(u/phi - chi*)^+ / (R - chi*)``; not clamped at 1."""
        u = np.asarray(u, dtype=float) / self.phi
        return np.maximum(u - self.chi_star, 0.0) / (self.R - self.chi_star)

    def excess(self, u, chi):
        """Distance of ``u`` from the interval at ``chi`` (0 when ``u`` is on the graph)."""
        lo, hi = self.interval(chi)
        return np.maximum(lo - u, 0.0) + np.maximum(u - hi, 0.0)


@dataclass(frozen=True, eq=False)
class ShiftedGraph:
    """Translate of a graph: ``xi -> base(v0 + xi) - u0`` cellwise.

    ``u0`` must be a selection of ``base`` at ``v0`` so that the translated
    graph passes through the origin.
    """

    base: CellGraph
    v0: np.ndarray
    u0: np.ndarray

    @property
    def size(self) -> int:
        return self.base.size

    def interval(self, xi):
        lo, hi = self.base.interval(self.v0 + np.asarray(xi, dtype=float))
        return lo - self.u0, hi - self.u0

    def inverse(self, u):
        return self.base.inverse(np.asarray(u, dtype=float) + self.u0) - self.v0

    def inverse_slope(self, u):
        return self.base.inverse_slope(np.asarray(u, dtype=float) + self.u0)

    def kinks(self) -> np.ndarray:
        return self.base.kinks() - np.asarray(self.u0, dtype=float).reshape(-1, 1)

    def branch_slopes(self) -> np.ndarray:
        return self.base.branch_slopes()

    def _arg(self, lam, r):
        return np.asarray(r, dtype=float) + self.v0 + lam * self.u0

    def resolvent_branch(self, lam, r):
        return self.base.resolvent_branch(lam, self._arg(lam, r))

    def resolvent(self, lam, r):
        return self.base.resolvent(lam, self._arg(lam, r)) - self.v0

    def resolvent_slope(self, lam, r):
        return self.base.resolvent_slope(lam, self._arg(lam, r))

    def excess(self, u, xi):
        lo, hi = self.interval(xi)
        return np.maximum(lo - u, 0.0) + np.maximum(u - hi, 0.0)

    def saturation(self, u):
        return self.base.saturation(np.asarray(u, dtype=float) + self.u0)


class PositiveIndicator:
    """Subgradient of the indicator of ``[0, inf)``: the complementarity graph."""

    @staticmethod
    def resolvent(x, lam, r):
        _check_lambda(lam)
        return np.maximum(r, 0.0)

    @staticmethod
    def envelope(x, lam, r):
        """Regularized indicator ``min(r, 0)**2 / (2 lam)``."""
        _check_lambda(lam)
        return np.minimum(r, 0.0) ** 2 / (2.0 * lam)

    @staticmethod
    def potential(x, v):
        return np.where(np.asarray(v) >= 0.0, 0.0, np.inf)


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def graph_eval(law: PhaseLaw, x: float, chi: float) -> GraphValue:
    lo, hi = law.on_cells([x]).interval([chi])
    return GraphValue(float(lo[0]), float(hi[0]))


def graph_inverse(law: PhaseLaw, x, u):
    x, u = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
    return _scalar(law.on_cells(x.ravel()).inverse(u.ravel()).reshape(u.shape))


def saturation_from_u(law: PhaseLaw, x, u):
    x, u = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
    return _scalar(law.on_cells(x.ravel()).saturation(u.ravel()).reshape(u.shape))


def graph_resolvent(law, x, lam, r):
    """``(I + lam * beta(x, .))^{-1} r`` for a :class:`PhaseLaw` or :class:`PositiveIndicator`."""
    _check_lambda(lam)
    if isinstance(law, PositiveIndicator):
        return _scalar(law.resolvent(x, lam, r))
    x, r = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(r, dtype=float))
    return _scalar(law.on_cells(x.ravel()).resolvent(lam, r.ravel()).reshape(r.shape))


def yosida_apply(law, x, lam, r):
    """Yosida approximation ``(r - J_lam r) / lam``; Lipschitz with constant ``1/lam``."""
    _check_lambda(lam)
    return _scalar((np.asarray(r, dtype=float) - graph_resolvent(law, x, lam, r)) / lam)


def _potential(law: PhaseLaw, x, v):
    g = law.on_cells(np.atleast_1d(x))
    v = np.asarray(v, dtype=float)
    cs = g.chi_star
    up = 0.5 * cs**2 + g.R * (v - cs) + 0.5 * g.slope * (v - cs) ** 2
    return g.phi * np.where(v <= cs, 0.5 * v**2, up)


def moreau_envelope(law, x, lam, r):
    """Moreau-Yosida envelope of the convex potential whose subgradient is the graph."""
    _check_lambda(lam)
    if isinstance(law, PositiveIndicator):
        return _scalar(law.envelope(x, lam, r))
    j = graph_resolvent(law, x, lam, r)
    return _scalar((np.asarray(r) - j) ** 2 / (2.0 * lam) + _potential(law, x, j))
