"""1D finite-volume advection-diffusion-reaction operator with Dirichlet data.

Cell-centered unknowns on a uniform grid.  Diffusion uses two-point fluxes
(half-cell distance at the boundary faces), advection is first-order upwind
in conservative form, reaction sits on the diagonal.  Boundary values enter
through an affine offset so that

    A v = M v + offset

with ``M`` tridiagonal.  ``M`` is a Z-matrix with non-negative column sums
(L1 contraction of the resolvent) and non-negative row sums (discrete
maximum principle).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "Grid",
    "OperatorCoefficients",
    "DiscreteOperator",
    "OperatorError",
    "assemble_operator",
    "apply",
    "resolvent_solve",
    "l1h",
]


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise OperatorError(f"n_cells must be >= 2, got {self.n_cells}")
        if not self.x_right > self.x_left:
            raise OperatorError("x_right must exceed x_left")

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_left + (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def faces(self) -> np.ndarray:
        return self.x_left + np.arange(self.n_cells + 1) * self.h

    def cell_average(self, func, points: int = 8) -> np.ndarray:
        """Gauss-Legendre cell averages of ``func``."""
        xg, wg = np.polynomial.legendre.leggauss(points)
        xs = self.centers[:, None] + 0.5 * self.h * xg[None, :]
        return (func(xs) * wg[None, :]).sum(axis=1) / 2.0


def l1h(v, h: float) -> float:
    """Discrete L1 norm ``h * sum |v|``."""
    return float(h * np.abs(v).sum())


@dataclass(frozen=True, eq=False)
class OperatorCoefficients:
    """Coefficients of ``-(D chi')' + (q chi)' + a chi``.

    ``velocity`` is a scalar or an array of face values (``n_cells + 1``);
    ``reaction`` a scalar or a cell array.  A boundary value of ``None``
    means no condition is imposed there, which is only admissible on an
    outflow face of a pure-advection operator.
    """

    diffusion: float = 0.0
    velocity: float | np.ndarray = 0.0
    reaction: float | np.ndarray = 0.0
    dirichlet_left: float | None = 0.0
    dirichlet_right: float | None = 0.0

    def face_velocity(self, grid: Grid) -> np.ndarray:
        q = np.broadcast_to(np.asarray(self.velocity, dtype=float), (grid.n_cells + 1,))
        return np.array(q)

    def cell_reaction(self, grid: Grid) -> np.ndarray:
        return np.array(np.broadcast_to(np.asarray(self.reaction, dtype=float), (grid.n_cells,)))

    def homogeneous(self) -> "OperatorCoefficients":
        """Same operator with zero boundary data (where data is imposed)."""
        return replace(
            self,
            dirichlet_left=None if self.dirichlet_left is None else 0.0,
            dirichlet_right=None if self.dirichlet_right is None else 0.0,
        )


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    coeffs: OperatorCoefficients
    lower: np.ndarray  # M[i+1, i]
    diag: np.ndarray
    upper: np.ndarray  # M[i, i+1]
    offset: np.ndarray
    q_faces: np.ndarray
    # boundary face fluxes are affine in the adjacent cell value: a + b * v
    _flux_left: tuple[float, float] = field(default=(0.0, 0.0))
    _flux_right: tuple[float, float] = field(default=(0.0, 0.0))

    @property
    def n(self) -> int:
        return self.grid.n_cells

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[1:] += self.lower * v[:-1]
        out[:-1] += self.upper * v[1:]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def banded(self, scale: float = 1.0, shift=0.0) -> np.ndarray:
        """``shift * I + scale * M`` in LAPACK banded layout (``l = u = 1``)."""
        ab = np.zeros((3, self.n))
        ab[0, 1:] = scale * self.upper
        ab[1, :] = shift + scale * self.diag
        ab[2, :-1] = scale * self.lower
        return ab

    def row_sums(self) -> np.ndarray:
        s = self.diag.copy()
        s[1:] += self.lower
        s[:-1] += self.upper
        return s

    def column_sums(self) -> np.ndarray:
        s = self.diag.copy()
        s[:-1] += self.lower
        s[1:] += self.upper
        return s

    def boundary_fluxes(self, v: np.ndarray) -> tuple[float, float]:
        """Total (advective + diffusive) flux in the +x direction through both end faces."""
        a, b = self._flux_left
        c, d = self._flux_right
        return a + b * v[0], c + d * v[-1]

    def net_outflow(self, v: np.ndarray) -> float:
        fl, fr = self.boundary_fluxes(v)
        return fr - fl

    def homogeneous(self) -> "DiscreteOperator":
        return assemble_operator(self.grid, self.coeffs.homogeneous())


def assemble_operator(grid: Grid, coeffs: OperatorCoefficients) -> DiscreteOperator:
    n, h = grid.n_cells, grid.h
    D = float(coeffs.diffusion)
    if D < 0.0:
        raise OperatorError("diffusion must be non-negative")
    a = coeffs.cell_reaction(grid)
    if np.any(a < 0.0):
        raise OperatorError("reaction must be non-negative")
    q = coeffs.face_velocity(grid)
    div_q = np.diff(q) / h
    if np.any(2.0 * a + div_q < -1e-12 * (1.0 + np.abs(div_q))):
        raise OperatorError("2 a + dq/dx >= 0 violated")

    qp, qm = np.maximum(q, 0.0), np.minimum(q, 0.0)
    left, right = coeffs.dirichlet_left, coeffs.dirichlet_right
    if D > 0.0 and (left is None or right is None):
        raise OperatorError("diffusion needs Dirichlet data on both ends")
    if qp[0] > 0.0 and left is None:
        raise OperatorError("inflow at the left end needs a boundary value")
    if qm[-1] < 0.0 and right is None:
        raise OperatorError("inflow at the right end needs a boundary value")
    gl = 0.0 if left is None else float(left)
    gr = 0.0 if right is None else float(right)

    # advection: face flux F_{i+1/2} = qp * v_i + qm * v_{i+1}
    diag = (qp[1:] - qm[:-1]) / h + a
    lower = -qp[1:-1] / h
    upper = qm[1:-1] / h
    offset = np.zeros(n)
    offset[0] -= qp[0] * gl / h
    offset[-1] += qm[-1] * gr / h

    if D > 0.0:
        k = D / h**2
        diag = diag + 2.0 * k
        lower = lower - k
        upper = upper - k
        # boundary faces sit half a cell away
        diag[0] += k
        diag[-1] += k
        offset[0] -= 2.0 * k * gl
        offset[-1] -= 2.0 * k * gr

    dflux = 2.0 * D / h
    flux_left = (qp[0] * gl + dflux * gl, qm[0] - dflux)
    flux_right = (qm[-1] * gr - dflux * gr, qp[-1] + dflux)

    op = DiscreteOperator(grid, coeffs, lower, diag, upper, offset, q, flux_left, flux_right)
    scale = np.abs(op.diag).max() + 1.0
    if np.any(op.row_sums() < -1e-12 * scale):
        raise OperatorError("assembled operator has a negative row sum")
    return op


def apply(op: DiscreteOperator, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (op.n,):
        raise OperatorError(f"field of shape {v.shape} does not match grid with {op.n} cells")
    return op.matvec(v) + op.offset


def resolvent_solve(op: DiscreteOperator, lam: float, f) -> np.ndarray:
    """Solve ``v + lam * A v = f`` by banded elimination."""
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    f = np.asarray(f, dtype=float)
    if f.shape != (op.n,):
        raise OperatorError(f"field of shape {f.shape} does not match grid with {op.n} cells")
    return solve_banded((1, 1), op.banded(lam, 1.0), f - lam * op.offset, check_finite=False)
