"""Quasi-static 1D Darcy flow with saturation-dependent permeability.

In one dimension ``div q = 0`` makes the flux a single number, so the
excess-pressure problem ``mu/kappa q = -dp*/dx`` reduces to a series
resistance sum.  ``x`` points upward (toward the seafloor); the hydrostatic
part ``p0`` therefore decreases with ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .discrete_operator import Grid

__all__ = [
    "FluidParams",
    "PressureSolution",
    "permeability",
    "solve_pressure_1d",
    "solve_total_pressure_1d",
    "hydrostatic",
    "face_permeability",
]


@dataclass(frozen=True)
class FluidParams:
    mu: float = 1e-3
    rho_l: float = 1000.0
    g: float = 9.81
    kappa0: float = 1e-13
    perm_exponent: float = 3.0

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError("mu must be positive")
        if not self.kappa0 > 0.0:
            raise ValueError("kappa0 must be positive")
        if self.perm_exponent < 0.0:
            raise ValueError("perm_exponent must be >= 0")


class PressureSolution(NamedTuple):
    p_star: np.ndarray
    p0: np.ndarray
    q: float
    clogged: bool

    @property
    def p_total(self) -> np.ndarray:
        return self.p0 + self.p_star


def permeability(fp: FluidParams, S):
    """``kappa0 * (1 - S)^m``; exactly zero once ``S >= 1``."""
    s = np.asarray(S, dtype=float)
    open_frac = np.maximum(1.0 - s, 0.0)
    k = np.where(s >= 1.0, 0.0, fp.kappa0 * open_frac**fp.perm_exponent)
    return k if k.ndim else float(k)


def face_permeability(kappa) -> np.ndarray:
    """Harmonic mean at interior faces; boundary faces take the adjacent cell value."""
    k = np.asarray(kappa, dtype=float)
    inner = np.zeros(k.size - 1)
    both = (k[:-1] > 0.0) & (k[1:] > 0.0)
    inner[both] = 2.0 * k[:-1][both] * k[1:][both] / (k[:-1][both] + k[1:][both])
    return np.concatenate([[k[0]], inner, [k[-1]]])


def solve_pressure_1d(grid: Grid, kappa_field, fp: FluidParams, p_left: float, p_right: float,
                      p_datum: float | None = None) -> PressureSolution:
    """Excess pressure and flux between Dirichlet pressures at the two ends.

    The resistance of the column is ``sum_i mu h / kappa_i`` (cell by
    cell), which equals the face sum with harmonic-mean interior faces
    and half cells at the ends.  ``p_star`` is sampled at cell centers.
    """
    kappa = np.asarray(kappa_field, dtype=float)
    if kappa.shape != (grid.n_cells,):
        raise ValueError("permeability field does not match the grid")
    if np.any(kappa < 0.0) or not np.all(np.isfinite(kappa)):
        raise ValueError("permeability must be finite and non-negative")
    p0 = hydrostatic(grid, fp, 0.0 if p_datum is None else p_datum)
    h = grid.h
    if np.any(kappa == 0.0):
        # a sealed cell carries the whole drop; no flow
        p_star = np.where(np.cumsum(kappa == 0.0) > 0, float(p_right), float(p_left))
        return PressureSolution(p_star, p0, 0.0, True)
    res = fp.mu * h / kappa
    q = (p_left - p_right) / res.sum()
    # drop to each center: half of the first cell, then full cells
    drop = q * (np.cumsum(res) - 0.5 * res)
    return PressureSolution(p_left - drop, p0, float(q), False)


def solve_total_pressure_1d(grid: Grid, kappa_field, fp: FluidParams, P_left: float, P_right: float,
                            p_datum: float = 0.0) -> PressureSolution:
    """Same problem posed for the total pressure ``P = p0 + p*``.

    Boundary values of ``p*`` follow by subtracting the hydrostatic
    profile at the end faces.
    """
    p_left = P_left - _hydrostatic_at(grid.x_left, grid, fp, p_datum)
    p_right = P_right - _hydrostatic_at(grid.x_right, grid, fp, p_datum)
    return solve_pressure_1d(grid, kappa_field, fp, p_left, p_right, p_datum)


def _hydrostatic_at(x, grid: Grid, fp: FluidParams, p_datum: float, x_datum: float | None = None):
    x_datum = grid.x_right if x_datum is None else x_datum
    return p_datum + fp.rho_l * fp.g * (x_datum - np.asarray(x, dtype=float))


def hydrostatic(grid: Grid, fp: FluidParams, p_datum: float, x_datum: float | None = None) -> np.ndarray:
    """``p0 = p_datum + rho g (x_datum - x)`` at cell centers (datum defaults to the top end)."""
    return _hydrostatic_at(grid.centers, grid, fp, p_datum, x_datum)
