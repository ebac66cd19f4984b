"""Trajectory CSV and run-report files.

CSV layout (long format, header ``t,x,variable,value``):

* field rows ``u``, ``chi``, ``S`` (and ``p_star`` for coupled runs) at
  every ``every``-th knot and at the last knot, one row per cell;
* scalar rows with an empty ``x`` at every knot: ``mass``, ``max_S`` and,
  for coupled runs, ``q`` and ``clogged``; from the first step on also
  ``flux_left``, ``flux_right``, ``source_mass``, ``reaction_mass``,
  ``iterations`` and ``residual``.

Floats are written with ``repr`` so reading them back is exact, which
makes every report scalar recomputable from the CSV bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .evolution import Trajectory, blowup_crossing, mass_defect

__all__ = [
    "RunReport",
    "FieldHistory",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_report",
    "read_report",
    "report_scalars",
]

FIELD_VARS = ("u", "chi", "S")
KNOT_VARS = ("mass", "max_S")
STEP_VARS = ("flux_left", "flux_right", "source_mass", "reaction_mass", "iterations", "residual")


@dataclass
class RunReport:
    scenario: str
    digest: str
    status: str
    exit_code: int
    cells: int
    steps: int
    steps_completed: int
    tol: float
    iterations: list[int]
    mass_defect: float
    mass_tolerance: float
    max_S: float
    blowup_time: float | None
    blowup_knot_time: float | None
    extended_branch_time: float | None
    clogged: bool
    q_first: float | None
    q_last: float | None
    quadrature_defect: float
    safe_margin: float | None
    wall_time: float
    message: str = ""


class FieldHistory(NamedTuple):
    """Recorded knots of a run: ``times`` (k,), ``x`` (n,), fields (k, n)."""

    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    chi: np.ndarray
    S: np.ndarray

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "FieldHistory":
        return cls(traj.times, traj.grid.centers, traj.u, traj.chi, traj.S)


def _knots_to_write(n_knots: int, every: int) -> list[int]:
    idx = list(range(0, n_knots, every))
    if idx[-1] != n_knots - 1:
        idx.append(n_knots - 1)
    return idx


def write_trajectory_csv(path, traj: Trajectory, every: int = 1) -> None:
    path = Path(path)
    x = traj.grid.centers
    coupled = traj.q is not None
    fields = FIELD_VARS + (("p_star",) if coupled else ())
    mass, max_s = traj.mass, traj.max_S
    recorded = set(_knots_to_write(len(traj.times), every))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "x", "variable", "value"))
        for n, t in enumerate(traj.times):
            ts = repr(float(t))
            w.writerow((ts, "", "mass", repr(float(mass[n]))))
            w.writerow((ts, "", "max_S", repr(float(max_s[n]))))
            if coupled:
                w.writerow((ts, "", "q", repr(float(traj.q[n]))))
                w.writerow((ts, "", "clogged", int(traj.clogged[n])))
            if n > 0:
                j = n - 1
                for name, arr in (("flux_left", traj.flux_left), ("flux_right", traj.flux_right),
                                  ("source_mass", traj.source_mass), ("reaction_mass", traj.reaction_mass),
                                  ("residual", traj.residuals)):
                    w.writerow((ts, "", name, repr(float(arr[j]))))
                w.writerow((ts, "", "iterations", int(traj.iterations[j])))
            if n in recorded:
                for var in fields:
                    arr = getattr(traj, var)[n]
                    for xi, v in zip(x, arr):
                        w.writerow((ts, repr(float(xi)), var, repr(float(v))))


def read_trajectory_csv(path) -> tuple[FieldHistory, dict[str, np.ndarray]]:
    """Return the recorded fields and the per-knot scalar series."""
    scal: dict[str, dict[float, float]] = {}
    fld: dict[str, dict[float, list[tuple[float, float]]]] = {}
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["t", "x", "variable", "value"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for t, x, var, val in r:
            tf = float(t)
            if x == "":
                scal.setdefault(var, {})[tf] = float(val)
            else:
                fld.setdefault(var, {}).setdefault(tf, []).append((float(x), float(val)))
    series = {k: np.array([v[t] for t in sorted(v)]) for k, v in scal.items()}
    series["t"] = np.array(sorted(scal["mass"]))
    times = np.array(sorted(fld["u"]))
    x = np.array([p[0] for p in fld["u"][times[0]]])

    def stack(var):
        if var not in fld:
            return None
        return np.array([[p[1] for p in fld[var][t]] for t in times])

    return FieldHistory(times, x, stack("u"), stack("chi"), stack("S")), series


def report_scalars(series: dict[str, np.ndarray]) -> dict[str, float | None]:
    """Recompute the report numbers from CSV scalar series."""
    t = series["t"]
    knot, crossing = blowup_crossing(t, series["max_S"])
    return {
        "mass_defect": mass_defect(t, series["mass"], series["flux_left"], series["flux_right"],
                                   series["source_mass"], series["reaction_mass"]),
        "max_S": float(series["max_S"].max()),
        "blowup_time": crossing,
        "blowup_knot_time": knot,
        "iterations": [int(i) for i in series["iterations"]],
        "clogged": bool(series["clogged"].any()) if "clogged" in series else False,
    }


def write_report(path, report: RunReport) -> None:
    Path(path).write_text(json.dumps(asdict(report), indent=2, allow_nan=True) + "\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())
