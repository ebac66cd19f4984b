"""Scenario files: loading, validation and canonical dumping.

Scenarios are YAML documents.  Floats are read from their decimal text
with ``float()`` (correctly rounded), including forms such as ``1e-10``
that YAML 1.1 would otherwise read as strings.  Validation collects every
problem before raising, so a broken file reports all of its faults at once.

Grid convention: ``domain.cells`` counts cells on ``(x_left, x_right)``.
A pulse initial condition of length ``L`` extends the computational grid
upstream by ``ceil(L/h)`` cells of the same width.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .coupled import CoupledProblem
from .discrete_operator import Grid, OperatorCoefficients, OperatorError, assemble_operator
from .evolution import TimeGrid
from .oracle import AdvectionScenario, HypothesisViolated
from .phase_graph import PhaseLaw, Profile
from .pressure import FluidParams
from .stationary import METHODS, StationaryParams

__all__ = [
    "Scenario",
    "ParseError",
    "ValidationError",
    "load_scenario",
    "parse_scenario",
    "dump_scenario",
    "bundled_scenario",
    "bundled_names",
]

BUNDLED_DIR = Path(__file__).parent / "scenarios"


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, problems: list[str], source: str = "scenario"):
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{source}: {len(self.problems)} problem(s)\n{lines}")


class _Loader(yaml.SafeLoader):
    pass


_FLOAT = re.compile(
    r"""^[-+]?(?:(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[0-9][0-9_]*[eE][-+]?[0-9]+
        |\.(?:inf|Inf|INF)|\.(?:nan|NaN|NAN))$""",
    re.X,
)


def _construct_float(loader, node):
    text = loader.construct_scalar(node).replace("_", "")
    low = text.lower()
    if low.endswith(".inf"):
        return -math.inf if low.startswith("-") else math.inf
    if low.endswith(".nan"):
        return math.nan
    return float(text)


_Loader.yaml_implicit_resolvers = {
    k: [(tag, rx) for tag, rx in v if tag != "tag:yaml.org,2002:float"]
    for k, v in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_Loader.add_implicit_resolver("tag:yaml.org,2002:float", _FLOAT, list("-+0123456789."))
_Loader.add_constructor("tag:yaml.org,2002:float", _construct_float)


# ---------------------------------------------------------------- blocks


@dataclass(frozen=True)
class PressureSpec:
    p_left: float
    p_right: float
    kappa0: float
    mu: float
    rho_l: float = 1000.0
    g: float = 9.81
    perm_exponent: float = 3.0

    @property
    def fluid(self) -> FluidParams:
        return FluidParams(self.mu, self.rho_l, self.g, self.kappa0, self.perm_exponent)


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "zero"  # zero | constant | pulse | table
    value: float = 0.0
    chi_L: float = 0.0
    length: float = 0.0
    points: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class SourceSpec:
    kind: str = "zero"  # zero | constant | table
    value: float = 0.0
    points: tuple[tuple[float, float], ...] = ()
    t_off: float | None = None


@dataclass(frozen=True)
class OutputSpec:
    csv: str = "trajectory.csv"
    report: str = "report.json"
    every: int = 1


@dataclass(frozen=True)
class Scenario:
    name: str
    x_left: float
    x_right: float
    cells: int
    t_end: float
    steps: int
    law: PhaseLaw
    diffusion: float = 0.0
    velocity: float | str = 0.0  # a number or "pressure_driven"
    reaction: float = 0.0
    bc_left: float | None = 0.0
    bc_right: float | None = 0.0
    pressure: PressureSpec | None = None
    initial: InitialSpec = InitialSpec()
    source: SourceSpec = SourceSpec()
    solver: StationaryParams = StationaryParams()
    output: OutputSpec = OutputSpec()
    oracle: bool = False
    freeze_permeability: bool = False
    description: str = ""

    # ------------------------------------------------------------ derived

    @property
    def pressure_driven(self) -> bool:
        return self.velocity == "pressure_driven"

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / self.cells

    @property
    def upstream_cells(self) -> int:
        if self.initial.kind != "pulse" or self.initial.length == 0.0:
            return 0
        return int(math.ceil(self.initial.length / self.h - 1e-9))

    @property
    def grid(self) -> Grid:
        k = self.upstream_cells
        return Grid(self.x_left - k * self.h, self.x_right, self.cells + k)

    @property
    def physical_cells(self) -> slice:
        return slice(self.upstream_cells, None)

    @property
    def grid_law(self) -> PhaseLaw:
        """The law used on the computational grid.

        Upstream of ``x_left`` (pulse padding) ``chi*`` and porosity are held
        at their ``x_left`` values; the pulse is undersaturated there, and an
        affine continuation could cross ``R``.
        """
        if self.upstream_cells == 0:
            return self.law

        def clamp(p: Profile) -> Profile:
            if p.table is not None or p.slope == 0.0:
                return p
            return Profile.tabulated([(self.x_left, float(p(self.x_left))), (self.x_right, float(p(self.x_right)))])

        return replace(self.law, chi_star=clamp(self.law.chi_star), phi=clamp(self.law.phi))

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid.uniform(0.0, self.t_end, self.steps)

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    def coefficients(self, velocity: float | None = None) -> OperatorCoefficients:
        v = 0.0 if self.pressure_driven else float(self.velocity)
        return OperatorCoefficients(
            diffusion=self.diffusion,
            velocity=v if velocity is None else velocity,
            reaction=self.reaction,
            dirichlet_left=self.bc_left,
            dirichlet_right=self.bc_right,
        )

    def operator(self):
        return assemble_operator(self.grid, self.coefficients())

    def initial_field(self) -> np.ndarray:
        g, ini = self.grid, self.initial
        if ini.kind == "zero":
            return np.zeros(g.n_cells)
        if ini.kind == "constant":
            return np.full(g.n_cells, float(ini.value))
        if ini.kind == "pulse":
            # dissolved fraction chi_L upstream of x_left, nothing inside
            x0 = self.x_left
            return g.cell_average(lambda x: np.where(x < x0, ini.chi_L * self.grid_law.phi(x), 0.0))
        xs = np.array([p[0] for p in ini.points])
        vs = np.array([p[1] for p in ini.points])
        return g.cell_average(lambda x: np.interp(x, xs, vs))

    def source_function(self):
        src, g = self.source, self.grid
        if src.kind == "zero":
            return None
        if src.kind == "constant":
            base = np.full(g.n_cells, float(src.value))
        else:
            xs = np.array([p[0] for p in src.points])
            vs = np.array([p[1] for p in src.points])
            base = g.cell_average(lambda x: np.interp(x, xs, vs))
        if src.t_off is None:
            return base
        zero = np.zeros_like(base)
        return lambda t: base if t <= src.t_off else zero

    def advection_scenario(self) -> AdvectionScenario:
        return AdvectionScenario(
            chi_L=self.initial.chi_L, L=self.initial.length, q=float(self.velocity),
            law=self.law, D_max=self.x_right,
        )

    def coupled_problem(self) -> CoupledProblem:
        p = self.pressure
        return CoupledProblem(
            grid=self.grid, law=self.grid_law, coeffs=self.coefficients(), fluid=p.fluid,
            p_left=p.p_left, p_right=p.p_right, u0=self.initial_field(),
            F=self.source_function(), time_grid=self.time_grid, params=self.solver,
            freeze_permeability=self.freeze_permeability,
        )

    def with_overrides(self, *, cells: int | None = None, dt: float | None = None,
                       t_end: float | None = None, steps: int | None = None,
                       every: int | None = None) -> "Scenario":
        t_end = self.t_end if t_end is None else float(t_end)
        if steps is None:
            step = self.t_end / self.steps if dt is None else float(dt)
            steps = max(1, int(round(t_end / step)))
        output = self.output if every is None else replace(self.output, every=int(every))
        return replace(self, cells=self.cells if cells is None else int(cells), t_end=t_end, steps=steps,
                       output=output)

    def digest(self) -> str:
        return hashlib.sha256(dump_scenario(self).encode()).hexdigest()[:16]

    # ------------------------------------------------------------ checks

    def problems(self) -> list[str]:
        out: list[str] = []
        if not self.x_right > self.x_left:
            out.append("domain: x_right must exceed x_left")
        if self.cells < 2:
            out.append("domain: cells must be >= 2")
        if not self.t_end > 0.0:
            out.append("time: t_end must be positive")
        if self.steps < 1:
            out.append("time: steps must be >= 1")
        if out:
            return out
        out += [f"phase_law: {m}" for m in self.law.violations(self.x_left, self.x_right)]
        if self.diffusion < 0.0:
            out.append("transport: diffusion must be >= 0")
        if self.reaction < 0.0:
            out.append("transport: reaction must be >= 0")

        if self.pressure_driven:
            p = self.pressure
            if p is None:
                out.append("pressure: block required when velocity is pressure_driven")
            else:
                if not p.mu > 0.0:
                    out.append("pressure: mu must be positive")
                if not p.kappa0 > 0.0:
                    out.append("pressure: kappa0 must be positive")
                if p.perm_exponent < 0.0:
                    out.append("pressure: perm_exponent must be >= 0")
                flow = p.p_left - p.p_right
                side = "left" if flow > 0 else "right"
                if flow != 0.0 and (self.bc_left if flow > 0 else self.bc_right) is None:
                    out.append(f"boundary: inflow side ({side}) needs a chi value")
        elif not isinstance(self.velocity, (int, float)):
            out.append(f"transport: velocity must be a number or 'pressure_driven', got {self.velocity!r}")
        elif self.diffusion == 0.0 and self.velocity != 0.0:
            inflow, outflow = ("left", "right") if self.velocity > 0 else ("right", "left")
            bc = {"left": self.bc_left, "right": self.bc_right}
            if bc[inflow] is None:
                out.append(f"boundary: pure advection needs a chi value on the inflow side ({inflow})")
            if bc[outflow] is not None:
                out.append(f"boundary: pure advection takes no condition on the outflow side ({outflow})")
        if self.diffusion > 0.0 and (self.bc_left is None or self.bc_right is None):
            out.append("boundary: diffusion needs chi values on both ends")

        ini = self.initial
        if ini.kind not in ("zero", "constant", "pulse", "table"):
            out.append(f"initial: unknown kind {ini.kind!r}")
        if ini.kind == "pulse" and ini.length < 0.0:
            out.append("initial: pulse length must be >= 0")
        if ini.kind == "table" and not ini.points:
            out.append("initial: table needs points")
        src = self.source
        if src.kind not in ("zero", "constant", "table"):
            out.append(f"source: unknown kind {src.kind!r}")
        if src.kind == "table" and not src.points:
            out.append("source: table needs points")
        if self.output.every < 1:
            out.append("output: every must be >= 1")

        if self.oracle:
            out += self._oracle_problems()
        if not out and not self.pressure_driven:
            try:
                self.operator()
            except OperatorError as exc:
                out.append(f"transport: {exc}")
        return out

    def _oracle_problems(self) -> list[str]:
        out = []
        if self.pressure_driven or not isinstance(self.velocity, (int, float)) or not self.velocity > 0:
            out.append("oracle: needs a fixed velocity q > 0")
        if self.diffusion != 0.0 or self.reaction != 0.0:
            out.append("oracle: needs pure advection (diffusion = reaction = 0)")
        if self.initial.kind != "pulse":
            out.append("oracle: needs a pulse initial condition")
        if self.source.kind != "zero":
            out.append("oracle: needs a zero source")
        if self.bc_left != 0.0:
            out.append("oracle: needs a zero inflow value on the left")
        if self.x_left != 0.0:
            out.append("oracle: the reservoir must start at x = 0")
        if out:
            return out
        try:
            self.advection_scenario().check_hypothesis()
        except HypothesisViolated as exc:
            out.append(f"oracle: {exc}")
        except ValueError as exc:
            out.append(f"oracle: {exc}")
        return out

    def validate(self) -> "Scenario":
        probs = self.problems()
        if probs:
            raise ValidationError(probs, self.name)
        return self


# ----------------------------------------------------------------- parsing


def _profile(raw, where: str, problems: list[str]) -> Profile | None:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return Profile.constant(raw)
    if isinstance(raw, dict):
        if "table" in raw:
            try:
                return Profile.tabulated(raw["table"])
            except (TypeError, ValueError) as exc:
                problems.append(f"{where}: bad table ({exc})")
                return None
        try:
            return Profile.affine(raw.get("intercept", 0.0), raw.get("slope", 0.0))
        except (TypeError, ValueError) as exc:
            problems.append(f"{where}: {exc}")
            return None
    problems.append(f"{where}: expected a number or a mapping")
    return None


def _profile_dict(p: Profile):
    if p.table is not None:
        return {"table": [list(t) for t in p.table]}
    if p.slope == 0.0:
        return p.intercept
    return {"intercept": p.intercept, "slope": p.slope}


def _block(raw: dict, key: str, cls, problems: list[str], convert=None):
    data = raw.get(key) or {}
    if not isinstance(data, dict):
        problems.append(f"{key}: expected a mapping")
        return cls()
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        problems.append(f"{key}: unknown keys {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k in names}
    if convert:
        kwargs = convert(kwargs)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{key}: {exc}")
        return None


def _points(kw):
    if "points" in kw:
        kw["points"] = tuple(tuple(float(v) for v in p) for p in kw["points"])
    return kw


def _solver(kw):
    if kw.get("continuation") is not None:
        kw["continuation"] = tuple(tuple(float(v) for v in p) for p in kw["continuation"])
    return kw


def parse_scenario(text: str, source: str = "scenario") -> Scenario:
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ParseError(f"{source}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{source}: top level must be a mapping")
    problems: list[str] = []
    known = {"name", "description", "domain", "time", "phase_law", "transport", "pressure",
             "boundary", "initial", "source", "solver", "output", "oracle", "freeze_permeability"}
    extra = set(raw) - known
    if extra:
        problems.append(f"unknown top-level keys {sorted(extra)}")

    def need(block, key):
        b = raw.get(block) or {}
        if key not in b:
            problems.append(f"{block}: missing {key}")
            return None
        return b[key]

    x_left, x_right, cells = need("domain", "x_left"), need("domain", "x_right"), need("domain", "cells")
    t_end, steps = need("time", "t_end"), need("time", "steps")

    pl = raw.get("phase_law") or {}
    law = None
    chi_star = _profile(pl.get("chi_star"), "phase_law.chi_star", problems) if "chi_star" in pl else None
    if chi_star is None and "chi_star" not in pl:
        problems.append("phase_law: missing chi_star")
    phi = _profile(pl.get("porosity", 1.0), "phase_law.porosity", problems)
    if "R" not in pl:
        problems.append("phase_law: missing R")
    elif chi_star is not None and phi is not None:
        try:
            law = PhaseLaw(chi_star, float(pl["R"]), phi, float(pl.get("extension_slope", 1.0)))
        except (TypeError, ValueError) as exc:
            problems.append(f"phase_law: {exc}")

    tr = raw.get("transport") or {}
    bc = raw.get("boundary") or {}
    pressure = None
    if raw.get("pressure") is not None:
        pressure = _block(raw, "pressure", PressureSpec, problems)
    initial = _block(raw, "initial", InitialSpec, problems, _points)
    src = _block(raw, "source", SourceSpec, problems, _points)
    output = _block(raw, "output", OutputSpec, problems)
    solver = _block(raw, "solver", StationaryParams, problems, _solver)
    if solver is not None and solver.method not in METHODS:
        problems.append(f"solver: method must be one of {METHODS}")

    if problems or law is None:
        raise ValidationError(problems or ["phase_law: incomplete"], source)
    sc = Scenario(
        name=str(raw.get("name", Path(source).stem)),
        description=str(raw.get("description", "")),
        x_left=float(x_left), x_right=float(x_right), cells=int(cells),
        t_end=float(t_end), steps=int(steps), law=law,
        diffusion=float(tr.get("diffusion", 0.0)),
        velocity=tr.get("velocity", 0.0) if tr.get("velocity") == "pressure_driven" else float(tr.get("velocity", 0.0)),
        reaction=float(tr.get("reaction", 0.0)),
        bc_left=None if bc.get("left", 0.0) is None else float(bc.get("left", 0.0)),
        bc_right=None if bc.get("right", 0.0) is None else float(bc.get("right", 0.0)),
        pressure=pressure, initial=initial, source=src, solver=solver, output=output,
        oracle=bool(raw.get("oracle", False)),
        freeze_permeability=bool(raw.get("freeze_permeability", False)),
    )
    return sc.validate()


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_scenario(text, str(path))


def _scenario_dict(sc: Scenario) -> dict[str, Any]:
    law = sc.law
    d: dict[str, Any] = {
        "name": sc.name,
        "description": sc.description,
        "domain": {"x_left": sc.x_left, "x_right": sc.x_right, "cells": sc.cells},
        "time": {"t_end": sc.t_end, "steps": sc.steps},
        "phase_law": {
            "chi_star": _profile_dict(law.chi_star),
            "R": law.R,
            "porosity": _profile_dict(law.phi),
            "extension_slope": law.extension_slope,
        },
        "transport": {"diffusion": sc.diffusion, "velocity": sc.velocity, "reaction": sc.reaction},
        "boundary": {"left": sc.bc_left, "right": sc.bc_right},
        "initial": _plain(sc.initial),
        "source": _plain(sc.source),
        "solver": _plain(sc.solver),
        "output": _plain(sc.output),
        "oracle": sc.oracle,
        "freeze_permeability": sc.freeze_permeability,
    }
    if sc.pressure is not None:
        d["pressure"] = _plain(sc.pressure)
    return d


def _plain(obj) -> dict[str, Any]:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = [list(p) if isinstance(p, tuple) else p for p in v]
        out[f.name] = v
    return out


def dump_scenario(sc: Scenario) -> str:
    """Canonical YAML text; ``parse_scenario(dump_scenario(sc)) == sc``."""
    return yaml.safe_dump(_scenario_dict(sc), sort_keys=False, default_flow_style=None)


def bundled_names() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.yaml"))


def bundled_scenario(name: str) -> Scenario:
    path = BUNDLED_DIR / f"{name}.yaml"
    if not path.exists():
        raise ParseError(f"no bundled scenario {name!r}; available: {bundled_names()}")
    return load_scenario(path)
