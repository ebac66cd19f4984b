"""Command-line entry point: ``hydrate-transport {run,compare,sweep,validate}``.

The log level is read from ``HYDRATE_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .output import read_trajectory_csv
from .runner import compare, run
from .scenario import ParseError, bundled_names, bundled_scenario, load_scenario

EXIT_USAGE = 1


def _resolve(ref: str):
    """A path, or the name of a bundled scenario."""
    p = Path(ref)
    if p.exists():
        return load_scenario(p)
    if ref in bundled_names():
        return bundled_scenario(ref)
    raise ParseError(f"{ref}: no such file or bundled scenario ({', '.join(bundled_names())})")


def _cmd_run(args) -> int:
    sc = _resolve(args.scenario).with_overrides(cells=args.nx, dt=args.dt, t_end=args.t_end,
                                                 every=args.every).validate()
    report, _ = run(sc, args.out)
    print(json.dumps({"scenario": report.scenario, "status": report.status, "max_S": report.max_S,
                      "blowup_time": report.blowup_time, "mass_defect": report.mass_defect}))
    return report.exit_code


def _cmd_compare(args) -> int:
    sc = _resolve(args.scenario).with_overrides(cells=args.nx)
    history, _ = read_trajectory_csv(args.traj)
    times = [float(t) for t in args.times.split(",")]
    x_range = tuple(float(v) for v in args.x_range.split(",")) if args.x_range else None
    rows = compare(sc, history, times, x_range=x_range)
    print("t,variable,L1,Linf,cells")
    for r in rows:
        print(f"{r.t!r},{r.variable},{r.L1!r},{r.Linf!r},{r.cells}")
    return 0


def _sweep_one(path: str, out: str) -> tuple[str, int]:
    sc = load_scenario(path)
    report, _ = run(sc, Path(out) / sc.name)
    return sc.name, report.exit_code


def _cmd_sweep(args) -> int:
    paths = sorted(str(p) for p in Path(args.directory).glob("*.yaml"))
    if not paths:
        print(f"no *.yaml scenarios in {args.directory}", file=sys.stderr)
        return EXIT_USAGE
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_sweep_one, paths, [args.out] * len(paths)))
    worst = 0
    for name, code in results:
        print(f"{name}: exit {code}")
        worst = max(worst, code)
    return worst


def _cmd_validate(args) -> int:
    sc = _resolve(args.scenario)
    print(f"{sc.name}: ok ({sc.grid.n_cells} cells, {sc.steps} steps, digest {sc.digest()})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hydrate-transport", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write trajectory CSV + report")
    p.add_argument("scenario", help="scenario file or bundled name (scenario_A ...)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--nx", type=int, help="override cells on the physical domain")
    p.add_argument("--dt", type=float, help="override the time step")
    p.add_argument("--t-end", type=float, dest="t_end", help="override the final time")
    p.add_argument("--every", type=int, help="write fields at every k-th knot (default from the file)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="errors of a trajectory CSV against the advection oracle")
    p.add_argument("scenario")
    p.add_argument("--traj", required=True, help="trajectory CSV written by run")
    p.add_argument("--times", required=True, help="comma-separated knot times")
    p.add_argument("--nx", type=int, help="cells override used for the run")
    p.add_argument("--x-range", dest="x_range", help="lo,hi restriction (must be oracle-valid)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="run every scenario in a directory")
    p.add_argument("directory")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="parse and validate a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("HYDRATE_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:  # includes parse, validation and oracle-window errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
