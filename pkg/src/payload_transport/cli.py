"""Command line interface.

Exit codes: 0 success, 2 bad arguments/config/input file, 3 infeasible
mission (no path, no feasible time, controller singularity, numerical
blowup), 4 safety violation recorded in the trace. Errors are reported on
stderr as a one-line JSON object carrying a ``category``.
"""

import argparse
import csv
import json
import logging
import sys

from . import __version__
from .errors import (
    ConfigError,
    DomainError,
    GridParseError,
    NoFeasibleTimeError,
    NoPathError,
    NumericalBlowupError,
    SingularityError,
    InfeasibleThrustError,
    TransportError,
)
from .mission import fly, load_config, plan, prepare_maps, schedule, summary_json
from .route import WaypointPath
from .synthetic import SynthParams, synth_terrain
from .tempo import TimedTrajectory
from .terrain import dump_map

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_UNSAFE = 4

_INFEASIBLE = (NoPathError, NoFeasibleTimeError, SingularityError, NumericalBlowupError,
               InfeasibleThrustError)
_USAGE = (ConfigError, GridParseError, DomainError)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _write(path, text):
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def waypoint_table(wp: WaypointPath, times=None) -> str:
    """CSV with one row per waypoint: ``n,x,y,z`` and optionally ``t_n``."""
    lines = ["n,x,y,z" + (",t_n" if times is not None else "")]
    for n, p in enumerate(wp.points, start=1):
        row = [str(n)] + [repr(float(v)) for v in p]
        if times is not None:
            row.append(repr(float(times[n - 1])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def read_waypoint_table(path) -> TimedTrajectory:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows or "t_n" not in rows[0]:
        raise ConfigError(f"{path}: expected columns n,x,y,z,t_n")
    try:
        pts = [(float(r["x"]), float(r["y"]), float(r["z"])) for r in rows]
        times = tuple(float(r["t_n"]) for r in rows)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError(f"{path}: arrival times must start at 0 and increase")
    return TimedTrajectory(WaypointPath(pts), times)


def _fail(category, message, phase=None, code=EXIT_USAGE):
    payload = {"status": "error", "category": category, "message": message}
    if phase:
        payload["phase"] = phase
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def cmd_terrain(args):
    sp = SynthParams(
        width=args.width, length=args.length, cell=args.cell, seed=args.seed,
        density=args.density, height_min=args.height_min, height_max=args.height_max,
        relief=args.relief,
    )
    _write(args.out, dump_map(synth_terrain(sp)))
    return EXIT_OK


def cmd_plan(args):
    config = load_config(args.config)
    _, _, wp = plan(config)
    _write(args.out, waypoint_table(wp))
    return EXIT_OK


def cmd_time(args):
    config = load_config(args.config)
    _, _, wp = plan(config)
    traj = schedule(wp, config)
    _write(args.out, waypoint_table(wp, traj.times))
    return EXIT_OK


def _fly_and_report(config, maps, traj, args):
    trace = fly(traj, config, maps)
    if args.trace:
        fh, close = _open_out(args.trace)
        try:
            trace.write_csv(fh)
        finally:
            if close:
                fh.close()
    summary = trace.summary()
    summary["waypoints"] = len(traj.waypoints)
    _write(args.summary, summary_json(summary) + "\n")
    return EXIT_OK if trace.ok else EXIT_UNSAFE


def cmd_simulate(args):
    config = load_config(args.config)
    if args.times:
        traj = read_waypoint_table(args.times)
        maps = prepare_maps(config.load_terrain(), config.safety)
    else:
        maps, _, wp = plan(config)
        traj = schedule(wp, config)
    return _fly_and_report(config, maps, traj, args)


def cmd_run(args):
    config = load_config(args.config)
    maps, _, wp = plan(config)
    traj = schedule(wp, config)
    if args.times_out:
        _write(args.times_out, waypoint_table(wp, traj.times))
    return _fly_and_report(config, maps, traj, args)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="payload-transport",
        description="Plan, time and simulate quadcopter payload transport over elevation maps.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("terrain", help="write a synthetic urban elevation map")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=float, default=100.0)
    p.add_argument("--length", type=float, default=100.0)
    p.add_argument("--cell", type=float, default=1.0)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--height-min", type=float, default=5.0)
    p.add_argument("--height-max", type=float, default=20.0)
    p.add_argument("--relief", type=float, default=2.0)
    p.add_argument("--out", "-o", help="output file (default: stdout)")
    p.set_defaults(func=cmd_terrain)

    p = sub.add_parser("plan", help="print the simplified waypoint table")
    p.add_argument("config")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("time", help="print waypoints with minimum arrival times")
    p.add_argument("config")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_time)

    for name, func, text in (("simulate", cmd_simulate, "fly a timed trajectory"),
                             ("run", cmd_run, "plan, time and fly a mission")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        p.add_argument("--trace", help="trace CSV output file")
        p.add_argument("--summary", help="summary JSON output file (default: stdout)")
        if name == "simulate":
            p.add_argument("--times", help="waypoint table with t_n (from 'time'); "
                                           "planned from the config if omitted")
        else:
            p.add_argument("--times-out", help="also write the waypoint/time table here")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _INFEASIBLE as exc:
        return _fail(exc.category, str(exc), getattr(exc, "phase", None), EXIT_INFEASIBLE)
    except _USAGE as exc:
        return _fail(exc.category, str(exc), getattr(exc, "phase", None), EXIT_USAGE)
    except TransportError as exc:
        return _fail(exc.category, str(exc), getattr(exc, "phase", None), EXIT_INFEASIBLE)
    except OSError as exc:
        return _fail("io", str(exc))


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
