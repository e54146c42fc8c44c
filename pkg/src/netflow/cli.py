"""Command-line front end: run a scenario or an input network file, write the
series/event/probe reports and the final network.

Exit codes: 0 clean finish or handled event, 1 usage or input error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import scenarios
from .diagnostics import DensityProbe, monotonicity_check
from .errors import (
    AngleIterationDiverged,
    NetworkFlowError,
    ParseError,
    InvariantViolation,
    SingularSystem,
    StepRejected,
)
from .geometry import Network, is_tree
from .io import read_network, write_run_report
from .solver import FlowConfig, run


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _probe(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"probe must be 'x,y,t0', got {text!r}")
    return float(parts[0]), float(parts[1]), float(parts[2])


def build_parser():
    p = _Parser(prog="netflow", description=__doc__)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="network file to evolve")
    src.add_argument(
        "--scenario",
        choices=sorted(scenarios.SCENARIOS),
        help="built-in initial network",
    )
    p.add_argument("--a", type=float, default=2.0, help="endpoint half-width")
    p.add_argument("--b", type=float, default=1.0, help="endpoint half-height")
    p.add_argument("--bulge", type=float, default=0.3, help="initial junction offset")
    p.add_argument("--radius", type=float, default=1.0, help="scenario radius")
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--samples", type=int, default=100, metavar="M")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--surgery", choices=("on", "off"), default="off")
    p.add_argument("--delta", type=float, default=None, help="reopening offset")
    p.add_argument("--min-length-eps", type=float, default=None)
    p.add_argument(
        "--probe",
        action="append",
        default=[],
        type=_probe,
        metavar="X,Y,T0",
        help="density probe (repeatable)",
    )
    p.add_argument("--output-dir", default=None)
    p.add_argument("--log-events", default=None, metavar="PATH")
    p.add_argument("--seed", type=int, default=None, help="seed for --jitter")
    p.add_argument(
        "--jitter",
        type=float,
        default=0.0,
        help="perturb initial samples by this amplitude",
    )
    return p


def _build_initial(args) -> Network:
    if args.input:
        n = read_network(args.input)
        if not is_tree(n):
            raise InvariantViolation(
                "input network contains a loop; the flow runs on trees"
            )
        return n
    name = args.scenario
    if name == "section6":
        return scenarios.build_section6(args.a, args.b, args.bulge, m=args.samples)
    if name == "triod":
        return scenarios.standard_triod(radius=args.radius, m=args.samples)
    if name == "bowed-triod":
        return scenarios.bowed_triod(radius=args.radius, m=args.samples)
    if name == "semicircle":
        return scenarios.semicircle(radius=args.radius, m=args.samples)
    if name == "circle-validation":
        return scenarios.circle_validation(radius=args.radius, m=args.samples)
    raise _UsageError(f"unknown scenario {name!r}")


def _apply_jitter(n: Network, amplitude, seed):
    if amplitude <= 0:
        return n
    rng = np.random.default_rng(seed)
    for c in n.curves:
        bump = rng.normal(scale=amplitude, size=c.pts.shape)
        bump[0] = 0.0
        if not c.closed:
            bump[-1] = 0.0
        c.pts = c.pts + bump
        c._frame.clear()
    return n


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out_dir = args.output_dir or os.environ.get("NETFLOW_OUTPUT_DIR") or "netflow_out"

    try:
        n0 = _build_initial(args)
        n0 = _apply_jitter(n0, args.jitter, args.seed)
    except (_UsageError, ParseError, InvariantViolation, ValueError, OSError, NetworkFlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    cfg = FlowConfig(
        dt=args.dt,
        m=args.samples,
        t_end=args.t_end,
        surgery_enabled=args.surgery == "on",
        surgery_delta=args.delta,
        min_length_eps=args.min_length_eps,
    )

    try:
        traj = run(n0, cfg)
    except (StepRejected, AngleIterationDiverged, SingularSystem) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except NetworkFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    probe_reports = []
    try:
        for x, y, t0 in args.probe:
            probe_reports.append(
                monotonicity_check(traj, DensityProbe((x, y), t0))
            )
    except NetworkFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    summary = write_run_report(traj, out_dir, probe_reports)
    if args.log_events:
        from .io import write_events

        write_events(traj.events, args.log_events)

    for ev in traj.events:
        loc = "" if ev.location is None else f" at ({ev.location[0]:.4f}, {ev.location[1]:.4f})"
        cid = "" if ev.curve_id is None else f" curve={ev.curve_id}"
        print(f"event t={ev.time:.6f} {ev.kind.value}{loc}{cid}")
    print(
        f"finished: t={summary['t_final']:.6f}, steps={summary['steps']}, "
        f"events={len(traj.events)}, output={out_dir}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
