"""Network files, run reports and event logs.

Networks are stored as canonical JSON: ids sorted, floats rendered with
%.17g (lossless round trip), fixed layout.  Writing a file that was read
from canonical form reproduces it byte for byte.  Scalar series go to CSV,
events to line-delimited JSON records.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from .errors import InvariantViolation, ParseError
from .geometry import (
    ConvexPolygon,
    CurveSamples,
    Ellipse,
    Network,
    Vertex,
    VertexKind,
)

SCHEMA_VERSION = 1

_FILE_KINDS = {
    VertexKind.FIXED_ENDPOINT: "fixed_endpoint",
    VertexKind.TRIPLE_JUNCTION: "triple_junction",
}
_KIND_FROM_FILE = {v: k for k, v in _FILE_KINDS.items()}


def _fmt(x) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0  # canonicalize negative zero
    return "%.17g" % x


def _emit_domain(domain, out):
    if domain is None:
        out.append('  "domain": null,')
    elif isinstance(domain, Ellipse):
        out.append(
            f'  "domain": {{"type": "ellipse", "a": {_fmt(domain.a)}, '
            f'"b": {_fmt(domain.b)}}},'
        )
    elif isinstance(domain, ConvexPolygon):
        pts = ", ".join(
            f"[{_fmt(p[0])}, {_fmt(p[1])}]" for p in domain.vertices
        )
        out.append(f'  "domain": {{"type": "polygon", "vertices": [{pts}]}},')
    else:
        raise ValueError(f"unsupported domain type {type(domain)!r}")


def network_to_text(n: Network) -> str:
    """Canonical text form of a regular network."""
    n.validate(strict=True)
    out = ["{", f'  "schema": {SCHEMA_VERSION},']
    _emit_domain(n.domain, out)
    out.append('  "vertices": [')
    vs = sorted(n.vertices.values(), key=lambda v: v.id)
    for i, v in enumerate(vs):
        if v.kind not in _FILE_KINDS:
            raise InvariantViolation(
                f"vertex {v.id!r} has kind {v.kind.value!r}, not storable"
            )
        comma = "," if i < len(vs) - 1 else ""
        out.append(
            f'    {{"id": {json.dumps(v.id)}, "kind": "{_FILE_KINDS[v.kind]}", '
            f'"x": {_fmt(v.position[0])}, "y": {_fmt(v.position[1])}}}{comma}'
        )
    out.append("  ],")
    out.append('  "curves": [')
    cs = sorted(n.curves, key=lambda c: c.id)
    for i, c in enumerate(cs):
        comma = "," if i < len(cs) - 1 else ""
        out.append(
            f'    {{"id": {json.dumps(c.id)}, '
            f'"start": {json.dumps(c.start_vertex)}, '
            f'"end": {json.dumps(c.end_vertex)}, "samples": ['
        )
        for j, p in enumerate(c.pts):
            pc = "," if j < len(c.pts) - 1 else ""
            out.append(f"      [{_fmt(p[0])}, {_fmt(p[1])}]{pc}")
        out.append(f"    ]}}{comma}")
    out.append("  ]")
    out.append("}")
    return "\n".join(out) + "\n"


def write_network(n: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(network_to_text(n))


def _require(mapping, key, where, types=None):
    if key not in mapping:
        raise ParseError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if types is not None and not isinstance(value, types):
        raise ParseError(
            f"{where}: field {key!r} has type {type(value).__name__}, "
            f"expected {types}"
        )
    return value


def network_from_text(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    schema = _require(doc, "schema", "top level", int)
    if schema != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema version {schema}")

    domain_doc = doc.get("domain")
    domain = None
    if domain_doc is not None:
        dtype = _require(domain_doc, "type", "domain", str)
        if dtype == "ellipse":
            domain = Ellipse(
                _require(domain_doc, "a", "domain", (int, float)),
                _require(domain_doc, "b", "domain", (int, float)),
            )
        elif dtype == "polygon":
            domain = ConvexPolygon(
                np.asarray(_require(domain_doc, "vertices", "domain", list), float)
            )
        else:
            raise ParseError(f"domain: unknown type {dtype!r}")

    vertices = {}
    for i, vd in enumerate(_require(doc, "vertices", "top level", list)):
        where = f"vertices[{i}]"
        vid = _require(vd, "id", where, str)
        kind = _require(vd, "kind", where, str)
        if kind not in _KIND_FROM_FILE:
            raise ParseError(f"{where}: unknown kind {kind!r}")
        x = _require(vd, "x", where, (int, float))
        y = _require(vd, "y", where, (int, float))
        if vid in vertices:
            raise ParseError(f"{where}: duplicate vertex id {vid!r}")
        vertices[vid] = Vertex(vid, _KIND_FROM_FILE[kind], (x, y))

    curves = []
    for i, cd in enumerate(_require(doc, "curves", "top level", list)):
        where = f"curves[{i}]"
        cid = _require(cd, "id", where, str)
        start = _require(cd, "start", where, str)
        end = _require(cd, "end", where, str)
        samples = np.asarray(_require(cd, "samples", where, list), dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise ParseError(f"{where}: samples must be a list of [x, y] pairs")
        curves.append(
            CurveSamples(id=cid, start_vertex=start, end_vertex=end, pts=samples)
        )

    n = Network(vertices=vertices, curves=curves, domain=domain)
    n.validate(strict=True)
    return n


def read_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_text(fh.read())


# -- run reports ------------------------------------------------------------------


def write_series_csv(traj, path) -> None:
    ids = traj.curve_ids()
    header = (
        ["t"]
        + [f"L_{cid}" for cid in ids]
        + [
            "kappa_l2",
            "kappa_inf",
            "ds_kappa_l2",
            "junction_residual_max",
            "endpoint_kappa_sq",
        ]
    )
    lines = [",".join(header)]
    for row in traj.series:
        cells = [_fmt(row.t)]
        for cid in ids:
            cells.append(_fmt(row.lengths[cid]) if cid in row.lengths else "")
        cells += [
            _fmt(row.kappa_l2),
            _fmt(row.kappa_inf),
            _fmt(row.ds_kappa_l2),
            _fmt(row.junction_residual),
            _fmt(row.endpoint_kappa_sq),
        ]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_events(events, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.as_record(), sort_keys=True) + "\n")


def write_probe_reports(reports, path) -> None:
    lines = ["probe_index,x,y,t0,t,theta"]
    for i, rep in enumerate(reports):
        for t, theta in zip(rep.times, rep.values):
            lines.append(
                f"{i},{_fmt(rep.probe.p0[0])},{_fmt(rep.probe.p0[1])},"
                f"{_fmt(rep.probe.t0)},{_fmt(t)},{_fmt(theta)}"
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_run_report(traj, out_dir, probe_reports=()) -> dict:
    """Write series, events, probe reports and the final network under
    out_dir; returns the summary dict also stored as report.json."""
    os.makedirs(out_dir, exist_ok=True)
    write_series_csv(traj, os.path.join(out_dir, "series.csv"))
    write_events(traj.events, os.path.join(out_dir, "events.ndjson"))
    if probe_reports:
        write_probe_reports(probe_reports, os.path.join(out_dir, "probes.csv"))
    final = traj.final
    try:
        write_network(final, os.path.join(out_dir, "final_network.json"))
        final_stored = True
    except InvariantViolation:
        final_stored = False
    summary = {
        "config": dataclasses.asdict(traj.config) if traj.config else None,
        "steps": len(traj.series) - 1,
        "t_final": traj.series[-1].t if traj.series else 0.0,
        "events": [ev.as_record() for ev in traj.events],
        "final_network_stored": final_stored,
        "probes": [
            {
                "p0": [float(rep.probe.p0[0]), float(rep.probe.p0[1])],
                "t0": rep.probe.t0,
                "theta_hat": rep.theta_hat,
                "max_positive_jump": rep.max_positive_jump,
                "violation": rep.violation,
            }
            for rep in probe_reports
        ],
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
