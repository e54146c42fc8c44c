"""Singularity detection and surgery.

Detection watches the per-step scalar series of a run: a curve length
falling under the collapse threshold with bounded curvature is a topological
(Type-0) event, a sup-norm excursion above the blow-up threshold is a
curvature blow-up, and a window of vanishing curvature with satisfied angle
conditions is a steady state.

Surgery replaces a collapsed inner curve by a 4-point and reopens the
4-point into two fresh triple junctions joined by a short curve along the
transverse pairing of the arms; the boundary variants do the analogous thing
at a fixed endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    NoAdmissibleOpening,
    NotBoundaryCurve,
    NotCollapsedEndpoint,
    NotFourPoint,
    NotInnerCurve,
    NotShortEnough,
)
from .geometry import (
    CurveSamples,
    Network,
    Vertex,
    VertexKind,
    length,
    outward_tangent,
)

TWO_THIRDS_PI = 2.0 * math.pi / 3.0
ADMIT_TOL = 0.2  # radians; 60/120 gap recognition for reopening


class EventKind(Enum):
    TYPE0_INTERIOR = "type0_interior"
    BOUNDARY_COLLAPSE = "boundary_collapse"
    CURVATURE_BLOWUP = "curvature_blowup"
    EXTINCTION = "extinction"
    STEADY_STATE = "steady_state"


@dataclass
class FlowEvent:
    kind: EventKind
    time: float
    location: np.ndarray | None = None
    curve_id: str | None = None
    kappa_inf_window: list = field(default_factory=list)
    blowup_exponent: float | None = None

    def as_record(self):
        return {
            "time": self.time,
            "kind": self.kind.value,
            "location": None if self.location is None else [float(x) for x in self.location],
            "curve": self.curve_id,
            "kappa_inf_window": [float(k) for k in self.kappa_inf_window],
            "blowup_exponent": self.blowup_exponent,
        }


@dataclass
class DetectionWindow:
    """Rolling tail of the scalar series, plus the current network."""

    closed_mode: bool
    network: Network
    times: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    kappa_inf: list = field(default_factory=list)
    junction_residuals: list = field(default_factory=list)
    maxlen: int = 200

    def push(self, row):
        self.times.append(row.t)
        self.lengths.append(row.lengths)
        self.kappa_inf.append(row.kappa_inf)
        self.junction_residuals.append(row.junction_residual)
        if len(self.times) > self.maxlen:
            del self.times[0]
            del self.lengths[0]
            del self.kappa_inf[0]
            del self.junction_residuals[0]

    def reset(self, network):
        self.network = network
        self.times.clear()
        self.lengths.clear()
        self.kappa_inf.clear()
        self.junction_residuals.clear()


def _blowup_exponent(times, kappa_inf):
    """Least-squares estimate of the blow-up time from 1/kappa_inf^4 vs t,
    then the exponent of kappa_inf^2 against 1/(T_hat - t)."""
    t = np.asarray(times, dtype=float)
    k = np.asarray(kappa_inf, dtype=float)
    good = k > 0
    if good.sum() < 3:
        return None
    t, k = t[good], k[good]
    y = 1.0 / k**4
    a, b = np.polynomial.polynomial.polyfit(t, y, 1)
    if b >= 0:
        return None
    t_hat = -a / b
    mask = t_hat - t > 0
    if mask.sum() < 3:
        return None
    x = -np.log(t_hat - t[mask])
    z = np.log(k[mask] ** 2)
    _, slope = np.polynomial.polynomial.polyfit(x, z, 1)
    return float(slope)


def detect(window: DetectionWindow, cfg) -> FlowEvent | None:
    """Inspect the last cfg.detect_window rows; None when nothing fired."""
    w = cfg.detect_window
    if len(window.times) < w:
        return None
    times = window.times[-w:]
    kinf = window.kappa_inf[-w:]
    t_now = times[-1]
    n = window.network

    if window.closed_mode:
        total = sum(window.lengths[-1].values())
        if kinf[-1] > cfg.curvature_blowup_k or total < cfg.min_length_eps:
            c = n.curves[0]
            return FlowEvent(
                kind=EventKind.EXTINCTION,
                time=t_now,
                location=c.pts.mean(axis=0),
                curve_id=c.id,
                kappa_inf_window=list(kinf),
                blowup_exponent=_blowup_exponent(times, kinf),
            )
        return None

    if kinf[-1] > cfg.curvature_blowup_k:
        idx = int(np.argmax(np.abs(n.curves[0].kappa)))
        worst = n.curves[0]
        for c in n.curves:
            if np.abs(c.kappa).max() >= np.abs(worst.kappa).max():
                worst = c
        idx = int(np.argmax(np.abs(worst.kappa)))
        return FlowEvent(
            kind=EventKind.CURVATURE_BLOWUP,
            time=t_now,
            location=worst.pts[idx].copy(),
            curve_id=worst.id,
            kappa_inf_window=list(kinf),
            blowup_exponent=_blowup_exponent(times, kinf),
        )

    lengths_now = window.lengths[-1]
    short = [cid for cid, L in lengths_now.items() if L < cfg.min_length_eps]
    if short and max(kinf) < cfg.curvature_blowup_k:
        # one event per step, shortest first
        cid = min(short, key=lambda c: lengths_now[c])
        c = n.curve(cid)
        kinds = (
            n.vertices[c.start_vertex].kind,
            n.vertices[c.end_vertex].kind,
        )
        if kinds == (VertexKind.TRIPLE_JUNCTION, VertexKind.TRIPLE_JUNCTION):
            kind = EventKind.TYPE0_INTERIOR
        elif VertexKind.FIXED_ENDPOINT in kinds and VertexKind.TRIPLE_JUNCTION in kinds:
            kind = EventKind.BOUNDARY_COLLAPSE
        else:
            return None
        s = c.arclengths()
        mid = np.array(
            [
                np.interp(0.5 * s[-1], s, c.pts[:, 0]),
                np.interp(0.5 * s[-1], s, c.pts[:, 1]),
            ]
        )
        return FlowEvent(
            kind=kind,
            time=t_now,
            location=mid,
            curve_id=cid,
            kappa_inf_window=list(kinf),
        )

    jres = window.junction_residuals[-w:]
    if max(kinf) < cfg.steady_tol and max(jres) < cfg.angle_tol:
        return FlowEvent(
            kind=EventKind.STEADY_STATE,
            time=t_now,
            kappa_inf_window=list(kinf),
        )
    return None


# -- surgery -------------------------------------------------------------------


def _decay_weights(n_pts, k, plateau=3):
    """1 on the first nodes, smooth decay to 0 at index k, 0 beyond."""
    w = np.zeros(n_pts)
    plateau = min(plateau, k - 1)
    w[: plateau + 1] = 1.0
    j = np.arange(plateau + 1, k + 1)
    if len(j):
        w[j] = 0.5 * (1.0 + np.cos(math.pi * (j - plateau) / (k - plateau)))
    return w


def _end_first(pts, at_start):
    return pts if at_start else pts[::-1]


def _adjust_end(pts, new_end, target_dir=None, frac=0.35):
    """Translate the leading sample of an end-first point array to new_end
    and optionally rotate the leading region so the outward end tangent
    matches target_dir; both adjustments decay to zero along the curve."""
    q = np.array(pts, dtype=float, copy=True)
    n = len(q)
    k = min(max(6, int(frac * (n - 1))), n - 2)
    w = _decay_weights(n, k)
    q += w[:, None] * (np.asarray(new_end, dtype=float) - q[0])
    if target_dir is not None:
        cur = _end_direction(q)
        tgt = np.asarray(target_dir, dtype=float)
        tgt = tgt / np.linalg.norm(tgt)
        ang = math.atan2(
            cur[0] * tgt[1] - cur[1] * tgt[0], float(np.dot(cur, tgt))
        )
        if ang != 0.0:
            rel = q - q[0]
            th = w * ang
            ca, sa = np.cos(th), np.sin(th)
            rot = np.empty_like(rel)
            rot[:, 0] = ca * rel[:, 0] - sa * rel[:, 1]
            rot[:, 1] = sa * rel[:, 0] + ca * rel[:, 1]
            q = q[0] + rot
    return q


def _end_direction(pts):
    """Outward unit tangent at the leading node of an end-first array,
    one-sided second-order stencil."""
    a = np.linalg.norm(pts[1] - pts[0])
    b = np.linalg.norm(pts[2] - pts[1])
    w0 = -(2 * a + b) / (a * (a + b))
    w1 = (a + b) / (a * b)
    w2 = -a / (b * (a + b))
    v = w0 * pts[0] + w1 * pts[1] + w2 * pts[2]
    return v / np.linalg.norm(v)


def _reattach(c: CurveSamples, at_start, new_pos, target_dir=None):
    pts = _end_first(c.pts, at_start)
    q = _adjust_end(pts, new_pos, target_dir)
    if not at_start:
        q = q[::-1].copy()
    return c.with_points(q)


def _angdist(u, v):
    d = float(np.clip(np.dot(u, v), -1.0, 1.0))
    return math.acos(d)


def collapse_interior(n: Network, curve_id: str, min_length_eps: float) -> Network:
    """Remove a short inner curve and merge its two triple junctions into a
    4-point at the curve midpoint; the four surviving arms are reprojected
    so opposite pairs have antipodal outward tangents."""
    try:
        c = n.curve(curve_id)
    except KeyError:
        for v in n.vertices.values():
            if v.kind is VertexKind.FOUR_POINT and v.meta.get("from_curve") == curve_id:
                return n  # idempotent on the merged state
        raise
    v1 = n.vertices[c.start_vertex]
    v2 = n.vertices[c.end_vertex]
    if (
        v1.kind is not VertexKind.TRIPLE_JUNCTION
        or v2.kind is not VertexKind.TRIPLE_JUNCTION
    ):
        raise NotInnerCurve(
            f"curve {curve_id!r} does not join two triple junctions"
        )
    if length(c) >= min_length_eps:
        raise NotShortEnough(
            f"curve {curve_id!r} has length {length(c):.3e} >= {min_length_eps:.3e}"
        )

    s = c.arclengths()
    center = np.array(
        [
            np.interp(0.5 * s[-1], s, c.pts[:, 0]),
            np.interp(0.5 * s[-1], s, c.pts[:, 1]),
        ]
    )
    gap = v2.position - v1.position
    if np.linalg.norm(gap) > 1e-14:
        collapsed_dir = gap / np.linalg.norm(gap)
    else:
        collapsed_dir = c.tau.mean(axis=0)
        collapsed_dir /= np.linalg.norm(collapsed_dir)

    side_a = [
        (cc, at_start)
        for cc, at_start in n.incident_ends(v1.id)
        if cc.id != curve_id
    ]
    side_b = [
        (cc, at_start)
        for cc, at_start in n.incident_ends(v2.id)
        if cc.id != curve_id
    ]
    if len(side_a) != 2 or len(side_b) != 2:
        raise NotInnerCurve(f"junctions of {curve_id!r} are not 3-valent")

    # phase 1: translate all arm ends to the merge point, read off directions
    moved = {}
    dirs = {}
    for cc, at_start in side_a + side_b:
        mc = _reattach(cc, at_start, center)
        moved[(cc.id, at_start)] = (cc, at_start)
        dirs[(cc.id, at_start)] = outward_tangent(mc, at_start)

    # phase 2: antipodal pairing across the two sides (minimal total rotation)
    keys_a = [(cc.id, at_start) for cc, at_start in side_a]
    keys_b = [(cc.id, at_start) for cc, at_start in side_b]

    def pairing_cost(assignment):
        return sum(
            _angdist(dirs[ka], -dirs[kb]) for ka, kb in assignment
        )

    straight = [(keys_a[0], keys_b[0]), (keys_a[1], keys_b[1])]
    crossed = [(keys_a[0], keys_b[1]), (keys_a[1], keys_b[0])]
    pairs = straight if pairing_cost(straight) <= pairing_cost(crossed) else crossed

    targets = {}
    for ka, kb in pairs:
        axis = dirs[ka] - dirs[kb]
        axis /= np.linalg.norm(axis)
        targets[ka] = axis
        targets[kb] = -axis

    v4_id = f"x_{v1.id}_{v2.id}"
    new_curves = []
    for cc in n.curves:
        if cc.id == curve_id:
            continue
        key_s = (cc.id, True)
        key_e = (cc.id, False)
        if key_s in targets:
            cc = _reattach(cc, True, center, targets[key_s])
            cc.start_vertex = v4_id
        if key_e in targets:
            cc = _reattach(cc, False, center, targets[key_e])
            cc.end_vertex = v4_id
        new_curves.append(cc)

    vertices = {
        vid: v for vid, v in n.vertices.items() if vid not in (v1.id, v2.id)
    }
    vertices[v4_id] = Vertex(
        v4_id,
        VertexKind.FOUR_POINT,
        center,
        meta={
            "collapsed_direction": (float(collapsed_dir[0]), float(collapsed_dir[1])),
            "from_curve": curve_id,
            "sides": (tuple(keys_a), tuple(keys_b)),
        },
    )
    out = Network(vertices=vertices, curves=new_curves, domain=n.domain)
    out.validate(strict=False)
    return out


def _gap_pattern_ok(dirs, tol=ADMIT_TOL):
    """Check the four outward directions sit in the 60/120 configuration."""
    ang = sorted(math.atan2(d[1], d[0]) % (2 * math.pi) for d in dirs)
    gaps = [
        (ang[(i + 1) % 4] - ang[i]) % (2 * math.pi) for i in range(4)
    ]
    labels = []
    for g in gaps:
        if abs(g - math.pi / 3) < tol:
            labels.append(60)
        elif abs(g - TWO_THIRDS_PI) < tol:
            labels.append(120)
        else:
            return False
    return labels.count(60) == 2 and labels[0] != labels[1] and labels[1] != labels[2]


def reopen_cross(n: Network, vertex_id: str, delta: float, m: int | None = None) -> Network:
    """Open a 4-point into two triple junctions at distance delta joined by a
    new curve; the arms are re-paired across the two pre-collapse sides (the
    pairing transverse to the collapsed direction) and their end tangents
    reprojected to exact 120-degree compliance."""
    v = n.vertices.get(vertex_id)
    if v is None or v.kind is not VertexKind.FOUR_POINT:
        raise NotFourPoint(f"vertex {vertex_id!r} is not a 4-point")
    if delta == 0.0:
        return n
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")

    ends = n.incident_ends(vertex_id)
    if len(ends) != 4:
        raise NotFourPoint(f"vertex {vertex_id!r} has {len(ends)} curve ends")
    dirs = {
        (c.id, at_start): outward_tangent(c, at_start) for c, at_start in ends
    }
    if not _gap_pattern_ok(list(dirs.values())):
        raise NoAdmissibleOpening(
            f"arms of {vertex_id!r} are not in the 60/120 position"
        )

    sides = v.meta.get("sides")
    if sides is not None:
        keys_a = [tuple(k) for k in sides[0]]
        keys_b = [tuple(k) for k in sides[1]]
        # pair each first-side arm with the angularly nearest other-side arm
        d00 = _angdist(dirs[keys_a[0]], dirs[keys_b[0]]) + _angdist(
            dirs[keys_a[1]], dirs[keys_b[1]]
        )
        d01 = _angdist(dirs[keys_a[0]], dirs[keys_b[1]]) + _angdist(
            dirs[keys_a[1]], dirs[keys_b[0]]
        )
        if d00 <= d01:
            groups = [
                (keys_a[0], keys_b[0]),
                (keys_a[1], keys_b[1]),
            ]
        else:
            groups = [
                (keys_a[0], keys_b[1]),
                (keys_a[1], keys_b[0]),
            ]
    else:
        # no collapse metadata: group the arms bounding each 60-degree gap
        keys = list(dirs)
        ang = sorted(
            keys, key=lambda k: math.atan2(dirs[k][1], dirs[k][0]) % (2 * math.pi)
        )
        gaps = []
        for i in range(4):
            a = math.atan2(dirs[ang[i]][1], dirs[ang[i]][0]) % (2 * math.pi)
            b = math.atan2(
                dirs[ang[(i + 1) % 4]][1], dirs[ang[(i + 1) % 4]][0]
            ) % (2 * math.pi)
            gaps.append(((b - a) % (2 * math.pi), i))
        narrow = sorted(g for g in gaps if g[0] < math.pi / 2)
        if len(narrow) != 2:
            raise NoAdmissibleOpening(
                f"arms of {vertex_id!r} admit no transverse pairing"
            )
        groups = [
            (ang[narrow[0][1]], ang[(narrow[0][1] + 1) % 4]),
            (ang[narrow[1][1]], ang[(narrow[1][1] + 1) % 4]),
        ]

    b1 = dirs[groups[0][0]] + dirs[groups[0][1]]
    b1 /= np.linalg.norm(b1)
    centers = {0: v.position + 0.5 * delta * b1, 1: v.position - 0.5 * delta * b1}

    j_ids = (f"{vertex_id}_a", f"{vertex_id}_b")
    stub_id = f"{vertex_id}_stub"
    if m is None:
        m = min(c.m for c, _ in ends)

    def rot(u, ang):
        ca, sa = math.cos(ang), math.sin(ang)
        return np.array([ca * u[0] - sa * u[1], sa * u[0] + ca * u[1]])

    reattach_plan = {}
    for gi, group in enumerate(groups):
        center = centers[gi]
        stub_out = -b1 if gi == 0 else b1
        t1 = rot(stub_out, TWO_THIRDS_PI)
        t2 = rot(stub_out, -TWO_THIRDS_PI)
        k1, k2 = group
        if _angdist(dirs[k1], t1) + _angdist(dirs[k2], t2) <= _angdist(
            dirs[k1], t2
        ) + _angdist(dirs[k2], t1):
            reattach_plan[k1] = (center, t1, j_ids[gi])
            reattach_plan[k2] = (center, t2, j_ids[gi])
        else:
            reattach_plan[k1] = (center, t2, j_ids[gi])
            reattach_plan[k2] = (center, t1, j_ids[gi])

    new_curves = []
    for cc in n.curves:
        for at_start in (True, False):
            key = (cc.id, at_start)
            if key in reattach_plan:
                pos, tgt, jid = reattach_plan[key]
                cc = _reattach(cc, at_start, pos, tgt)
                if at_start:
                    cc.start_vertex = jid
                else:
                    cc.end_vertex = jid
        new_curves.append(cc)

    ts = np.linspace(0.0, 1.0, m + 1)[:, None]
    stub_pts = centers[1] * (1 - ts) + centers[0] * ts
    new_curves.append(
        CurveSamples(
            id=stub_id,
            start_vertex=j_ids[1],
            end_vertex=j_ids[0],
            pts=stub_pts,
        )
    )

    vertices = {vid: vv for vid, vv in n.vertices.items() if vid != vertex_id}
    vertices[j_ids[0]] = Vertex(j_ids[0], VertexKind.TRIPLE_JUNCTION, centers[0])
    vertices[j_ids[1]] = Vertex(j_ids[1], VertexKind.TRIPLE_JUNCTION, centers[1])
    out = Network(vertices=vertices, curves=new_curves, domain=n.domain)
    out.validate(strict=True)
    return out


def collapse_boundary(n: Network, curve_id: str, min_length_eps: float) -> Network:
    """Remove a short curve joining a fixed endpoint to a triple junction;
    the junction's other two curves are reattached at the endpoint with
    their mutual angle reprojected to 120 degrees."""
    c = n.curve(curve_id)
    va = n.vertices[c.start_vertex]
    vb = n.vertices[c.end_vertex]
    if {va.kind, vb.kind} != {VertexKind.FIXED_ENDPOINT, VertexKind.TRIPLE_JUNCTION}:
        raise NotBoundaryCurve(
            f"curve {curve_id!r} does not join a fixed endpoint to a junction"
        )
    if length(c) >= min_length_eps:
        raise NotShortEnough(
            f"curve {curve_id!r} has length {length(c):.3e} >= {min_length_eps:.3e}"
        )
    p, o = (va, vb) if va.kind is VertexKind.FIXED_ENDPOINT else (vb, va)

    arms = [
        (cc, at_start)
        for cc, at_start in n.incident_ends(o.id)
        if cc.id != curve_id
    ]
    if len(arms) != 2:
        raise NotBoundaryCurve(f"junction of {curve_id!r} is not 3-valent")

    moved_dirs = []
    for cc, at_start in arms:
        mc = _reattach(cc, at_start, p.position)
        moved_dirs.append(outward_tangent(mc, at_start))
    bis = moved_dirs[0] + moved_dirs[1]
    bis /= np.linalg.norm(bis)

    def rot(u, ang):
        ca, sa = math.cos(ang), math.sin(ang)
        return np.array([ca * u[0] - sa * u[1], sa * u[0] + ca * u[1]])

    t1 = rot(bis, math.pi / 3)
    t2 = rot(bis, -math.pi / 3)
    if _angdist(moved_dirs[0], t1) > _angdist(moved_dirs[0], t2):
        t1, t2 = t2, t1

    plan = {
        (arms[0][0].id, arms[0][1]): t1,
        (arms[1][0].id, arms[1][1]): t2,
    }
    new_curves = []
    for cc in n.curves:
        if cc.id == curve_id:
            continue
        for at_start in (True, False):
            key = (cc.id, at_start)
            if key in plan:
                cc = _reattach(cc, at_start, p.position, plan[key])
                if at_start:
                    cc.start_vertex = p.id
                else:
                    cc.end_vertex = p.id
        new_curves.append(cc)
    vertices = {vid: vv for vid, vv in n.vertices.items() if vid != o.id}
    out = Network(vertices=vertices, curves=new_curves, domain=n.domain)
    out.validate(strict=False)
    return out


def reopen_boundary(n: Network, endpoint_id: str, delta: float, m: int | None = None) -> Network:
    """Insert a triple junction at distance delta from a collapsed 2-valent
    fixed endpoint along the interior angle bisector, reattaching the two
    curves there and adding a short curve back to the endpoint."""
    p = n.vertices.get(endpoint_id)
    if p is None or p.kind is not VertexKind.FIXED_ENDPOINT:
        raise NotCollapsedEndpoint(f"vertex {endpoint_id!r} is not a fixed endpoint")
    ends = n.incident_ends(endpoint_id)
    if len(ends) != 2:
        raise NotCollapsedEndpoint(
            f"vertex {endpoint_id!r} has valence {len(ends)}, not 2"
        )
    if delta == 0.0:
        return n
    d1 = outward_tangent(ends[0][0], ends[0][1])
    d2 = outward_tangent(ends[1][0], ends[1][1])
    if abs(_angdist(d1, d2) - TWO_THIRDS_PI) > ADMIT_TOL:
        raise NotCollapsedEndpoint(
            f"curves at {endpoint_id!r} do not meet at 120 degrees"
        )
    min_len = min(length(c) for c, _ in ends)
    if delta > 0.5 * min_len:
        raise NotCollapsedEndpoint(
            f"delta {delta:.3e} too large for the local geometry"
        )
    bis = d1 + d2
    bis /= np.linalg.norm(bis)
    j_pos = p.position + delta * bis
    j_id = f"{endpoint_id}_j"
    stub_id = f"{endpoint_id}_stub"
    if m is None:
        m = min(c.m for c, _ in ends)

    def rot(u, ang):
        ca, sa = math.cos(ang), math.sin(ang)
        return np.array([ca * u[0] - sa * u[1], sa * u[0] + ca * u[1]])

    stub_out = -bis  # from the junction back toward the endpoint
    t1 = rot(stub_out, TWO_THIRDS_PI)
    t2 = rot(stub_out, -TWO_THIRDS_PI)
    if _angdist(d1, t1) > _angdist(d1, t2):
        t1, t2 = t2, t1
    plan = {
        (ends[0][0].id, ends[0][1]): t1,
        (ends[1][0].id, ends[1][1]): t2,
    }
    new_curves = []
    for cc in n.curves:
        for at_start in (True, False):
            key = (cc.id, at_start)
            if key in plan:
                cc = _reattach(cc, at_start, j_pos, plan[key])
                if at_start:
                    cc.start_vertex = j_id
                else:
                    cc.end_vertex = j_id
        new_curves.append(cc)
    ts = np.linspace(0.0, 1.0, m + 1)[:, None]
    stub_pts = p.position * (1 - ts) + j_pos * ts
    new_curves.append(
        CurveSamples(id=stub_id, start_vertex=p.id, end_vertex=j_id, pts=stub_pts)
    )
    vertices = dict(n.vertices)
    vertices[j_id] = Vertex(j_id, VertexKind.TRIPLE_JUNCTION, j_pos)
    out = Network(vertices=vertices, curves=new_curves, domain=n.domain)
    out.validate(strict=True)
    return out
