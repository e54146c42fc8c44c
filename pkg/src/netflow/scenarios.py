"""Scenario generators: the centrally symmetric five-curve configuration
whose inner curve collapses in finite time, the minimal (Steiner) network on
the same four endpoints, and the simpler validation networks."""

from __future__ import annotations

import math

import numpy as np

from .errors import AngleConditionViolated, TopologyNotAdmissible
from .geometry import (
    CurveSamples,
    Ellipse,
    Network,
    Vertex,
    VertexKind,
)

SQRT3 = math.sqrt(3.0)


def _unit(angle):
    return np.array([math.cos(angle), math.sin(angle)])


def _segment(cid, v0, v1, p0, p1, m):
    ts = np.linspace(0.0, 1.0, m + 1)[:, None]
    pts = np.asarray(p0, dtype=float) * (1 - ts) + np.asarray(p1, dtype=float) * ts
    return CurveSamples(id=cid, start_vertex=v0, end_vertex=v1, pts=pts)


def arc_from_tangent(cid, v0, v1, p0, tangent_dir, p1, m):
    """Circular arc from p0 to p1 whose tangent at p0 is tangent_dir; falls
    back to a straight segment when the chord is parallel to the tangent."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t = np.asarray(tangent_dir, dtype=float)
    t = t / np.linalg.norm(t)
    chord = p1 - p0
    cross = t[0] * chord[1] - t[1] * chord[0]
    if abs(cross) < 1e-14 * np.linalg.norm(chord):
        return _segment(cid, v0, v1, p0, p1, m)
    n0 = np.array([-t[1], t[0]])
    # center on the normal line through p0, equidistant from p0 and p1
    s = float(np.dot(chord, chord)) / (2.0 * float(np.dot(chord, n0)))
    center = p0 + s * n0
    r = abs(s)
    a0 = math.atan2(p0[1] - center[1], p0[0] - center[0])
    a1 = math.atan2(p1[1] - center[1], p1[0] - center[0])
    # sweep in the rotation sense matching the start tangent
    ccw = s > 0  # tangent = d/da (center + r e(a)) has sense sign(s)
    if ccw:
        sweep = (a1 - a0) % (2 * math.pi)
    else:
        sweep = -((a0 - a1) % (2 * math.pi))
    angles = a0 + sweep * np.linspace(0.0, 1.0, m + 1)
    pts = center + r * np.column_stack([np.cos(angles), np.sin(angles)])
    pts[0] = p0
    pts[-1] = p1
    return CurveSamples(id=cid, start_vertex=v0, end_vertex=v1, pts=pts)


def build_section6(a: float, b: float, bulge: float, m: int = 100) -> Network:
    """Centrally symmetric five-curve tree with endpoints (+-a, +-b) and a
    vertical inner curve of length 2*bulge between the two junctions.

    Requires a > sqrt(3) b, the wide-angle condition under which the minimal
    network on the four endpoints has the transverse topology and the inner
    curve must collapse in finite time.  The four outer curves are circular
    arcs leaving the junctions at exact 120 degrees; the domain is the
    ellipse through the endpoints with axes sqrt(2) (a, b).
    """
    if a <= SQRT3 * b:
        raise AngleConditionViolated(
            f"need a > sqrt(3) b for the transverse minimal topology "
            f"(a={a}, b={b})"
        )
    if bulge <= 0 or bulge >= b:
        raise ValueError("bulge must lie in (0, b)")
    top = np.array([0.0, bulge])

    vertices = [
        Vertex("p_ne", VertexKind.FIXED_ENDPOINT, (a, b)),
        Vertex("p_nw", VertexKind.FIXED_ENDPOINT, (-a, b)),
        Vertex("p_sw", VertexKind.FIXED_ENDPOINT, (-a, -b)),
        Vertex("p_se", VertexKind.FIXED_ENDPOINT, (a, -b)),
        Vertex("j_top", VertexKind.TRIPLE_JUNCTION, top),
        Vertex("j_bot", VertexKind.TRIPLE_JUNCTION, -top),
    ]

    # inner curve, symmetrized exactly about the origin
    ts = np.linspace(-1.0, 1.0, m + 1)
    ts = 0.5 * (ts - ts[::-1])
    inner = CurveSamples(
        id="inner",
        start_vertex="j_bot",
        end_vertex="j_top",
        pts=np.column_stack([np.zeros(m + 1), bulge * ts]),
    )

    # arcs leave the top junction at 30 and 150 degrees (stub points down)
    ne = arc_from_tangent("arm_ne", "j_top", "p_ne", top, _unit(math.pi / 6), (a, b), m)
    nw = arc_from_tangent(
        "arm_nw", "j_top", "p_nw", top, _unit(5 * math.pi / 6), (-a, b), m
    )
    sw = ne.with_points(-ne.pts)
    sw.id, sw.start_vertex, sw.end_vertex = "arm_sw", "j_bot", "p_sw"
    se = nw.with_points(-nw.pts)
    se.id, se.start_vertex, se.end_vertex = "arm_se", "j_bot", "p_se"

    n = Network(
        vertices=vertices,
        curves=[inner, ne, nw, sw, se],
        domain=Ellipse(a * math.sqrt(2.0), b * math.sqrt(2.0)),
    )
    return n.validate(strict=True)


def steiner4(a: float, b: float, m: int = 100):
    """The minimal network connecting (+-a, +-b): junctions at
    (+-(a - b/sqrt(3)), 0), inner edge horizontal, total length
    2a + 2 sqrt(3) b.  Returns (network, total_length)."""
    if a <= b / SQRT3:
        raise TopologyNotAdmissible(
            f"horizontal-inner-edge topology needs a > b/sqrt(3) (a={a}, b={b})"
        )
    s = a - b / SQRT3
    total = 2.0 * a + 2.0 * SQRT3 * b
    vertices = [
        Vertex("p_ne", VertexKind.FIXED_ENDPOINT, (a, b)),
        Vertex("p_nw", VertexKind.FIXED_ENDPOINT, (-a, b)),
        Vertex("p_sw", VertexKind.FIXED_ENDPOINT, (-a, -b)),
        Vertex("p_se", VertexKind.FIXED_ENDPOINT, (a, -b)),
        Vertex("j_r", VertexKind.TRIPLE_JUNCTION, (s, 0.0)),
        Vertex("j_l", VertexKind.TRIPLE_JUNCTION, (-s, 0.0)),
    ]
    curves = [
        _segment("inner", "j_l", "j_r", (-s, 0.0), (s, 0.0), m),
        _segment("arm_ne", "j_r", "p_ne", (s, 0.0), (a, b), m),
        _segment("arm_se", "j_r", "p_se", (s, 0.0), (a, -b), m),
        _segment("arm_nw", "j_l", "p_nw", (-s, 0.0), (-a, b), m),
        _segment("arm_sw", "j_l", "p_sw", (-s, 0.0), (-a, -b), m),
    ]
    n = Network(
        vertices=vertices,
        curves=curves,
        domain=Ellipse(a * math.sqrt(2.0), b * math.sqrt(2.0)),
    )
    return n.validate(strict=True), total


def standard_triod(radius: float = 1.0, m: int = 100, phase: float = math.pi / 2) -> Network:
    """Straight triod truncated at the given radius, endpoints fixed on the
    circle; an exact discrete steady state."""
    angles = [phase + i * 2 * math.pi / 3 for i in range(3)]
    vertices = [Vertex("o", VertexKind.TRIPLE_JUNCTION, (0.0, 0.0))]
    curves = []
    for i, ang in enumerate(angles):
        pid = f"p{i}"
        end = radius * _unit(ang)
        vertices.append(Vertex(pid, VertexKind.FIXED_ENDPOINT, end))
        curves.append(_segment(f"arm{i}", "o", pid, (0.0, 0.0), end, m))
    n = Network(vertices=vertices, curves=curves, domain=Ellipse(radius, radius))
    return n.validate(strict=True)


def bowed_triod(
    radius: float = 1.0,
    bow: float = math.pi / 6,
    m: int = 100,
    phase: float = math.pi / 2,
    spread: float = 0.0,
) -> Network:
    """Triod with circular-arc arms: the junction tangents keep the exact
    120-degree condition but are rotated against the endpoint directions, so
    the arms carry curvature.  The curved-junction scenario used by the
    junction-identity refinement checks.

    spread skews the endpoint placement away from the symmetric 120-degree
    positions (the junction tangents stay at exact 120 degrees), giving the
    three arms different curvatures; spread=0 is the pinwheel-symmetric case
    where several junction identities hold by symmetry alone."""
    end_angles = [
        phase,
        phase + 2 * math.pi / 3 + spread,
        phase + 4 * math.pi / 3 - spread,
    ]
    tan_angles = [phase + bow + i * 2 * math.pi / 3 for i in range(3)]
    vertices = [Vertex("o", VertexKind.TRIPLE_JUNCTION, (0.0, 0.0))]
    curves = []
    for i, (e_ang, t_ang) in enumerate(zip(end_angles, tan_angles)):
        pid = f"p{i}"
        end = radius * _unit(e_ang)
        vertices.append(Vertex(pid, VertexKind.FIXED_ENDPOINT, end))
        curves.append(
            arc_from_tangent(f"arm{i}", "o", pid, (0.0, 0.0), _unit(t_ang), end, m)
        )
    n = Network(vertices=vertices, curves=curves, domain=Ellipse(radius, radius))
    return n.validate(strict=True)


def semicircle(radius: float = 1.0, m: int = 100) -> Network:
    """Upper semicircle with fixed endpoints (+-radius, 0); shrinks toward
    the straight segment."""
    angles = np.linspace(math.pi, 0.0, m + 1)
    pts = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    vertices = [
        Vertex("p0", VertexKind.FIXED_ENDPOINT, (-radius, 0.0)),
        Vertex("p1", VertexKind.FIXED_ENDPOINT, (radius, 0.0)),
    ]
    pts[0] = (-radius, 0.0)
    pts[-1] = (radius, 0.0)
    curve = CurveSamples(id="arc", start_vertex="p0", end_vertex="p1", pts=pts)
    n = Network(vertices=vertices, curves=[curve], domain=Ellipse(radius, radius))
    return n.validate(strict=True)


def circle_validation(radius: float = 1.0, m: int = 200) -> Network:
    """Closed circle for the shrinking-circle oracles (validation mode)."""
    angles = np.linspace(0.0, 2 * math.pi, m, endpoint=False)
    pts = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    curve = CurveSamples(
        id="circle", start_vertex=None, end_vertex=None, pts=pts, closed=True
    )
    return Network(vertices={}, curves=[curve], domain=Ellipse(radius, radius))


SCENARIOS = {
    "section6": build_section6,
    "triod": standard_triod,
    "bowed-triod": bowed_triod,
    "semicircle": semicircle,
    "circle-validation": circle_validation,
}
