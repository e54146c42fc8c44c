"""Discrete differential geometry of sampled planar curves and networks.

Curves are polylines with a uniform parameter x_j = j/M; the geometry of a
curve (tangent, normal, curvature) is computed with finite differences with
respect to the discrete arclength of the polyline.  Interior nodes use
centered stencils, curve ends use one-sided second-order stencils.

Sign conventions: the unit normal is nu = R tau with R the counterclockwise
rotation by pi/2, and the scalar curvature is kappa = <d_s tau, nu>.  A
counterclockwise circle of radius R has kappa = +1/R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DegenerateCurve,
    InvariantViolation,
    NoEndpoint,
    NotConnected,
)

ENDPOINT_COINCIDENCE_TOL = 1e-10
UNIFORM_CHORD_RTOL = 1e-6


def rot90(v):
    """Counterclockwise rotation by pi/2 of vectors with shape (..., 2)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def as_point(p):
    """Coerce to a finite (2,) float array."""
    a = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"point has non-finite components: {a}")
    return a


def fd_weights(x, x0, m):
    """Finite-difference weights for the m-th derivative at x0 on nodes x.

    Fornberg's recursion; works for arbitrary distinct nodes, so the same
    routine serves uniform and mildly nonuniform arclength grids.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    w = np.zeros((m + 1, n))
    w[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = (c4 * w[k, j] - k * w[k - 1, j]) / c3
            w[0, j] = c4 * w[0, j] / c3
        c1 = c2
    return w[m]


# -- curves --------------------------------------------------------------------


@dataclass
class CurveSamples:
    """One sampled curve of a network.

    pts holds M+1 samples (M for a closed curve, the wrap chord is implied).
    zeta is the tangential-velocity cache; it is only meaningful on snapshots
    produced by the solver.
    """

    id: str
    start_vertex: str | None
    end_vertex: str | None
    pts: np.ndarray
    closed: bool = False
    zeta: np.ndarray | None = None
    _frame: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.pts, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"curve {self.id!r}: pts must have shape (n, 2)")
        if len(pts) < 2:
            raise ValueError(f"curve {self.id!r}: need at least two samples")
        if not np.all(np.isfinite(pts)):
            raise DegenerateCurve(f"curve {self.id!r}: non-finite samples")
        self.pts = pts
        if np.any(self.chords() == 0.0):
            raise DegenerateCurve(
                f"curve {self.id!r}: consecutive samples coincide"
            )

    @property
    def m(self):
        """Number of parameter intervals."""
        return len(self.pts) if self.closed else len(self.pts) - 1

    def chords(self):
        cached = self._frame.get("chords")
        if cached is None:
            d = np.diff(self.pts, axis=0)
            if self.closed:
                d = np.vstack([d, self.pts[:1] - self.pts[-1:]])
            cached = np.sqrt(np.einsum("ij,ij->i", d, d))
            self._frame["chords"] = cached
        return cached

    def arclengths(self):
        """Cumulative chord length per node, starting at 0."""
        c = self.chords()
        if self.closed:
            c = c[:-1]
        return np.concatenate([[0.0], np.cumsum(c)])

    def _frame_data(self):
        if "tau" not in self._frame:
            self._frame.update(_compute_frame(self.pts, self.closed, self.chords()))
        return self._frame

    @property
    def tau(self):
        return self._frame_data()["tau"]

    @property
    def nu(self):
        return self._frame_data()["nu"]

    @property
    def kappa(self):
        return self._frame_data()["kappa"]

    @property
    def ds_kappa(self):
        return self._frame_data()["ds_kappa"]

    def with_points(self, pts, zeta=None):
        return CurveSamples(
            id=self.id,
            start_vertex=self.start_vertex,
            end_vertex=self.end_vertex,
            pts=pts,
            closed=self.closed,
            zeta=zeta,
        )

    def reversed(self):
        zeta = None if self.zeta is None else -self.zeta[::-1].copy()
        return CurveSamples(
            id=self.id,
            start_vertex=self.end_vertex,
            end_vertex=self.start_vertex,
            pts=self.pts[::-1].copy(),
            closed=self.closed,
            zeta=zeta,
        )


def _periodic_pad(pts, s, k=2):
    """Extend a closed polyline by k wrap nodes on each side, with unwrapped
    arclength coordinates."""
    total = s[-1] + np.linalg.norm(pts[0] - pts[-1])
    s_ext = np.concatenate([s[-k:] - total, s, s[:k] + total])
    p_ext = np.vstack([pts[-k:], pts, pts[:k]])
    return p_ext, s_ext


def _end_first_weights(a, b):
    """First-derivative weights at 0 for nodes (0, a, a+b)."""
    c = a + b
    return (-(2.0 * a + b) / (a * c), c / (a * b), -a / (b * c))


def _end_second_weights(a, b, c):
    """Second-derivative weights at 0 for nodes (0, a, b, c) cumulative."""
    w0 = 2.0 * (a + b + c) / (a * b * c)
    w1 = -2.0 * (b + c) / (a * (a - b) * (a - c))
    w2 = -2.0 * (a + c) / (b * (b - a) * (b - c))
    w3 = -2.0 * (a + b) / (c * (c - a) * (c - b))
    return (w0, w1, w2, w3)


def _interior_derivatives(pts, s):
    """Centered nonuniform first and second derivatives at nodes 1..n-2."""
    h1 = (s[1:-1] - s[:-2])[:, None]
    h2 = (s[2:] - s[1:-1])[:, None]
    d1 = (
        -h2 / (h1 * (h1 + h2)) * pts[:-2]
        + (h2 - h1) / (h1 * h2) * pts[1:-1]
        + h1 / (h2 * (h1 + h2)) * pts[2:]
    )
    d2 = 2.0 * (
        pts[:-2] / (h1 * (h1 + h2))
        - pts[1:-1] / (h1 * h2)
        + pts[2:] / (h2 * (h1 + h2))
    )
    return d1, d2


def _compute_frame(pts, closed, chords=None):
    n = len(pts)
    if chords is None:
        d = np.diff(pts, axis=0)
        if closed:
            d = np.vstack([d, pts[:1] - pts[-1:]])
        chords = np.sqrt(np.einsum("ij,ij->i", d, d))
    if closed:
        s = np.concatenate([[0.0], np.cumsum(chords[:-1])])
        p_ext, s_ext = _periodic_pad(pts, s, k=2)
        d1, d2 = _interior_derivatives(p_ext, s_ext)
        d1, d2 = d1[1:-1], d2[1:-1]
    else:
        s = np.concatenate([[0.0], np.cumsum(chords)])
        d1 = np.empty_like(pts)
        d2 = np.empty_like(pts)
        d1[1:-1], d2[1:-1] = _interior_derivatives(pts, s)
        # one-sided second-order stencils at the two ends
        w = _end_first_weights(s[1] - s[0], s[2] - s[1])
        d1[0] = w[0] * pts[0] + w[1] * pts[1] + w[2] * pts[2]
        w = _end_first_weights(s[-1] - s[-2], s[-2] - s[-3])
        d1[-1] = -(w[0] * pts[-1] + w[1] * pts[-2] + w[2] * pts[-3])
        if n >= 4:
            off = (s[1] - s[0], s[2] - s[0], s[3] - s[0])
            w = _end_second_weights(*off)
            d2[0] = w[0] * pts[0] + w[1] * pts[1] + w[2] * pts[2] + w[3] * pts[3]
            off = (s[-1] - s[-2], s[-1] - s[-3], s[-1] - s[-4])
            w = _end_second_weights(*off)
            d2[-1] = w[0] * pts[-1] + w[1] * pts[-2] + w[2] * pts[-3] + w[3] * pts[-4]
        else:
            d2[0] = d2[1]
            d2[-1] = d2[-2]

    norms = np.sqrt(np.einsum("ij,ij->i", d1, d1))
    if np.any(norms == 0.0):
        raise DegenerateCurve("vanishing discrete tangent")
    tau = d1 / norms[:, None]
    nu = rot90(tau)
    kappa = np.einsum("ij,ij->i", d2, nu)

    # d kappa / ds: centered interior, one-sided 3-point at the ends
    ds_kappa = np.empty_like(kappa)
    if closed:
        total = s[-1] + chords[-1]
        s_ext = np.concatenate([[s[-1] - total], s, [total]])
        k_ext = np.concatenate([kappa[-1:], kappa, kappa[:1]])
        h1 = s_ext[1:-1] - s_ext[:-2]
        h2 = s_ext[2:] - s_ext[1:-1]
        ds_kappa[:] = (
            -h2 / (h1 * (h1 + h2)) * k_ext[:-2]
            + (h2 - h1) / (h1 * h2) * k_ext[1:-1]
            + h1 / (h2 * (h1 + h2)) * k_ext[2:]
        )
    else:
        h1 = s[1:-1] - s[:-2]
        h2 = s[2:] - s[1:-1]
        ds_kappa[1:-1] = (
            -h2 / (h1 * (h1 + h2)) * kappa[:-2]
            + (h2 - h1) / (h1 * h2) * kappa[1:-1]
            + h1 / (h2 * (h1 + h2)) * kappa[2:]
        )
        w = _end_first_weights(s[1] - s[0], s[2] - s[1])
        ds_kappa[0] = w[0] * kappa[0] + w[1] * kappa[1] + w[2] * kappa[2]
        w = _end_first_weights(s[-1] - s[-2], s[-2] - s[-3])
        ds_kappa[-1] = -(w[0] * kappa[-1] + w[1] * kappa[-2] + w[2] * kappa[-3])

    return {"s": s, "tau": tau, "nu": nu, "kappa": kappa, "ds_kappa": ds_kappa}


def curvature_profile(c: CurveSamples) -> np.ndarray:
    """Signed scalar curvature at every node of the curve."""
    if c.m < 4:
        raise ValueError(f"curve {c.id!r}: need at least 4 parameter intervals")
    return c.kappa.copy()


def length(c: CurveSamples) -> float:
    """Polyline length (sum of chord lengths, wrap chord included if closed)."""
    return float(c.chords().sum())


def second_difference_velocity(c: CurveSamples) -> np.ndarray:
    """Uniform-parameter second difference divided by the squared local chord
    scale; the discrete right-hand side of the parametrization-fixed flow.

    Interior nodes use (p[j+1] - 2 p[j] + p[j-1]) / ell_j^2 with ell_j the
    mean of the two adjacent chords; ends use a one-sided 4-point second
    difference with the leading chord as scale.
    """
    pts = c.pts
    n = len(pts)
    if c.closed:
        ch = c.chords()
        ell = 0.5 * (np.roll(ch, 1) + ch)
        d2 = np.roll(pts, -1, axis=0) - 2.0 * pts + np.roll(pts, 1, axis=0)
        return d2 / (ell**2)[:, None]
    ch = c.chords()
    v = np.empty_like(pts)
    ell = 0.5 * (ch[:-1] + ch[1:])
    v[1:-1] = (pts[2:] - 2.0 * pts[1:-1] + pts[:-2]) / (ell**2)[:, None]
    if n >= 4:
        v[0] = (2 * pts[0] - 5 * pts[1] + 4 * pts[2] - pts[3]) / ch[0] ** 2
        v[-1] = (2 * pts[-1] - 5 * pts[-2] + 4 * pts[-3] - pts[-4]) / ch[-1] ** 2
    else:
        v[0] = v[1]
        v[-1] = v[-2]
    return v


def resample_uniform(c: CurveSamples, M: int) -> CurveSamples:
    """Resample a curve to M+1 nodes with equal chord spacing.

    Output nodes lie on the input polyline; the endpoints are pinned
    bit-identically.  Equal spacing is enforced by a fixed-point iteration on
    the arclength positions (a single cumulative-arclength pass leaves chord
    variations of order (kappa h)^2, which would violate the uniformity
    contract on curved inputs).
    """
    if M < 1:
        raise ValueError("M must be positive")
    pts = c.pts
    s = c.arclengths()
    if c.closed:
        total = s[-1] + np.linalg.norm(pts[0] - pts[-1])
        s = np.append(s, total)
        pts = np.vstack([pts, pts[:1]])
    total = s[-1]

    n_new = M if c.closed else M + 1
    # fixed point of resampling: already uniform at the same node count
    if n_new == len(c.pts):
        ch = c.chords()
        dev = np.abs(ch - ch.mean()).max() / ch.mean()
        if dev < 0.5 * UNIFORM_CHORD_RTOL:
            return c.with_points(c.pts.copy())

    if c.closed:
        u = np.linspace(0.0, total, M, endpoint=False)
    else:
        u = np.linspace(0.0, total, M + 1)

    best = None
    for _ in range(60):
        x = np.interp(u, s, pts[:, 0], period=total if c.closed else None)
        y = np.interp(u, s, pts[:, 1], period=total if c.closed else None)
        q = np.column_stack([x, y])
        d = np.diff(q, axis=0)
        if c.closed:
            d = np.vstack([d, q[:1] - q[-1:]])
        ch = np.linalg.norm(d, axis=1)
        if np.any(ch == 0.0):
            raise DegenerateCurve(f"curve {c.id!r}: resampling degenerated")
        cbar = ch.mean()
        dev = np.abs(ch - cbar).max() / cbar
        if best is None or dev < best[0]:
            best = (dev, q)
        if dev < 0.25 * UNIFORM_CHORD_RTOL:
            break
        cum = np.concatenate([[0.0], np.cumsum(ch)])
        if c.closed:
            u = u - (cum[:-1] - cbar * np.arange(M))
            u[0] = 0.0
        else:
            u[1:-1] -= cum[1:-1] - cbar * np.arange(1, M)
            u[0], u[-1] = 0.0, total
        u = np.maximum.accumulate(u)

    dev, q = best
    if dev > UNIFORM_CHORD_RTOL:
        raise DegenerateCurve(
            f"curve {c.id!r}: equal-chord resampling stalled (dev={dev:.2e})"
        )
    if c.closed:
        q[0] = c.pts[0]
    else:
        q[0] = c.pts[0]
        q[-1] = c.pts[-1]
    return c.with_points(q)


# -- vertices, domains, networks ------------------------------------------------


class VertexKind(Enum):
    FIXED_ENDPOINT = "fixed_endpoint"
    TRIPLE_JUNCTION = "triple_junction"
    FOUR_POINT = "four_point"  # post-collapse state, never part of a smooth flow


@dataclass
class Vertex:
    id: str
    kind: VertexKind
    position: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.position = as_point(self.position)

    def moved(self, position):
        return Vertex(self.id, self.kind, position, dict(self.meta))


@dataclass
class ConvexPolygon:
    vertices: np.ndarray  # (k, 2) counterclockwise

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least three 2d vertices")
        e = np.diff(np.vstack([v, v[:1]]), axis=0)
        cross = e[:-1, 0] * e[1:, 1] - e[:-1, 1] * e[1:, 0]
        wrap = e[-1, 0] * e[0, 1] - e[-1, 1] * e[0, 0]
        cross = np.append(cross, wrap)
        if not np.all(cross > 0.0):
            raise ValueError("polygon must be strictly convex, counterclockwise")
        self.vertices = v

    def contains(self, pts, tol=1e-8):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        v = self.vertices
        e = np.diff(np.vstack([v, v[:1]]), axis=0)
        scale = np.linalg.norm(e, axis=1)
        ok = np.ones(len(pts), dtype=bool)
        for i in range(len(v)):
            d = (pts[:, 0] - v[i, 0]) * e[i, 1] - (pts[:, 1] - v[i, 1]) * e[i, 0]
            ok &= d <= tol * scale[i]
        return ok


@dataclass
class Ellipse:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    def contains(self, pts, tol=1e-8):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        q = (pts[:, 0] / self.a) ** 2 + (pts[:, 1] / self.b) ** 2
        return q <= 1.0 + tol


@dataclass
class Network:
    """A planar network: vertices plus sampled curves between them.

    A single closed curve with no vertices is the validation configuration
    used for analytic oracles; everything else is expected to be a tree of
    open curves.
    """

    vertices: dict
    curves: list
    domain: object = None

    def __post_init__(self):
        if not isinstance(self.vertices, dict):
            self.vertices = {v.id: v for v in self.vertices}

    # -- lookup helpers ---------------------------------------------------

    def curve(self, curve_id) -> CurveSamples:
        for c in self.curves:
            if c.id == curve_id:
                return c
        raise KeyError(f"no curve with id {curve_id!r}")

    def incident_ends(self, vertex_id):
        """Curve ends meeting a vertex as (curve, at_start) pairs."""
        out = []
        for c in self.curves:
            if c.start_vertex == vertex_id:
                out.append((c, True))
            if c.end_vertex == vertex_id:
                out.append((c, False))
        return out

    def junction_ids(self):
        return [
            v.id
            for v in self.vertices.values()
            if v.kind is VertexKind.TRIPLE_JUNCTION
        ]

    @property
    def is_closed_validation(self):
        return (
            len(self.curves) == 1
            and self.curves[0].closed
            and not self.vertices
        )

    def copy(self):
        curves = []
        for c in self.curves:
            cc = c.with_points(
                c.pts.copy(), zeta=None if c.zeta is None else c.zeta.copy()
            )
            cc._frame.update(c._frame)  # cached geometry is still valid
            curves.append(cc)
        return Network(
            vertices={k: v.moved(v.position.copy()) for k, v in self.vertices.items()},
            curves=curves,
            domain=self.domain,
        )

    def all_points(self):
        return np.vstack([c.pts for c in self.curves])

    def total_length(self):
        return sum(length(c) for c in self.curves)

    # -- validation -------------------------------------------------------

    def validate(self, strict=True, tol=ENDPOINT_COINCIDENCE_TOL):
        """Check structural invariants; strict mode admits only regular
        networks (1-valent fixed endpoints, 3-valent junctions)."""
        if self.is_closed_validation:
            return self
        for c in self.curves:
            if c.closed:
                raise InvariantViolation(
                    f"closed curve {c.id!r} in a vertex network"
                )
            for vid, end_pt in ((c.start_vertex, c.pts[0]), (c.end_vertex, c.pts[-1])):
                if vid not in self.vertices:
                    raise InvariantViolation(
                        f"curve {c.id!r} references unknown vertex {vid!r}"
                    )
                v = self.vertices[vid]
                if np.linalg.norm(v.position - end_pt) > tol:
                    raise InvariantViolation(
                        f"curve {c.id!r} end does not coincide with vertex "
                        f"{vid!r} (offset {np.linalg.norm(v.position - end_pt):.2e})"
                    )
        for v in self.vertices.values():
            valence = len(self.incident_ends(v.id))
            if v.kind is VertexKind.FIXED_ENDPOINT:
                allowed = (1,) if strict else (1, 2)
            elif v.kind is VertexKind.TRIPLE_JUNCTION:
                allowed = (3,)
            else:  # FOUR_POINT
                if strict:
                    raise InvariantViolation(
                        f"vertex {v.id!r} is a 4-point; not a regular network"
                    )
                allowed = (4,)
            if valence not in allowed:
                raise InvariantViolation(
                    f"vertex {v.id!r} ({v.kind.value}) has valence {valence}"
                )
        if not _is_connected(self):
            raise InvariantViolation("network is not connected")
        return self


def _adjacency(n: Network):
    adj = {vid: set() for vid in n.vertices}
    for c in n.curves:
        adj[c.start_vertex].add(c.end_vertex)
        adj[c.end_vertex].add(c.start_vertex)
    return adj


def _is_connected(n: Network):
    if not n.vertices:
        return len(n.curves) <= 1
    adj = _adjacency(n)
    seen = set()
    stack = [next(iter(n.vertices))]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(adj[v] - seen)
    return len(seen) == len(n.vertices)


def graph_is_tree(num_vertices, edges):
    """Tree test on an abstract connected multigraph: |E| = |V| - 1."""
    return len(edges) == num_vertices - 1


def is_tree(n: Network) -> bool:
    """True iff the (connected) network contains no loop."""
    if n.is_closed_validation:
        return False
    if not _is_connected(n):
        raise NotConnected("is_tree requires a connected network")
    return graph_is_tree(len(n.vertices), [(c.start_vertex, c.end_vertex) for c in n.curves])


def path_depth(n: Network) -> int:
    """Smallest n such that every curve reaches a fixed endpoint through a
    path of at most n curves (counting itself); computed by multi-source
    BFS over curves from the endpoint-touching ones."""
    endpoints = {
        v.id for v in n.vertices.values() if v.kind is VertexKind.FIXED_ENDPOINT
    }
    if not endpoints:
        raise NoEndpoint("network has no fixed endpoint")
    depth = {}
    frontier = []
    for c in n.curves:
        if c.start_vertex in endpoints or c.end_vertex in endpoints:
            depth[c.id] = 1
            frontier.append(c)
    level = 1
    while len(depth) < len(n.curves):
        level += 1
        nxt = []
        frontier_vertices = set()
        for c in frontier:
            frontier_vertices.update((c.start_vertex, c.end_vertex))
        for c in n.curves:
            if c.id in depth:
                continue
            if c.start_vertex in frontier_vertices or c.end_vertex in frontier_vertices:
                depth[c.id] = level
                nxt.append(c)
        if not nxt:
            raise NotConnected("path_depth requires a connected network")
        frontier = nxt
    return max(depth.values())


@dataclass
class RegularityReport:
    """Per-junction angle-condition residuals |sum of outward unit tangents|."""

    residuals: dict
    pairwise_angles: dict
    tol: float

    @property
    def max_residual(self):
        return max(self.residuals.values()) if self.residuals else 0.0

    @property
    def passed(self):
        return self.max_residual < self.tol


def outward_tangent(c: CurveSamples, at_start: bool) -> np.ndarray:
    """Unit tangent at a curve end, oriented away from the end vertex."""
    return c.tau[0].copy() if at_start else -c.tau[-1].copy()


def check_regular(n: Network, tol: float) -> RegularityReport:
    """Angle-condition report for every triple junction of the network."""
    residuals = {}
    angles = {}
    for vid in n.junction_ids():
        ends = n.incident_ends(vid)
        tangents = [outward_tangent(c, at_start) for c, at_start in ends]
        residuals[vid] = float(np.linalg.norm(np.sum(tangents, axis=0)))
        pair = []
        for i in range(len(tangents)):
            for j in range(i + 1, len(tangents)):
                d = float(np.clip(np.dot(tangents[i], tangents[j]), -1.0, 1.0))
                pair.append(math.acos(d))
        angles[vid] = pair
    return RegularityReport(residuals=residuals, pairwise_angles=angles, tol=tol)


def batch_compute_frames(curves) -> None:
    """Fill the geometry caches of equally sampled open curves in one
    vectorized pass (the per-step bookkeeping of a run touches every curve
    every step, so the per-curve numpy overhead matters)."""
    curves = [c for c in curves if "tau" not in c._frame]
    if not curves:
        return
    if any(c.closed for c in curves) or len({len(c.pts) for c in curves}) != 1:
        for c in curves:
            c._frame_data()
        return
    pts = np.stack([c.pts for c in curves])  # (N, n, 2)
    d = np.diff(pts, axis=1)
    chords = np.sqrt(np.einsum("nij,nij->ni", d, d))  # (N, n-1)
    s = np.concatenate(
        [np.zeros((len(curves), 1)), np.cumsum(chords, axis=1)], axis=1
    )
    n = pts.shape[1]
    d1 = np.empty_like(pts)
    d2 = np.empty_like(pts)
    h1 = (s[:, 1:-1] - s[:, :-2])[..., None]
    h2 = (s[:, 2:] - s[:, 1:-1])[..., None]
    d1[:, 1:-1] = (
        -h2 / (h1 * (h1 + h2)) * pts[:, :-2]
        + (h2 - h1) / (h1 * h2) * pts[:, 1:-1]
        + h1 / (h2 * (h1 + h2)) * pts[:, 2:]
    )
    d2[:, 1:-1] = 2.0 * (
        pts[:, :-2] / (h1 * (h1 + h2))
        - pts[:, 1:-1] / (h1 * h2)
        + pts[:, 2:] / (h2 * (h1 + h2))
    )

    def first_w(a, b):
        c_ = a + b
        return (-(2 * a + b) / (a * c_), c_ / (a * b), -a / (b * c_))

    def second_w(a, b, c_):
        w0 = 2.0 * (a + b + c_) / (a * b * c_)
        w1 = -2.0 * (b + c_) / (a * (a - b) * (a - c_))
        w2 = -2.0 * (a + c_) / (b * (b - a) * (b - c_))
        w3 = -2.0 * (a + b) / (c_ * (c_ - a) * (c_ - b))
        return (w0, w1, w2, w3)

    w = first_w(chords[:, 0], chords[:, 1])
    d1[:, 0] = w[0][:, None] * pts[:, 0] + w[1][:, None] * pts[:, 1] + w[2][:, None] * pts[:, 2]
    w = first_w(chords[:, -1], chords[:, -2])
    d1[:, -1] = -(
        w[0][:, None] * pts[:, -1] + w[1][:, None] * pts[:, -2] + w[2][:, None] * pts[:, -3]
    )
    a_ = chords[:, 0]
    b_ = chords[:, 0] + chords[:, 1]
    c_ = b_ + chords[:, 2]
    w = second_w(a_, b_, c_)
    d2[:, 0] = (
        w[0][:, None] * pts[:, 0]
        + w[1][:, None] * pts[:, 1]
        + w[2][:, None] * pts[:, 2]
        + w[3][:, None] * pts[:, 3]
    )
    a_ = chords[:, -1]
    b_ = chords[:, -1] + chords[:, -2]
    c_ = b_ + chords[:, -3]
    w = second_w(a_, b_, c_)
    d2[:, -1] = (
        w[0][:, None] * pts[:, -1]
        + w[1][:, None] * pts[:, -2]
        + w[2][:, None] * pts[:, -3]
        + w[3][:, None] * pts[:, -4]
    )

    norms = np.sqrt(np.einsum("nij,nij->ni", d1, d1))
    if np.any(norms == 0.0):
        raise DegenerateCurve("vanishing discrete tangent")
    tau = d1 / norms[..., None]
    nu = rot90(tau)
    kappa = np.einsum("nij,nij->ni", d2, nu)

    ds_kappa = np.empty_like(kappa)
    h1s = h1[..., 0]
    h2s = h2[..., 0]
    ds_kappa[:, 1:-1] = (
        -h2s / (h1s * (h1s + h2s)) * kappa[:, :-2]
        + (h2s - h1s) / (h1s * h2s) * kappa[:, 1:-1]
        + h1s / (h2s * (h1s + h2s)) * kappa[:, 2:]
    )
    w = first_w(chords[:, 0], chords[:, 1])
    ds_kappa[:, 0] = w[0] * kappa[:, 0] + w[1] * kappa[:, 1] + w[2] * kappa[:, 2]
    w = first_w(chords[:, -1], chords[:, -2])
    ds_kappa[:, -1] = -(
        w[0] * kappa[:, -1] + w[1] * kappa[:, -2] + w[2] * kappa[:, -3]
    )

    for i, c in enumerate(curves):
        c._frame.update(
            chords=chords[i],
            s=s[i],
            tau=tau[i],
            nu=nu[i],
            kappa=kappa[i],
            ds_kappa=ds_kappa[i],
        )


# -- small geometric utilities used across modules ------------------------------


def arclength_weights(c: CurveSamples) -> np.ndarray:
    """Trapezoid quadrature weights in arclength, one per node."""
    ch = c.chords()
    if c.closed:
        return 0.5 * (np.roll(ch, 1) + ch)
    w = np.zeros(len(c.pts))
    w[:-1] += 0.5 * ch
    w[1:] += 0.5 * ch
    return w


def polyline_point_distance(points, poly):
    """Distance from each point to a polyline (point-to-segment, exact)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    best = np.full(len(points), np.inf)
    for p_idx in range(len(points)):
        ap = points[p_idx] - a
        t = np.clip(np.einsum("ij,ij->i", ap, ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.linalg.norm(points[p_idx] - proj, axis=1)
        best[p_idx] = d.min()
    return best


def hausdorff_distance(curves_a, curves_b) -> float:
    """Symmetric Hausdorff distance between two families of polylines,
    measured from sample points to polyline segments."""
    polys_a = [c.pts for c in curves_a]
    polys_b = [c.pts for c in curves_b]
    pts_a = np.vstack(polys_a)
    pts_b = np.vstack(polys_b)

    def directed(points, polys):
        d = np.full(len(points), np.inf)
        for poly in polys:
            d = np.minimum(d, polyline_point_distance(points, poly))
        return d.max()

    return float(max(directed(pts_a, polys_b), directed(pts_b, polys_a)))
