import math

import numpy as np
import pytest

from netflow.errors import (
    NoAdmissibleOpening,
    NotBoundaryCurve,
    NotCollapsedEndpoint,
    NotFourPoint,
    NotInnerCurve,
    NotShortEnough,
)
from netflow.events import (
    DetectionWindow,
    EventKind,
    collapse_boundary,
    collapse_interior,
    detect,
    reopen_boundary,
    reopen_cross,
)
from netflow.geometry import (
    CurveSamples,
    Network,
    Vertex,
    VertexKind,
    check_regular,
    hausdorff_distance,
    is_tree,
    length,
    outward_tangent,
)
from netflow.scenarios import standard_triod
from netflow.solver import FlowConfig, SeriesRow


def _unit(deg):
    a = math.radians(deg)
    return np.array([math.cos(a), math.sin(a)])


def _segment(cid, s, e, p0, p1, m=24):
    ts = np.linspace(0.0, 1.0, m + 1)[:, None]
    pts = np.asarray(p0, float) * (1 - ts) + np.asarray(p1, float) * ts
    return CurveSamples(cid, s, e, pts)


def symmetric_h_network(stub_len=1e-6, arm_len=2.0):
    """Vertical inner curve of the given length; each junction carries two
    straight arms at 60/120 degrees (measured from +x), so the merged
    4-point has arms at +-60 and +-120 degrees."""
    top = np.array([0.0, stub_len / 2])
    bot = -top
    arms = {
        "ne": (top, _unit(60)),
        "nw": (top, _unit(120)),
        "sw": (bot, _unit(240)),
        "se": (bot, _unit(300)),
    }
    vertices = [
        Vertex("jt", VertexKind.TRIPLE_JUNCTION, top),
        Vertex("jb", VertexKind.TRIPLE_JUNCTION, bot),
    ]
    curves = [_segment("stub", "jb", "jt", bot, top, m=8)]
    for name, (base, d) in arms.items():
        end = base + arm_len * d
        vid = f"p_{name}"
        vertices.append(Vertex(vid, VertexKind.FIXED_ENDPOINT, end))
        j = "jt" if name in ("ne", "nw") else "jb"
        curves.append(_segment(f"arm_{name}", j, vid, base, end))
    return Network(vertices=vertices, curves=curves)


def symmetric_y_network(stem_len=1e-6, arm_len=1.5):
    """Stem from a fixed boundary point straight down to a junction with two
    arms at exact 120 degrees from the stem."""
    p = np.array([0.0, 0.0])
    j = np.array([0.0, -stem_len])
    vertices = [
        Vertex("p", VertexKind.FIXED_ENDPOINT, p),
        Vertex("j", VertexKind.TRIPLE_JUNCTION, j),
    ]
    curves = [_segment("stem", "p", "j", p, j, m=8)]
    for name, deg in (("l", 210.0), ("r", 330.0)):
        end = j + arm_len * _unit(deg)
        vid = f"e_{name}"
        vertices.append(Vertex(vid, VertexKind.FIXED_ENDPOINT, end))
        curves.append(_segment(f"arm_{name}", "j", vid, j, end))
    return Network(vertices=vertices, curves=curves)


class TestDetect:
    def _window(self, n, rows):
        w = DetectionWindow(closed_mode=False, network=n)
        for r in rows:
            w.push(r)
        return w

    def _rows(self, n, count, kinf=0.0, jres=0.0):
        lengths = {c.id: length(c) for c in n.curves}
        return [
            SeriesRow(
                t=i * 1e-4,
                lengths=dict(lengths),
                kappa_l2=0.0,
                kappa_inf=kinf,
                ds_kappa_l2=0.0,
                junction_residual=jres,
            )
            for i in range(count)
        ]

    def test_steady_state_on_static_triod(self):
        n = standard_triod(m=20)
        cfg = FlowConfig(detect_window=50, min_length_eps=1e-3,
                         curvature_blowup_k=10.0, steady_tol=1e-6)
        w = self._window(n, self._rows(n, 50, kinf=1e-13))
        ev = detect(w, cfg)
        assert ev is not None and ev.kind is EventKind.STEADY_STATE

    def test_needs_full_window(self):
        n = standard_triod(m=20)
        cfg = FlowConfig(detect_window=50, min_length_eps=1e-3,
                         curvature_blowup_k=10.0)
        w = self._window(n, self._rows(n, 49, kinf=1e-13))
        assert detect(w, cfg) is None

    def test_type0_on_short_inner_curve(self):
        n = symmetric_h_network(stub_len=5e-4)
        cfg = FlowConfig(detect_window=10, min_length_eps=1e-3,
                         curvature_blowup_k=10.0)
        w = self._window(n, self._rows(n, 10, kinf=0.5))
        ev = detect(w, cfg)
        assert ev.kind is EventKind.TYPE0_INTERIOR
        assert ev.curve_id == "stub"
        assert np.linalg.norm(ev.location) < 1e-3

    def test_boundary_collapse_kind(self):
        n = symmetric_y_network(stem_len=5e-4)
        cfg = FlowConfig(detect_window=10, min_length_eps=1e-3,
                         curvature_blowup_k=10.0)
        w = self._window(n, self._rows(n, 10, kinf=0.5))
        ev = detect(w, cfg)
        assert ev.kind is EventKind.BOUNDARY_COLLAPSE
        assert ev.curve_id == "stem"

    def test_blowup_overrides_collapse(self):
        n = symmetric_h_network(stub_len=5e-4)
        cfg = FlowConfig(detect_window=10, min_length_eps=1e-3,
                         curvature_blowup_k=10.0)
        w = self._window(n, self._rows(n, 10, kinf=11.0))
        ev = detect(w, cfg)
        assert ev.kind is EventKind.CURVATURE_BLOWUP


class TestCollapseInterior:
    def test_symmetric_h(self):
        n = symmetric_h_network(stub_len=1e-6)
        merged = collapse_interior(n, "stub", min_length_eps=1e-3)
        fours = [v for v in merged.vertices.values() if v.kind is VertexKind.FOUR_POINT]
        assert len(fours) == 1
        v4 = fours[0]
        assert np.linalg.norm(v4.position) < 1e-6
        assert len(merged.incident_ends(v4.id)) == 4
        # arms at +-60, +-120 degrees
        angles = sorted(
            round(math.degrees(math.atan2(*outward_tangent(c, at)[::-1])) % 360, 3)
            for c, at in merged.incident_ends(v4.id)
        )
        assert angles == pytest.approx([60.0, 120.0, 240.0, 300.0], abs=0.1)
        assert is_tree(merged)

    def test_idempotent_on_merged_state(self):
        n = symmetric_h_network(stub_len=1e-6)
        merged = collapse_interior(n, "stub", min_length_eps=1e-3)
        again = collapse_interior(merged, "stub", min_length_eps=1e-3)
        assert again is merged

    def test_boundary_curve_rejected(self):
        n = symmetric_y_network(stem_len=1e-6)
        with pytest.raises(NotInnerCurve):
            collapse_interior(n, "stem", min_length_eps=1e-3)

    def test_not_short_enough(self):
        n = symmetric_h_network(stub_len=0.5)
        with pytest.raises(NotShortEnough):
            collapse_interior(n, "stub", min_length_eps=1e-3)


class TestReopenCross:
    def test_h_reopens_horizontally(self):
        n = symmetric_h_network(stub_len=1e-6)
        merged = collapse_interior(n, "stub", min_length_eps=1e-3)
        v4 = next(v for v in merged.vertices.values() if v.kind is VertexKind.FOUR_POINT)
        delta = 0.05
        reopened = reopen_cross(merged, v4.id, delta)
        juncs = [
            v for v in reopened.vertices.values() if v.kind is VertexKind.TRIPLE_JUNCTION
        ]
        assert len(juncs) == 2
        xs = sorted(v.position[0] for v in juncs)
        assert xs == pytest.approx([-delta / 2, delta / 2], abs=1e-12)
        assert all(abs(v.position[1]) < 1e-12 for v in juncs)
        rep = check_regular(reopened, tol=1e-3)
        assert rep.passed
        assert is_tree(reopened)

    def test_length_budget(self):
        n = symmetric_h_network(stub_len=1e-4)
        L_before = n.total_length()
        stub_len = length(n.curve("stub"))
        merged = collapse_interior(n, "stub", min_length_eps=1e-3)
        v4 = next(v for v in merged.vertices.values() if v.kind is VertexKind.FOUR_POINT)
        delta = 0.05
        reopened = reopen_cross(merged, v4.id, delta)
        assert reopened.total_length() <= L_before + delta * 1.01
        assert abs(reopened.total_length() - L_before) <= stub_len + delta * 1.01

    def test_delta_zero_noop(self):
        n = symmetric_h_network(stub_len=1e-6)
        merged = collapse_interior(n, "stub", min_length_eps=1e-3)
        v4 = next(v for v in merged.vertices.values() if v.kind is VertexKind.FOUR_POINT)
        assert reopen_cross(merged, v4.id, 0.0) is merged

    def test_ninety_degree_arms_rejected(self):
        vertices = [Vertex("x", VertexKind.FOUR_POINT, (0, 0))]
        curves = []
        for i, deg in enumerate((0, 90, 180, 270)):
            end = 2.0 * _unit(deg)
            vid = f"p{i}"
            vertices.append(Vertex(vid, VertexKind.FIXED_ENDPOINT, end))
            curves.append(_segment(f"c{i}", "x", vid, (0, 0), end))
        n = Network(vertices=vertices, curves=curves)
        with pytest.raises(NoAdmissibleOpening):
            reopen_cross(n, "x", 0.05)

    def test_not_four_point(self):
        n = standard_triod(m=12)
        with pytest.raises(NotFourPoint):
            reopen_cross(n, "o", 0.05)

    def test_metadata_free_singular_configuration(self):
        # arms at +-30/+-150 degrees (the collapse limit of a vertical inner
        # curve): without metadata the 60-degree gaps select the transverse
        # horizontal opening
        vertices = [Vertex("x", VertexKind.FOUR_POINT, (0, 0))]
        curves = []
        for i, deg in enumerate((30, 150, 210, 330)):
            end = 2.0 * _unit(deg)
            vid = f"p{i}"
            vertices.append(Vertex(vid, VertexKind.FIXED_ENDPOINT, end))
            curves.append(_segment(f"c{i}", "x", vid, (0, 0), end))
        n = Network(vertices=vertices, curves=curves)
        reopened = reopen_cross(n, "x", 0.05)
        juncs = [
            v for v in reopened.vertices.values() if v.kind is VertexKind.TRIPLE_JUNCTION
        ]
        xs = sorted(v.position[0] for v in juncs)
        assert xs == pytest.approx([-0.025, 0.025], abs=1e-12)
        assert check_regular(reopened, tol=1e-3).passed


class TestBoundarySurgery:
    def test_collapse_symmetric_y(self):
        n = symmetric_y_network(stem_len=1e-6)
        out = collapse_boundary(n, "stem", min_length_eps=1e-3)
        assert "j" not in out.vertices
        ends = out.incident_ends("p")
        assert len(ends) == 2
        d1 = outward_tangent(*ends[0])
        d2 = outward_tangent(*ends[1])
        ang = math.degrees(math.acos(float(np.clip(np.dot(d1, d2), -1, 1))))
        assert ang == pytest.approx(120.0, abs=1e-6)

    def test_inner_curve_rejected(self):
        n = symmetric_h_network()
        with pytest.raises(NotBoundaryCurve):
            collapse_boundary(n, "stub", min_length_eps=1e-3)

    def test_reopen_boundary_symmetric(self):
        n = symmetric_y_network(stem_len=1e-6)
        collapsed = collapse_boundary(n, "stem", min_length_eps=1e-3)
        delta = 0.05
        reopened = reopen_boundary(collapsed, "p", delta)
        rep = check_regular(reopened, tol=1e-9)
        assert rep.passed  # exact by symmetry
        assert is_tree(reopened)
        juncs = [
            v for v in reopened.vertices.values() if v.kind is VertexKind.TRIPLE_JUNCTION
        ]
        assert len(juncs) == 1
        assert np.allclose(juncs[0].position, (0, -delta), atol=1e-12)

    def test_reopen_delta_too_large(self):
        n = symmetric_y_network(stem_len=1e-6)
        collapsed = collapse_boundary(n, "stem", min_length_eps=1e-3)
        with pytest.raises(NotCollapsedEndpoint):
            reopen_boundary(collapsed, "p", 2.0)

    def test_reopen_requires_two_valent(self):
        n = symmetric_y_network()
        with pytest.raises(NotCollapsedEndpoint):
            reopen_boundary(n, "e_l", 0.05)

    def test_roundtrip_hausdorff(self):
        delta = 0.02
        n = symmetric_y_network(stem_len=1e-6)
        collapsed = collapse_boundary(n, "stem", min_length_eps=1e-3)
        reopened = reopen_boundary(collapsed, "p", delta)
        arms_orig = [n.curve("arm_l"), n.curve("arm_r")]
        arms_new = [reopened.curve("arm_l"), reopened.curve("arm_r")]
        assert hausdorff_distance(arms_orig, arms_new) <= 2 * delta

    def test_reflection_consistency(self):
        # doubling the Y by central symmetry at P and collapsing the doubled
        # inner curve reproduces the same two-curve local picture at P
        stem_len = 1e-6
        n = symmetric_y_network(stem_len=stem_len)
        collapsed_direct = collapse_boundary(n, "stem", min_length_eps=1e-3)

        # reflected network: junction at -stem_len mirrored to +stem_len
        j = np.array([0.0, -stem_len])
        jm = -j
        vertices = [
            Vertex("j", VertexKind.TRIPLE_JUNCTION, j),
            Vertex("jm", VertexKind.TRIPLE_JUNCTION, jm),
        ]
        curves = [_segment("inner", "j", "jm", j, jm, m=8)]
        for name, deg in (("l", 210.0), ("r", 330.0)):
            end = j + 1.5 * _unit(deg)
            vertices.append(Vertex(f"e_{name}", VertexKind.FIXED_ENDPOINT, end))
            curves.append(_segment(f"arm_{name}", "j", f"e_{name}", j, end))
            endm = -end
            vertices.append(Vertex(f"me_{name}", VertexKind.FIXED_ENDPOINT, endm))
            curves.append(_segment(f"marm_{name}", "jm", f"me_{name}", jm, endm))
        doubled = Network(vertices=vertices, curves=curves)
        merged = collapse_interior(doubled, "inner", min_length_eps=1e-3)
        # the two original arms around the 4-point match the direct collapse
        arms_direct = [collapsed_direct.curve("arm_l"), collapsed_direct.curve("arm_r")]
        arms_doubled = [merged.curve("arm_l"), merged.curve("arm_r")]
        assert hausdorff_distance(arms_direct, arms_doubled) < 1e-6


class TestSurgeryWithinRun:
    def test_collapse_detected_and_restarted(self):
        # small-bulge wide-angle configuration: the inner curve collapses
        # quickly, surgery restarts the flow on a regular tree
        from netflow.scenarios import build_section6
        from netflow.solver import run

        n = build_section6(2.0, 0.5, 0.06, m=40)
        cfg = FlowConfig(
            dt=1e-4,
            m=40,
            t_end=5.0,
            surgery_enabled=True,
            min_length_eps=0.04,
            detect_window=20,
        )
        traj = run(n, cfg)
        kinds = [e.kind.value for e in traj.events]
        assert "type0_interior" in kinds
        # after surgery the network is again a regular tree with the
        # transverse (horizontal) inner curve
        assert is_tree(traj.final)
        assert check_regular(traj.final, cfg.angle_tol).passed
        stub = traj.final.curve("x_j_bot_j_top_stub")
        p0 = traj.final.vertices[stub.start_vertex].position
        p1 = traj.final.vertices[stub.end_vertex].position
        d = p1 - p0
        assert abs(d[1]) < 0.2 * abs(d[0])  # horizontal opening
