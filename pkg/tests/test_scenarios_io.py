import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.optimize import minimize

from netflow.cli import main as cli_main
from netflow.errors import (
    AngleConditionViolated,
    InvariantViolation,
    ParseError,
    TopologyNotAdmissible,
)
from netflow.geometry import check_regular, is_tree, length
from netflow.io import (
    network_from_text,
    network_to_text,
    read_network,
    write_network,
)
from netflow.scenarios import (
    build_section6,
    circle_validation,
    semicircle,
    standard_triod,
    steiner4,
)

SQRT3 = math.sqrt(3.0)


class TestBuildSection6:
    def test_valid_network(self):
        n = build_section6(2.0, 1.0, 0.3, m=60)
        assert is_tree(n)
        assert len(n.curves) == 5
        rep = check_regular(n, tol=1e-3)
        assert rep.passed

    def test_angle_condition(self):
        with pytest.raises(AngleConditionViolated):
            build_section6(1.0, 1.0, 0.3)
        # boundary case: barely admissible passes
        build_section6(SQRT3 + 1e-6, 1.0, 0.3, m=24)

    @staticmethod
    def _symmetry_dev(n):
        # rotation by 180 degrees maps each curve onto its known partner
        dev = 0.0
        for a, b in (("arm_ne", "arm_sw"), ("arm_nw", "arm_se")):
            dev = max(dev, np.abs(n.curve(a).pts + n.curve(b).pts).max())
        inner = n.curve("inner").pts
        dev = max(dev, np.abs(inner + inner[::-1]).max())
        return dev

    def test_central_symmetry(self):
        n = build_section6(2.0, 1.0, 0.3, m=60)
        assert self._symmetry_dev(n) < 1e-12

    def test_symmetry_maintained_by_flow(self):
        from netflow.solver import FlowConfig, run

        n = build_section6(2.0, 1.0, 0.3, m=40)
        cfg = FlowConfig(dt=1e-4, m=40, t_end=0.02, detect_window=10**9)
        traj = run(n, cfg)
        assert self._symmetry_dev(traj.final) < 1e-8

    def test_endpoints_on_domain(self):
        n = build_section6(2.0, 1.0, 0.3, m=24)
        for vid in ("p_ne", "p_nw", "p_sw", "p_se"):
            p = n.vertices[vid].position
            q = (p[0] / n.domain.a) ** 2 + (p[1] / n.domain.b) ** 2
            assert q == pytest.approx(1.0, abs=1e-12)


def brute_force_steiner_length(a, b):
    """Independent oracle: minimize total length over the two junction
    positions for the transverse topology."""
    terminals = np.array([[a, b], [a, -b], [-a, b], [-a, -b]], float)

    def total(z):
        j1 = z[:2]
        j2 = z[2:]
        return (
            np.linalg.norm(j1 - terminals[0])
            + np.linalg.norm(j1 - terminals[1])
            + np.linalg.norm(j2 - terminals[2])
            + np.linalg.norm(j2 - terminals[3])
            + np.linalg.norm(j1 - j2)
        )

    z0 = np.array([0.5 * a, 0.0, -0.5 * a, 0.0])
    res = minimize(total, z0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    return res.fun


class TestSteiner4:
    def test_closed_form_value(self):
        _, total = steiner4(2.0, 1.0)
        assert total == pytest.approx(4 + 2 * SQRT3, abs=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            a = rng.uniform(0.8, 3.0)
            b = rng.uniform(0.2, a * SQRT3 * 0.9)
            if a <= b / SQRT3:
                continue
            _, total = steiner4(a, b)
            assert total == pytest.approx(brute_force_steiner_length(a, b), abs=1e-6)

    def test_junction_positions(self):
        n, _ = steiner4(2.0, 1.0)
        s = 2.0 - 1.0 / SQRT3
        assert np.allclose(n.vertices["j_r"].position, (s, 0.0))
        assert np.allclose(n.vertices["j_l"].position, (-s, 0.0))

    def test_regular_to_high_tolerance(self):
        n, _ = steiner4(2.0, 1.0)
        rep = check_regular(n, tol=1e-9)
        assert rep.passed
        for angles in rep.pairwise_angles.values():
            for ang in angles:
                assert ang == pytest.approx(2 * math.pi / 3, abs=1e-9)

    def test_degenerate_limit(self):
        b = 1.0
        a = b / SQRT3 + 1e-9
        n, total = steiner4(a, b)
        # junctions nearly coincide, length is continuous in the limit
        assert np.linalg.norm(n.vertices["j_r"].position - n.vertices["j_l"].position) < 1e-8
        assert total == pytest.approx(2 * a + 2 * SQRT3 * b, abs=1e-12)

    def test_inadmissible(self):
        with pytest.raises(TopologyNotAdmissible):
            steiner4(0.5, 1.0)


class TestNetworkFiles:
    def test_roundtrip_identity(self, tmp_path):
        n = build_section6(2.0, 1.0, 0.3, m=24)
        p1 = tmp_path / "net.json"
        p2 = tmp_path / "net2.json"
        write_network(n, p1)
        n2 = read_network(p1)
        write_network(n2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_canonical_equals_rewrite(self, tmp_path):
        n = standard_triod(m=12)
        text = network_to_text(n)
        assert network_to_text(network_from_text(text)) == text

    def test_four_valent_vertex_rejected(self):
        doc = {
            "schema": 1,
            "domain": None,
            "vertices": [
                {"id": "o", "kind": "triple_junction", "x": 0.0, "y": 0.0},
            ]
            + [
                {
                    "id": f"p{i}",
                    "kind": "fixed_endpoint",
                    "x": math.cos(a),
                    "y": math.sin(a),
                }
                for i, a in enumerate(np.deg2rad([0, 90, 180, 270]))
            ],
            "curves": [
                {
                    "id": f"c{i}",
                    "start": "o",
                    "end": f"p{i}",
                    "samples": [
                        [t * math.cos(a), t * math.sin(a)]
                        for t in np.linspace(0, 1, 9)
                    ],
                }
                for i, a in enumerate(np.deg2rad([0, 90, 180, 270]))
            ],
        }
        with pytest.raises(InvariantViolation, match="'o'"):
            network_from_text(json.dumps(doc))

    def test_missing_field_parse_error(self):
        doc = {
            "schema": 1,
            "vertices": [{"id": "a", "kind": "fixed_endpoint", "x": 0.0, "y": 0.0}],
            "curves": [{"id": "c", "start": "a", "samples": [[0, 0], [1, 1]]}],
        }
        with pytest.raises(ParseError, match="end"):
            network_from_text(json.dumps(doc))

    def test_bad_json(self):
        with pytest.raises(ParseError, match="line"):
            network_from_text("{not json")

    def test_polygon_domain_roundtrip(self, tmp_path):
        from netflow.geometry import ConvexPolygon, Network

        n = standard_triod(m=12)
        n = Network(
            vertices=n.vertices,
            curves=n.curves,
            domain=ConvexPolygon([(-2, -2), (2, -2), (2, 2), (-2, 2)]),
        )
        p = tmp_path / "poly.json"
        write_network(n, p)
        n2 = read_network(p)
        assert isinstance(n2.domain, ConvexPolygon)
        assert np.array_equal(n2.domain.vertices, n.domain.vertices)


class TestCli:
    def test_triod_steady_state(self, tmp_path):
        out = tmp_path / "out"
        rc = cli_main(
            [
                "--scenario", "triod",
                "--t-end", "0.1",
                "--samples", "40",
                "--output-dir", str(out),
            ]
        )
        assert rc == 0
        events = (out / "events.ndjson").read_text().strip().splitlines()
        assert any(json.loads(line)["kind"] == "steady_state" for line in events)
        assert (out / "series.csv").exists()
        assert (out / "final_network.json").exists()

    def test_bad_input_loop_exit_1(self, tmp_path):
        doc = {
            "schema": 1,
            "domain": None,
            "vertices": [
                {"id": "l", "kind": "triple_junction", "x": 0.0, "y": 0.0},
                {"id": "r", "kind": "triple_junction", "x": 1.0, "y": 0.0},
                {"id": "a", "kind": "fixed_endpoint", "x": -1.0, "y": 0.0},
                {"id": "b", "kind": "fixed_endpoint", "x": 2.0, "y": 0.0},
            ],
            "curves": [
                {
                    "id": "t",
                    "start": "l",
                    "end": "r",
                    "samples": [[x, 0.2 * math.sin(math.pi * x)] for x in np.linspace(0, 1, 9)],
                },
                {
                    "id": "u",
                    "start": "l",
                    "end": "r",
                    "samples": [[x, -0.2 * math.sin(math.pi * x)] for x in np.linspace(0, 1, 9)],
                },
                {
                    "id": "sa",
                    "start": "a",
                    "end": "l",
                    "samples": [[x, 0.0] for x in np.linspace(-1, 0, 9)],
                },
                {
                    "id": "sb",
                    "start": "r",
                    "end": "b",
                    "samples": [[x, 0.0] for x in np.linspace(1, 2, 9)],
                },
            ],
        }
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        rc = cli_main(["--input", str(bad), "--t-end", "0.01"])
        assert rc == 1

    def test_usage_error_exit_1(self):
        assert cli_main(["--scenario", "triod", "--probe", "nonsense"]) == 1
        assert cli_main([]) == 1

    def test_determinism(self, tmp_path):
        args = [
            "--scenario", "semicircle",
            "--t-end", "0.01",
            "--samples", "40",
            "--probe", "0.0,0.4,0.05",
        ]
        outs = []
        for k in (1, 2):
            out = tmp_path / f"out{k}"
            rc = cli_main(args + ["--output-dir", str(out)])
            assert rc == 0
            outs.append(out)
        for fname in ("series.csv", "events.ndjson", "final_network.json", "probes.csv", "report.json"):
            b1 = (outs[0] / fname).read_bytes()
            b2 = (outs[1] / fname).read_bytes()
            assert b1 == b2, fname

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        out = tmp_path / "envout"
        monkeypatch.setenv("NETFLOW_OUTPUT_DIR", str(out))
        rc = cli_main(["--scenario", "semicircle", "--t-end", "0.002", "--samples", "24"])
        assert rc == 0
        assert (out / "series.csv").exists()

    def test_log_events_path(self, tmp_path):
        out = tmp_path / "out"
        log = tmp_path / "ev.ndjson"
        rc = cli_main(
            [
                "--scenario", "triod",
                "--t-end", "0.02",
                "--samples", "24",
                "--output-dir", str(out),
                "--log-events", str(log),
            ]
        )
        assert rc == 0
        assert log.exists()

    def test_jitter_seed_determinism(self, tmp_path):
        args = [
            "--scenario", "semicircle",
            "--t-end", "0.002",
            "--samples", "24",
            "--jitter", "1e-5",
            "--seed", "11",
        ]
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert cli_main(args + ["--output-dir", str(out1)]) == 0
        assert cli_main(args + ["--output-dir", str(out2)]) == 0
        assert (out1 / "series.csv").read_bytes() == (out2 / "series.csv").read_bytes()

    def test_console_entry_point(self, tmp_path):
        # the installed script runs end to end
        out = tmp_path / "out"
        proc = subprocess.run(
            [
                sys.executable, "-m", "netflow.cli",
                "--scenario", "triod",
                "--t-end", "0.006",
                "--samples", "24",
                "--output-dir", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "finished" in proc.stdout
