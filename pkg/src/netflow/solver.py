"""Semi-implicit time integration of the parametrization-fixed curvature flow
with junction coupling, fixed endpoints and periodic arclength resampling.

Each step solves, per coordinate, the linear system

    (I - dt * D2 / ell_old^2) gamma_new = gamma_old

where D2 is the uniform-parameter second difference and ell_old the local
chord scale of the previous state.  Rows at triple junctions are replaced by
the concurrency condition (the three incident curve ends share one unknown
position) and the angle condition (the outward one-sided tangents sum to
zero), linearized around the old state and corrected by a few fixed-point
iterations on the tangent normalization.  Fixed endpoints are pinned.

A single closed curve with no vertices runs through a cyclic tridiagonal
solve instead; this validation mode exists for the analytic circle oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from . import events as events_mod
from .errors import (
    AngleIterationDiverged,
    SingularSystem,
    StepRejected,
)
from .geometry import (
    CurveSamples,
    Network,
    arclength_weights,
    is_tree,
    resample_uniform,
    second_difference_velocity,
)


@dataclass
class FlowConfig:
    """Run parameters.  min_length_eps, curvature_blowup_k and surgery_delta
    default to scale-aware values derived from the initial state (two grid
    spacings, ten times the initial sup-norm of the curvature, and five grid
    spacings respectively)."""

    dt: float = 1e-4
    m: int = 100
    t_end: float = 1.0
    angle_tol: float = 1e-3
    resample_every: int = 10
    min_length_eps: float | None = None
    curvature_blowup_k: float | None = None
    surgery_enabled: bool = False
    surgery_delta: float | None = None
    steady_tol: float = 1e-3
    detect_window: int = 50
    snapshot_every: int = 20
    max_dt_halvings: int = 10
    max_angle_iters: int = 3

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.m < 4:
            raise ValueError("need at least 4 parameter intervals per curve")


@dataclass
class SeriesRow:
    t: float
    lengths: dict
    kappa_l2: float
    kappa_inf: float
    ds_kappa_l2: float
    junction_residual: float
    endpoint_kappa_sq: float = 0.0  # max kappa^2 over fixed-endpoint ends


@dataclass
class Trajectory:
    """Snapshots, per-step scalar series and events of one run."""

    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    events: list = field(default_factory=list)
    series: list = field(default_factory=list)
    config: FlowConfig | None = None

    @property
    def final(self) -> Network:
        return self.snapshots[-1]

    def curve_ids(self):
        ids = []
        for row in self.series:
            for cid in row.lengths:
                if cid not in ids:
                    ids.append(cid)
        return ids


def special_flow_tangential_velocity(c: CurveSamples) -> np.ndarray:
    """Tangential component of the parametrization-fixed velocity,
    <D2 gamma / ell^2, tau>, per node."""
    v = second_difference_velocity(c)
    return np.einsum("ij,ij->i", v, c.tau)


def _one_sided_first_weights(a, b):
    """First-derivative weights at 0 for nodes (0, a, a+b)."""
    w0 = -(2.0 * a + b) / (a * (a + b))
    w1 = (a + b) / (a * b)
    w2 = -a / (b * (a + b))
    return w0, w1, w2


def _junction_stencil(pts, at_start):
    """One-sided outward first-derivative stencil at a curve end: interior
    node indices (relative to the interior block), weights (w0 on the
    junction node) and the current derivative vector."""
    if at_start:
        p0, p1, p2 = pts[0], pts[1], pts[2]
        inner = (0, 1)  # interior indices of nodes 1, 2
    else:
        m = len(pts) - 1
        p0, p1, p2 = pts[m], pts[m - 1], pts[m - 2]
        inner = (m - 2, m - 3)  # interior indices of nodes m-1, m-2
    a = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    b = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
    w = _one_sided_first_weights(a, b)
    vec = w[0] * p0 + w[1] * p1 + w[2] * p2
    return inner, w, vec


class _TreeStepper:
    """Per-step solver for an open-tree network.

    The interior of every curve is eliminated with a banded solve (the
    interior values depend affinely on the two end positions), leaving a
    small dense system for the junction positions that carries the
    concurrency and angle conditions.  Valid while topology and sample
    counts are unchanged; rebuilt after surgery.
    """

    def __init__(self, n: Network):
        from .geometry import VertexKind

        self.curve_ids = [c.id for c in n.curves]
        jids = sorted(
            v.id for v in n.vertices.values() if v.kind is VertexKind.TRIPLE_JUNCTION
        )
        self.j_index = {jid: q for q, jid in enumerate(jids)}
        self.n_junctions = len(jids)
        # per curve: junction index of each end, or None when fixed
        self.end_j = [
            (self.j_index.get(c.start_vertex), self.j_index.get(c.end_vertex))
            for c in n.curves
        ]
        # per junction: incident (curve index, at_start)
        self.junction_ends = [[] for _ in range(self.n_junctions)]
        for ci, c in enumerate(n.curves):
            sj, ej = self.end_j[ci]
            if sj is not None:
                self.junction_ends[sj].append((ci, True))
            if ej is not None:
                self.junction_ends[ej].append((ci, False))

    def step(self, n: Network, dt: float, angle_tol: float, max_angle_iters: int = 3) -> Network:
        pts_list = [c.pts for c in n.curves]
        old_lengths = [float(c.chords().sum()) for c in n.curves]

        # eliminate curve interiors: inner = x0 + gL pL + gR pR per
        # coordinate.  The per-curve tridiagonal blocks are uncoupled, so
        # they stack into one banded solve; the g columns carry the unit
        # responses to the junction end positions.
        sizes = [len(p) - 1 for p in pts_list]
        offsets = np.concatenate([[0], np.cumsum([m - 1 for m in sizes])])
        total = offsets[-1]
        n_g = sum((sj is not None) + (ej is not None) for sj, ej in self.end_j)
        ab = np.zeros((3, total))
        rhs = np.zeros((total, 2 + n_g))
        gcol = 2
        gcols = []
        for ci, pts in enumerate(pts_list):
            lo, hi = offsets[ci], offsets[ci + 1]
            ch = n.curves[ci].chords()
            ell = 0.5 * (ch[:-1] + ch[1:])
            rr = dt / ell**2
            ab[1, lo:hi] = 1.0 + 2.0 * rr
            ab[0, lo + 1 : hi] = -rr[:-1]
            ab[2, lo : hi - 1] = -rr[1:]
            rhs[lo:hi, :2] = pts[1:-1]
            sj, ej = self.end_j[ci]
            cl = cr = None
            if sj is None:
                rhs[lo, :2] += rr[0] * pts[0]
            else:
                rhs[lo, gcol] = rr[0]
                cl = gcol
                gcol += 1
            if ej is None:
                rhs[hi - 1, :2] += rr[-1] * pts[-1]
            else:
                rhs[hi - 1, gcol] = rr[-1]
                cr = gcol
                gcol += 1
            gcols.append((cl, cr))
        try:
            sol = solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True)
        except Exception as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(sol)):
            raise SingularSystem("non-finite interior solve")
        x0s, gls, grs = [], [], []
        for ci in range(len(pts_list)):
            lo, hi = offsets[ci], offsets[ci + 1]
            x0s.append(sol[lo:hi, :2])
            cl, cr = gcols[ci]
            gls.append(sol[lo:hi, cl] if cl is not None else None)
            grs.append(sol[lo:hi, cr] if cr is not None else None)

        def compose(p_junc):
            """Full point arrays from junction positions."""
            out = []
            for ci, pts in enumerate(pts_list):
                sj, ej = self.end_j[ci]
                inner = x0s[ci].copy()
                if sj is not None:
                    inner += gls[ci][:, None] * p_junc[sj]
                if ej is not None:
                    inner += grs[ci][:, None] * p_junc[ej]
                q = np.empty_like(pts)
                q[1:-1] = inner
                q[0] = p_junc[sj] if sj is not None else pts[0]
                q[-1] = p_junc[ej] if ej is not None else pts[-1]
                out.append(q)
            return out

        def junction_residual(new_pts):
            worst = 0.0
            for ends in self.junction_ends:
                tx = ty = 0.0
                for ci, at_start in ends:
                    _, _, vec = _junction_stencil(new_pts[ci], at_start)
                    nrm = max(math.hypot(vec[0], vec[1]), 1e-300)
                    tx += vec[0] / nrm
                    ty += vec[1] / nrm
                worst = max(worst, math.hypot(tx, ty))
            return worst

        if self.n_junctions == 0:
            new_pts = compose([])
        else:
            # angle-condition system on the junction positions; stencil
            # weights and normalizations are refreshed from the new state
            # until the measured residual is inside tolerance
            stencil_pts = pts_list
            new_pts = None
            accepted = False
            for _ in range(max_angle_iters + 1):
                a_mat = np.zeros((self.n_junctions, self.n_junctions))
                rhs_j = np.zeros((self.n_junctions, 2))
                for q, ends in enumerate(self.junction_ends):
                    for ci, at_start in ends:
                        inner_idx, w, vec = _junction_stencil(
                            stencil_pts[ci], at_start
                        )
                        nrm = max(math.hypot(vec[0], vec[1]), 1e-300)
                        a_mat[q, q] += w[0] / nrm
                        sj, ej = self.end_j[ci]
                        for ii, ww in zip(inner_idx, w[1:]):
                            coef = ww / nrm
                            rhs_j[q] -= coef * x0s[ci][ii]
                            if sj is not None:
                                a_mat[q, sj] += coef * gls[ci][ii]
                            if ej is not None:
                                a_mat[q, ej] += coef * grs[ci][ii]
                try:
                    p_junc = np.linalg.solve(a_mat, rhs_j)
                except np.linalg.LinAlgError as exc:
                    raise SingularSystem(str(exc)) from exc
                if not np.all(np.isfinite(p_junc)):
                    raise SingularSystem("non-finite junction solve")
                new_pts = compose(p_junc)
                if junction_residual(new_pts) < angle_tol:
                    accepted = True
                    break
                stencil_pts = new_pts
            if not accepted:
                raise AngleIterationDiverged(
                    f"junction residual {junction_residual(new_pts):.3e} above "
                    f"tol {angle_tol:.1e} after {max_angle_iters} corrections"
                )

        for ci, q in enumerate(new_pts):
            d = np.diff(q, axis=0)
            ch = np.sqrt(np.einsum("ij,ij->i", d, d))
            if np.any(ch <= 0.0):
                raise StepRejected(
                    f"curve {self.curve_ids[ci]!r} degenerated within the step"
                )
            if ch.sum() < 0.4 * old_lengths[ci]:
                raise StepRejected(
                    f"curve {self.curve_ids[ci]!r} would lose most of its "
                    "length within one step"
                )

        vertices = {}
        for vid, v in n.vertices.items():
            q = self.j_index.get(vid)
            vertices[vid] = v if q is None else v.moved(p_junc[q].copy())
        curves = [c.with_points(q) for c, q in zip(n.curves, new_pts)]
        return Network(vertices=vertices, curves=curves, domain=n.domain)


def _solve_cyclic_tridiag(lower, diag, upper, alpha, beta, rhs):
    """Solve a cyclic tridiagonal system; alpha = A[n-1, 0], beta = A[0, n-1].
    Sherman-Morrison correction around a plain banded solve."""
    n = len(diag)
    gamma = -diag[0]
    d2 = diag.copy()
    d2[0] -= gamma
    d2[-1] -= alpha * beta / gamma
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = d2
    ab[2, :-1] = lower[1:]
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = alpha
    v = np.zeros(n)
    v[0] = 1.0
    v[-1] = beta / gamma
    y = solve_banded((1, 1), ab, rhs)
    z = solve_banded((1, 1), ab, u)
    denom = 1.0 + v @ z
    if abs(denom) < 1e-300:
        raise SingularSystem("cyclic correction is singular")
    factor = (v @ y) / denom
    if rhs.ndim == 2:
        return y - z[:, None] * factor
    return y - z * factor


def _step_closed(c: CurveSamples, dt: float) -> CurveSamples:
    pts = c.pts
    ch = c.chords()
    ell = 0.5 * (np.roll(ch, 1) + ch)
    r = dt / ell**2
    diag = 1.0 + 2.0 * r
    lower = np.empty_like(r)
    upper = np.empty_like(r)
    lower[:] = -r  # lower[j] = A[j, j-1]
    upper[:] = -r  # upper[j] = A[j, j+1]
    try:
        q = _solve_cyclic_tridiag(lower, diag, upper, -r[-1], -r[0], pts)
    except SingularSystem:
        raise
    except Exception as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(q)):
        raise SingularSystem("non-finite solution")
    new_ch = np.linalg.norm(np.diff(np.vstack([q, q[:1]]), axis=0), axis=1)
    if np.any(new_ch <= 0.0):
        raise StepRejected(f"closed curve {c.id!r} degenerated within the step")
    if new_ch.sum() < 0.4 * ch.sum():
        raise StepRejected(
            f"closed curve {c.id!r} would lose most of its length in one step"
        )
    return c.with_points(q)


def step(n: Network, cfg: FlowConfig, dt: float | None = None) -> Network:
    """One semi-implicit step of the network flow; returns the new snapshot."""
    dt = cfg.dt if dt is None else dt
    if n.is_closed_validation:
        c = _step_closed(n.curves[0], dt)
        return Network(vertices={}, curves=[c], domain=n.domain)
    n.validate(strict=True)
    report = _junction_report(n)
    if report > cfg.angle_tol:
        raise StepRejected(
            f"initial junction residual {report:.3e} exceeds angle_tol"
        )
    stepper = _TreeStepper(n)
    return stepper.step(n, dt, cfg.angle_tol, cfg.max_angle_iters)


def _junction_report(n: Network) -> float:
    from .geometry import check_regular

    rep = check_regular(n, tol=np.inf)
    return rep.max_residual


def _norms_row(n: Network, t: float) -> SeriesRow:
    from .diagnostics import curvature_norms, endpoint_curvature_sq_bound
    from .geometry import batch_compute_frames, length

    batch_compute_frames(n.curves)
    norms = curvature_norms(n)
    return SeriesRow(
        t=t,
        lengths={c.id: length(c) for c in n.curves},
        kappa_l2=norms.kappa_l2,
        kappa_inf=norms.kappa_inf,
        ds_kappa_l2=norms.ds_kappa_l2,
        junction_residual=_junction_report(n),
        endpoint_kappa_sq=0.0 if n.is_closed_validation else endpoint_curvature_sq_bound(n),
    )


def _attach_zeta(n: Network) -> Network:
    for c in n.curves:
        c.zeta = special_flow_tangential_velocity(c)
    return n


def _resample_network(n: Network, m: int) -> Network:
    return Network(
        vertices=n.vertices,
        curves=[resample_uniform(c, m) for c in n.curves],
        domain=n.domain,
    )


def run(n0: Network, cfg: FlowConfig) -> Trajectory:
    """Integrate from n0 until t_end or a detected event.

    Curves are resampled to uniform arclength every cfg.resample_every steps.
    On a rejected step the time step is halved (at most max_dt_halvings
    times) and kept at the reduced value.  With surgery enabled, an interior
    or boundary collapse triggers the collapse/reopen pair and the run
    continues; otherwise any detected event ends the run.
    """
    closed_mode = n0.is_closed_validation
    if not closed_mode:
        n0.validate(strict=True)
        if not is_tree(n0):
            raise ValueError("run requires a tree (or the closed validation curve)")
    n = _resample_network(n0, cfg.m)

    row0 = _norms_row(n, 0.0)
    eps = cfg.min_length_eps
    if eps is None:
        eps = 2.0 * min(L / cfg.m for L in row0.lengths.values())
    blowup_k = cfg.curvature_blowup_k
    if blowup_k is None:
        blowup_k = 10.0 * row0.kappa_inf if row0.kappa_inf > 1e-8 else math.inf
    delta = cfg.surgery_delta
    if delta is None:
        delta = 5.0 * np.mean([L / cfg.m for L in row0.lengths.values()])
    resolved = replace(
        cfg,
        min_length_eps=eps,
        curvature_blowup_k=blowup_k,
        surgery_delta=delta,
    )

    traj = Trajectory(config=resolved)
    traj.series.append(row0)
    traj.times.append(0.0)
    traj.snapshots.append(_attach_zeta(n.copy()))

    window = events_mod.DetectionWindow(closed_mode=closed_mode, network=n)
    window.push(row0)

    stepper = None if closed_mode else _TreeStepper(n)
    t = 0.0
    dt = resolved.dt
    halvings = 0
    accepted_streak = 0
    step_count = 0

    while t < resolved.t_end - 1e-15:
        try:
            if closed_mode:
                n_new = Network(
                    vertices={},
                    curves=[_step_closed(n.curves[0], dt)],
                    domain=n.domain,
                )
            else:
                n_new = stepper.step(n, dt, resolved.angle_tol, resolved.max_angle_iters)
        except (StepRejected, AngleIterationDiverged, SingularSystem):
            halvings += 1
            if halvings > resolved.max_dt_halvings:
                raise
            dt *= 0.5
            accepted_streak = 0
            continue

        n = n_new
        t += dt
        step_count += 1

        # climb back to the configured step once the transient that forced
        # the halving has passed; a sustained streak of accepted steps also
        # restores the halving budget
        if dt < resolved.dt:
            accepted_streak += 1
            if accepted_streak >= 25:
                halvings = 0
                dt = min(2.0 * dt, resolved.dt)
                accepted_streak = 0

        if resolved.resample_every and step_count % resolved.resample_every == 0:
            n = _resample_network(n, resolved.m)

        row = _norms_row(n, t)
        traj.series.append(row)
        window.network = n
        window.push(row)

        if step_count % resolved.snapshot_every == 0:
            traj.times.append(t)
            traj.snapshots.append(_attach_zeta(n.copy()))

        ev = events_mod.detect(window, resolved)
        if ev is not None:
            traj.events.append(ev)
            if traj.times[-1] != t:
                traj.times.append(t)
                traj.snapshots.append(_attach_zeta(n.copy()))
            if ev.kind in (
                events_mod.EventKind.STEADY_STATE,
                events_mod.EventKind.EXTINCTION,
                events_mod.EventKind.CURVATURE_BLOWUP,
            ):
                return traj
            if not resolved.surgery_enabled:
                return traj
            n = _apply_surgery(n, ev, resolved)
            n = _resample_network(n, resolved.m)
            stepper = _TreeStepper(n)
            window.reset(n)
            traj.times.append(t)
            traj.snapshots.append(_attach_zeta(n.copy()))
            # surgery reprojects tangents, so the curvature baseline moves;
            # rebase the blow-up threshold on the restarted state
            post = _norms_row(n, t)
            if post.kappa_inf > 1e-8:
                resolved = replace(
                    resolved,
                    curvature_blowup_k=max(
                        resolved.curvature_blowup_k, 10.0 * post.kappa_inf
                    ),
                )

    if traj.times[-1] != t:
        traj.times.append(t)
        traj.snapshots.append(_attach_zeta(n.copy()))
    return traj


def _apply_surgery(n: Network, ev, cfg: FlowConfig) -> Network:
    from .geometry import VertexKind

    if ev.kind is events_mod.EventKind.TYPE0_INTERIOR:
        merged = events_mod.collapse_interior(n, ev.curve_id, cfg.min_length_eps)
        four = [
            v.id for v in merged.vertices.values() if v.kind is VertexKind.FOUR_POINT
        ]
        return events_mod.reopen_cross(merged, four[0], cfg.surgery_delta)
    if ev.kind is events_mod.EventKind.BOUNDARY_COLLAPSE:
        c = n.curve(ev.curve_id)
        p_id = (
            c.start_vertex
            if n.vertices[c.start_vertex].kind is VertexKind.FIXED_ENDPOINT
            else c.end_vertex
        )
        collapsed = events_mod.collapse_boundary(n, ev.curve_id, cfg.min_length_eps)
        return events_mod.reopen_boundary(collapsed, p_id, cfg.surgery_delta)
    raise ValueError(f"no surgery for event kind {ev.kind}")


def length_evolution_residual(traj: Trajectory, curve_id: str):
    """Residual of dL/dt = zeta(end1) - zeta(end0) - int kappa^2 ds along the
    snapshots of a trajectory (centered differences in time; zeta is zero at
    fixed endpoints).  Returns (times, residuals) arrays."""
    from .geometry import VertexKind, length

    if len(traj.snapshots) < 3:
        raise ValueError("need at least three snapshots")
    times, residuals = [], []
    for k in range(1, len(traj.snapshots) - 1):
        try:
            prev_c = traj.snapshots[k - 1].curve(curve_id)
            cur = traj.snapshots[k]
            cur_c = cur.curve(curve_id)
            next_c = traj.snapshots[k + 1].curve(curve_id)
        except KeyError:
            continue
        dt_span = traj.times[k + 1] - traj.times[k - 1]
        if dt_span <= 0:
            continue
        dldt = (length(next_c) - length(prev_c)) / dt_span
        zeta = cur_c.zeta
        if zeta is None:
            zeta = special_flow_tangential_velocity(cur_c)
        if cur_c.closed:
            z1 = z0 = 0.0
        else:
            z0 = zeta[0]
            z1 = zeta[-1]
            if cur.vertices[cur_c.start_vertex].kind is VertexKind.FIXED_ENDPOINT:
                z0 = 0.0
            if cur.vertices[cur_c.end_vertex].kind is VertexKind.FIXED_ENDPOINT:
                z1 = 0.0
        int_k2 = float((cur_c.kappa**2 * arclength_weights(cur_c)).sum())
        residuals.append(dldt - (z1 - z0 - int_k2))
        times.append(traj.times[k])
    return np.asarray(times), np.asarray(residuals)
