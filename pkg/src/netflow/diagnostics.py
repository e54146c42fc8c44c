"""Curvature norms, Gaussian density and its monotonicity, parabolic
rescaling, tangent-flow classification and the estimate monitors.

The density of a sampled geometry is the trapezoid quadrature of the
backward heat kernel exp(-|p - p0|^2 / 4 s) / sqrt(4 pi s) in arclength.
Synthetic unbounded model configurations (line, halfline, triod, cross)
carry analytic ray tails integrated in closed form with erfc, so their
densities are exact up to the quadrature on the sampled part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .errors import ProbeNotInFuture, WindowEmpty
from .geometry import (
    CurveSamples,
    Network,
    arclength_weights,
    path_depth,
)
from .junctions import shrinker_residual


def _curve_list(geometry):
    if isinstance(geometry, Network):
        return geometry.curves
    return list(geometry)


# -- norms ----------------------------------------------------------------------


@dataclass
class CurvatureNorms:
    kappa_l2: float
    kappa_inf: float
    ds_kappa_l2: float


def curvature_norms(geometry) -> CurvatureNorms:
    """(||kappa||_L2, ||kappa||_Linf, ||ds kappa||_L2) over all curves."""
    k2 = 0.0
    kinf = 0.0
    dk2 = 0.0
    for c in _curve_list(geometry):
        w = arclength_weights(c)
        k2 += float((c.kappa**2 * w).sum())
        dk2 += float((c.ds_kappa**2 * w).sum())
        kinf = max(kinf, float(np.abs(c.kappa).max()))
    return CurvatureNorms(
        kappa_l2=math.sqrt(k2), kappa_inf=kinf, ds_kappa_l2=math.sqrt(dk2)
    )


# -- Gaussian density -------------------------------------------------------------


@dataclass
class DensityProbe:
    p0: np.ndarray
    t0: float

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float).reshape(2)


@dataclass
class Ray:
    """Halfline origin + unit direction; analytic tail of a model network."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)
        d = np.asarray(self.direction, dtype=float).reshape(2)
        self.direction = d / np.linalg.norm(d)


def _ray_density(ray: Ray, p0, sigma):
    """Exact kernel integral over a halfline."""
    w = ray.origin - p0
    b = float(np.dot(w, ray.direction))
    perp2 = float(np.dot(w, w)) - b * b
    return 0.5 * math.exp(-max(perp2, 0.0) / (4.0 * sigma)) * erfc(
        b / (2.0 * math.sqrt(sigma))
    )


def gaussian_density_static(geometry, p0, sigma, tail_rays=()) -> float:
    """Density of a static sampled geometry at kernel scale sigma = t0 - t."""
    if sigma <= 0:
        raise ProbeNotInFuture(f"kernel scale sigma={sigma} must be positive")
    p0 = np.asarray(p0, dtype=float).reshape(2)
    total = 0.0
    norm = math.sqrt(4.0 * math.pi * sigma)
    for c in _curve_list(geometry):
        w = arclength_weights(c)
        d2 = ((c.pts - p0) ** 2).sum(axis=1)
        total += float((np.exp(-d2 / (4.0 * sigma)) * w).sum()) / norm
    for ray in tail_rays:
        total += _ray_density(ray, p0, sigma)
    return total


def gaussian_density(geometry, probe: DensityProbe, t: float = 0.0, tail_rays=()) -> float:
    """Density Theta_{p0,t0}(t) of a snapshot at time t; t must precede t0."""
    if t >= probe.t0:
        raise ProbeNotInFuture(f"snapshot time {t} is not before t0={probe.t0}")
    return gaussian_density_static(geometry, probe.p0, probe.t0 - t, tail_rays)


# -- model configurations ---------------------------------------------------------


def _ray_curve(cid, origin, direction, extent, m):
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    ts = np.linspace(0.0, extent, m + 1)[:, None]
    pts = np.asarray(origin, dtype=float) + ts * direction
    return CurveSamples(id=cid, start_vertex=None, end_vertex=None, pts=pts)


def model_halfline(origin=(0.0, 0.0), angle=0.0, extent=10.0, m=4000):
    """Sampled halfline plus its analytic tail ray."""
    d = np.array([math.cos(angle), math.sin(angle)])
    curve = _ray_curve("halfline", origin, d, extent, m)
    tail = [Ray(np.asarray(origin) + extent * d, d)]
    return [curve], tail


def model_line(origin=(0.0, 0.0), angle=0.0, extent=10.0, m=4000):
    curves, tails = [], []
    for i, a in enumerate((angle, angle + math.pi)):
        d = np.array([math.cos(a), math.sin(a)])
        curves.append(_ray_curve(f"line_{i}", origin, d, extent, m))
        tails.append(Ray(np.asarray(origin) + extent * d, d))
    return curves, tails


def model_triod(origin=(0.0, 0.0), phase=math.pi / 2, extent=10.0, m=4000):
    """Standard triod: three halflines at 120 degrees."""
    curves, tails = [], []
    for i in range(3):
        a = phase + i * 2.0 * math.pi / 3.0
        d = np.array([math.cos(a), math.sin(a)])
        curves.append(_ray_curve(f"triod_{i}", origin, d, extent, m))
        tails.append(Ray(np.asarray(origin) + extent * d, d))
    return curves, tails


def model_cross(origin=(0.0, 0.0), phase=0.0, extent=10.0, m=4000):
    """Standard cross: two lines meeting at 60/120 degrees."""
    curves, tails = [], []
    for i, a in enumerate(
        (phase, phase + math.pi / 3, phase + math.pi, phase + 4 * math.pi / 3)
    ):
        d = np.array([math.cos(a), math.sin(a)])
        curves.append(_ray_curve(f"cross_{i}", origin, d, extent, m))
        tails.append(Ray(np.asarray(origin) + extent * d, d))
    return curves, tails


# -- monotonicity -----------------------------------------------------------------


@dataclass
class DensityReport:
    probe: DensityProbe
    times: np.ndarray
    values: np.ndarray
    theta_hat: float
    max_positive_jump: float
    violation: bool


def _extrapolate_theta(sigmas, values):
    """Quadratic-in-sigma extrapolation to sigma -> 0 through the three
    smallest kernel scales (iterated Richardson)."""
    if len(sigmas) == 0:
        return math.nan
    order = np.argsort(sigmas)
    s = np.asarray(sigmas, dtype=float)[order][:3]
    v = np.asarray(values, dtype=float)[order][:3]
    if len(s) == 1:
        return float(v[0])
    deg = len(s) - 1
    coeff = np.polynomial.polynomial.polyfit(s, v, deg)
    return float(coeff[0])


def monotonicity_check(traj, probe: DensityProbe, tol_mono: float = 1e-3) -> DensityReport:
    """Evaluate the density along the snapshots of a trajectory and report
    the largest positive increment (the monotone quantity should only
    decrease, up to endpoint boundary terms and discretization)."""
    times = np.asarray(traj.times, dtype=float)
    if np.any(times >= probe.t0):
        raise ProbeNotInFuture("all snapshot times must precede t0")
    values = np.array(
        [
            gaussian_density_static(snap, probe.p0, probe.t0 - t)
            for snap, t in zip(traj.snapshots, times)
        ]
    )
    jumps = np.diff(values)
    max_jump = float(jumps.max()) if len(jumps) else 0.0
    theta_hat = _extrapolate_theta(probe.t0 - times, values)
    return DensityReport(
        probe=probe,
        times=times,
        values=values,
        theta_hat=theta_hat,
        max_positive_jump=max(max_jump, 0.0),
        violation=max_jump > tol_mono,
    )


# -- parabolic rescaling -----------------------------------------------------------


@dataclass
class RescaledSnapshot:
    lam: float
    tau: float
    curves: list


def parabolic_rescale(traj, p0, t0, lam, tau_window=None):
    """Map snapshots through q -> lam (q - p0), tau = lam^2 (t - t0).

    tau_window, when given, restricts to snapshots whose rescaled time falls
    inside [tau_min, tau_max]."""
    p0 = np.asarray(p0, dtype=float).reshape(2)
    if lam <= 0:
        raise ValueError("lam must be positive")
    out = []
    for t, snap in zip(traj.times, traj.snapshots):
        tau = lam**2 * (t - t0)
        if tau_window is not None and not (tau_window[0] <= tau <= tau_window[1]):
            continue
        curves = [c.with_points(lam * (c.pts - p0)) for c in snap.curves]
        out.append(RescaledSnapshot(lam=lam, tau=tau, curves=curves))
    if not out:
        raise WindowEmpty("no snapshots in the requested rescaled-time window")
    return out


def rescale_snapshot(snap: RescaledSnapshot, p0, t0_shift, lam) -> RescaledSnapshot:
    """Rescale an already-rescaled snapshot once more (composition helper)."""
    p0 = np.asarray(p0, dtype=float).reshape(2)
    curves = [c.with_points(lam * (c.pts - p0)) for c in snap.curves]
    return RescaledSnapshot(
        lam=snap.lam * lam, tau=lam**2 * (snap.tau - t0_shift), curves=curves
    )


# -- tangent-flow classification ----------------------------------------------------


class TangentFlowLabel:
    EMPTY = "empty"
    HALFLINE = "halfline"
    LINE = "line"
    TRIOD = "triod"
    TWO_HALFLINES_120 = "two_halflines_120"
    CROSS = "cross"
    UNCLASSIFIED = "unclassified"


@dataclass
class TangentFlowClass:
    label: str
    density: float
    shrinker_residual: float


def clip_to_ball(curves, radius):
    """Restrict sampled curves to the closed ball B_radius(0), interpolating
    the crossing points on the boundary."""
    out = []
    for c in curves:
        pts = c.pts
        r = np.linalg.norm(pts, axis=1)
        inside = r <= radius
        if not inside.any():
            continue
        runs = []
        start = None
        for i, flag in enumerate(inside):
            if flag and start is None:
                start = i
            if not flag and start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(pts) - 1))
        for k, (i0, i1) in enumerate(runs):
            seg = pts[i0 : i1 + 1]
            prefix = []
            suffix = []
            if i0 > 0:
                prefix = [_ball_crossing(pts[i0 - 1], pts[i0], radius)]
            if i1 < len(pts) - 1:
                suffix = [_ball_crossing(pts[i1 + 1], pts[i1], radius)]
            all_pts = np.vstack(prefix + [seg] + suffix)
            # the crossing point can coincide with a boundary sample
            keep = np.ones(len(all_pts), dtype=bool)
            gaps = np.linalg.norm(np.diff(all_pts, axis=0), axis=1)
            keep[1:] = gaps > 1e-13
            all_pts = all_pts[keep]
            if len(all_pts) >= 5:
                out.append(
                    CurveSamples(
                        id=f"{c.id}_clip{k}",
                        start_vertex=None,
                        end_vertex=None,
                        pts=all_pts,
                    )
                )
    return out


def _ball_crossing(p_out, p_in, radius):
    d = p_out - p_in
    a = float(np.dot(d, d))
    b = 2.0 * float(np.dot(p_in, d))
    c = float(np.dot(p_in, p_in)) - radius**2
    disc = max(b * b - 4 * a * c, 0.0)
    t = (-b + math.sqrt(disc)) / (2 * a)
    return p_in + np.clip(t, 0.0, 1.0) * d


def _extract_arms(curves, core_radius):
    """Split curves at their closest approach to the origin and return the
    outgoing arms as (direction, straightness) pairs."""
    arms = []
    for c in curves:
        r = np.linalg.norm(c.pts, axis=1)
        i_min = int(np.argmin(r))
        if r[i_min] > core_radius:
            continue
        pieces = []
        if i_min >= 2:
            pieces.append(c.pts[: i_min + 1][::-1])
        if len(c.pts) - i_min >= 3:
            pieces.append(c.pts[i_min:])
        for piece in pieces:
            chord = piece[-1] - piece[0]
            L = np.linalg.norm(chord)
            if L < 4 * core_radius:
                continue
            d = chord / L
            rel = piece - piece[0]
            off = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0])
            arms.append((d, float(off.max() / L)))
    return arms


def classify_tangent_flow(
    snap: RescaledSnapshot,
    probe_on_boundary: bool,
    r_ball: float = 10.0,
    sigma: float = 1.0,
    tol_shrink: float = 0.05,
    straightness_tol: float = 0.05,
    pair_tol: float = 0.2,
) -> TangentFlowClass:
    """Bucket a rescaled snapshot by its density at the origin, confirmed by
    the shrinker residual; a cross additionally needs four approximately
    straight arms with pairwise opposite tangents."""
    curves = clip_to_ball(snap.curves, r_ball)
    if not curves:
        return TangentFlowClass(TangentFlowLabel.EMPTY, 0.0, 0.0)
    density = gaussian_density_static(curves, (0.0, 0.0), sigma)
    shrink = max(shrinker_residual(c).max_abs for c in curves)

    if density < 0.25:
        return TangentFlowClass(TangentFlowLabel.EMPTY, density, shrink)
    if shrink >= tol_shrink:
        return TangentFlowClass(TangentFlowLabel.UNCLASSIFIED, density, shrink)
    if density < 0.75:
        label = TangentFlowLabel.HALFLINE if probe_on_boundary else TangentFlowLabel.UNCLASSIFIED
        return TangentFlowClass(label, density, shrink)
    if density < 1.25:
        # two halflines at 120 degrees carry density 2 * (1/2) = 1, the same
        # bucket as a full line; a full line through a boundary point of a
        # convex domain is impossible, so the boundary flag disambiguates
        label = (
            TangentFlowLabel.TWO_HALFLINES_120
            if probe_on_boundary
            else TangentFlowLabel.LINE
        )
        return TangentFlowClass(label, density, shrink)
    if density < 1.75:
        if probe_on_boundary:
            return TangentFlowClass(TangentFlowLabel.UNCLASSIFIED, density, shrink)
        return TangentFlowClass(TangentFlowLabel.TRIOD, density, shrink)
    if density < 2.25:
        if probe_on_boundary:
            return TangentFlowClass(TangentFlowLabel.UNCLASSIFIED, density, shrink)
        arms = _extract_arms(curves, core_radius=0.05 * r_ball)
        if len(arms) != 4 or any(s > straightness_tol for _, s in arms):
            return TangentFlowClass(TangentFlowLabel.UNCLASSIFIED, density, shrink)
        dirs = [d for d, _ in arms]
        used = set()
        paired = 0
        for i in range(4):
            if i in used:
                continue
            for j in range(i + 1, 4):
                if j in used:
                    continue
                cosang = float(np.clip(np.dot(dirs[i], dirs[j]), -1, 1))
                if abs(math.acos(cosang) - math.pi) < pair_tol:
                    used.update((i, j))
                    paired += 1
                    break
        if paired != 2 or not _cross_gaps_ok(dirs, pair_tol):
            return TangentFlowClass(TangentFlowLabel.UNCLASSIFIED, density, shrink)
        return TangentFlowClass(TangentFlowLabel.CROSS, density, shrink)
    return TangentFlowClass(TangentFlowLabel.UNCLASSIFIED, density, shrink)


def _cross_gaps_ok(dirs, tol):
    """Arm gaps of a standard cross alternate 60/120 degrees; the symmetric
    90-degree configuration is not a standard cross."""
    ang = np.sort([math.atan2(d[1], d[0]) % (2 * math.pi) for d in dirs])
    gaps = np.diff(np.append(ang, ang[0] + 2 * math.pi))
    sixty = np.abs(gaps - math.pi / 3) < tol
    onetwenty = np.abs(gaps - 2 * math.pi / 3) < tol
    return bool(np.all(sixty | onetwenty) and sixty.sum() == 2)


# -- estimate monitors --------------------------------------------------------------


@dataclass
class InterpolationMargin:
    margin: float
    depth: int
    bound: float
    kappa_inf_sq: float
    asserted: bool  # True only for depth <= 2, where the constant is known


def interpolation_monitor(n: Network, c_end: float, d_n: float | None = None) -> InterpolationMargin:
    """Margin of the endpoint-controlled interpolation bound
    4^{n-1} C + D(n) ||kappa|| ||ds kappa|| - ||kappa||_inf^2; nonnegative
    margins are expected on valid flows.  D(2) = 10; for deeper trees D(n)
    defaults to 10 * 4^{n-2} and the monitor only reports."""
    depth = path_depth(n)
    if d_n is None:
        d_n = 2.0 if depth == 1 else 10.0 * 4.0 ** (depth - 2)
    norms = curvature_norms(n)
    bound = 4.0 ** (depth - 1) * c_end + d_n * norms.kappa_l2 * norms.ds_kappa_l2
    return InterpolationMargin(
        margin=bound - norms.kappa_inf**2,
        depth=depth,
        bound=bound,
        kappa_inf_sq=norms.kappa_inf**2,
        asserted=depth <= 2,
    )


def endpoint_curvature_sq_bound(n: Network) -> float:
    """max kappa^2 over the fixed-endpoint curve ends (the constant fed to
    the interpolation monitor)."""
    from .geometry import VertexKind

    worst = 0.0
    for c in n.curves:
        for vid, k in ((c.start_vertex, c.kappa[0]), (c.end_vertex, c.kappa[-1])):
            if vid is None:
                continue
            if n.vertices[vid].kind is VertexKind.FIXED_ENDPOINT:
                worst = max(worst, float(k) ** 2)
    return worst


def l2_bound_horizon(n0: Network, c_global: float) -> float:
    """Predicted time horizon 1 / (8 C (||kappa_0||_L2^2 + 1)^2) over which
    the squared-curvature integral stays controlled; diagnostic only."""
    norms = curvature_norms(n0)
    return 1.0 / (8.0 * c_global * (norms.kappa_l2**2 + 1.0) ** 2)


def max_length_ratio(geometry, probes, radii) -> float:
    """Report max over probes and radii of H^1(geometry within B_R(p)) / R,
    the bounded-length-ratio observable.  Report only, never asserted."""
    curves = _curve_list(geometry)
    worst = 0.0
    for p in np.atleast_2d(np.asarray(probes, dtype=float)):
        shifted = [c.with_points(c.pts - p) for c in curves]
        for r in np.atleast_1d(radii):
            inside = clip_to_ball(shifted, float(r))
            total = sum(float(c.chords().sum()) for c in inside)
            worst = max(worst, total / float(r))
    return worst
