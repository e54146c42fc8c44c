"""Algebraic identities at triple junctions and the shrinker-equation residual.

Quantities at a junction are always expressed in the outward-from-junction
orientation.  Under orientation reversal of a curve, kappa and zeta flip sign
while d_s kappa is invariant (with nu = R tau fixed); extraction from a
network normalizes accordingly before any identity is evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentJunction
from .geometry import (
    CurveSamples,
    Network,
    arclength_weights,
    rot90,
    second_difference_velocity,
)

SQRT3 = math.sqrt(3.0)


def zeta_from_kappa(kappa):
    """Tangential velocities from the three junction curvatures:
    zeta_i = (kappa_{i-1} - kappa_{i+1}) / sqrt(3), indices mod 3."""
    k = np.asarray(kappa, dtype=float).reshape(3)
    return (np.roll(k, 1) - np.roll(k, -1)) / SQRT3


def kappa_from_zeta(zeta):
    """Inverse relation kappa_i = (zeta_{i+1} - zeta_{i-1}) / sqrt(3); exact
    on the sum-zero subspace."""
    z = np.asarray(zeta, dtype=float).reshape(3)
    return (np.roll(z, -1) - np.roll(z, 1)) / SQRT3


@dataclass
class JunctionTriple:
    """State of the three curve ends at a junction, outward-oriented and
    ordered counterclockwise by outward tangent angle."""

    vertex_id: str
    tangents: np.ndarray  # (3, 2) outward unit tangents
    kappa: np.ndarray  # (3,)
    ds_kappa: np.ndarray  # (3,)
    zeta: np.ndarray  # (3,)

    def __post_init__(self):
        self.tangents = np.asarray(self.tangents, dtype=float).reshape(3, 2)
        self.kappa = np.asarray(self.kappa, dtype=float).reshape(3)
        self.ds_kappa = np.asarray(self.ds_kappa, dtype=float).reshape(3)
        self.zeta = np.asarray(self.zeta, dtype=float).reshape(3)


def _end_state(c: CurveSamples, at_start: bool):
    """(outward tangent, kappa, ds_kappa, zeta) at one end, outward-oriented."""
    zeta = c.zeta
    if zeta is None:
        v = second_difference_velocity(c)
        zeta = np.einsum("ij,ij->i", v, c.tau)
    if at_start:
        return c.tau[0], c.kappa[0], c.ds_kappa[0], zeta[0]
    return -c.tau[-1], -c.kappa[-1], c.ds_kappa[-1], -zeta[-1]


def junction_state(n: Network, vertex_id: str) -> JunctionTriple:
    """Extract the outward-oriented junction triple from a network snapshot.

    zeta comes from the curves' solver cache when present, otherwise from the
    parametrization-velocity stencil of the current geometry.
    """
    ends = n.incident_ends(vertex_id)
    if len(ends) != 3:
        raise ValueError(f"vertex {vertex_id!r} has {len(ends)} curve ends, not 3")
    states = [_end_state(c, at_start) for c, at_start in ends]
    angles = [math.atan2(t[1], t[0]) % (2 * math.pi) for t, _, _, _ in states]
    order = np.argsort(angles)
    return JunctionTriple(
        vertex_id=vertex_id,
        tangents=np.array([states[i][0] for i in order]),
        kappa=np.array([states[i][1] for i in order]),
        ds_kappa=np.array([states[i][2] for i in order]),
        zeta=np.array([states[i][3] for i in order]),
    )


@dataclass
class JunctionResiduals:
    r1: float  # |sum kappa|
    r2: float  # |sum zeta|
    r3: float  # max pairwise |(ds_kappa + zeta kappa)_i - (...)_j|
    r4: float  # |sum (kappa ds_kappa + zeta kappa^2)|

    def as_array(self):
        return np.array([self.r1, self.r2, self.r3, self.r4])


def junction_identity_residuals(j: JunctionTriple) -> JunctionResiduals:
    """Residuals of the four junction identities on measured data."""
    k, z, dk = j.kappa, j.zeta, j.ds_kappa
    q = dk + z * k
    r3 = max(
        abs(q[0] - q[1]),
        abs(q[1] - q[2]),
        abs(q[0] - q[2]),
    )
    return JunctionResiduals(
        r1=abs(float(k.sum())),
        r2=abs(float(z.sum())),
        r3=float(r3),
        r4=abs(float((k * dk + z * k**2).sum())),
    )


@dataclass
class ShrinkerResidual:
    """Pointwise residual of kappa + <position, nu> along a curve."""

    values: np.ndarray
    max_abs: float
    l2: float


def shrinker_residual(c: CurveSamples) -> ShrinkerResidual:
    """Residual of the self-shrinker equation, origin-centered."""
    r = c.kappa + np.einsum("ij,ij->i", c.pts, c.nu)
    w = arclength_weights(c)
    l2 = math.sqrt(float((r**2 * w).sum()))
    return ShrinkerResidual(values=r, max_abs=float(np.abs(r).max()), l2=l2)


@dataclass
class JunctionVelocity:
    v: np.ndarray
    cross_residual: float


def junction_velocity(j: JunctionTriple, tol: float = 1e-6) -> JunctionVelocity:
    """Junction velocity zeta tau + kappa nu from curve 1, cross-checked
    against the other two curves."""
    res = junction_identity_residuals(j)
    if res.r1 >= tol or res.r2 >= tol:
        raise InconsistentJunction(
            f"junction {j.vertex_id!r}: identity residuals r1={res.r1:.2e}, "
            f"r2={res.r2:.2e} exceed tol={tol:.2e}"
        )
    nus = rot90(j.tangents)
    vs = j.zeta[:, None] * j.tangents + j.kappa[:, None] * nus
    dev = max(
        float(np.linalg.norm(vs[0] - vs[1])),
        float(np.linalg.norm(vs[0] - vs[2])),
    )
    if dev > tol:
        raise InconsistentJunction(
            f"junction {j.vertex_id!r}: velocity cross-check {dev:.2e} "
            f"exceeds tol={tol:.2e}"
        )
    return JunctionVelocity(v=vs[0], cross_residual=dev)
