"""Rigid-body state, reference frames, quaternion algebra and materials.

Orientation is a unit quaternion q = (w, x, y, z).  The matrix returned by
:func:`rotation_matrix` maps body coordinates to world coordinates; its
columns are the particle's principal axes expressed in the world frame.
Rotational state is carried as angular momentum L in the world frame, with
the angular velocity derived on demand in whichever frame is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

GRAVITY_DEFAULT = np.array([0.0, 0.0, -9.81])


# ---------------------------------------------------------------------------
# quaternion algebra
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion cannot be normalized")
    return q / n


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Unit quaternion for a rotation of `angle` radians about `axis`."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("rotation axis must be non-zero")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis / n
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a∘b, both in (w, x, y, z) order."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def rotation_matrix(q: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Body-to-world rotation matrix of a unit quaternion.

    Rejects quaternions whose norm deviates from 1 by more than `tol`.
    """
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if abs(n - 1.0) > tol:
        raise ValueError(f"quaternion norm {n} deviates from unity beyond {tol}")
    w, x, y, z = q
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


def rotation_matrices(quats: np.ndarray) -> np.ndarray:
    """Vectorized body-to-world matrices for an (N, 4) quaternion array."""
    q = np.asarray(quats, dtype=float)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((q.shape[0], 3, 3))
    m[:, 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    m[:, 0, 1] = 2.0 * (x * y - w * z)
    m[:, 0, 2] = 2.0 * (x * z + w * y)
    m[:, 1, 0] = 2.0 * (x * y + w * z)
    m[:, 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    m[:, 1, 2] = 2.0 * (y * z - w * x)
    m[:, 2, 0] = 2.0 * (x * z - w * y)
    m[:, 2, 1] = 2.0 * (y * z + w * x)
    m[:, 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return m


def quat_integrate(q: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """First-order quaternion update q + (1/2) q∘(0, ω_body) dt, renormalized.

    The first-order update does not preserve the norm, so the result is
    renormalized on every call.
    """
    dq = 0.5 * quat_multiply(q, np.array([0.0, *omega_body])) * dt
    return quat_normalize(q + dq)


# ---------------------------------------------------------------------------
# frame transforms
# ---------------------------------------------------------------------------

def to_meridian(p_body) -> tuple[float, float]:
    """Reduce a body-frame point to its (x, z) meridian half-plane point."""
    p = np.asarray(p_body, dtype=float)
    return float(np.hypot(p[0], p[1])), float(p[2])


def to_meridian_many(p_body: np.ndarray) -> np.ndarray:
    """Meridian reduction of an (N, 3) array of body-frame points."""
    p = np.asarray(p_body, dtype=float)
    out = np.empty((p.shape[0], 2))
    out[:, 0] = np.hypot(p[:, 0], p[:, 1])
    out[:, 1] = p[:, 2]
    return out


# ---------------------------------------------------------------------------
# materials
# ---------------------------------------------------------------------------

@dataclass
class MaterialParams:
    """Elastic and contact parameters of one particle material.

    Restitution and friction are stored per pair class: `_pp` applies
    between particles, `_pw` against walls.  The shear modulus defaults to
    the isotropic relation G = Y / (2 (1 + ν)).
    """

    young: float
    poisson: float
    density: float
    restitution_pp: float = 0.6
    restitution_pw: float = 0.6
    friction_pp: float = 0.0
    friction_pw: float = 0.0
    shear: Optional[float] = None

    def __post_init__(self):
        if self.young <= 0.0 or self.density <= 0.0:
            raise ValueError("Young's modulus and density must be positive")
        if not 0.0 < self.poisson < 0.5:
            raise ValueError("Poisson's ratio must lie in (0, 0.5)")
        for e in (self.restitution_pp, self.restitution_pw):
            if not 0.0 < e <= 1.0:
                raise ValueError("restitution must lie in (0, 1]")
        if self.friction_pp < 0.0 or self.friction_pw < 0.0:
            raise ValueError("friction coefficients must be non-negative")
        if self.shear is None:
            self.shear = self.young / (2.0 * (1.0 + self.poisson))


@dataclass
class ShapeTemplate:
    """Immutable per-shape bundle shared by every particle of one shape.

    All members are built from the same profile instance; nothing here is
    mutated after construction, so templates are safe to share.
    """

    profile: object            # shape.Profile
    sdf: object                # sdf.SdfGrid
    nodes: object              # shape.SurfaceNodeSet
    curvature: object          # shape.CurvatureTable
    mass_props: object         # shape.MassProperties
    convex: bool
    equatorial_symmetry: bool
    bounding_radius: float
    equivalent_radius: float   # radius of the equal-volume sphere

    @property
    def major_axis(self) -> float:
        return self.profile.major_axis


@dataclass
class Particle:
    """Dynamic state of one rigid particle."""

    id: int
    template: ShapeTemplate
    material: MaterialParams
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_momentum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    fixed: bool = False

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).copy()
        self.orientation = quat_normalize(self.orientation)
        self.velocity = np.asarray(self.velocity, dtype=float).copy()
        self.angular_momentum = np.asarray(self.angular_momentum, dtype=float).copy()

    @property
    def mass(self) -> float:
        return self.template.mass_props.mass

    @property
    def inertia_body(self) -> np.ndarray:
        mp = self.template.mass_props
        return np.array([mp.inertia_x, mp.inertia_y, mp.inertia_z])

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.orientation)

    def omega_body(self) -> np.ndarray:
        """Angular velocity in the body frame, ω = I⁻¹ (Rᵀ L)."""
        r = self.rotation()
        return (r.T @ self.angular_momentum) / self.inertia_body

    def omega_world(self) -> np.ndarray:
        r = self.rotation()
        return r @ ((r.T @ self.angular_momentum) / self.inertia_body)

    def set_omega_body(self, omega_body) -> None:
        r = self.rotation()
        self.angular_momentum = r @ (self.inertia_body * np.asarray(omega_body, dtype=float))

    def world_to_body(self, p_world) -> np.ndarray:
        return self.rotation().T @ (np.asarray(p_world, dtype=float) - self.position)

    def body_to_world(self, p_body) -> np.ndarray:
        return self.rotation() @ np.asarray(p_body, dtype=float) + self.position

    def nodes_world(self) -> np.ndarray:
        """Current world positions of the template's surface nodes."""
        return self.template.nodes.points @ self.rotation().T + self.position

    def support(self, direction) -> float:
        """Largest projection of the particle surface onto a world direction.

        Exact for the revolved profile polyline: the extreme point of the
        surface in any direction lies on a profile vertex ring.
        """
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        db = self.rotation().T @ d
        pts = self.template.profile.points
        radial = np.hypot(db[0], db[1])
        proj = pts[:, 0] * radial + pts[:, 1] * db[2]
        return float(d @ self.position + proj.max())


def world_to_body(particle: Particle, p_world) -> np.ndarray:
    return particle.world_to_body(p_world)


def body_to_world(particle: Particle, p_body) -> np.ndarray:
    return particle.body_to_world(p_body)
