"""Simulation engine: Velocity-Verlet time stepping over the contact kernel.

The step follows the half-kick / drift / half-kick sequence, with rotation
carried as world-frame angular momentum: half-step velocity and angular
momentum updates, full-step position, body-frame angular velocity, first
order quaternion update with renormalization, force recomputation at the new
configuration, and the second half-step updates.  Forces from the end of one
step are reused as the start-of-step forces of the next.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import contact as contact_mod
from . import forces as forces_mod
from ._kernels import WALL_CODE0, compute_forces
from .body import (GRAVITY_DEFAULT, MaterialParams, Particle,
                   rotation_matrices)
from .contact import MeshWall, broadphase_pairs

_CURV_MODELS = {"mean": 0, "equivalent": 1}
_CONVEX_MODES = {"auto": -1, "non-convex": 0, "convex": 1}


class EngineError(RuntimeError):
    pass


@dataclass
class EngineConfig:
    dt: float
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY_DEFAULT.copy())
    curvature_model: str = "mean"
    convexity: str = "auto"
    deterministic: bool = True
    threads: int = 1        # engine phases currently run sequentially
    skin: float | None = None

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float)
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.curvature_model not in _CURV_MODELS:
            raise ValueError(f"unknown curvature model {self.curvature_model!r}")
        if self.convexity not in _CONVEX_MODES:
            raise ValueError(f"unknown convexity mode {self.convexity!r}")


@dataclass
class Snapshot:
    time: float
    step: int
    ids: np.ndarray
    position: np.ndarray
    orientation: np.ndarray
    velocity: np.ndarray
    angular_velocity: np.ndarray


class _ShapeTables:
    """Templates packed into flat arrays for the compiled kernel."""

    def __init__(self, templates):
        self.templates = list(templates)
        node_counts = [t.nodes.count for t in self.templates]
        self.node_off = np.concatenate([[0], np.cumsum(node_counts)]).astype(np.int64)
        self.node_pts = (np.vstack([t.nodes.points for t in self.templates])
                         if self.templates else np.empty((0, 3)))
        self.max_nodes = int(max(node_counts, default=0))
        if not self.templates:
            self._init_empty()
            return

        self.bound_r = np.array([t.bounding_radius for t in self.templates])
        rects = [t.profile.bounding_rect() for t in self.templates]
        self.rect_xmax = np.array([r[0] for r in rects])
        self.rect_zmin = np.array([r[1] for r in rects])
        self.rect_zmax = np.array([r[2] for r in rects])
        self.rect_circ = np.sqrt(self.rect_xmax ** 2
                                 + np.maximum(self.rect_zmin ** 2, self.rect_zmax ** 2))
        self.convex = np.array([1 if t.convex else 0 for t in self.templates],
                               dtype=np.uint8)
        self.req = np.array([t.equivalent_radius for t in self.templates])
        self.rstar_max = np.array([10.0 * t.major_axis for t in self.templates])

        grids = [t.sdf for t in self.templates]
        self.sdf_ox = np.array([g.origin[0] for g in grids])
        self.sdf_oz = np.array([g.origin[1] for g in grids])
        self.sdf_ex1 = np.array([g.extent()[2] for g in grids])
        self.sdf_ez1 = np.array([g.extent()[3] for g in grids])
        self.fine_size = np.array([g._fine_size for g in grids])
        self.fine_nx = np.array([g.fine_index.shape[0] for g in grids], dtype=np.int64)
        self.fine_nz = np.array([g.fine_index.shape[1] for g in grids], dtype=np.int64)
        self.fine_off = np.concatenate(
            [[0], np.cumsum([g.fine_index.size for g in grids])]).astype(np.int64)
        self.fine_flat = np.concatenate([g.fine_index.ravel() for g in grids])
        self.leaf_off = np.concatenate(
            [[0], np.cumsum([g.n_leaves for g in grids])]).astype(np.int64)
        self.leaf_x0 = np.concatenate([g.leaf_x0 for g in grids])
        self.leaf_z0 = np.concatenate([g.leaf_z0 for g in grids])
        self.leaf_sz = np.concatenate([g.leaf_size for g in grids])
        self.leaf_phi = np.vstack([g.leaf_phi for g in grids])
        self.leaf_dx = np.vstack([g.leaf_dvec[:, :, 0] for g in grids])
        self.leaf_dz = np.vstack([g.leaf_dvec[:, :, 1] for g in grids])

        profs = [t.profile for t in self.templates]
        self.seg_off = np.concatenate(
            [[0], np.cumsum([p.n_segments for p in profs])]).astype(np.int64)
        self.seg_ax = np.concatenate([p._seg_a[:, 0] for p in profs])
        self.seg_az = np.concatenate([p._seg_a[:, 1] for p in profs])
        self.seg_dx = np.concatenate([p._seg_d[:, 0] for p in profs])
        self.seg_dz = np.concatenate([p._seg_d[:, 1] for p in profs])
        self.seg_len = np.concatenate([p._seg_len for p in profs])
        self.seg_arc = np.concatenate([p.arc[:-1] for p in profs])

        curvs = [t.curvature for t in self.templates]
        self.curv_off = np.concatenate(
            [[0], np.cumsum([c.count for c in curvs])]).astype(np.int64)
        self.curv_s = np.concatenate([c.s for c in curvs])
        self.curv_h = np.concatenate([c.H for c in curvs])
        self.curv_tot = np.array([c.total_arc for c in curvs])
        self.curv_sym = np.array([1 if c.symmetric else 0 for c in curvs],
                                 dtype=np.uint8)

    def _init_empty(self):
        z = np.empty(0)
        zi = np.zeros(1, dtype=np.int64)
        self.bound_r = z
        self.rect_xmax = z
        self.rect_zmin = z
        self.rect_zmax = z
        self.rect_circ = z
        self.convex = np.empty(0, dtype=np.uint8)
        self.req = z
        self.rstar_max = z
        self.sdf_ox = z
        self.sdf_oz = z
        self.sdf_ex1 = z
        self.sdf_ez1 = z
        self.fine_size = z
        self.fine_nx = np.empty(0, dtype=np.int64)
        self.fine_nz = np.empty(0, dtype=np.int64)
        self.fine_off = zi
        self.fine_flat = np.empty(0, dtype=np.int32)
        self.leaf_off = zi
        self.leaf_x0 = z
        self.leaf_z0 = z
        self.leaf_sz = z
        self.leaf_phi = np.empty((0, 4))
        self.leaf_dx = np.empty((0, 4))
        self.leaf_dz = np.empty((0, 4))
        self.seg_off = zi
        self.seg_ax = z
        self.seg_az = z
        self.seg_dx = z
        self.seg_dz = z
        self.seg_len = z
        self.seg_arc = z
        self.curv_off = zi
        self.curv_s = z
        self.curv_h = z
        self.curv_tot = z
        self.curv_sym = np.empty(0, dtype=np.uint8)


def _pack_walls(walls):
    prim = [w for w in walls if not isinstance(w, MeshWall)]
    wall_kind = np.zeros(len(prim), dtype=np.int32)
    wall_p = np.zeros((len(prim), 3))
    wall_n = np.zeros((len(prim), 3))
    wall_r = np.zeros(len(prim))
    wall_omega = np.zeros((len(prim), 3))
    wall_axis = np.zeros((len(prim), 3))
    for k, w in enumerate(prim):
        if isinstance(w, contact_mod.PlaneWall):
            wall_kind[k] = 0
            wall_p[k] = w.point
            wall_n[k] = w.normal
            wall_omega[k] = w.angular_velocity
            wall_axis[k] = w.axis_point
        elif isinstance(w, contact_mod.CylinderWall):
            wall_kind[k] = 1 if w.inward else 2
            wall_p[k] = w.p1
            wall_n[k] = w.axis
            wall_r[k] = w.radius
            wall_omega[k] = w.angular_velocity
            wall_axis[k] = w.p1
        else:
            raise TypeError(f"unsupported wall type {type(w).__name__}")
    return prim, (wall_kind, wall_p, wall_n, wall_r, wall_omega, wall_axis)


class Engine:
    """DEM engine over a set of particles, walls and shared shape templates."""

    def __init__(self, particles: list[Particle], walls=None,
                 config: EngineConfig | None = None):
        if config is None:
            raise ValueError("an EngineConfig with a time step is required")
        self.config = config
        self.particles = list(particles)
        n = len(self.particles)
        ids = [p.id for p in self.particles]
        if len(set(ids)) != n:
            raise ValueError("particle ids must be unique")

        self._templates: list = []
        self._tmpl_index: dict[int, int] = {}
        shape_id = np.empty(n, dtype=np.int32)
        for k, p in enumerate(self.particles):
            shape_id[k] = self._register_template(p.template)
        self.shapes = _ShapeTables(self._templates)
        self.shape_id = shape_id

        self.ids = np.array(ids, dtype=np.int64)
        self.pos = np.array([p.position for p in self.particles]).reshape(n, 3)
        self.quat = np.array([p.orientation for p in self.particles]).reshape(n, 4)
        self.vel = np.array([p.velocity for p in self.particles]).reshape(n, 3)
        self.angmom = np.array([p.angular_momentum for p in self.particles]).reshape(n, 3)
        self.fixed = np.array([1 if p.fixed else 0 for p in self.particles],
                              dtype=np.uint8)
        self.mass = np.array([p.mass for p in self.particles])
        self.inertia = np.array([p.inertia_body for p in self.particles]).reshape(n, 3)
        mats = [p.material for p in self.particles]
        self.young = np.array([m.young for m in mats])
        self.shear = np.array([m.shear for m in mats])
        self.poisson = np.array([m.poisson for m in mats])
        self.e_pp = np.array([m.restitution_pp for m in mats])
        self.e_pw = np.array([m.restitution_pw for m in mats])
        self.mu_pp = np.array([m.friction_pp for m in mats])
        self.mu_pw = np.array([m.friction_pw for m in mats])

        walls = list(walls) if walls else []
        self.mesh_walls = [w for w in walls if isinstance(w, MeshWall)]
        self.prim_walls, self._wall_arrays = _pack_walls(
            [w for w in walls if not isinstance(w, MeshWall)])
        self.walls = walls
        self._wall_code = {id(w): WALL_CODE0 - k
                           for k, w in enumerate(self.prim_walls)}

        self.time = 0.0
        self.step_count = 0
        self.n_contacts = 0
        self._force = None
        self._torque = None
        self._hist_key = np.empty(0, dtype=np.int64)
        self._hist_dt = np.empty((0, 3))
        self._hist_age = np.empty(0, dtype=np.int32)
        self._mesh_hist: dict[tuple[int, int, int], np.ndarray] = {}
        self._probe = (-1, -1)
        self.last_probe = None
        self._bound_per_particle = self.shapes.bound_r[self.shape_id]
        self._alloc_scratch()

    def _register_template(self, template) -> int:
        key = id(template)
        if key not in self._tmpl_index:
            self._tmpl_index[key] = len(self._templates)
            self._templates.append(template)
        return self._tmpl_index[key]

    def _alloc_scratch(self):
        n = len(self.particles)
        self._c_node = np.empty(self.shapes.max_nodes, dtype=np.int64)
        self._c_phi = np.empty(self.shapes.max_nodes)
        self._c_dn = np.empty((self.shapes.max_nodes, 3))
        self._c_pt = np.empty((self.shapes.max_nodes, 3))
        self._nodes_cache = np.empty((n, self.shapes.max_nodes, 3))
        self._cache_valid = np.zeros(n, dtype=np.uint8)

    def add_particles(self, new_particles: list[Particle]):
        """Grow the simulation; existing state and contact history persist."""
        if not new_particles:
            return
        ids = set(self.ids.tolist())
        for p in new_particles:
            if p.id in ids:
                raise ValueError(f"duplicate particle id {p.id}")
            ids.add(p.id)
        n_templates = len(self._templates)
        new_sid = np.array([self._register_template(p.template)
                            for p in new_particles], dtype=np.int32)
        if len(self._templates) != n_templates:
            self.shapes = _ShapeTables(self._templates)
        self.particles.extend(new_particles)
        self.shape_id = np.concatenate([self.shape_id, new_sid])
        self.ids = np.concatenate([self.ids,
                                   np.array([p.id for p in new_particles])])
        self.pos = np.vstack([self.pos, [p.position for p in new_particles]])
        self.quat = np.vstack([self.quat, [p.orientation for p in new_particles]])
        self.vel = np.vstack([self.vel, [p.velocity for p in new_particles]])
        self.angmom = np.vstack([self.angmom,
                                 [p.angular_momentum for p in new_particles]])
        self.fixed = np.concatenate([self.fixed,
                                     [1 if p.fixed else 0 for p in new_particles]]).astype(np.uint8)
        self.mass = np.concatenate([self.mass, [p.mass for p in new_particles]])
        self.inertia = np.vstack([self.inertia,
                                  [p.inertia_body for p in new_particles]])
        mats = [p.material for p in new_particles]
        self.young = np.concatenate([self.young, [m.young for m in mats]])
        self.shear = np.concatenate([self.shear, [m.shear for m in mats]])
        self.poisson = np.concatenate([self.poisson, [m.poisson for m in mats]])
        self.e_pp = np.concatenate([self.e_pp, [m.restitution_pp for m in mats]])
        self.e_pw = np.concatenate([self.e_pw, [m.restitution_pw for m in mats]])
        self.mu_pp = np.concatenate([self.mu_pp, [m.friction_pp for m in mats]])
        self.mu_pw = np.concatenate([self.mu_pw, [m.friction_pw for m in mats]])
        self._bound_per_particle = self.shapes.bound_r[self.shape_id]
        self._alloc_scratch()
        self._force = None

    def set_wall_angular_velocity(self, wall, omega):
        """Spin a primitive wall about its own axis point; takes effect on
        the next force evaluation."""
        for k, w in enumerate(self.prim_walls):
            if w is wall:
                break
        else:
            raise ValueError("wall is not part of this engine")
        omega = np.asarray(omega, dtype=float)
        wall.angular_velocity = omega
        self._wall_arrays[4][k] = omega
        self._force = None

    # -- probing -------------------------------------------------------------

    def set_probe(self, master: int, slave=None, wall=None):
        """Record per-step contact diagnostics for one pair or particle-wall."""
        if wall is not None:
            self._probe = (master, self._wall_code[id(wall)])
        elif slave is not None:
            i, j = (master, slave) if master < slave else (slave, master)
            self._probe = (i, j)
        else:
            self._probe = (-1, -1)

    # -- forces ---------------------------------------------------------------

    def _compute_forces(self):
        n = len(self.particles)
        rot = rotation_matrices(self.quat)
        l_body = np.einsum("nji,nj->ni", rot, self.angmom)
        omega = np.einsum("nij,nj->ni", rot, l_body / self.inertia)

        pairs = broadphase_pairs(self.pos, self._bound_per_particle,
                                 self.config.skin)
        force = np.zeros((n, 3))
        torque = np.zeros((n, 3))
        probe_out = np.zeros(8)
        cap = max(1024, 32 * len(pairs) + 16 * n)
        while True:
            new_key = np.empty(cap, dtype=np.int64)
            new_dt = np.empty((cap, 3))
            new_age = np.empty(cap, dtype=np.int32)
            probe_out[:] = 0.0
            n_new, n_contacts, overflow = compute_forces(
                self.pos, self.vel, omega, rot, self.mass, self.inertia,
                self.fixed, self.shape_id,
                self.young, self.shear, self.poisson, self.e_pp, self.e_pw,
                self.mu_pp, self.mu_pw,
                self.shapes.node_pts, self.shapes.node_off, self.shapes.bound_r,
                self.shapes.rect_xmax, self.shapes.rect_zmin,
                self.shapes.rect_zmax, self.shapes.rect_circ,
                self.shapes.convex, self.shapes.req, self.shapes.rstar_max,
                self.shapes.sdf_ox, self.shapes.sdf_oz, self.shapes.sdf_ex1,
                self.shapes.sdf_ez1, self.shapes.fine_size, self.shapes.fine_nx,
                self.shapes.fine_nz, self.shapes.fine_off, self.shapes.fine_flat,
                self.shapes.leaf_off, self.shapes.leaf_x0, self.shapes.leaf_z0,
                self.shapes.leaf_sz, self.shapes.leaf_phi, self.shapes.leaf_dx,
                self.shapes.leaf_dz,
                self.shapes.seg_off, self.shapes.seg_ax, self.shapes.seg_az,
                self.shapes.seg_dx, self.shapes.seg_dz, self.shapes.seg_len,
                self.shapes.seg_arc,
                self.shapes.curv_off, self.shapes.curv_s, self.shapes.curv_h,
                self.shapes.curv_tot, self.shapes.curv_sym,
                *self._wall_arrays,
                pairs, self._hist_key, self._hist_dt, self._hist_age,
                self.config.dt, _CURV_MODELS[self.config.curvature_model],
                _CONVEX_MODES[self.config.convexity],
                self._probe[0], self._probe[1], probe_out,
                force, torque, new_key, new_dt, new_age,
                self._c_node, self._c_phi, self._c_dn, self._c_pt,
                self._nodes_cache, self._cache_valid)
            if not overflow:
                break
            cap *= 4

        key = new_key[:n_new]
        order = np.argsort(key, kind="stable")
        self._hist_key = key[order]
        self._hist_dt = new_dt[:n_new][order]
        self._hist_age = new_age[:n_new][order]
        self.n_contacts = int(n_contacts)
        self.last_probe = None
        if self._probe[0] >= 0 and probe_out[7] > 0.0:
            self.last_probe = {
                "overlap": probe_out[0], "fn": probe_out[1], "ft": probe_out[2],
                "fn_elastic": probe_out[3], "n_records": int(probe_out[4]),
                "k_n": probe_out[5], "r_eff": probe_out[6]}

        if self.mesh_walls:
            self._mesh_wall_forces(rot, omega, force, torque)
        return force, torque

    def _mesh_wall_forces(self, rot, omega, force, torque):
        """Reference-path contacts against triangle-mesh walls."""
        dt = self.config.dt
        seen = set()
        for w_idx, wall in enumerate(self.mesh_walls):
            lo = wall.vertices.min(axis=0)
            hi = wall.vertices.max(axis=0)
            for i, part in enumerate(self.particles):
                br = self._bound_per_particle[i]
                c = self.pos[i]
                if ((c < lo - br).any() or (c > hi + br).any()):
                    continue
                part.position = self.pos[i]
                part.orientation = self.quat[i]
                records = contact_mod.wall_contact(part, wall)
                if not records:
                    continue
                both_convex = part.template.convex
                if self.config.convexity != "auto":
                    both_convex = self.config.convexity == "convex"
                resolved = contact_mod.resolve_contact(records, both_convex)
                coeffs = forces_mod.pair_coefficients(
                    part.material, None, self.mass[i], math.inf, "pw")
                for rec in resolved:
                    key = (w_idx, i, rec.node)
                    seen.add(key)
                    delta_prev = self._mesh_hist.get(key, np.zeros(3))
                    r_eff = forces_mod.pair_effective_radius(
                        part, wall, rec.point, self.config.curvature_model)
                    v_rel = (self.vel[i] + np.cross(omega[i], rec.point - self.pos[i])
                             - wall.velocity_at(rec.point))
                    m_pt = (forces_mod.contact_effective_mass(
                        rec.d_n / np.linalg.norm(rec.d_n), rec.point, [part])
                        if not part.fixed else self.mass[i])
                    cf = forces_mod.hertz_mindlin(rec.d_n, delta_prev, v_rel,
                                                  coeffs, r_eff, dt, m_pt)
                    self._mesh_hist[key] = cf.delta_t
                    force[i] += cf.force
                    torque[i] += np.cross(rec.point - self.pos[i], cf.force)
        self._mesh_hist = {k: v for k, v in self._mesh_hist.items() if k in seen}

    # -- stepping -------------------------------------------------------------

    def step(self):
        """Advance the state by one time step."""
        dt = self.config.dt
        if self._force is None:
            self._force, self._torque = self._compute_forces()
        free = self.fixed == 0

        accel = self._force / self.mass[:, None] + self.config.gravity
        self.vel[free] += 0.5 * dt * accel[free]
        self.angmom[free] += 0.5 * dt * self._torque[free]
        self.pos[free] += dt * self.vel[free]

        rot = rotation_matrices(self.quat)
        l_body = np.einsum("nji,nj->ni", rot, self.angmom)
        w_body = l_body / self.inertia
        q = self.quat
        dq = 0.5 * dt * np.column_stack([
            -q[:, 1] * w_body[:, 0] - q[:, 2] * w_body[:, 1] - q[:, 3] * w_body[:, 2],
            q[:, 0] * w_body[:, 0] + q[:, 2] * w_body[:, 2] - q[:, 3] * w_body[:, 1],
            q[:, 0] * w_body[:, 1] - q[:, 1] * w_body[:, 2] + q[:, 3] * w_body[:, 0],
            q[:, 0] * w_body[:, 2] + q[:, 1] * w_body[:, 1] - q[:, 2] * w_body[:, 0],
        ])
        qn = q.copy()
        qn[free] = q[free] + dq[free]
        qn /= np.linalg.norm(qn, axis=1)[:, None]
        self.quat = qn

        force_new, torque_new = self._compute_forces()
        accel = force_new / self.mass[:, None] + self.config.gravity
        self.vel[free] += 0.5 * dt * accel[free]
        self.angmom[free] += 0.5 * dt * torque_new[free]

        self._force, self._torque = force_new, torque_new
        self.time += dt
        self.step_count += 1
        if not (np.isfinite(self.pos).all() and np.isfinite(self.vel).all()
                and np.isfinite(self.angmom).all()):
            bad = np.nonzero(~np.isfinite(self.pos).all(axis=1)
                             | ~np.isfinite(self.vel).all(axis=1))[0]
            raise EngineError(
                f"non-finite state at step {self.step_count}, t={self.time:.6e}"
                f" (particles {bad[:8].tolist()})")

    def omega_world(self) -> np.ndarray:
        rot = rotation_matrices(self.quat)
        l_body = np.einsum("nji,nj->ni", rot, self.angmom)
        return np.einsum("nij,nj->ni", rot, l_body / self.inertia)

    def snapshot(self) -> Snapshot:
        return Snapshot(time=self.time, step=self.step_count,
                        ids=self.ids.copy(), position=self.pos.copy(),
                        orientation=self.quat.copy(), velocity=self.vel.copy(),
                        angular_velocity=self.omega_world())

    def run(self, n_steps: int | None = None, duration: float | None = None,
            snapshot_every: int | None = None,
            callback=None) -> list[Snapshot]:
        """Step repeatedly, emitting snapshots every `snapshot_every` steps.

        The initial state is always included; telemetry (wall time, contact
        counts) accumulates in `self.telemetry`.
        """
        if n_steps is None:
            if duration is None:
                raise ValueError("need n_steps or duration")
            n_steps = int(round(duration / self.config.dt))
        snaps = [self.snapshot()]
        t0 = time.perf_counter()
        max_contacts = 0
        for k in range(1, n_steps + 1):
            self.step()
            max_contacts = max(max_contacts, self.n_contacts)
            if callback is not None:
                callback(self)
            if snapshot_every and k % snapshot_every == 0:
                snaps.append(self.snapshot())
        if snapshot_every and n_steps % snapshot_every != 0:
            snaps.append(self.snapshot())
        self.telemetry = {"wall_time": time.perf_counter() - t0,
                          "steps": n_steps, "max_contacts": max_contacts}
        return snaps

    def sync_particles(self):
        """Copy the packed state back into the Particle objects."""
        for k, p in enumerate(self.particles):
            p.position = self.pos[k].copy()
            p.orientation = self.quat[k].copy()
            p.velocity = self.vel[k].copy()
            p.angular_momentum = self.angmom[k].copy()

    def max_speed(self) -> float:
        return float(np.linalg.norm(self.vel, axis=1).max()) if len(self.vel) else 0.0


# ---------------------------------------------------------------------------
# critical time step
# ---------------------------------------------------------------------------

def critical_timestep(material: MaterialParams, r_min: float,
                      v_max: float = 0.0) -> float:
    """Smaller of the Rayleigh and Hertz time estimates.

    The Rayleigh time uses the minimum particle radius; the Hertz time takes
    the current maximum speed and degenerates to infinity at rest.
    """
    if r_min <= 0.0:
        raise ValueError("r_min must be positive")
    k = 0.8766 + 0.1631 * material.poisson
    t_rayleigh = math.pi * r_min / k * math.sqrt(material.density / material.shear)
    if v_max <= 0.0:
        return t_rayleigh
    y_eff = material.young / (2.0 * (1.0 - material.poisson ** 2))
    m = material.density * 4.0 / 3.0 * math.pi * r_min ** 3
    m_eff = 0.5 * m
    r_eff = 0.5 * r_min
    t_hertz = 2.8683 * (m_eff ** 2 / (r_eff * y_eff ** 2 * v_max)) ** 0.2
    return min(t_rayleigh, t_hertz)


def suggested_dt(particles, n_safety: float = 20.0, v_max: float = 0.0) -> float:
    """Stable time step for a particle set: critical step over a safety factor."""
    r_min = math.inf
    mat = None
    for p in particles:
        x_max, z_min, z_max = p.template.profile.bounding_rect()
        r = min(x_max, 0.5 * (z_max - z_min))
        if r < r_min:
            r_min = r
            mat = p.material
    return critical_timestep(mat, r_min, v_max) / n_safety
