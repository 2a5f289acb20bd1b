"""Validation scenario drivers: wall impact, pair impact, packing, drum.

Each driver assembles an engine from a parameter set, runs it to the
scenario's stopping condition and post-processes the results into small
result records.  The tablet wall impact carries its rigid-body impulse
oracle, used as the reference curve for the simulated post-impact
velocities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .body import MaterialParams, Particle, quat_from_axis_angle
from .contact import CylinderWall, PlaneWall
from .engine import Engine, EngineConfig, Snapshot, suggested_dt
from .shape import spheroid_profile, tablet_cap_radius, tablet_profile
from .template import build_template

RPM = 2.0 * math.pi / 60.0


# ---------------------------------------------------------------------------
# parameter sets of the validation studies
# ---------------------------------------------------------------------------

TABLET_IMPACT = {
    "band_radius": 5.675e-3, "band_height": 4.0e-3, "cap_height": 1.23e-3,
    "shear": 1.15e9, "poisson": 0.3, "density": 1191.3,
    "restitution": 0.6, "friction": 0.0, "dt": 1e-7, "speed": 1.0,
}

ELLIPSOID_IMPACT = {
    "equatorial_radius": 2.5e-3, "polar_radius": 5.0e-3,
    "young": 1.0e10, "poisson": 0.3, "density": 2500.0,
    "restitution": 0.6, "dt": 1e-7, "speed": 1.0,
}

PACKING_TABLETS = {
    "shape": {"family": "tablet", "band_radius": 5.675e-3,
              "band_height": 4.0e-3, "cap_height": 1.23e-3},
    "young": 5.0e7, "poisson": 0.3, "density": 1191.3,
    "restitution": 0.6, "friction_pw": 0.22, "friction_pp": 0.38,
    "count": 150, "cylinder_diameter": 50.6e-3, "cylinder_height": 130.0e-3,
    "dt": 2.0e-7,
}

PACKING_CANDIES = {
    "shape": {"family": "spheroid", "equatorial_radius": 6.585e-3,
              "polar_radius": 3.395e-3},
    "young": 5.0e7, "poisson": 0.29, "density": 1377.0,
    "restitution": 0.5, "friction_pw": 0.3, "friction_pp": 0.3,
    "count": 250, "cylinder_diameter": 50.8e-3, "cylinder_height": 203.2e-3,
    "dt": 5.0e-7,
}

DRUM_GEOMETRY = {"diameter": 100.0e-3, "length": 56.0e-3, "rpm": 25.0}


# ---------------------------------------------------------------------------
# particle-wall impact
# ---------------------------------------------------------------------------

@dataclass
class ImpactResult:
    theta: float                # impact angle, degrees
    v_pre: float                # signed pre-impact vertical velocity
    v_post: float
    omega_post: float           # post-impact angular velocity about y
    v_ratio: float              # V+ / V-
    omega_ratio: float          # omega+ R_b / V-


def tablet_lever_arm(theta_deg: float, band_radius: float, band_height: float,
                     cap_height: float) -> float:
    """Horizontal offset of the contact point from the center of mass.

    Built geometrically: below the cap/edge transition angle the lowest
    surface point lies on the spherical cap, above it on the band rim, and
    at exactly 90 degrees the flat band rests on the wall under the center.
    The construction reproduces the zero-torque orientations at 0°, at
    atan(2 R_b / H_b) and at 90°.
    """
    if not 0.0 <= theta_deg <= 90.0:
        raise ValueError("impact angle must lie in [0, 90] degrees")
    rc = tablet_cap_radius(band_radius, cap_height)
    theta = math.radians(theta_deg)
    theta_star = math.asin(band_radius / rc)
    if theta < theta_star:
        h = rc - (cap_height + 0.5 * band_height)
        return h * math.sin(theta)
    if theta_deg == 90.0:
        return 0.0
    return band_radius * math.cos(theta) - 0.5 * band_height * math.sin(theta)


def analytic_wall_impact(theta_deg: float, band_radius: float,
                         band_height: float, cap_height: float, e: float,
                         mass: float, inertia_y: float,
                         v_pre: float = -1.0) -> tuple[float, float]:
    """Frictionless rigid-body impact oracle: (V_z+, omega_y+).

    Impulse-momentum balance with restitution applied at the contact point;
    the lever arm comes from :func:`tablet_lever_arm`.
    """
    r_x = tablet_lever_arm(theta_deg, band_radius, band_height, cap_height)
    omega = mass * v_pre * (1.0 + e) * r_x / (inertia_y + mass * r_x ** 2)
    v_post = omega * r_x - e * v_pre
    return v_post, omega


def _tablet_template(params: dict, rounded: bool, n_nodes: int):
    corner = params["band_radius"] / 30.0 if rounded else 0.0
    profile = tablet_profile(params["band_radius"], params["band_height"],
                             params["cap_height"], corner_radius=corner)
    return build_template(profile, params["density"], n_nodes=n_nodes)


def run_wall_impact(theta_deg: float, params: dict = TABLET_IMPACT,
                    rounded: bool = False, n_nodes: int = 5090,
                    template=None, max_steps: int = 400_000) -> ImpactResult:
    """Drop a tilted tablet on a flat wall and read post-impact velocities.

    Gravity is off and the contact frictionless; the run ends when the
    contact releases and the tablet moves upward again.
    """
    if template is None:
        template = _tablet_template(params, rounded, n_nodes)
    nu = params["poisson"]
    mat = MaterialParams(
        young=2.0 * params["shear"] * (1.0 + nu), poisson=nu,
        density=params["density"], restitution_pw=params["restitution"],
        restitution_pp=params["restitution"], friction_pw=params["friction"],
        friction_pp=params["friction"], shear=params["shear"])
    speed = params["speed"]

    p = Particle(id=0, template=template, material=mat,
                 orientation=quat_from_axis_angle((0.0, 1.0, 0.0),
                                                  math.radians(theta_deg)))
    gap = 5.0 * speed * params["dt"]
    p.position = np.array([0.0, 0.0, p.support((0.0, 0.0, -1.0)) + gap])
    p.velocity = np.array([0.0, 0.0, -speed])

    wall = PlaneWall(point=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0), id=0)
    eng = Engine([p], [wall], EngineConfig(dt=params["dt"], gravity=(0, 0, 0)))
    # stop at the first release: for part of the edge-contact regime the
    # tablet is still descending after the impact and would strike again
    touched = False
    for _ in range(max_steps):
        eng.step()
        if eng.n_contacts > 0:
            touched = True
        elif touched:
            break
    else:
        raise RuntimeError(f"contact never released within {max_steps} steps "
                           f"at theta={theta_deg}")

    v_post = float(eng.vel[0, 2])
    omega_post = float(eng.omega_world()[0, 1])
    rb = params["band_radius"]
    return ImpactResult(theta=theta_deg, v_pre=-speed, v_post=v_post,
                        omega_post=omega_post, v_ratio=v_post / -speed,
                        omega_ratio=omega_post * rb / -speed)


def wall_impact_sweep(angles=None, params: dict = TABLET_IMPACT,
                      rounded: bool = False, n_nodes: int = 5090) -> list[ImpactResult]:
    """The published angle sweep: 0..90 in 5-degree steps plus 87.5."""
    if angles is None:
        angles = sorted(list(np.arange(0.0, 90.1, 5.0)) + [87.5])
    template = _tablet_template(params, rounded, n_nodes)
    return [run_wall_impact(t, params, rounded, n_nodes, template=template)
            for t in angles]


# ---------------------------------------------------------------------------
# particle-particle impact
# ---------------------------------------------------------------------------

@dataclass
class PairImpactResult:
    orientation: float
    curvature_model: str
    time: np.ndarray            # per-step sample times while in contact
    overlap: np.ndarray
    fn: np.ndarray
    fn_elastic: np.ndarray
    v_center: np.ndarray        # vertical velocity of the moving ellipsoid
    r_eff: float                # effective radius at deepest recorded overlap
    contact_duration: float
    rebound_speed: float


def run_pair_impact(orientation_deg: float = 0.0,
                    curvature_model: str = "mean",
                    params: dict = ELLIPSOID_IMPACT, n_nodes: int = 3000,
                    template=None, max_steps: int = 200_000) -> PairImpactResult:
    """Drop one ellipsoid on a fixed identical one and trace the contact.

    Both lie with their long axis horizontal; the upper one may be yawed
    about the horizontal axis perpendicular to the approach.  Gravity and
    friction are off.
    """
    if template is None:
        profile = spheroid_profile(params["equatorial_radius"],
                                   params["polar_radius"])
        template = build_template(profile, params["density"], n_nodes=n_nodes)
    mat = MaterialParams(
        young=params["young"], poisson=params["poisson"],
        density=params["density"], restitution_pp=params["restitution"],
        restitution_pw=params["restitution"])
    speed = params["speed"]
    dt = params["dt"]

    lie_flat = quat_from_axis_angle((0.0, 1.0, 0.0), 0.5 * math.pi)
    p1 = Particle(id=0, template=template, material=mat,
                  orientation=lie_flat, fixed=True)
    tilt = quat_from_axis_angle((0.0, 1.0, 0.0),
                                0.5 * math.pi + math.radians(orientation_deg))
    p2 = Particle(id=1, template=template, material=mat, orientation=tilt)
    gap = 5.0 * speed * dt
    top1 = p1.support((0.0, 0.0, 1.0))
    p2.position = np.array([0.0, 0.0, top1 + p2.support((0.0, 0.0, -1.0)) + gap])
    p2.velocity = np.array([0.0, 0.0, -speed])

    eng = Engine([p1, p2], [], EngineConfig(dt=dt, gravity=(0, 0, 0),
                                            curvature_model=curvature_model))
    eng.set_probe(0, 1)
    t_s, overlap, fn, fnel, vc = [], [], [], [], []
    r_eff = 0.0
    deepest = 0.0
    touched = False
    t_start = t_end = None
    for _ in range(max_steps):
        eng.step()
        probe = eng.last_probe
        if probe is not None:
            if not touched:
                touched = True
                t_start = eng.time
            t_end = eng.time
            t_s.append(eng.time)
            overlap.append(probe["overlap"])
            fn.append(probe["fn"])
            fnel.append(probe["fn_elastic"])
            vc.append(eng.vel[1, 2])
            if probe["overlap"] > deepest:
                deepest = probe["overlap"]
                r_eff = probe["r_eff"]
        elif touched:
            break
    else:
        raise RuntimeError("pair contact never released")

    return PairImpactResult(
        orientation=orientation_deg, curvature_model=curvature_model,
        time=np.array(t_s), overlap=np.array(overlap), fn=np.array(fn),
        fn_elastic=np.array(fnel), v_center=np.array(vc), r_eff=r_eff,
        contact_duration=t_end - t_start,
        rebound_speed=float(eng.vel[1, 2]))


# ---------------------------------------------------------------------------
# granular packing in a cylinder
# ---------------------------------------------------------------------------

@dataclass
class PackingResult:
    fill_height: float
    raw_max_height: float
    count: int
    porosity: float
    seed: int
    snapshots: list = field(default_factory=list)


def particle_tops(eng: Engine) -> tuple[np.ndarray, np.ndarray]:
    """Per-particle top height and radial position, from the support function."""
    eng.sync_particles()
    tops = np.array([p.support((0.0, 0.0, 1.0)) for p in eng.particles])
    rxy = np.hypot(eng.pos[:, 0], eng.pos[:, 1])
    return tops, rxy


def fill_height(tops: np.ndarray, rxy: np.ndarray, radius: float,
                n_bins: int = 6) -> tuple[float, float]:
    """Bed height: mean of per-radial-bin top heights, excluding the single
    topmost particle; also returns the raw maximum."""
    if len(tops) == 0:
        raise ValueError("empty bed")
    raw_max = float(tops.max())
    if len(tops) > 1:
        keep = np.ones(len(tops), dtype=bool)
        keep[int(np.argmax(tops))] = False
        tops, rxy = tops[keep], rxy[keep]
    edges = np.linspace(0.0, radius, n_bins + 1)
    idx = np.clip(np.digitize(rxy, edges) - 1, 0, n_bins - 1)
    heights = [tops[idx == b].max() for b in range(n_bins) if (idx == b).any()]
    return float(np.mean(heights)), raw_max


def _spawn_batch(rng, count, template, radius, z0, existing_pos):
    """Non-overlapping drop positions and orientations for one batch."""
    r_c = template.bounding_radius
    margin = max(min(radius - 1.05 * r_c, 0.8 * radius), 0.0)
    placed = []
    for k in range(count):
        for _ in range(500):
            rad = margin * math.sqrt(rng.uniform())
            ang = rng.uniform(0.0, 2.0 * math.pi)
            p = np.array([rad * math.cos(ang), rad * math.sin(ang),
                          z0 + 2.4 * r_c * k])
            others = placed + list(existing_pos)
            if all(np.linalg.norm(p - q) > 2.1 * r_c for q in others):
                placed.append(p)
                break
        else:
            raise RuntimeError("could not place a particle without overlap")
    quats = []
    for _ in range(count):
        v = rng.normal(size=4)
        quats.append(v / np.linalg.norm(v))
    return placed, quats


def _settle(eng: Engine, speed_tol: float, hold_time: float, check_every: int,
            max_time: float):
    """Run until the maximum particle speed stays below tol for hold_time."""
    calm_since = None
    t_limit = eng.time + max_time
    while eng.time < t_limit:
        eng.run(n_steps=check_every)
        if eng.max_speed() < speed_tol:
            if calm_since is None:
                calm_since = eng.time
            elif eng.time - calm_since >= hold_time:
                return
        else:
            calm_since = None
    raise RuntimeError(f"bed did not settle within {max_time} s of simulated time")


def run_packing(params: dict = PACKING_TABLETS, count: int | None = None,
                seed: int = 0, n_nodes: int = 1500, dt: float | None = None,
                settle_tol: float = 1e-3, settle_hold: float = 0.05,
                max_batch_time: float = 2.0, snapshot_cb=None) -> PackingResult:
    """Drop particles in random batches of 3-5 into a cylindrical container
    and measure the settled fill height."""
    rng = np.random.default_rng(seed)
    if count is None:
        count = params["count"]
    profile_spec = dict(params["shape"])
    from .shape import build_profile
    template = build_template(build_profile(profile_spec), params["density"],
                              n_nodes=n_nodes)
    mat = MaterialParams(
        young=params["young"], poisson=params["poisson"],
        density=params["density"], restitution_pp=params["restitution"],
        restitution_pw=params["restitution"],
        friction_pp=params["friction_pp"], friction_pw=params["friction_pw"])
    radius = 0.5 * params["cylinder_diameter"]
    height = params["cylinder_height"]
    walls = [
        PlaneWall(point=(0, 0, 0), normal=(0, 0, 1), id=0),
        CylinderWall(radius=radius, p1=(0, 0, 0), p2=(0, 0, height + 0.2),
                     inward=True, id=1),
    ]
    if dt is None:
        dt = params["dt"]

    eng = Engine([], walls, EngineConfig(dt=dt))
    drop_z = height + 1.5 * template.bounding_radius
    next_id = 0
    while next_id < count:
        batch = int(min(rng.integers(3, 6), count - next_id))
        pos_list, quat_list = _spawn_batch(rng, batch, template, radius,
                                           drop_z, eng.pos)
        new = []
        for b in range(batch):
            new.append(Particle(id=next_id, template=template, material=mat,
                                position=pos_list[b], orientation=quat_list[b]))
            next_id += 1
        eng.add_particles(new)
        _settle(eng, settle_tol, settle_hold, max(200, int(5e-3 / dt)),
                max_batch_time)
        for k in range(len(eng.particles)):
            if (np.hypot(*eng.pos[k, :2]) > radius + template.bounding_radius
                    or eng.pos[k, 2] < -template.bounding_radius):
                raise RuntimeError(f"particle {k} escaped the container")
        if snapshot_cb is not None:
            snapshot_cb(eng)

    tops, rxy = particle_tops(eng)
    h_mean, h_max = fill_height(tops, rxy, radius)
    solid = count * template.mass_props.volume
    porosity = 1.0 - solid / (math.pi * radius ** 2 * h_mean)
    return PackingResult(fill_height=h_mean, raw_max_height=h_max, count=count,
                         porosity=porosity, seed=seed,
                         snapshots=[eng.snapshot()])


# ---------------------------------------------------------------------------
# rotating drum and the dynamic angle of repose
# ---------------------------------------------------------------------------

@dataclass
class DrumResult:
    angles: np.ndarray          # per-snapshot fitted angle, degrees
    mean_angle: float
    std_angle: float
    seed: int
    profiles: list = field(default_factory=list)    # per-snapshot control points


def surface_node_points(eng: Engine) -> np.ndarray:
    """(x, z) world positions of every surface node of every particle."""
    from .body import rotation_matrices
    rot = rotation_matrices(eng.quat)
    pts = []
    for k in range(len(eng.particles)):
        sid = eng.shape_id[k]
        tpl = eng.shapes.templates[sid]
        w = tpl.nodes.points @ rot[k].T + eng.pos[k]
        pts.append(w[:, [0, 2]])
    return np.vstack(pts)


def free_surface_profile(points_xz: np.ndarray, drum_radius: float,
                         n_bins: int = 75, x_span: float = 0.9) -> np.ndarray:
    """Free-surface control points of a drum snapshot, nondimensionalized.

    Bins the axial projection of the particle surfaces over horizontal
    intervals and keeps the topmost height per bin; empty bins are skipped.
    """
    edges = np.linspace(-x_span * drum_radius, x_span * drum_radius, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    idx = np.digitize(points_xz[:, 0], edges) - 1
    out = []
    for b in range(n_bins):
        sel = idx == b
        if sel.any():
            out.append((centers[b] / drum_radius,
                        points_xz[sel, 1].max() / drum_radius))
    return np.array(out)


def lls_angle_of_repose(points: np.ndarray) -> float:
    """Angle of the least-squares line through the control points, degrees."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2 or np.ptp(pts[:, 0]) == 0.0:
        raise ValueError("need control points at two or more distinct x positions")
    slope = np.polyfit(pts[:, 0], pts[:, 1], 1)[0]
    return math.degrees(math.atan(abs(slope)))


def run_drum(params: dict = PACKING_TABLETS, count: int = 150,
             geometry: dict = DRUM_GEOMETRY, seed: int = 0,
             n_nodes: int = 2000, dt: float | None = None,
             n_snapshots: int = 10, snapshot_interval: float = 1.0,
             steady_window: float = 2.0, steady_tol: float = 1.5,
             max_spin_time: float = 30.0, fill_settle_tol: float = 5e-2,
             progress_cb=None) -> DrumResult:
    """Tumble particles in a rotating drum and extract the mean dynamic
    angle of repose from least-squares fits of the free surface."""
    rng = np.random.default_rng(seed)
    radius = 0.5 * geometry["diameter"]
    length = geometry["length"]
    omega = geometry["rpm"] * RPM

    profile_spec = dict(params["shape"])
    from .shape import build_profile
    template = build_template(build_profile(profile_spec), params["density"],
                              n_nodes=n_nodes)
    mat = MaterialParams(
        young=params["young"], poisson=params["poisson"],
        density=params["density"], restitution_pp=params["restitution"],
        restitution_pw=params["restitution"],
        friction_pp=params["friction_pp"], friction_pw=params["friction_pw"])
    shell = CylinderWall(radius=radius, p1=(0, -0.5 * length, 0),
                         p2=(0, 0.5 * length, 0), inward=True, id=0)
    cap_a = PlaneWall(point=(0, -0.5 * length, 0), normal=(0, 1, 0), id=1)
    cap_b = PlaneWall(point=(0, 0.5 * length, 0), normal=(0, -1, 0), id=2)
    walls = [shell, cap_a, cap_b]
    if dt is None:
        dt = params["dt"]

    # fill: random non-overlapping seeds inside the drum, then settle
    r_c = template.bounding_radius
    particles = []
    placed = []
    for k in range(count):
        for _ in range(5000):
            x = rng.uniform(-(radius - 1.1 * r_c), radius - 1.1 * r_c)
            y = rng.uniform(-(0.5 * length - 1.1 * r_c), 0.5 * length - 1.1 * r_c)
            z = rng.uniform(-(radius - 1.1 * r_c), radius - 1.1 * r_c)
            if math.hypot(x, z) > radius - 1.1 * r_c:
                continue
            p = np.array([x, y, z])
            if all(np.linalg.norm(p - q) > 2.03 * r_c for q in placed):
                placed.append(p)
                break
        else:
            raise RuntimeError("drum too full to place particles")
        v = rng.normal(size=4)
        particles.append(Particle(id=k, template=template, material=mat,
                                  position=p, orientation=v / np.linalg.norm(v)))

    eng = Engine(particles, walls, EngineConfig(dt=dt))
    _settle(eng, fill_settle_tol, 0.02, max(200, int(5e-3 / dt)), 10.0)

    # spin up and track the angle until it is statistically steady
    for w in walls:
        eng.set_wall_angular_velocity(w, (0.0, omega, 0.0))

    def measure() -> float:
        pts = free_surface_profile(surface_node_points(eng), radius)
        return lls_angle_of_repose(pts)

    sample_dt = 0.2
    steps_per_sample = max(1, int(round(sample_dt / dt)))
    history = []
    t_limit = eng.time + max_spin_time
    window = max(3, int(round(steady_window / sample_dt)))
    while eng.time < t_limit:
        eng.run(n_steps=steps_per_sample)
        history.append(measure())
        if progress_cb is not None:
            progress_cb(eng, history[-1])
        if len(history) >= window:
            recent = history[-window:]
            if float(np.std(recent)) < steady_tol:
                break
    else:
        raise RuntimeError("drum flow did not become steady in time")

    angles = []
    profiles = []
    steps_per_snap = max(1, int(round(snapshot_interval / dt)))
    for _ in range(n_snapshots):
        eng.run(n_steps=steps_per_snap)
        pts = free_surface_profile(surface_node_points(eng), radius)
        profiles.append(pts)
        angles.append(lls_angle_of_repose(pts))
        if progress_cb is not None:
            progress_cb(eng, angles[-1])
    angles = np.array(angles)
    return DrumResult(angles=angles, mean_angle=float(angles.mean()),
                      std_angle=float(angles.std()), seed=seed,
                      profiles=profiles)
