"""Hertz-Mindlin contact forces and torques from resolved contact records.

The normal spring acts along the overlap vector (node toward slave surface),
so a positive spring force pushes the master out of the slave.  The
tangential spring stores the accumulated relative slip and acts against it;
its force is truncated at the Coulomb limit and the stored slip is rescaled
to stay consistent with the truncated force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .body import MaterialParams, Particle

TANGENTIAL_STIFFNESS_RATIO = 2.0 / 7.0     # k_t / k_n
TANGENTIAL_DAMPING_RATIO = 0.5             # gamma_t / gamma_n
RESTITUTION_FLOOR = 1e-6


@dataclass
class PairCoefficients:
    y_eff: float        # effective Young's modulus Y*
    g_eff: float        # effective shear modulus G*
    m_eff: float        # effective mass m*
    beta: float         # damping ratio from restitution, <= 0
    mu: float           # Coulomb friction coefficient
    e: float            # restitution


def restitution_beta(e: float) -> float:
    e = max(e, RESTITUTION_FLOOR)
    ln_e = math.log(e)
    return ln_e / math.sqrt(math.pi ** 2 + ln_e ** 2)


def pair_coefficients(mat_i: MaterialParams, mat_j: MaterialParams | None,
                      m_i: float, m_j: float = math.inf,
                      pair_class: str = "pp") -> PairCoefficients:
    """Effective pair coefficients; walls pass mat_j=None (same material)
    and infinite mass.

    Restitution and friction combine by geometric mean when the two
    materials differ, which reduces to the shared value for like materials.
    """
    if mat_j is None:
        mat_j = mat_i
    y_eff = 1.0 / ((1.0 - mat_i.poisson ** 2) / mat_i.young
                   + (1.0 - mat_j.poisson ** 2) / mat_j.young)
    g_eff = 1.0 / ((2.0 - mat_i.poisson) / mat_i.shear
                   + (2.0 - mat_j.poisson) / mat_j.shear)
    m_eff = m_i if math.isinf(m_j) else 1.0 / (1.0 / m_i + 1.0 / m_j)
    if pair_class == "pp":
        e = math.sqrt(mat_i.restitution_pp * mat_j.restitution_pp)
        mu = math.sqrt(mat_i.friction_pp * mat_j.friction_pp)
    elif pair_class == "pw":
        e = mat_i.restitution_pw
        mu = mat_i.friction_pw
    else:
        raise ValueError(f"unknown pair class {pair_class!r}")
    return PairCoefficients(y_eff=y_eff, g_eff=g_eff, m_eff=m_eff,
                            beta=restitution_beta(e), mu=mu, e=e)


def effective_radius(h_i: float, h_j: float, r_max: float) -> float:
    """R* from the two mean curvatures; capped when the sum is not positive
    (flat-on-flat or concave-dominated contact)."""
    s = h_i + h_j
    if s <= 0.0:
        return r_max
    return min(1.0 / s, r_max)


def relative_velocity_at(point, v_i, omega_i, c_i, v_j, omega_j, c_j) -> np.ndarray:
    """Relative surface velocity of master vs slave at the contact point."""
    point = np.asarray(point, dtype=float)
    return (np.asarray(v_i) + np.cross(omega_i, point - np.asarray(c_i))
            - np.asarray(v_j) - np.cross(omega_j, point - np.asarray(c_j)))


def update_tangential_history(delta_t: np.ndarray, dt: float, v_t: np.ndarray,
                              normal: np.ndarray) -> np.ndarray:
    """Accumulate slip and keep the stored vector in the tangent plane.

    The projection preserves the accumulated magnitude so that a rotating
    contact normal does not bleed stored slip into the normal direction.
    """
    d = delta_t + v_t * dt
    mag = np.linalg.norm(d)
    planar = d - (d @ normal) * normal
    pmag = np.linalg.norm(planar)
    if pmag < 1e-300:
        return np.zeros(3)
    return planar * (mag / pmag)


@dataclass
class ContactForce:
    force: np.ndarray           # on the master, world frame
    delta_t: np.ndarray         # updated tangential history
    fn_elastic: float           # |k_n * delta_n|, diagnostics
    fn: float                   # |normal force|
    ft: float                   # |tangential force|
    k_n: float
    sliding: bool


def contact_effective_mass(normal, point, particles) -> float:
    """Effective mass along the contact normal, rotational inertia included.

    `particles` lists the mobile bodies at the contact (one for walls or a
    fixed partner, two otherwise).  This is the mass whose oscillation the
    damping coefficient is tuned against, so the prescribed restitution also
    holds for off-center impacts.
    """
    normal = np.asarray(normal, dtype=float)
    inv = 0.0
    for p in particles:
        r = np.asarray(point, dtype=float) - p.position
        t_body = p.rotation().T @ np.cross(r, normal)
        inv += 1.0 / p.mass + float((t_body ** 2 / p.inertia_body).sum())
    if inv <= 0.0:
        raise ValueError("contact needs at least one mobile particle")
    return 1.0 / inv


def hertz_mindlin(d_n: np.ndarray, delta_t: np.ndarray, v_rel: np.ndarray,
                  coeffs: PairCoefficients, r_eff: float, dt: float,
                  m_contact: float | None = None) -> ContactForce:
    """Force of one contact from its overlap, slip history and velocities.

    Normal: F = k_n d_n - gamma_n V_n with k_n = (4/3) Y* sqrt(R* |d_n|);
    damping acts in loading and unloading, and the contact simply ends at
    separation (no force once the overlap closes).  Tangential: spring on
    the accumulated slip plus damping, Coulomb-truncated with the stored
    slip rescaled to mu |F_n| / k_t.
    """
    delta = np.linalg.norm(d_n)
    normal = d_n / delta
    k_n = (4.0 / 3.0) * coeffs.y_eff * math.sqrt(r_eff * delta)
    m_damp = coeffs.m_eff if m_contact is None else m_contact
    gamma_n = math.sqrt(5.0) * abs(coeffs.beta) * math.sqrt(m_damp * k_n)

    v_n = (v_rel @ normal) * normal
    v_t = v_rel - v_n

    f_n_vec = k_n * d_n - gamma_n * v_n
    fn_scalar = f_n_vec @ normal

    delta_t_new = update_tangential_history(delta_t, dt, v_t, normal)
    k_t = TANGENTIAL_STIFFNESS_RATIO * k_n
    gamma_t = TANGENTIAL_DAMPING_RATIO * gamma_n
    f_t_vec = -k_t * delta_t_new - gamma_t * v_t
    ft_mag = np.linalg.norm(f_t_vec)
    limit = coeffs.mu * abs(fn_scalar)
    sliding = False
    if ft_mag > limit:
        sliding = True
        if ft_mag > 0.0 and limit > 0.0:
            f_t_vec *= limit / ft_mag
            delta_t_new = -f_t_vec / k_t
            ft_mag = limit
        else:
            f_t_vec = np.zeros(3)
            delta_t_new = np.zeros(3)
            ft_mag = 0.0

    return ContactForce(force=f_n_vec + f_t_vec, delta_t=delta_t_new,
                        fn_elastic=k_n * delta, fn=fn_scalar, ft=ft_mag,
                        k_n=k_n, sliding=sliding)


@dataclass
class ForceResult:
    force: np.ndarray                       # on the master
    torque_master: np.ndarray
    torque_slave: np.ndarray
    per_record: list = field(default_factory=list)


def accumulate(records, forces, c_master, c_slave) -> ForceResult:
    """Sum per-record forces into the pair force and the two torques."""
    total = np.zeros(3)
    t_m = np.zeros(3)
    t_s = np.zeros(3)
    diag = []
    for rec, cf in zip(records, forces):
        total += cf.force
        t_m += np.cross(rec.point - c_master, cf.force)
        t_s += np.cross(rec.point - c_slave, -cf.force)
        diag.append((rec.node, abs(rec.phi), cf.fn, cf.ft))
    return ForceResult(force=total, torque_master=t_m, torque_slave=t_s,
                       per_record=diag)


# ---------------------------------------------------------------------------
# curvature models
# ---------------------------------------------------------------------------

def contact_mean_curvature(particle: Particle, point_world,
                           model: str = "mean") -> float:
    """Mean curvature of a particle surface at a world contact point.

    `mean` interpolates the stored curvature table at the nearest profile
    parameter; `equivalent` uses the constant curvature of the equal-volume
    sphere.
    """
    if model == "equivalent":
        return 1.0 / particle.template.equivalent_radius
    if model != "mean":
        raise ValueError(f"unknown curvature model {model!r}")
    p_body = particle.world_to_body(point_world)
    from .shape import mean_curvature_at
    h, _ = mean_curvature_at(particle.template.curvature,
                             particle.template.profile, p_body)
    return h


def pair_effective_radius(master: Particle, slave, point_world,
                          model: str = "mean", r_max: float | None = None) -> float:
    """Effective contact radius of a particle-particle or particle-wall pair.

    `slave` is a Particle or a wall primitive exposing `mean_curvature()`.
    """
    h_i = contact_mean_curvature(master, point_world, model)
    if isinstance(slave, Particle):
        h_j = contact_mean_curvature(slave, point_world, model)
    else:
        h_j = slave.mean_curvature()
    if r_max is None:
        r_max = 10.0 * master.template.major_axis
    return effective_radius(h_i, h_j, r_max)
