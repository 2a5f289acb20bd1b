import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from revdem import body
from revdem.body import (MaterialParams, Particle, quat_from_axis_angle,
                         quat_integrate, quat_multiply, quat_normalize,
                         rotation_matrices, rotation_matrix, to_meridian,
                         to_meridian_many)
from revdem.sdf import exact_distance
from revdem.shape import spheroid_profile


class TestQuaternions:
    def test_identity(self):
        assert_allclose(rotation_matrix([1.0, 0, 0, 0]), np.eye(3), atol=1e-15)

    def test_quarter_turn_about_z(self):
        q = quat_from_axis_angle((0, 0, 1), np.pi / 2)
        assert_allclose(rotation_matrix(q) @ [1, 0, 0], [0, 1, 0], atol=1e-15)

    def test_orthonormality_random(self, rng):
        for _ in range(1000):
            q = quat_normalize(rng.normal(size=4))
            m = rotation_matrix(q)
            assert_allclose(m @ m.T, np.eye(3), atol=1e-12)

    def test_columns_are_body_axes(self, rng):
        q = quat_normalize(rng.normal(size=4))
        m = rotation_matrix(q)
        for k, axis in enumerate(np.eye(3)):
            assert_allclose(m @ axis, m[:, k], atol=1e-15)

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            rotation_matrix([1.1, 0, 0, 0])

    def test_batch_matches_scalar(self, rng):
        quats = np.array([quat_normalize(rng.normal(size=4)) for _ in range(32)])
        batch = rotation_matrices(quats)
        for k in range(32):
            assert_allclose(batch[k], rotation_matrix(quats[k]), atol=1e-15)

    def test_multiply_composition(self, rng):
        qa = quat_from_axis_angle((0, 0, 1), 0.3)
        qb = quat_from_axis_angle((0, 1, 0), 0.5)
        ma = rotation_matrix(qa) @ rotation_matrix(qb)
        mc = rotation_matrix(quat_normalize(quat_multiply(qa, qb)))
        assert_allclose(ma, mc, atol=1e-12)

    def test_drift_over_many_steps(self, rng):
        # a million small random updates with renormalization keep |q| = 1
        q = np.array([1.0, 0.0, 0.0, 0.0])
        omegas = rng.normal(scale=5.0, size=(2000, 3))
        for k in range(1_000_000):
            q = quat_integrate(q, omegas[k % 2000], 1e-4)
        assert abs(np.linalg.norm(q) - 1.0) <= 1e-9


class TestFrames:
    def test_world_to_body_at_center(self, spheroid_template, elastic_material):
        p = Particle(id=0, template=spheroid_template,
                     material=elastic_material, position=(1, 2, 3))
        assert_allclose(p.world_to_body((1, 2, 3)), np.zeros(3), atol=1e-15)

    def test_identity_orientation_translation(self, spheroid_template,
                                              elastic_material):
        p = Particle(id=0, template=spheroid_template,
                     material=elastic_material, position=(1, 2, 3))
        assert_allclose(p.world_to_body((1, 2, 4)), [0, 0, 1], atol=1e-15)

    def test_round_trip(self, spheroid_template, elastic_material, rng):
        p = Particle(id=0, template=spheroid_template,
                     material=elastic_material,
                     position=rng.normal(size=3),
                     orientation=quat_normalize(rng.normal(size=4)))
        for _ in range(1000):
            v = rng.normal(size=3)
            back = p.world_to_body(p.body_to_world(v))
            assert np.abs(back - v).max() <= 1e-12 * max(1.0, np.abs(v).max())

    def test_omega_round_trip(self, spheroid_template, elastic_material, rng):
        p = Particle(id=0, template=spheroid_template,
                     material=elastic_material,
                     orientation=quat_normalize(rng.normal(size=4)))
        w = rng.normal(size=3)
        p.set_omega_body(w)
        assert_allclose(p.omega_body(), w, atol=1e-12)


class TestMeridian:
    def test_three_four_five(self):
        assert to_meridian((3.0, 4.0, 1.0)) == (5.0, 1.0)

    def test_axis_point(self):
        assert to_meridian((0.0, 0.0, 2.5)) == (0.0, 2.5)

    def test_rotational_invariance(self, rng):
        p = rng.normal(size=3)
        base = to_meridian(p)
        for ang in rng.uniform(0, 2 * np.pi, size=16):
            c, s = np.cos(ang), np.sin(ang)
            q = np.array([c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
            got = to_meridian(q)
            assert_allclose(got, base, rtol=1e-12)

    def test_many(self, rng):
        pts = rng.normal(size=(64, 3))
        out = to_meridian_many(pts)
        for k in range(64):
            assert_allclose(out[k], to_meridian(pts[k]), rtol=1e-15)


class TestMaterials:
    def test_shear_default(self):
        m = MaterialParams(young=2.6e9, poisson=0.3, density=1000.0)
        assert_allclose(m.shear, 2.6e9 / 2.6, rtol=1e-12)

    @pytest.mark.parametrize("kwargs", [
        dict(young=-1.0, poisson=0.3, density=1.0),
        dict(young=1e9, poisson=0.6, density=1.0),
        dict(young=1e9, poisson=0.3, density=1.0, restitution_pp=0.0),
        dict(young=1e9, poisson=0.3, density=1.0, restitution_pw=1.5),
        dict(young=1e9, poisson=0.3, density=1.0, friction_pp=-0.1),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            MaterialParams(**kwargs)


class TestSupport:
    def test_sphere_support(self, sphere_template, elastic_material, rng):
        p = Particle(id=0, template=sphere_template, material=elastic_material,
                     position=(0.5, -0.2, 0.1),
                     orientation=quat_normalize(rng.normal(size=4)))
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        expected = d @ p.position + 0.01
        assert_allclose(p.support(d), expected, rtol=1e-6)


def test_meridian_reduction_matches_surface_distance(spheroid_template,
                                                     elastic_material, rng):
    """Reduced 2D distance equals the 3D point-to-surface distance.

    Quick version of the full tessellation oracle in the acceptance suite:
    for a spheroid the 3D distance has a closed-form check via sampling
    many surface points.
    """
    prof = spheroid_template.profile
    p = Particle(id=0, template=spheroid_template, material=elastic_material,
                 position=rng.normal(scale=1e-3, size=3),
                 orientation=quat_normalize(rng.normal(size=4)))
    theta = np.linspace(0, np.pi, 600)
    phi = np.linspace(0, 2 * np.pi, 1200, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    surf_body = np.stack([5e-3 * np.sin(tt) * np.cos(pp),
                          5e-3 * np.sin(tt) * np.sin(pp),
                          2.5e-3 * np.cos(tt)], axis=-1).reshape(-1, 3)
    surf_world = surf_body @ p.rotation().T + p.position
    for _ in range(40):
        q = p.position + rng.uniform(-6e-3, 6e-3, size=3)
        dist_3d = np.linalg.norm(surf_world - q, axis=1).min()
        merid = to_meridian(p.world_to_body(q))
        d2d, _ = exact_distance(prof, merid)
        assert abs(abs(d2d) - dist_3d) <= 2e-3 * prof.major_axis
