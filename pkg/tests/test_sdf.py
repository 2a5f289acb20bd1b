import numpy as np
import pytest
from numpy.testing import assert_allclose

from revdem import sdf
from revdem.sdf import SdfGrid, build_sdf, exact_distance, exact_distance_many
from revdem.shape import (cylinder_profile, make_profile, sphere_profile,
                          spheroid_profile, tablet_profile)


@pytest.fixture(scope="module")
def circle_grid():
    return build_sdf(sphere_profile(1.0))


@pytest.fixture(scope="module")
def tablet_grid(tablet_profile):
    return build_sdf(tablet_profile)


def square_profile(side=2.0):
    # cylinder of radius side/2 and height side: a square cross-section
    return cylinder_profile(0.5 * side, side)


class TestExactDistance:
    def test_square_center(self):
        prof = square_profile(2.0)
        phi, dvec = exact_distance(prof, (0.0, 0.0))
        assert_allclose(phi, -1.0, rtol=1e-12)

    def test_outside_corner_vector_points_to_vertex(self):
        prof = square_profile(2.0)
        p = np.array([1.5, 1.5])
        phi, dvec = exact_distance(prof, p)
        assert_allclose(phi, np.hypot(0.5, 0.5), rtol=1e-12)
        assert_allclose(p + dvec, [1.0, 1.0], atol=1e-12)

    def test_circle_polyline_chord_bound(self):
        prof = sphere_profile(1.0, n_segments=150)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1.2, 1.2, size=(2000, 2))
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 1e-3]
        phi, _, _ = exact_distance_many(prof, pts)
        analytic = np.hypot(np.abs(pts[:, 0]), pts[:, 1]) - 1.0
        sagitta = 1.0 * (1.0 - np.cos(np.pi / 150))
        assert np.abs(phi - analytic).max() <= sagitta + 1e-12

    def test_sign_by_containment(self):
        prof = spheroid_profile(2.0, 1.0)
        rng = np.random.default_rng(1)
        pts = rng.uniform([-2.5, -1.5], [2.5, 1.5], size=(4000, 2))
        phi, _, _ = exact_distance_many(prof, pts)
        inside = (pts[:, 0] / 2.0) ** 2 + pts[:, 1] ** 2 < 0.98
        outside = (pts[:, 0] / 2.0) ** 2 + pts[:, 1] ** 2 > 1.02
        assert (phi[inside] < 0).all()
        assert (phi[outside] > 0).all()

    def test_negative_x_folds(self):
        prof = sphere_profile(1.0)
        phi_a, dv_a = exact_distance(prof, (0.3, 0.2))
        phi_b, dv_b = exact_distance(prof, (-0.3, 0.2))
        assert_allclose(phi_a, phi_b, rtol=1e-14)
        assert_allclose(dv_a * [-1.0, 1.0], dv_b, rtol=1e-14)

    def test_on_surface_returns_outward_normal(self):
        prof = square_profile(2.0)
        phi, dvec = exact_distance(prof, (1.0, 0.0))
        assert phi == 0.0
        assert_allclose(dvec, [1.0, 0.0], atol=1e-9)


class TestGridStructure:
    def test_extent_margin(self, circle_grid):
        x0, z0, x1, z1 = circle_grid.extent()
        assert x0 <= -circle_grid.cell * 0.999
        assert x1 >= 1.0 + circle_grid.cell * 0.999
        assert z0 <= -1.0 - circle_grid.cell * 0.999
        assert z1 >= 1.0 + circle_grid.cell * 0.999

    def test_base_cell_size(self, circle_grid):
        assert_allclose(circle_grid.cell, 2.0 / 50, rtol=1e-12)

    def test_corner_leaf_size(self, tablet_grid, tablet_profile):
        l = tablet_profile.major_axis
        corner = tablet_profile.points[tablet_profile.corner_indices[0]]
        ref = tablet_grid.locate_cell(corner + np.array([1e-7 * l, -1e-7 * l]))
        assert ref.depth == 4
        assert_allclose(tablet_grid.leaf_size[ref.leaf], l / 800, rtol=1e-12)

    def test_interface_leaf_size(self, tablet_grid, tablet_profile):
        l = tablet_profile.major_axis
        # a point just inside the band boundary, away from the corners
        ref = tablet_grid.locate_cell((5.675e-3 - l / 5000, 0.0))
        assert ref.depth == 2
        assert_allclose(tablet_grid.leaf_size[ref.leaf], l / 200, rtol=1e-12)

    def test_locate_origin_corner(self, circle_grid):
        ref = circle_grid.locate_cell(circle_grid.origin + 1e-12)
        assert ref.base == (0, 0)

    def test_locate_outside_returns_none(self, circle_grid):
        assert circle_grid.locate_cell((5.0, 5.0)) is None

    def test_edge_tie_break_lower_cell(self, circle_grid):
        # a point exactly on the first interior grid line belongs to cell 0
        x_edge = circle_grid.origin[0] + circle_grid.cell
        ref = circle_grid.locate_cell((x_edge, circle_grid.origin[1] + 1e-12))
        assert ref.base[0] == 0

    def test_refinement_levels_validated(self, sphere_profile):
        with pytest.raises(ValueError):
            SdfGrid(sphere_profile, interface_level=9)
        with pytest.raises(ValueError):
            SdfGrid(sphere_profile, corner_level=-1)


class TestSampling:
    def test_grid_point_reproduces_stored_value(self, circle_grid):
        # weights collapse on a stored corner of whichever leaf the
        # tie-break routes the point to
        leaf = circle_grid.n_leaves // 3
        x0 = circle_grid.leaf_x0[leaf]
        z0 = circle_grid.leaf_z0[leaf]
        ref = circle_grid.locate_cell((x0, z0))
        phi, dvec = circle_grid.sample((x0, z0))
        assert phi in circle_grid.leaf_phi[ref.leaf]

    def test_circle_point_accuracy(self, circle_grid):
        phi, _ = circle_grid.sample((0.5, 0.0))
        assert abs(phi - (-0.5)) <= 2e-3

    def test_circle_field_accuracy(self, circle_grid):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1.1, 1.1, size=(10000, 2))
        phi, _ = circle_grid.sample_many(pts)
        ok = np.isfinite(phi)
        exact = np.hypot(pts[ok, 0], pts[ok, 1]) - 1.0
        # full-field agreement at a couple of cells' accuracy
        assert np.abs(phi[ok] - exact).max() <= 2e-3 * 2.0

    def test_interior_error_bound_ellipse(self):
        prof = spheroid_profile(1.0, 0.5)
        grid = build_sdf(prof)
        rng = np.random.default_rng(4)
        pts = rng.uniform([-1.1, -0.6], [1.1, 0.6], size=(40000, 2))
        exact, _, _ = exact_distance_many(prof, pts)
        interior = pts[exact < 0][:10000]
        phi, _ = grid.sample_many(interior)
        exact_i, _, _ = exact_distance_many(prof, interior)
        assert np.abs(phi - exact_i).max() <= 1e-3 * prof.major_axis

    def test_out_of_extent_is_no_contact(self, circle_grid):
        phi, dvec = circle_grid.sample((10.0, 0.0))
        assert phi == sdf.NO_CONTACT
        phi_m, _ = circle_grid.sample_many([[10.0, 0.0], [0.0, 0.0]])
        assert phi_m[0] == sdf.NO_CONTACT and np.isfinite(phi_m[1])

    def test_scalar_and_batch_agree_exactly(self, tablet_grid):
        rng = np.random.default_rng(5)
        x0, z0, x1, z1 = tablet_grid.extent()
        pts = rng.uniform([x0, z0], [x1, z1], size=(500, 2))
        phi_b, dvec_b = tablet_grid.sample_many(pts)
        for k in range(len(pts)):
            phi_s, dvec_s = tablet_grid.sample(pts[k])
            assert phi_s == phi_b[k]
            assert (dvec_s == dvec_b[k]).all()

    def test_sign_correctness_away_from_boundary(self, tablet_grid,
                                                 tablet_profile):
        rng = np.random.default_rng(6)
        x0, z0, x1, z1 = tablet_grid.extent()
        pts = rng.uniform([x0, z0], [x1, z1], size=(10000, 2))
        phi, _ = tablet_grid.sample_many(pts)
        exact, _, _ = exact_distance_many(tablet_profile, pts)
        band = tablet_profile.major_axis / 200 * np.sqrt(2.0)
        away = np.abs(exact) > band
        assert (np.sign(phi[away]) == np.sign(exact[away])).all()

    def test_distance_vector_interpolation(self, circle_grid):
        # near the boundary the interpolated vector points at the circle
        phi, dvec = circle_grid.sample((0.95, 0.0))
        assert_allclose(phi, -0.05, atol=2e-3)
        assert_allclose(dvec, [0.05, 0.0], atol=5e-3)


class TestZeroLevelSet:
    def test_fidelity_on_profile(self, tablet_grid, tablet_profile):
        l = tablet_profile.major_axis
        s = np.linspace(0, tablet_profile.total_arc, 800)
        pts = np.array([tablet_profile.point_at_arc(v) for v in s])
        phi, _ = tablet_grid.sample_many(pts)
        corners = tablet_profile.points[tablet_profile.corner_indices]
        d_corner = np.min([np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
                           for c in corners], axis=0)
        near = d_corner < l / 100
        assert np.abs(phi[~near]).max() <= l / 200
        assert np.abs(phi[near]).max() <= 2 * l / 800

    def test_square_corner_rounding(self):
        prof = square_profile(2.0)
        grid = build_sdf(prof)
        s = 2.0
        # probe the zero crossing along the diagonal through the corner
        t = np.linspace(-0.02, 0.02, 4001)
        d = np.array([1.0, 1.0]) / np.sqrt(2.0)
        pts = np.array([1.0, 1.0]) + t[:, None] * d
        phi, _ = grid.sample_many(pts)
        inside = phi < 0
        t_cross = t[inside].max()
        assert abs(t_cross) <= s / 800 * np.sqrt(2.0)


class TestDebugTable:
    def test_columns_and_consistency(self, circle_grid):
        table = circle_grid.debug_table()
        assert table.shape[1] == 5
        # |phi| equals |d_vec| at stored points
        mag = np.hypot(table[:, 3], table[:, 4])
        assert_allclose(mag, np.abs(table[:, 2]), atol=1e-12)
        # points should be unique
        key = np.round(table[:, :2] / (1e-7 * circle_grid.cell)).astype(np.int64)
        assert len(np.unique(key, axis=0)) == len(table)
