import numpy as np
import pytest
from numpy.testing import assert_allclose

from revdem.shape import (ProfileError, build_profile, cassini_profile,
                          curvature_table, cylinder_profile, frustum_profile,
                          generate_nodes, load_profile, make_profile,
                          mean_curvature_at, revolve_mesh, revolve_properties,
                          sphere_profile, spheroid_profile,
                          spherocylinder_profile, tablet_cap_radius,
                          tablet_profile, voxel_properties)

TABLET = dict(band_radius=5.675e-3, band_height=4.0e-3, cap_height=1.23e-3)


class TestProfiles:
    def test_sphere_is_smooth_closed_semicircle(self, sphere_profile):
        p = sphere_profile
        assert len(p.corner_indices) == 0
        assert p.points[0, 0] == 0.0 and p.points[-1, 0] == 0.0
        assert_allclose(np.hypot(p.points[:, 0], p.points[:, 1]), 1.0,
                        rtol=1e-12)
        assert p.convex and p.equatorial_symmetry
        assert 100 <= p.n_segments <= 200

    def test_tablet_cap_radius_and_corners(self, tablet_profile):
        assert_allclose(tablet_cap_radius(5.675e-3, 1.23e-3), 1.3707e-2,
                        rtol=1e-4)
        assert len(tablet_profile.corner_indices) == 2
        # corners sit exactly on the band/cap junction radius
        for ci in tablet_profile.corner_indices:
            assert_allclose(tablet_profile.points[ci, 0], 5.675e-3, rtol=1e-12)
        assert tablet_profile.major_axis == pytest.approx(2 * 5.675e-3)

    def test_cylinder_has_two_rim_corners(self):
        p = cylinder_profile(1.0, 2.0)
        assert len(p.corner_indices) == 2
        assert p.convex

    def test_frustum_and_capsule(self):
        f = frustum_profile(0.5, 1.0, 2.0)
        assert len(f.corner_indices) == 2
        c = spherocylinder_profile(0.5, 1.0)
        assert len(c.corner_indices) == 0      # caps join the band tangentially
        assert c.convex

    def test_cassini_peanut_is_nonconvex(self):
        p = cassini_profile(1.0, 1.05)
        assert not p.convex
        assert p.equatorial_symmetry

    def test_axis_closure_added(self):
        pts = [(0.5, 1.0), (1.0, 0.0), (0.5, -1.0)]
        p = make_profile(pts)
        assert p.points[0, 0] == 0.0
        assert p.points[-1, 0] == 0.0

    def test_self_intersection_rejected(self):
        pts = [(0.0, 1.0), (1.0, -0.8), (1.0, 0.8), (0.0, -1.0)]
        with pytest.raises(ProfileError):
            make_profile(pts)

    def test_negative_dimension_rejected(self):
        with pytest.raises(ProfileError):
            sphere_profile(-1.0)
        with pytest.raises(ProfileError):
            tablet_profile(1.0, -1.0, 0.1)

    def test_negative_x_rejected(self):
        with pytest.raises(ProfileError):
            make_profile([(0.0, 1.0), (-0.5, 0.0), (0.0, -1.0)])

    def test_build_profile_dispatch(self):
        p = build_profile({"family": "sphere", "radius": 2.0})
        assert p.major_axis == pytest.approx(4.0)
        with pytest.raises(ProfileError):
            build_profile({"family": "dodecahedron"})
        with pytest.raises(ProfileError):
            build_profile({"family": "sphere"})

    def test_load_profile_file(self, tmp_path):
        path = tmp_path / "prof.txt"
        theta = np.linspace(0, np.pi, 120)
        pts = np.column_stack([np.sin(theta), np.cos(theta)])
        lines = ["# raw profile"] + [f"{x} {z}" for x, z in pts]
        path.write_text("\n".join(lines))
        p = load_profile(path)
        assert p.n_segments >= 100
        assert_allclose(p.major_axis, 2.0, rtol=1e-6)


class TestMassProperties:
    def test_sphere_analytic(self, sphere_profile):
        mp = revolve_properties(sphere_profile, 1.0)
        assert_allclose(mp.mass, 4 * np.pi / 3, rtol=1e-3)
        assert_allclose(mp.inertia_x, 0.4 * mp.mass, rtol=1e-3)
        assert_allclose(mp.inertia_z, mp.inertia_x, rtol=1e-6)
        assert abs(mp.center_z) < 1e-12

    def test_cylinder_analytic(self):
        mp = revolve_properties(cylinder_profile(1.0, 2.0), 1.0)
        assert_allclose(mp.mass, 2 * np.pi, rtol=1e-12)
        assert_allclose(mp.inertia_z, np.pi, rtol=1e-12)
        # I_x = M (3R^2 + H^2) / 12
        assert_allclose(mp.inertia_x, mp.mass * (3 + 4) / 12, rtol=1e-12)

    def test_tablet_matches_published_values(self, tablet_profile):
        mp = revolve_properties(tablet_profile, 1191.3)
        assert_allclose(mp.mass, 6.328e-4, rtol=5e-3)
        assert_allclose(mp.volume, 5.312e-7, rtol=5e-3)
        assert_allclose(mp.inertia_y, 6.231e-9, rtol=1e-2)
        assert_allclose(mp.inertia_z, 9.396e-9, rtol=1e-2)

    def test_inertia_positive_and_symmetric(self):
        for prof in (spheroid_profile(5e-3, 2.5e-3), cassini_profile(1.0, 1.05),
                     frustum_profile(0.3, 1.0, 1.5)):
            mp = revolve_properties(prof, 2.0)
            assert mp.mass > 0 and mp.volume > 0
            assert mp.inertia_x == mp.inertia_y
            assert mp.inertia_x > 0 and mp.inertia_z > 0

    def test_offcenter_profile_com(self):
        # sphere shifted up by 1: center of mass at z = +1
        theta = np.linspace(0, np.pi, 151)
        pts = np.column_stack([np.sin(theta), np.cos(theta) + 1.0])
        mp = revolve_properties(make_profile(pts), 1.0)
        assert_allclose(mp.center_z, 1.0, atol=1e-6)
        # inertia about the center of mass equals the centered sphere's
        assert_allclose(mp.inertia_x, 0.4 * mp.mass, rtol=1e-3)

    def test_density_validation(self, sphere_profile):
        with pytest.raises(ProfileError):
            revolve_properties(sphere_profile, 0.0)


class TestVoxelProperties:
    def test_sphere_within_1pct(self, sphere_profile):
        mesh = revolve_mesh(sphere_profile, n_phi=96)
        vox = voxel_properties(mesh, n=150, density=1.0)
        assert_allclose(vox.mass, 4 * np.pi / 3, rtol=1e-2)
        assert_allclose(vox.inertia_x, 0.4 * 4 * np.pi / 3, rtol=2e-2)

    def test_tablet_within_1pct(self, tablet_profile):
        mesh = revolve_mesh(tablet_profile, n_phi=96)
        vox = voxel_properties(mesh, n=150, density=1191.3)
        assert_allclose(vox.mass, 6.328e-4, rtol=1e-2)

    def test_agreement_with_quadrature_across_families(self):
        for prof in (spheroid_profile(5e-3, 2.5e-3),
                     spherocylinder_profile(2e-3, 5e-3),
                     cassini_profile(1.0, 1.05)):
            mp = revolve_properties(prof, 1.0)
            vox = voxel_properties(revolve_mesh(prof, n_phi=96), n=150,
                                   density=1.0)
            assert_allclose(vox.mass, mp.mass, rtol=1e-2)
            assert_allclose(vox.inertia_x, mp.inertia_x, rtol=2e-2)
            assert_allclose(vox.inertia_z, mp.inertia_z, rtol=2e-2)

    def test_parallel_axis_relation(self, tablet_profile):
        # I_x = I_z / 2 + rho pi int z^2 f^2 dz must match the voxel I_x
        mp = revolve_properties(tablet_profile, 1191.3)
        vox = voxel_properties(revolve_mesh(tablet_profile, n_phi=96), n=150,
                               density=1191.3)
        assert_allclose(mp.inertia_x, vox.inertia_x, rtol=2e-2)

    def test_thin_disk_limit(self):
        mesh = revolve_mesh(cylinder_profile(1.0, 0.05), n_phi=96)
        vox = voxel_properties(mesh, n=150, density=1.0)
        assert_allclose(vox.inertia_z / vox.inertia_x, 2.0, rtol=5e-2)

    def test_open_mesh_rejected(self, sphere_profile):
        verts, faces = revolve_mesh(sphere_profile, n_phi=24)
        with pytest.raises(ValueError):
            voxel_properties((verts, faces[:-3]), n=100, density=1.0)

    def test_low_resolution_rejected(self, sphere_profile):
        mesh = revolve_mesh(sphere_profile, n_phi=24)
        with pytest.raises(ValueError):
            voxel_properties(mesh, n=5, density=1.0)


class TestNodes:
    def test_count_and_poles(self, sphere_profile):
        nodes = generate_nodes(sphere_profile, 1000)
        assert abs(nodes.count - 1000) <= 50
        on_axis = (np.abs(nodes.points[:, 0]) < 1e-12) & \
                  (np.abs(nodes.points[:, 1]) < 1e-12)
        assert on_axis.sum() == 2

    def test_minimum_count_always_two_poles(self):
        nodes = generate_nodes(cylinder_profile(1.0, 2.0), 50)
        on_axis = (np.abs(nodes.points[:, 0]) < 1e-12) & \
                  (np.abs(nodes.points[:, 1]) < 1e-12)
        assert on_axis.sum() == 2
        with pytest.raises(ValueError):
            generate_nodes(cylinder_profile(1.0, 2.0), 49)

    def test_uniform_spacing_regularity(self, sphere_profile):
        from scipy.spatial import cKDTree
        nodes = generate_nodes(sphere_profile, 1000)
        d, _ = cKDTree(nodes.points).query(nodes.points, k=2)
        nn = d[:, 1]
        assert nn.std() / nn.mean() < 0.3

    def test_nodes_lie_on_surface(self, tablet_profile):
        nodes = generate_nodes(tablet_profile, 800, "adaptive")
        l = tablet_profile.major_axis
        for pt in nodes.points[::17]:
            merid = (np.hypot(pt[0], pt[1]), pt[2])
            dist, _, _ = tablet_profile.nearest(merid)
            assert dist <= 1e-9 * l

    def test_adaptive_density_at_rim(self, tablet_profile):
        nodes = generate_nodes(tablet_profile, 5090, "adaptive")
        l = tablet_profile.major_axis
        band = l / 60
        corners = tablet_profile.points[tablet_profile.corner_indices]
        pts = nodes.points
        rxy = np.hypot(pts[:, 0], pts[:, 1])
        near = np.zeros(len(pts), dtype=bool)
        for cx, cz in corners:
            near |= np.hypot(rxy - cx, pts[:, 2] - cz) < band
        # area of the two rim tori bands vs total surface area
        arc = tablet_profile.arc
        seg_mid_x = 0.5 * (tablet_profile.points[:-1, 0]
                           + tablet_profile.points[1:, 0])
        seg_len = np.diff(arc)
        area_total = float((2 * np.pi * seg_mid_x * seg_len).sum())
        area_band = 2 * (2 * np.pi * 5.675e-3 * 2 * band)
        density_ratio = (near.sum() / area_band) / (len(pts) / area_total)
        assert density_ratio >= 2.0

    def test_unknown_strategy(self, sphere_profile):
        with pytest.raises(ValueError):
            generate_nodes(sphere_profile, 100, "fancy")


class TestCurvature:
    def test_sphere_constant(self):
        table = curvature_table(sphere_profile(2.0))
        assert_allclose(table.H, 0.5, rtol=1e-6)
        assert table.count == 81

    def test_spheroid_equator_and_pole(self):
        prof = spheroid_profile(5e-3, 2.5e-3)
        table = curvature_table(prof)
        h_eq, on1 = mean_curvature_at(table, prof, (5e-3, 0.0))
        # closed form: H = (a / c^2 + 1 / a) / 2 at the equator
        assert_allclose(h_eq, 0.5 * (5e-3 / 2.5e-3 ** 2 + 1 / 5e-3), rtol=5e-3)
        h_pole, on2 = mean_curvature_at(table, prof, (0.0, 0.0, 2.5e-3))
        assert_allclose(h_pole, 2.5e-3 / (5e-3) ** 2, rtol=1e-2)
        assert on1 and on2

    def test_cylinder_side(self):
        prof = cylinder_profile(1.0, 2.0)
        table = curvature_table(prof)
        h, _ = mean_curvature_at(table, prof, (1.0, 0.0))
        assert_allclose(h, 0.5, rtol=1e-6)

    def test_tablet_band_midpoint(self, tablet_profile):
        table = curvature_table(tablet_profile)
        h, _ = mean_curvature_at(table, tablet_profile, (5.675e-3, 0.0))
        assert_allclose(h, 1.0 / (2 * 5.675e-3), rtol=1e-6)

    def test_corner_cap_never_exceeded(self, tablet_profile):
        table = curvature_table(tablet_profile)
        assert (table.H <= 800.0 / tablet_profile.major_axis + 1e-9).all()

    def test_convex_profiles_strictly_positive(self):
        for prof in (sphere_profile(1.0), spheroid_profile(5e-3, 2.5e-3),
                     spherocylinder_profile(0.5, 1.0)):
            assert (curvature_table(prof).H > 0).all()

    def test_off_surface_point_flagged(self):
        prof = sphere_profile(1.0)
        table = curvature_table(prof)
        h, on = mean_curvature_at(table, prof, (0.5, 0.0))
        assert not on
        assert_allclose(h, 1.0, rtol=1e-6)

    def test_symmetric_reflection(self):
        prof = spheroid_profile(5e-3, 2.5e-3)
        table = curvature_table(prof)
        assert table.symmetric
        h_top, _ = mean_curvature_at(table, prof, (3e-3, 2e-3))
        h_bottom, _ = mean_curvature_at(table, prof, (3e-3, -2e-3))
        assert_allclose(h_top, h_bottom, rtol=1e-12)

    def test_adaptive_sampling_denser_on_gradients(self, tablet_profile):
        table = curvature_table(tablet_profile)
        # spacing near the rim (steep H gradient) vs on the smooth cap
        s_corner = tablet_profile.arc[tablet_profile.corner_indices[0]]
        ds = np.diff(table.s)
        mids = 0.5 * (table.s[:-1] + table.s[1:])
        near = np.abs(mids - s_corner) < 0.05 * tablet_profile.total_arc
        if table.symmetric:
            s_corner_q = min(s_corner, table.total_arc - s_corner)
            near = np.abs(mids - s_corner_q) < 0.05 * tablet_profile.total_arc
        assert ds[near].mean() < ds[~near].mean()
