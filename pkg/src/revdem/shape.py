"""Shapes of revolution: profile curves, mass properties, nodes, curvature.

A shape is defined by its *profile*, the half cross-section polyline in the
body-frame XZ half-plane (x >= 0), ordered from the top axis point to the
bottom axis point.  Everything else (mass properties, surface nodes, the
signed distance field, curvature samples) is derived from the profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CORNER_ANGLE_DEG = 170.0          # interior angles below this are sharp corners
CORNER_RADIUS_FRACTION = 800.0    # curvature capped at effective radius l/800
DEFAULT_SEGMENTS = 150


class ProfileError(ValueError):
    pass


@dataclass
class Profile:
    """Half cross-section polyline of a closed surface of revolution."""

    points: np.ndarray                 # (N, 2) columns (x, z), x >= 0
    corner_indices: np.ndarray         # vertex indices of sharp corners
    major_axis: float                  # l, longest edge of the cross-section AABB
    equatorial_symmetry: bool
    convex: bool
    arc: np.ndarray = field(repr=False)          # cumulative arc length per vertex
    _seg_a: np.ndarray = field(repr=False)       # segment start points
    _seg_d: np.ndarray = field(repr=False)       # segment direction vectors
    _seg_len: np.ndarray = field(repr=False)

    @property
    def n_segments(self) -> int:
        return len(self.points) - 1

    @property
    def z_top(self) -> float:
        return float(self.points[0, 1])

    @property
    def z_bottom(self) -> float:
        return float(self.points[-1, 1])

    @property
    def x_max(self) -> float:
        return float(self.points[:, 0].max())

    @property
    def total_arc(self) -> float:
        return float(self.arc[-1])

    def bounding_rect(self) -> tuple[float, float, float]:
        """(x_max, z_min, z_max) of the half cross-section."""
        return self.x_max, float(self.points[:, 1].min()), float(self.points[:, 1].max())

    def bounding_radius(self) -> float:
        """Radius of the bounding sphere about the body origin."""
        return float(np.sqrt((self.points ** 2).sum(axis=1)).max())

    def point_at_arc(self, s: float) -> np.ndarray:
        """Point on the polyline at arc-length parameter s."""
        s = min(max(s, 0.0), self.total_arc)
        i = int(np.searchsorted(self.arc, s, side="right") - 1)
        i = min(i, self.n_segments - 1)
        t = (s - self.arc[i]) / self._seg_len[i] if self._seg_len[i] > 0 else 0.0
        return self._seg_a[i] + t * self._seg_d[i]

    def nearest(self, p) -> tuple[float, float, np.ndarray]:
        """Closest point on the polyline to p = (x, z).

        Returns (distance, arc parameter, nearest point).
        """
        p = np.asarray(p, dtype=float)
        rel = p - self._seg_a
        t = np.einsum("ij,ij->i", rel, self._seg_d) / (self._seg_len ** 2)
        t = np.clip(t, 0.0, 1.0)
        foot = self._seg_a + t[:, None] * self._seg_d
        d2 = ((foot - p) ** 2).sum(axis=1)
        i = int(np.argmin(d2))
        s = self.arc[i] + t[i] * self._seg_len[i]
        return float(np.sqrt(d2[i])), float(s), foot[i]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd containment of (K, 2) points in the closed half section.

        The closing edge from the last vertex back to the first runs along
        the rotation axis, so containment means "inside the solid" for any
        meridian point with x >= 0.
        """
        return _points_in_polygon(np.asarray(pts, dtype=float), self.points)


def _points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Crossing-number test, vectorized over points; closed polygon."""
    x, z = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    px, pz = poly[:, 0], poly[:, 1]
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        x0, z0 = px[i], pz[i]
        x1, z1 = px[j], pz[j]
        if z0 == z1:
            continue
        crosses = (z0 > z) != (z1 > z)
        if not crosses.any():
            continue
        xi = x0 + (z - z0) * (x1 - x0) / (z1 - z0)
        inside ^= crosses & (x < xi)
    return inside


def _segments_self_intersect(pts: np.ndarray) -> bool:
    """True if any two non-adjacent polyline segments cross."""
    a = pts[:-1]
    b = pts[1:]
    n = len(a)
    for i in range(n):
        d1 = b[i] - a[i]
        for j in range(i + 2, n):
            d2 = b[j] - a[j]
            denom = d1[0] * d2[1] - d1[1] * d2[0]
            if denom == 0.0:
                continue
            rel = a[j] - a[i]
            t = (rel[0] * d2[1] - rel[1] * d2[0]) / denom
            u = (rel[0] * d1[1] - rel[1] * d1[0]) / denom
            if 1e-12 < t < 1.0 - 1e-12 and 1e-12 < u < 1.0 - 1e-12:
                return True
    return False


def _detect_corners(pts: np.ndarray, threshold_deg: float = CORNER_ANGLE_DEG) -> np.ndarray:
    """Interior vertices whose interior angle is below the threshold."""
    d = np.diff(pts, axis=0)
    lens = np.linalg.norm(d, axis=1)
    t = d / lens[:, None]
    dots = np.clip((t[:-1] * t[1:]).sum(axis=1), -1.0, 1.0)
    turn = np.degrees(np.arccos(dots))
    interior = 180.0 - turn
    return np.nonzero(interior < threshold_deg)[0] + 1


def _is_convex_section(pts: np.ndarray) -> bool:
    """Convexity of the full cross-section (profile plus its x<0 mirror)."""
    mirror = pts[::-1].copy()
    mirror[:, 0] *= -1.0
    poly = np.vstack([pts, mirror[1:-1]])
    d = np.diff(np.vstack([poly, poly[:1]]), axis=0)
    keep = np.linalg.norm(d, axis=1) > 1e-15
    d = d[keep]
    cross = d[:-1, 0] * np.roll(d, -1, axis=0)[:-1, 1] - d[:-1, 1] * np.roll(d, -1, axis=0)[:-1, 0]
    scale = (np.linalg.norm(d, axis=1).max()) ** 2
    sig = cross[np.abs(cross) > 1e-9 * scale]
    if len(sig) == 0:
        return True
    return bool((sig > 0).all() or (sig < 0).all())


def _has_equatorial_symmetry(pts: np.ndarray, tol: float) -> bool:
    zc = 0.5 * (pts[:, 1].min() + pts[:, 1].max())
    mirrored = pts[::-1].copy()
    mirrored[:, 1] = 2.0 * zc - mirrored[:, 1]
    if len(mirrored) != len(pts):
        return False
    return bool(np.abs(mirrored - pts).max() <= tol)


def make_profile(points, corner_threshold_deg: float = CORNER_ANGLE_DEG) -> Profile:
    """Validate, close and index an ordered (x, z) point list.

    End points off the axis are closed by projecting them onto it, matching
    the construction of a closed surface from an open generating curve.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ProfileError("profile needs an (N, 2) array with N >= 3")
    if (pts[:, 0] < -1e-12).any():
        raise ProfileError("profile x coordinates must be non-negative")
    pts = pts.copy()
    pts[:, 0] = np.maximum(pts[:, 0], 0.0)

    scale = max(pts[:, 0].max() * 2.0, pts[:, 1].max() - pts[:, 1].min())
    if scale <= 0.0:
        raise ProfileError("degenerate profile")
    axis_tol = 1e-9 * scale
    if pts[0, 0] > axis_tol:
        pts = np.vstack([[0.0, pts[0, 1]], pts])
    else:
        pts[0, 0] = 0.0
    if pts[-1, 0] > axis_tol:
        pts = np.vstack([pts, [0.0, pts[-1, 1]]])
    else:
        pts[-1, 0] = 0.0

    # drop zero-length segments
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-15 * scale
    pts = pts[keep]
    if len(pts) < 3:
        raise ProfileError("degenerate profile after cleanup")
    if _segments_self_intersect(pts):
        raise ProfileError("profile polyline is self-intersecting")

    seg_d = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg_d, axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg_len)])
    major = max(2.0 * pts[:, 0].max(), pts[:, 1].max() - pts[:, 1].min())
    return Profile(
        points=pts,
        corner_indices=_detect_corners(pts, corner_threshold_deg),
        major_axis=major,
        equatorial_symmetry=_has_equatorial_symmetry(pts, 1e-9 * scale),
        convex=_is_convex_section(pts),
        arc=arc,
        _seg_a=pts[:-1].copy(),
        _seg_d=seg_d,
        _seg_len=seg_len,
    )


# ---------------------------------------------------------------------------
# parametric families
# ---------------------------------------------------------------------------

def _require_positive(**dims):
    for name, value in dims.items():
        if value <= 0.0:
            raise ProfileError(f"dimension {name} must be positive, got {value}")


def _arc_points(center, radius, ang0, ang1, n):
    """Points on a circular arc, angles in radians measured from +x."""
    ang = np.linspace(ang0, ang1, n + 1)
    return np.column_stack([center[0] + radius * np.cos(ang),
                            center[1] + radius * np.sin(ang)])


def _split_counts(lengths, total):
    """Distribute `total` segments over parts proportionally to length."""
    lengths = np.asarray(lengths, dtype=float)
    raw = np.maximum(lengths / lengths.sum() * total, 4.0)
    return np.round(raw).astype(int)


def sphere_profile(radius: float, n_segments: int = DEFAULT_SEGMENTS) -> Profile:
    _require_positive(radius=radius)
    theta = np.linspace(0.0, np.pi, n_segments + 1)
    pts = np.column_stack([radius * np.sin(theta), radius * np.cos(theta)])
    return make_profile(pts)


def spheroid_profile(equatorial_radius: float, polar_radius: float,
                     n_segments: int = DEFAULT_SEGMENTS) -> Profile:
    _require_positive(equatorial_radius=equatorial_radius, polar_radius=polar_radius)
    theta = np.linspace(0.0, np.pi, n_segments + 1)
    pts = np.column_stack([equatorial_radius * np.sin(theta),
                           polar_radius * np.cos(theta)])
    return make_profile(pts)


def cylinder_profile(radius: float, height: float,
                     n_segments: int = DEFAULT_SEGMENTS) -> Profile:
    return frustum_profile(radius, radius, height, n_segments)


def frustum_profile(top_radius: float, bottom_radius: float, height: float,
                    n_segments: int = DEFAULT_SEGMENTS) -> Profile:
    """Conical frustum with flat end disks; a cylinder when radii are equal."""
    _require_positive(height=height)
    if top_radius < 0 or bottom_radius < 0 or top_radius + bottom_radius <= 0:
        raise ProfileError("frustum radii must be non-negative with positive sum")
    h2 = 0.5 * height
    side = math.hypot(top_radius - bottom_radius, height)
    n_top, n_side, n_bot = _split_counts(
        [max(top_radius, 1e-12), side, max(bottom_radius, 1e-12)], n_segments)
    parts = []
    if top_radius > 0:
        t = np.linspace(0.0, 1.0, n_top + 1)
        parts.append(np.column_stack([t * top_radius, np.full(n_top + 1, h2)]))
    t = np.linspace(0.0, 1.0, n_side + 1)
    parts.append(np.column_stack([top_radius + t * (bottom_radius - top_radius),
                                  h2 - t * height]))
    if bottom_radius > 0:
        t = np.linspace(0.0, 1.0, n_bot + 1)
        parts.append(np.column_stack([(1.0 - t) * bottom_radius, np.full(n_bot + 1, -h2)]))
    pts = np.vstack([p if i == 0 else p[1:] for i, p in enumerate(parts)])
    return make_profile(pts)


def tablet_cap_radius(band_radius: float, cap_height: float) -> float:
    """Sphere radius of a bi-convex tablet cap, from band radius and cap rise."""
    return 0.5 * (band_radius ** 2 + cap_height ** 2) / cap_height


def tablet_profile(band_radius: float, band_height: float, cap_height: float,
                   corner_radius: float = 0.0,
                   n_segments: int = DEFAULT_SEGMENTS) -> Profile:
    """Bi-convex tablet: two spherical caps joined by a cylindrical band.

    A positive `corner_radius` replaces the sharp band/cap junctions by
    tangent fillet arcs.
    """
    _require_positive(band_radius=band_radius, band_height=band_height,
                      cap_height=cap_height)
    rb, hb, hc = band_radius, band_height, cap_height
    rc = tablet_cap_radius(rb, hc)
    h_cap_center = rc - hc - 0.5 * hb      # cap sphere centers sit at -/+ this z
    z_pole = 0.5 * hb + hc

    cap_center_top = np.array([0.0, -h_cap_center])
    phi_rim = math.atan2(rc - hc, rb)      # cap angle at the band junction

    if corner_radius > 0.0:
        r = corner_radius
        if r >= min(rb, 0.5 * hb):
            raise ProfileError("corner radius too large for the band")
        dx = rb - r
        dz = math.sqrt((rc - r) ** 2 - dx ** 2)
        fil_center_top = np.array([dx, dz - h_cap_center])
        # tangency on the cap lies along the line cap-center -> fillet-center
        t1 = cap_center_top + rc / (rc - r) * (fil_center_top - cap_center_top)
        phi_t1 = math.atan2(t1[1] - cap_center_top[1], t1[0] - cap_center_top[0])
        z_band_top = fil_center_top[1]
        cap_len = rc * (0.5 * np.pi - phi_t1)
        fil_len = r * abs(phi_t1)
        band_len = 2.0 * z_band_top
        n_cap, n_fil, n_band = _split_counts([cap_len, fil_len, band_len / 2.0],
                                             n_segments // 2)
        cap = _arc_points(cap_center_top, rc, 0.5 * np.pi, phi_t1, n_cap)
        phi_f0 = math.atan2(t1[1] - fil_center_top[1], t1[0] - fil_center_top[0])
        fil = _arc_points(fil_center_top, r, phi_f0, 0.0, n_fil)
        band_half = np.column_stack([np.full(n_band + 1, rb),
                                     np.linspace(z_band_top, 0.0, n_band + 1)])
        upper = np.vstack([cap, fil[1:], band_half[1:]])
    else:
        band_len = hb
        cap_len = rc * (0.5 * np.pi - phi_rim)
        n_cap, n_band = _split_counts([cap_len, band_len / 2.0], n_segments // 2)
        cap = _arc_points(cap_center_top, rc, 0.5 * np.pi, phi_rim, n_cap)
        band_half = np.column_stack([np.full(n_band + 1, rb),
                                     np.linspace(0.5 * hb, 0.0, n_band + 1)])
        upper = np.vstack([cap, band_half[1:]])

    lower = upper[::-1].copy()
    lower[:, 1] *= -1.0
    pts = np.vstack([upper, lower[1:]])
    pts[0] = [0.0, z_pole]
    pts[-1] = [0.0, -z_pole]
    return make_profile(pts)


def spherocylinder_profile(radius: float, band_height: float,
                           n_segments: int = DEFAULT_SEGMENTS) -> Profile:
    """Cylinder with hemispherical end caps (capsule)."""
    _require_positive(radius=radius, band_height=band_height)
    h2 = 0.5 * band_height
    cap_len = 0.5 * np.pi * radius
    n_cap, n_band = _split_counts([cap_len, h2], n_segments // 2)
    cap = _arc_points(np.array([0.0, h2]), radius, 0.5 * np.pi, 0.0, n_cap)
    band = np.column_stack([np.full(n_band + 1, radius),
                            np.linspace(h2, 0.0, n_band + 1)])
    upper = np.vstack([cap, band[1:]])
    lower = upper[::-1].copy()
    lower[:, 1] *= -1.0
    return make_profile(np.vstack([upper, lower[1:]]))


def cassini_profile(focal_distance: float, size: float,
                    n_segments: int = DEFAULT_SEGMENTS) -> Profile:
    """Peanut from a Cassini oval revolved about the axis through its foci.

    Requires size > focal_distance (single loop); the waist is non-convex
    for size < 2^(1/4) * focal_distance.
    """
    a, b = focal_distance, size
    _require_positive(focal_distance=a, size=b)
    if b <= a:
        raise ProfileError("cassini oval needs size > focal_distance for a single loop")
    theta = np.linspace(0.0, np.pi, n_segments + 1)
    c2 = np.cos(2.0 * theta)
    r = np.sqrt(a * a * c2 + np.sqrt(b ** 4 - a ** 4 * (1.0 - c2 ** 2)))
    pts = np.column_stack([r * np.sin(theta), r * np.cos(theta)])
    return make_profile(pts)


def profile_from_points(points) -> Profile:
    return make_profile(points)


def load_profile(path) -> Profile:
    """Read a raw profile: two whitespace-separated columns (x_m, z_m)."""
    pts = np.loadtxt(path, comments="#", ndmin=2)
    if pts.shape[1] != 2:
        raise ProfileError("profile file must have exactly two columns")
    return make_profile(pts)


_FAMILIES = {
    "sphere": (sphere_profile, ("radius",)),
    "spheroid": (spheroid_profile, ("equatorial_radius", "polar_radius")),
    "cylinder": (cylinder_profile, ("radius", "height")),
    "frustum": (frustum_profile, ("top_radius", "bottom_radius", "height")),
    "tablet": (tablet_profile, ("band_radius", "band_height", "cap_height")),
    "spherocylinder": (spherocylinder_profile, ("radius", "band_height")),
    "cassini": (cassini_profile, ("focal_distance", "size")),
}


def build_profile(spec: dict) -> Profile:
    """Build a profile from a family spec, e.g. {"family": "sphere", "radius": 1}."""
    spec = dict(spec)
    family = spec.pop("family", None)
    if family == "points":
        if "path" in spec:
            return load_profile(spec["path"])
        return profile_from_points(spec["points"])
    if family not in _FAMILIES:
        raise ProfileError(f"unknown shape family {family!r}")
    fn, required = _FAMILIES[family]
    missing = [k for k in required if k not in spec]
    if missing:
        raise ProfileError(f"{family} profile needs keys {missing}")
    kwargs = {k: spec[k] for k in required}
    for opt in ("n_segments", "corner_radius"):
        if opt in spec:
            kwargs[opt] = spec[opt]
    return fn(**kwargs)


# ---------------------------------------------------------------------------
# mass properties
# ---------------------------------------------------------------------------

@dataclass
class MassProperties:
    mass: float
    volume: float
    density: float
    center_z: float
    inertia_x: float
    inertia_y: float
    inertia_z: float


_SIMPSON_N = 8
_SIMPSON_T = np.linspace(0.0, 1.0, _SIMPSON_N + 1)
_SIMPSON_W = np.ones(_SIMPSON_N + 1)
_SIMPSON_W[1:-1:2] = 4.0
_SIMPSON_W[2:-1:2] = 2.0
_SIMPSON_W /= 3.0 * _SIMPSON_N


def revolve_properties(profile: Profile, density: float) -> MassProperties:
    """Mass, center of mass and principal inertias by profile quadrature.

    Uses the thin-disk integrals of the solid of revolution, evaluated as
    composite Simpson sums segment by segment.  Integrating x^2 dz along the
    closed boundary handles non-monotone profiles as well; inertias are
    reported about the center of mass.
    """
    if density <= 0.0:
        raise ProfileError("density must be positive")
    a = profile._seg_a
    d = profile._seg_d
    x = a[:, 0:1] + _SIMPSON_T[None, :] * d[:, 0:1]
    z = a[:, 1:2] + _SIMPSON_T[None, :] * d[:, 1:2]
    dz = d[:, 1:2]
    w = _SIMPSON_W[None, :]

    int_f2 = float((w * x ** 2 * dz).sum())
    int_zf2 = float((w * z * x ** 2 * dz).sum())
    int_f4 = float((w * x ** 4 * dz).sum())
    int_z2f2 = float((w * z ** 2 * x ** 2 * dz).sum())

    sign = -1.0 if int_f2 < 0.0 else 1.0
    volume = sign * np.pi * int_f2
    if volume <= 1e-30 * profile.major_axis ** 3:
        raise ProfileError("profile encloses no volume")
    mass = density * volume
    center_z = int_zf2 / int_f2
    inertia_z = sign * 0.5 * np.pi * density * int_f4
    inertia_x_origin = 0.5 * inertia_z + sign * np.pi * density * int_z2f2
    inertia_x = inertia_x_origin - mass * center_z ** 2
    return MassProperties(mass=mass, volume=volume, density=density,
                          center_z=center_z, inertia_x=inertia_x,
                          inertia_y=inertia_x, inertia_z=inertia_z)


# ---------------------------------------------------------------------------
# triangle mesh and voxel properties
# ---------------------------------------------------------------------------

def revolve_mesh(profile: Profile, n_phi: int = 96) -> tuple[np.ndarray, np.ndarray]:
    """Watertight triangle mesh of the surface of revolution.

    Returns (vertices (V, 3), faces (F, 3)).  Axis end points become single
    pole vertices with triangle fans.
    """
    pts = profile.points
    phi = np.arange(n_phi) * (2.0 * np.pi / n_phi)
    cos_p, sin_p = np.cos(phi), np.sin(phi)

    verts = [np.array([0.0, 0.0, pts[0, 1]])]
    ring_start = []
    for i in range(1, len(pts) - 1):
        ring_start.append(len(verts))
        x, z = pts[i]
        ring = np.column_stack([x * cos_p, x * sin_p, np.full(n_phi, z)])
        verts.extend(ring)
    bottom = len(verts)
    verts.append(np.array([0.0, 0.0, pts[-1, 1]]))
    verts = np.array(verts)

    faces = []
    first = ring_start[0]
    for k in range(n_phi):
        faces.append([0, first + k, first + (k + 1) % n_phi])
    for r in range(len(ring_start) - 1):
        a0, b0 = ring_start[r], ring_start[r + 1]
        for k in range(n_phi):
            k1 = (k + 1) % n_phi
            faces.append([a0 + k, b0 + k, b0 + k1])
            faces.append([a0 + k, b0 + k1, a0 + k1])
    last = ring_start[-1]
    for k in range(n_phi):
        faces.append([bottom, last + (k + 1) % n_phi, last + k])
    return verts, np.array(faces, dtype=np.int64)


def _check_watertight(faces: np.ndarray) -> bool:
    edges = np.vstack([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool((counts == 2).all())


def voxel_properties(mesh: tuple[np.ndarray, np.ndarray], n: int,
                     density: float) -> MassProperties:
    """Mass properties by voxelizing a closed mesh into point masses.

    The bounding box is divided into cubic cells of size l/n (l: longest box
    edge); cell centers are classified by ray-crossing parity along +x and
    summed as point masses.
    """
    verts, faces = mesh
    if n < 10:
        raise ValueError("voxel resolution n must be at least 10")
    if density <= 0.0:
        raise ValueError("density must be positive")
    if not _check_watertight(faces):
        raise ValueError("mesh is not watertight")

    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    extent = hi - lo
    h = extent.max() / n
    dims = np.maximum(np.ceil(extent / h - 1e-9).astype(int), 1)
    # nudge the grid so columns never pass exactly through mesh vertices
    origin = lo - 0.5 * h * 1.8293e-4

    tri = verts[faces]                      # (F, 3, 3)
    # plane normals and offsets for x(y, z) on each triangle
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    nrm = np.cross(e1, e2)
    ok = np.abs(nrm[:, 0]) > 1e-14 * np.abs(nrm).max()
    tri, nrm = tri[ok], nrm[ok]
    offs = np.einsum("ij,ij->i", nrm, tri[:, 0])

    # bucket triangles by their (y, z) projection
    ty = tri[:, :, 1]
    tz = tri[:, :, 2]
    iy0 = np.floor((ty.min(axis=1) - origin[1]) / h - 0.5).astype(int)
    iy1 = np.floor((ty.max(axis=1) - origin[1]) / h - 0.5).astype(int)
    iz0 = np.floor((tz.min(axis=1) - origin[2]) / h - 0.5).astype(int)
    iz1 = np.floor((tz.max(axis=1) - origin[2]) / h - 0.5).astype(int)
    buckets: dict[tuple[int, int], list[int]] = {}
    for f in range(len(tri)):
        for jy in range(max(iy0[f], 0), min(iy1[f], dims[1] - 1) + 1):
            for jz in range(max(iz0[f], 0), min(iz1[f], dims[2] - 1) + 1):
                buckets.setdefault((jy, jz), []).append(f)

    xs_centers = origin[0] + (np.arange(dims[0]) + 0.5) * h
    count = 0
    s1 = np.zeros(3)
    s_xx = s_yy = s_zz = 0.0
    for (jy, jz), fl in buckets.items():
        yc = origin[1] + (jy + 0.5) * h
        zc = origin[2] + (jz + 0.5) * h
        fl = np.array(fl)
        t = tri[fl]
        # 2D point-in-triangle in the (y, z) projection
        d1 = (yc - t[:, 0, 1]) * (t[:, 1, 2] - t[:, 0, 2]) - (zc - t[:, 0, 2]) * (t[:, 1, 1] - t[:, 0, 1])
        d2 = (yc - t[:, 1, 1]) * (t[:, 2, 2] - t[:, 1, 2]) - (zc - t[:, 1, 2]) * (t[:, 2, 1] - t[:, 1, 1])
        d3 = (yc - t[:, 2, 1]) * (t[:, 0, 2] - t[:, 2, 2]) - (zc - t[:, 2, 2]) * (t[:, 0, 1] - t[:, 2, 1])
        hit = ((d1 >= 0) & (d2 >= 0) & (d3 >= 0)) | ((d1 <= 0) & (d2 <= 0) & (d3 <= 0))
        if not hit.any():
            continue
        fh = fl[hit]
        x_cross = (offs[fh] - nrm[fh, 1] * yc - nrm[fh, 2] * zc) / nrm[fh, 0]
        x_cross.sort()
        if len(x_cross) % 2 == 1:
            # grazing degeneracy; drop the most isolated crossing
            x_cross = x_cross[:-1] if len(x_cross) > 1 else x_cross[0:0]
        if len(x_cross) == 0:
            continue
        parity = np.searchsorted(x_cross, xs_centers) % 2 == 1
        m = int(parity.sum())
        if m == 0:
            continue
        xin = xs_centers[parity]
        count += m
        s1 += [xin.sum(), m * yc, m * zc]
        s_xx += (xin ** 2).sum()
        s_yy += m * yc ** 2
        s_zz += m * zc ** 2

    if count == 0:
        raise ValueError("no voxel centers fall inside the mesh")
    cell_volume = h ** 3
    m_cell = density * cell_volume
    mass = count * m_cell
    com = s1 / count
    # shift second moments to the center of mass
    sxx = s_xx - count * com[0] ** 2
    syy = s_yy - count * com[1] ** 2
    szz = s_zz - count * com[2] ** 2
    return MassProperties(
        mass=mass, volume=count * cell_volume, density=density, center_z=com[2],
        inertia_x=m_cell * (syy + szz), inertia_y=m_cell * (sxx + szz),
        inertia_z=m_cell * (sxx + syy))


# ---------------------------------------------------------------------------
# surface nodes
# ---------------------------------------------------------------------------

@dataclass
class SurfaceNodeSet:
    points: np.ndarray          # (N, 3) body-frame node positions
    strategy: str
    requested: int

    @property
    def count(self) -> int:
        return len(self.points)


_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def _corner_weight(profile: Profile, s: np.ndarray, boost: float,
                   band: float) -> np.ndarray:
    """Station weight: `boost` on a plateau around each corner, ramping to 1."""
    w = np.ones_like(s)
    if len(profile.corner_indices) == 0:
        return w
    plateau = 1.2 * band
    for ci in profile.corner_indices:
        d = np.abs(s - profile.arc[ci])
        ramp = np.clip((2.0 * plateau - d) / plateau, 0.0, 1.0)
        w = np.maximum(w, 1.0 + (boost - 1.0) * ramp)
    return w


def generate_nodes(profile: Profile, n_nodes: int,
                   strategy: str = "uniform") -> SurfaceNodeSet:
    """Node-based surface by sweeping profile stations into rings.

    Stations are spaced along the profile arc; each station carries a ring
    whose node count is proportional to the station radius, giving a uniform
    surface density.  The adaptive strategy doubles the local density inside
    a band of l/60 around sharp corners.  Exactly one node sits at each pole.
    """
    if n_nodes < 50:
        raise ValueError("n_nodes must be at least 50")
    if strategy not in ("uniform", "adaptive"):
        raise ValueError(f"unknown node strategy {strategy!r}")

    total = profile.total_arc
    dense_s = np.linspace(0.0, total, 4096)
    if strategy == "adaptive":
        w = _corner_weight(profile, dense_s, boost=2.0, band=profile.major_axis / 60.0)
    else:
        w = np.ones_like(dense_s)
    x_dense = np.array([profile.point_at_arc(s)[0] for s in dense_s])
    cum_w = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(dense_s))])
    area_w = np.trapezoid(2.0 * np.pi * x_dense * w ** 2, dense_s)

    def stations(spacing: float):
        n_st = max(1, int(np.floor(cum_w[-1] / spacing)))
        u = (np.arange(n_st) + 0.5) * (cum_w[-1] / n_st)
        s_st = np.interp(u, cum_w, dense_s)
        # a sharp corner is a surface feature: represent it by a ring exactly
        # on the corner, not by two straddling rings
        for ci in profile.corner_indices:
            s_c = profile.arc[ci]
            s_st[int(np.argmin(np.abs(s_st - s_c)))] = s_c
        return s_st

    def build(s_st, spacing: float, ring_scale: float):
        pts = [np.array([[0.0, 0.0, profile.z_top]])]
        for k, s in enumerate(s_st):
            x, z = profile.point_at_arc(s)
            if x <= 1e-12 * profile.major_axis:
                continue
            wk = np.interp(s, dense_s, w)
            m = max(1, int(round(2.0 * np.pi * x * wk * ring_scale / spacing)))
            phi = _GOLDEN_ANGLE * k + np.arange(m) * (2.0 * np.pi / m)
            pts.append(np.column_stack([x * np.cos(phi), x * np.sin(phi),
                                        np.full(m, z)]))
        pts.append(np.array([[0.0, 0.0, profile.z_bottom]]))
        return np.vstack(pts)

    # stations set the meridian spacing; a ring-count multiplier found by
    # bisection absorbs the quantization and lands the requested total
    spacing = math.sqrt(area_w / n_nodes)
    best = None
    for _ in range(3):
        s_st = stations(spacing)
        lo, hi = 0.4, 2.5
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            pts = build(s_st, spacing, mid)
            if best is None or abs(len(pts) - n_nodes) < abs(len(best) - n_nodes):
                best = pts
            if len(pts) < n_nodes:
                lo = mid
            elif len(pts) > n_nodes:
                hi = mid
            else:
                break
        if abs(len(best) - n_nodes) <= 0.02 * n_nodes:
            break
        spacing *= math.sqrt(len(best) / n_nodes)
    if abs(len(best) - n_nodes) > 0.05 * n_nodes:
        raise RuntimeError(f"node generation reached {len(best)} of {n_nodes} requested")
    return SurfaceNodeSet(points=best, strategy=strategy, requested=n_nodes)


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

@dataclass
class CurvatureTable:
    s: np.ndarray               # arc positions of the samples
    H: np.ndarray               # mean curvature at the samples, 1/m
    total_arc: float
    symmetric: bool             # quarter table, query via reflection about s/2

    @property
    def count(self) -> int:
        return len(self.s)

    def value_at_arc(self, s: float) -> float:
        if self.symmetric:
            half = 0.5 * self.total_arc
            s = half - abs(half - min(max(s, 0.0), self.total_arc))
        return float(np.interp(s, self.s, self.H))


def _vertex_mean_curvature(profile: Profile) -> np.ndarray:
    """Mean curvature H at every profile vertex.

    Meridian curvature from the circumcircle of each vertex triplet (exact on
    circular arcs), hoop curvature from the revolved-surface relation; sharp
    corners are capped so the effective radius stays above l/800.
    """
    pts = profile.points
    n = len(pts)
    l = profile.major_axis
    h_cap = CORNER_RADIUS_FRACTION / l

    # extend across the poles with the mirrored neighbours
    ext = np.vstack([[-pts[1, 0], pts[1, 1]], pts, [-pts[-2, 0], pts[-2, 1]]])
    a = ext[:-2]
    b = ext[1:-1]
    c = ext[2:]
    ab = b - a
    bc = c - b
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    la = np.linalg.norm(ab, axis=1)
    lb = np.linalg.norm(bc, axis=1)
    lc = np.linalg.norm(c - a, axis=1)
    k_mer = -2.0 * cross / np.maximum(la * lb * lc, 1e-300)

    tang = ab / la[:, None] + bc / lb[:, None]
    tn = np.linalg.norm(tang, axis=1)
    small = tn < 1e-12
    tang[small] = bc[small] / lb[small, None]
    tn = np.linalg.norm(tang, axis=1)
    tang /= tn[:, None]

    x = pts[:, 0]
    k_hoop = np.where(x > 1e-12 * l, -tang[:, 1] / np.maximum(x, 1e-300), k_mer)

    h = 0.5 * (k_mer + k_hoop)
    h[0] = k_mer[0]
    h[-1] = k_mer[-1]
    # Sharp corners: the circumcircle estimate diverges there, so take the
    # crossover of the adjacent smooth values instead; the l/800 cap stays
    # as a hard clamp so the effective contact radius never collapses.
    for ci in profile.corner_indices:
        neighbors = []
        if ci >= 2:
            neighbors.append(h[ci - 2])
        if ci + 2 < n:
            neighbors.append(h[ci + 2])
        if neighbors:
            h[ci] = np.mean(neighbors)
        if ci >= 1:
            h[ci - 1] = h[ci]
        if ci + 1 < n:
            h[ci + 1] = h[ci]
    return np.minimum(h, h_cap)


def curvature_table(profile: Profile, n_samples: int = 81) -> CurvatureTable:
    """Adaptive mean-curvature samples along the profile arc.

    Sample density grows where |dH/ds| is steep; symmetric shapes store only
    the first half of the arc and answer queries by reflection.
    """
    if n_samples < 5:
        raise ValueError("n_samples must be at least 5")
    h_vertex = _vertex_mean_curvature(profile)
    s_vertex = profile.arc
    total = profile.total_arc

    if profile.equatorial_symmetry:
        half = 0.5 * total
        keep = s_vertex <= half - 1e-12 * total
        s_v = np.append(s_vertex[keep], half)
        h_v = np.append(h_vertex[keep], np.interp(half, s_vertex, h_vertex))
        span = half
    else:
        s_v, h_v = s_vertex, h_vertex
        span = total

    grad = np.abs(np.gradient(h_v, s_v, edge_order=1))
    gmax = grad.max()
    dens = np.ones_like(s_v)
    if gmax > 0:
        dens += 3.0 * grad / gmax
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(s_v))])
    cdf /= cdf[-1]
    u = np.linspace(0.0, 1.0, n_samples)
    s_samples = np.interp(u, cdf, s_v)
    s_samples[0], s_samples[-1] = 0.0, span
    h_samples = np.interp(s_samples, s_v, h_v)
    return CurvatureTable(s=s_samples, H=h_samples, total_arc=total,
                          symmetric=profile.equatorial_symmetry)


def mean_curvature_at(table: CurvatureTable, profile: Profile, point,
                      tol: float | None = None) -> tuple[float, bool]:
    """Interpolated mean curvature at a body point (3D) or meridian point (2D).

    Returns (H, on_surface); points farther than `tol` from the profile are
    answered with the nearest-parameter value and flagged.
    """
    p = np.asarray(point, dtype=float)
    if p.shape == (3,):
        p = np.array([math.hypot(p[0], p[1]), p[2]])
    dist, s, _ = profile.nearest(p)
    if tol is None:
        tol = 1e-2 * profile.major_axis
    return table.value_at_arc(s), dist <= tol
