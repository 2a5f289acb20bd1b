"""Contact detection: broad phase, node-to-cross-section narrow phase, walls.

Particle pairs follow a master/slave split: the lower-index particle is the
master and contributes its surface nodes, the slave answers distance queries
through the signed distance field of its cross-section.  Against walls the
particle is always the master and node-to-wall distances are evaluated
directly from the wall primitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .body import Particle
from .sdf import SdfGrid

SKIN_FRACTION = 0.1     # broad-phase inflation, fraction of min bounding radius


@dataclass
class ContactRecord:
    """One penetrating master node against a slave surface."""

    master: int
    slave: int                  # particle id, or wall id for wall contacts
    node: int                   # master surface-node index
    phi: float                  # interpolated signed distance, negative
    d_n: np.ndarray             # overlap vector, world frame, node -> surface
    point: np.ndarray           # contact node position A, world frame
    is_wall: bool = False
    delta_t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    age: int = 0


# ---------------------------------------------------------------------------
# walls
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PlaneWall:
    """Flat wall (p, n̂); the unit normal points into the free half space."""

    point: np.ndarray
    normal: np.ndarray
    id: int = 0
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis_point: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float)
        self.axis_point = np.asarray(self.axis_point, dtype=float)

    def distances(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = (pts - self.point) @ self.normal
        return s, np.broadcast_to(self.normal, pts.shape)

    def mean_curvature(self) -> float:
        return 0.0

    def velocity_at(self, p: np.ndarray) -> np.ndarray:
        return np.cross(self.angular_velocity, p - self.axis_point)


@dataclass(eq=False)
class CylinderWall:
    """Cylindrical shell (r, p1, p2); `inward` means particles live inside."""

    radius: float
    p1: np.ndarray
    p2: np.ndarray
    inward: bool = True
    id: int = 0
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.p1 = np.asarray(self.p1, dtype=float)
        self.p2 = np.asarray(self.p2, dtype=float)
        axis = self.p2 - self.p1
        n = np.linalg.norm(axis)
        if n == 0.0 or self.radius <= 0.0:
            raise ValueError("cylinder wall needs distinct axis points and r > 0")
        self.axis = axis / n
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float)

    def distances(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Signed gap to the shell (positive in the free region) and the
        outward-of-surface normal at the foot point."""
        rel = pts - self.p1
        ax = rel @ self.axis
        radial = rel - ax[:, None] * self.axis
        rho = np.linalg.norm(radial, axis=1)
        safe = np.maximum(rho, 1e-300)
        rhat = radial / safe[:, None]
        if self.inward:
            return self.radius - rho, -rhat
        return rho - self.radius, rhat

    def mean_curvature(self) -> float:
        h = 0.5 / self.radius
        return -h if self.inward else h

    def velocity_at(self, p: np.ndarray) -> np.ndarray:
        return np.cross(self.angular_velocity, p - self.p1)


@dataclass(eq=False)
class MeshWall:
    """Triangle-mesh wall; triangles oriented with outward (free-side) normals."""

    vertices: np.ndarray
    faces: np.ndarray
    id: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        tri = self.vertices[self.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        self._tri = tri
        self._nrm = n / np.linalg.norm(n, axis=1)[:, None]

    def distances(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        closest, tri_idx = _closest_on_triangles(pts, self._tri)
        diff = pts - closest
        nrm = self._nrm[tri_idx]
        side = np.sign(np.einsum("ij,ij->i", diff, nrm))
        side[side == 0.0] = 1.0
        return np.linalg.norm(diff, axis=1) * side, nrm

    def mean_curvature(self) -> float:
        return 0.0

    def velocity_at(self, p: np.ndarray) -> np.ndarray:
        return np.zeros(3)


def load_mesh_wall(path, id: int = 0) -> MeshWall:
    """Wall mesh from text: `v x y z` vertex lines, `f i j k` 1-based faces."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(v) for v in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(v) - 1 for v in parts[1:4]])
    if not verts or not faces:
        raise ValueError(f"no usable vertex/face lines in {path}")
    return MeshWall(np.array(verts), np.array(faces), id=id)


def _closest_on_triangles(pts: np.ndarray, tri: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest points on a triangle soup for each query point."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab = b - a
    ac = c - a
    best_d2 = np.full(len(pts), np.inf)
    best_pt = np.zeros((len(pts), 3))
    best_tri = np.zeros(len(pts), dtype=np.int64)
    for t in range(len(tri)):
        p = _closest_on_triangle(pts, a[t], ab[t], ac[t])
        d2 = ((pts - p) ** 2).sum(axis=1)
        better = d2 < best_d2
        best_d2[better] = d2[better]
        best_pt[better] = p[better]
        best_tri[better] = t
    return best_pt, best_tri


def _closest_on_triangle(p: np.ndarray, a, ab, ac) -> np.ndarray:
    """Ericson-style closest point on one triangle, vectorized over points."""
    ap = p - a
    d1 = ap @ ab
    d2 = ap @ ac
    d00 = ab @ ab
    d01 = ab @ ac
    d11 = ac @ ac
    denom = d00 * d11 - d01 * d01
    v = np.clip((d11 * d1 - d01 * d2) / denom, 0.0, 1.0)
    w = np.clip((d00 * d2 - d01 * d1) / denom, 0.0, 1.0)
    over = v + w > 1.0
    if over.any():
        scale = (v + w)[over]
        v[over] /= scale
        w[over] /= scale
    cand = a + np.outer(v, ab) + np.outer(w, ac)
    # clamp onto edges where the barycentric solution left the triangle
    for edge_a, edge_d in ((a, ab), (a, ac), (a + ab, ac - ab)):
        t = np.clip((p - edge_a) @ edge_d / (edge_d @ edge_d), 0.0, 1.0)
        e = edge_a + np.outer(t, edge_d)
        closer = ((p - e) ** 2).sum(axis=1) < ((p - cand) ** 2).sum(axis=1)
        cand[closer] = e[closer]
    return cand


# ---------------------------------------------------------------------------
# broad phase
# ---------------------------------------------------------------------------

def broadphase_pairs(positions: np.ndarray, radii: np.ndarray,
                     skin: float | None = None) -> np.ndarray:
    """Candidate pairs whose skin-inflated bounding spheres overlap.

    Uniform spatial hash keyed on bounding-sphere centers, cell size equal to
    the largest inflated bounding diameter.  Returns an (P, 2) array with
    i < j, sorted lexicographically.
    """
    positions = np.asarray(positions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    n = len(positions)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    if skin is None:
        skin = SKIN_FRACTION * radii.min()
    r_inf = radii + skin
    cell = 2.0 * r_inf.max()
    keys = np.floor(positions / cell).astype(np.int64)

    buckets: dict[tuple[int, int, int], list[int]] = {}
    for i in range(n):
        buckets.setdefault(tuple(keys[i]), []).append(i)

    pairs = []
    offsets = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
               for dz in (-1, 0, 1)]
    for i in range(n):
        ki = keys[i]
        for off in offsets:
            cand = buckets.get((ki[0] + off[0], ki[1] + off[1], ki[2] + off[2]))
            if not cand:
                continue
            for j in cand:
                if j <= i:
                    continue
                gap = positions[j] - positions[i]
                if gap @ gap <= (r_inf[i] + r_inf[j]) ** 2:
                    pairs.append((i, j))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    out = np.array(sorted(set(pairs)), dtype=np.int64)
    return out


def assign_roles(i: int, j: int) -> tuple[int, int]:
    """Master/slave split of a pair: the lower index is the master."""
    if i == j:
        raise ValueError("a particle cannot pair with itself")
    return (i, j) if i < j else (j, i)


# ---------------------------------------------------------------------------
# narrow phase
# ---------------------------------------------------------------------------

def node_broadphase(master: Particle, slave: Particle) -> np.ndarray:
    """Master node indices whose meridian reduction falls inside the slave
    cross-section's axis-aligned bounding rectangle."""
    nodes_w = master.nodes_world()
    rs = slave.rotation()
    local = (nodes_w - slave.position) @ rs
    x = np.hypot(local[:, 0], local[:, 1])
    z = local[:, 2]
    x_max, z_min, z_max = slave.template.profile.bounding_rect()
    keep = (x <= x_max) & (z >= z_min) & (z <= z_max)
    return np.nonzero(keep)[0]


def node_narrowphase(master: Particle, slave: Particle,
                     neighbor_nodes: np.ndarray) -> list[ContactRecord]:
    """Sample the slave SDF at each neighbor node; penetrating nodes become
    contact records with world-frame overlap vectors.

    The 2D distance vector is rotated back into the vertical plane through
    the node and the slave axis, then into the world frame.  Nodes exactly on
    the slave axis take the +X body axis as their meridian plane.
    """
    if len(neighbor_nodes) == 0:
        return []
    nodes_w = master.nodes_world()[neighbor_nodes]
    rs = slave.rotation()
    local = (nodes_w - slave.position) @ rs
    rho = np.hypot(local[:, 0], local[:, 1])
    merid = np.column_stack([rho, local[:, 2]])
    phi, dvec = slave.template.sdf.sample_many(merid)

    records = []
    for k in np.nonzero(phi < 0.0)[0]:
        r = rho[k]
        if r > 1e-12 * slave.template.major_axis:
            ux, uy = local[k, 0] / r, local[k, 1] / r
        else:
            ux, uy = 1.0, 0.0
        d_body = np.array([dvec[k, 0] * ux, dvec[k, 0] * uy, dvec[k, 1]])
        records.append(ContactRecord(
            master=master.id, slave=slave.id, node=int(neighbor_nodes[k]),
            phi=float(phi[k]), d_n=rs @ d_body, point=nodes_w[k]))
    return records


def detect_pair(master: Particle, slave: Particle) -> list[ContactRecord]:
    return node_narrowphase(master, slave, node_broadphase(master, slave))


def wall_contact(particle: Particle, wall) -> list[ContactRecord]:
    """Contact records of a particle against a wall primitive.

    Node-to-wall distances are evaluated directly; the overlap vector points
    from the penetrating node back to the wall surface.
    """
    nodes_w = particle.nodes_world()
    s, nrm = wall.distances(nodes_w)
    records = []
    for k in np.nonzero(s < 0.0)[0]:
        records.append(ContactRecord(
            master=particle.id, slave=wall.id, node=int(k), phi=float(s[k]),
            d_n=-s[k] * nrm[k], point=nodes_w[k], is_wall=True))
    return records


def resolve_contact(records: list[ContactRecord],
                    both_convex: bool) -> list[ContactRecord]:
    """Reduce raw contact records to the effective contact set.

    Convex pairs keep only the deepest node, its overlap redirected along
    the average of all overlap vectors and its application point moved to
    the overlap-weighted centroid of the contact nodes (the discrete node
    set quantizes the true contact point; the centroid averages that out).
    Non-convex pairs keep every record for per-node force summation.  Ties
    on depth go to the lowest node index.
    """
    if not records:
        return []
    if not both_convex:
        return list(records)
    deepest = min(records, key=lambda r: (r.phi, r.node))
    total = np.sum([r.d_n for r in records], axis=0)
    norm = np.linalg.norm(total)
    if norm == 0.0:
        direction = deepest.d_n / np.linalg.norm(deepest.d_n)
    else:
        direction = total / norm
    weights = np.array([r.phi ** 4 for r in records])
    points = np.array([r.point for r in records])
    centroid = (weights[:, None] * points).sum(axis=0) / weights.sum()
    merged = ContactRecord(
        master=deepest.master, slave=deepest.slave, node=deepest.node,
        phi=deepest.phi, d_n=abs(deepest.phi) * direction,
        point=centroid, is_wall=deepest.is_wall,
        delta_t=deepest.delta_t, age=deepest.age)
    return [merged]
