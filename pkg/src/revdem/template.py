"""Assembly of per-shape templates shared by all particles of one shape."""

from __future__ import annotations

import numpy as np

from .body import ShapeTemplate
from .sdf import build_sdf
from .shape import Profile, curvature_table, generate_nodes, revolve_properties


def build_template(profile: Profile, density: float, n_nodes: int = 2000,
                   node_strategy: str | None = None, base_res: int = 50,
                   interface_level: int = 2, corner_level: int = 4,
                   curvature_samples: int = 81) -> ShapeTemplate:
    """Build the immutable bundle (SDF, nodes, curvature, mass properties).

    The node strategy defaults to adaptive for profiles with sharp corners
    and uniform otherwise.
    """
    if node_strategy is None:
        node_strategy = "adaptive" if len(profile.corner_indices) else "uniform"
    mass_props = revolve_properties(profile, density)
    return ShapeTemplate(
        profile=profile,
        sdf=build_sdf(profile, base_res, interface_level, corner_level),
        nodes=generate_nodes(profile, n_nodes, node_strategy),
        curvature=curvature_table(profile, curvature_samples),
        mass_props=mass_props,
        convex=profile.convex,
        equatorial_symmetry=profile.equatorial_symmetry,
        bounding_radius=profile.bounding_radius(),
        equivalent_radius=float((3.0 * mass_props.volume / (4.0 * np.pi)) ** (1.0 / 3.0)),
    )
