"""Run configuration: strict YAML schema with fail-fast validation.

A config file has up to five blocks: `shape`, `material`, `run`, `model`
and `geometry`.  Unknown keys anywhere are rejected, required keys are
reported all at once, and a resolved echo (defaults applied) is written next
to every output so runs can be reproduced from their artifacts alone.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


_SHAPE_KEYS = {
    "family", "radius", "height", "equatorial_radius", "polar_radius",
    "top_radius", "bottom_radius", "band_radius", "band_height", "cap_height",
    "corner_radius", "focal_distance", "size", "n_segments", "path", "points",
}

_MATERIAL_KEYS = {
    "young_modulus", "shear_modulus", "poisson", "density",
    "restitution", "restitution_pp", "restitution_pw",
    "friction", "friction_pp", "friction_pw",
}

_RUN_DEFAULTS = {
    "dt": None,                 # None: n_safety over the critical step
    "n_safety": 20.0,
    "duration": None,
    "seed": 0,
    "deterministic": True,
    "threads": 1,
    "snapshot_every": 0,
    "gravity": [0.0, 0.0, -9.81],
}

_MODEL_DEFAULTS = {
    "n_nodes": 2000,
    "node_strategy": None,      # None: adaptive when the profile has corners
    "curvature_model": "mean",
    "convexity": "auto",
    "sdf_base_res": 50,
    "sdf_interface_level": 2,
    "sdf_corner_level": 4,
    "curvature_samples": 81,
}

_GEOMETRY_KEYS = {
    "cylinder_diameter", "cylinder_height", "drum_diameter", "drum_length",
    "rpm", "count", "speed", "thetas", "orientation", "rounded_corner",
    "drop_batch_min", "drop_batch_max",
}

_BLOCKS = {"shape", "material", "run", "model", "geometry"}


@dataclass
class SimConfig:
    shape: dict
    material: dict
    run: dict
    model: dict
    geometry: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"shape": copy.deepcopy(self.shape),
                "material": copy.deepcopy(self.material),
                "run": copy.deepcopy(self.run),
                "model": copy.deepcopy(self.model),
                "geometry": copy.deepcopy(self.geometry)}


def _check_keys(block: str, data: dict, allowed: set):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in [{block}]: {unknown}")


def _material_block(data: dict) -> dict:
    _check_keys("material", data, _MATERIAL_KEYS)
    out = dict(data)
    missing = []
    if "young_modulus" not in out and "shear_modulus" not in out:
        missing.append("material.young_modulus or material.shear_modulus")
    for key in ("poisson", "density"):
        if key not in out:
            missing.append(f"material.{key}")
    if "restitution" not in out and "restitution_pp" not in out \
            and "restitution_pw" not in out:
        missing.append("material.restitution")
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))

    nu = float(out["poisson"])
    if "young_modulus" in out and "shear_modulus" in out:
        pass
    elif "shear_modulus" in out:
        out["young_modulus"] = 2.0 * float(out["shear_modulus"]) * (1.0 + nu)
    else:
        out["shear_modulus"] = float(out["young_modulus"]) / (2.0 * (1.0 + nu))
    if float(out["young_modulus"]) < 1e3:
        raise ConfigError(
            f"young_modulus {out['young_modulus']} Pa is implausibly small; "
            "units must be SI (pascals)")

    e = out.pop("restitution", None)
    out.setdefault("restitution_pp", e)
    out.setdefault("restitution_pw", e if e is not None else out["restitution_pp"])
    if out["restitution_pp"] is None:
        out["restitution_pp"] = out["restitution_pw"]
    mu = out.pop("friction", 0.0)
    out.setdefault("friction_pp", mu)
    out.setdefault("friction_pw", mu)
    return out


def _with_defaults(block: str, data: dict, defaults: dict) -> dict:
    _check_keys(block, data, set(defaults))
    out = dict(defaults)
    out.update(data)
    return out


def from_dict(raw: dict) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("root", raw, _BLOCKS)
    missing = [b for b in ("shape", "material", "run") if b not in raw]
    if missing:
        raise ConfigError("missing required blocks: " + ", ".join(missing))

    shape = dict(raw["shape"])
    _check_keys("shape", shape, _SHAPE_KEYS)
    if "family" not in shape:
        raise ConfigError("missing required keys: shape.family")

    material = _material_block(dict(raw["material"]))
    run = _with_defaults("run", dict(raw["run"]), _RUN_DEFAULTS)
    model = _with_defaults("model", dict(raw.get("model", {})), _MODEL_DEFAULTS)
    geometry = dict(raw.get("geometry", {}))
    _check_keys("geometry", geometry, _GEOMETRY_KEYS)

    if run["dt"] is not None and float(run["dt"]) <= 0.0:
        raise ConfigError("run.dt must be positive")
    return SimConfig(shape=shape, material=material, run=run, model=model,
                     geometry=geometry)


def parse_config(path) -> SimConfig:
    """Load and validate a YAML config file."""
    text = Path(path).read_text()
    raw = yaml.safe_load(text)
    if raw is None:
        raw = {}
    return from_dict(raw)


def echo_config(config: SimConfig, path) -> None:
    """Write the fully resolved config next to the outputs."""
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=True))


def material_params(config: SimConfig):
    from .body import MaterialParams
    m = config.material
    return MaterialParams(
        young=float(m["young_modulus"]), poisson=float(m["poisson"]),
        density=float(m["density"]),
        restitution_pp=float(m["restitution_pp"]),
        restitution_pw=float(m["restitution_pw"]),
        friction_pp=float(m["friction_pp"]),
        friction_pw=float(m["friction_pw"]),
        shear=float(m["shear_modulus"]))


def build_template_from(config: SimConfig):
    from .shape import build_profile
    from .template import build_template
    model = config.model
    profile = build_profile(config.shape)
    return build_template(
        profile, float(config.material["density"]),
        n_nodes=int(model["n_nodes"]),
        node_strategy=model["node_strategy"],
        base_res=int(model["sdf_base_res"]),
        interface_level=int(model["sdf_interface_level"]),
        corner_level=int(model["sdf_corner_level"]),
        curvature_samples=int(model["curvature_samples"]))
