"""Command-line entry points for property inspection and the four scenarios."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import SimConfig, build_template_from, echo_config, parse_config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _prepare(args) -> tuple[SimConfig, Path]:
    config = parse_config(args.config)
    if args.seed is not None:
        config.run["seed"] = args.seed
    if args.deterministic:
        config.run["deterministic"] = True
    if args.threads is not None:
        config.run["threads"] = args.threads
    out = _out_dir(args)
    echo_config(config, out / "config_resolved.yaml")
    (out / "seed.txt").write_text(
        f"rng: numpy PCG64\nseed: {config.run['seed']}\n")
    return config, out


def cmd_props(args) -> int:
    from .shape import build_profile, revolve_mesh, revolve_properties, voxel_properties
    config, out = _prepare(args)
    profile = build_profile(config.shape)
    rho = float(config.material["density"])
    mp = revolve_properties(profile, rho)
    mesh = revolve_mesh(profile, n_phi=128)
    vox = voxel_properties(mesh, n=150, density=rho)
    print(f"profile: {len(profile.points)} points, "
          f"{len(profile.corner_indices)} corners, l = {profile.major_axis:.6g} m")
    for label, r in (("quadrature", mp), ("voxel n=150", vox)):
        print(f"[{label}]")
        print(f"  mass      = {r.mass:.6g} kg")
        print(f"  volume    = {r.volume:.6g} m^3")
        print(f"  center_z  = {r.center_z:.6g} m")
        print(f"  I_x = I_y = {r.inertia_x:.6g} kg m^2")
        print(f"  I_z       = {r.inertia_z:.6g} kg m^2")
    from .snapshots import write_table
    write_table(out / "mass_properties.csv",
                "method,mass,volume,center_z,ix,iy,iz",
                [[0, mp.mass, mp.volume, mp.center_z, mp.inertia_x,
                  mp.inertia_y, mp.inertia_z],
                 [1, vox.mass, vox.volume, vox.center_z, vox.inertia_x,
                  vox.inertia_y, vox.inertia_z]])
    return 0


def cmd_sdf(args) -> int:
    from .shape import build_profile
    from .sdf import build_sdf
    config, out = _prepare(args)
    profile = build_profile(config.shape)
    model = config.model
    grid = build_sdf(profile, int(model["sdf_base_res"]),
                     int(model["sdf_interface_level"]),
                     int(model["sdf_corner_level"]))
    table = grid.debug_table()
    path = out / "sdf_debug.txt"
    header = "# x z phi dx dz\n"
    rows = "\n".join(" ".join("%.17g" % v for v in row) for row in table)
    path.write_text(header + rows + "\n")
    print(f"{grid.n_leaves} leaf cells, {len(table)} grid points -> {path}")
    return 0


def cmd_impact_wall(args) -> int:
    from . import scenarios
    from .snapshots import write_table
    config, out = _prepare(args)
    params = dict(scenarios.TABLET_IMPACT)
    params.update({
        "band_radius": float(config.shape["band_radius"]),
        "band_height": float(config.shape["band_height"]),
        "cap_height": float(config.shape["cap_height"]),
        "shear": float(config.material["shear_modulus"]),
        "poisson": float(config.material["poisson"]),
        "density": float(config.material["density"]),
        "restitution": float(config.material["restitution_pw"]),
        "friction": float(config.material["friction_pw"]),
    })
    if config.run["dt"]:
        params["dt"] = float(config.run["dt"])
    params["speed"] = float(config.geometry.get("speed", 1.0))
    if args.theta_list:
        angles = [float(t) for t in args.theta_list.split(",")]
    else:
        angles = config.geometry.get("thetas")
    rounded = bool(config.geometry.get("rounded_corner", False))

    from .shape import revolve_properties, tablet_profile
    mp = revolve_properties(tablet_profile(params["band_radius"],
                                           params["band_height"],
                                           params["cap_height"]),
                            params["density"])
    results = scenarios.wall_impact_sweep(angles, params, rounded=rounded,
                                          n_nodes=int(config.model["n_nodes"]))
    rows = []
    for r in results:
        v_ref, w_ref = scenarios.analytic_wall_impact(
            r.theta, params["band_radius"], params["band_height"],
            params["cap_height"], params["restitution"], mp.mass,
            mp.inertia_y, v_pre=r.v_pre)
        rows.append([r.theta, r.v_ratio, r.omega_ratio,
                     v_ref / r.v_pre, w_ref * params["band_radius"] / r.v_pre])
        print(f"theta={r.theta:6.2f}  V+/V- = {r.v_ratio:+.4f}  "
              f"wRb/V- = {r.omega_ratio:+.4f}")
    write_table(out / "impact_wall.csv",
                "theta,v_ratio,omega_ratio,v_ratio_analytic,omega_ratio_analytic",
                rows)
    return 0


def cmd_impact_pair(args) -> int:
    from . import scenarios
    from .snapshots import write_table
    config, out = _prepare(args)
    params = dict(scenarios.ELLIPSOID_IMPACT)
    params.update({
        "equatorial_radius": float(config.shape["equatorial_radius"]),
        "polar_radius": float(config.shape["polar_radius"]),
        "young": float(config.material["young_modulus"]),
        "poisson": float(config.material["poisson"]),
        "density": float(config.material["density"]),
        "restitution": float(config.material["restitution_pp"]),
    })
    if config.run["dt"]:
        params["dt"] = float(config.run["dt"])
    orientation = float(config.geometry.get("orientation", 0.0))
    model = config.model["curvature_model"]
    res = scenarios.run_pair_impact(orientation, model, params,
                                    n_nodes=int(config.model["n_nodes"]))
    write_table(out / "force_overlap.csv", "time,overlap,fn,fn_elastic,v_center",
                np.column_stack([res.time, res.overlap, res.fn,
                                 res.fn_elastic, res.v_center]))
    print(f"orientation {orientation} deg, curvature model {model}: "
          f"R* = {res.r_eff:.4e} m, contact duration = "
          f"{res.contact_duration:.4e} s, rebound = {res.rebound_speed:+.4f} m/s")
    return 0


def cmd_pack(args) -> int:
    from . import scenarios
    from .snapshots import write_snapshot_series, write_table
    config, out = _prepare(args)
    params = _bulk_params(config, scenarios.PACKING_TABLETS)
    res = scenarios.run_packing(
        params, count=int(config.geometry.get("count", params["count"])),
        seed=int(config.run["seed"]), n_nodes=int(config.model["n_nodes"]),
        dt=float(config.run["dt"]) if config.run["dt"] else None)
    write_table(out / "pack_result.csv",
                "fill_height,raw_max_height,count,porosity,seed",
                [[res.fill_height, res.raw_max_height, res.count,
                  res.porosity, res.seed]])
    write_snapshot_series(res.snapshots, out / "snapshots")
    print(f"fill height = {res.fill_height * 1e3:.2f} mm "
          f"(raw max {res.raw_max_height * 1e3:.2f} mm), "
          f"porosity = {res.porosity:.3f}")
    return 0


def cmd_drum(args) -> int:
    from . import scenarios
    from .snapshots import write_table
    config, out = _prepare(args)
    params = _bulk_params(config, scenarios.PACKING_TABLETS)
    geometry = dict(scenarios.DRUM_GEOMETRY)
    for key, name in (("drum_diameter", "diameter"), ("drum_length", "length"),
                      ("rpm", "rpm")):
        if key in config.geometry:
            geometry[name] = float(config.geometry[key])
    t0 = time.perf_counter()

    def progress(eng, angle):
        print(f"  t = {eng.time:7.3f} s  angle = {angle:6.2f} deg  "
              f"[{time.perf_counter() - t0:.0f} s wall]", flush=True)

    res = scenarios.run_drum(
        params, count=int(config.geometry.get("count", 150)),
        geometry=geometry, seed=int(config.run["seed"]),
        n_nodes=int(config.model["n_nodes"]),
        dt=float(config.run["dt"]) if config.run["dt"] else None,
        progress_cb=progress if args.verbose else None)
    write_table(out / "daor.csv", "snapshot,angle_deg",
                [[k, a] for k, a in enumerate(res.angles)])
    for k, pts in enumerate(res.profiles):
        write_table(out / f"surface_{k:02d}.csv", "x_over_R,z_over_R", pts)
    print(f"dynamic angle of repose = {res.mean_angle:.2f} +/- "
          f"{res.std_angle:.2f} deg over {len(res.angles)} snapshots")
    return 0


def _bulk_params(config: SimConfig, defaults: dict) -> dict:
    params = dict(defaults)
    params["shape"] = dict(config.shape)
    params.update({
        "young": float(config.material["young_modulus"]),
        "poisson": float(config.material["poisson"]),
        "density": float(config.material["density"]),
        "restitution": float(config.material["restitution_pp"]),
        "friction_pp": float(config.material["friction_pp"]),
        "friction_pw": float(config.material["friction_pw"]),
    })
    for key in ("cylinder_diameter", "cylinder_height"):
        if key in config.geometry:
            params[key] = float(config.geometry[key])
    if config.run["dt"]:
        params["dt"] = float(config.run["dt"])
    return params


def cmd_validate(args) -> int:
    from . import acceptance
    results = acceptance.run_fast_suite(verbose=True)
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="revdem",
        description="DEM for rigid particles bounded by surfaces of revolution")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, needs_config=True):
        p = sub.add_parser(name, help=help_text)
        if needs_config:
            p.add_argument("config", help="YAML config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--deterministic", action="store_true")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--verbose", action="store_true")
        p.set_defaults(fn=fn)
        return p

    add("props", cmd_props, "mass properties by quadrature and voxel methods")
    add("sdf", cmd_sdf, "dump the signed distance field debug table")
    p = add("impact-wall", cmd_impact_wall, "tablet-wall impact angle sweep")
    p.add_argument("--theta-list", default=None,
                   help="comma-separated impact angles in degrees")
    add("impact-pair", cmd_impact_pair, "ellipsoid pair impact traces")
    add("pack", cmd_pack, "granular packing in a cylindrical container")
    add("drum", cmd_drum, "rotating drum and dynamic angle of repose")
    add("validate", cmd_validate, "run the fast acceptance suite",
        needs_config=False)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
