"""Snapshot and result serialization: plain CSV, diffable, reproducible.

Snapshots carry the full per-particle kinematic state with 17 significant
digits so that deterministic replays produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .engine import Snapshot

SNAPSHOT_HEADER = "time,id,x,y,z,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz"
_FMT = "%.17g"


def write_snapshot(snap: Snapshot, path) -> None:
    lines = [SNAPSHOT_HEADER]
    for k in range(len(snap.ids)):
        vals = [snap.time, float(snap.ids[k]), *snap.position[k],
                *snap.orientation[k], *snap.velocity[k],
                *snap.angular_velocity[k]]
        fields = [_FMT % v for v in vals]
        fields[1] = str(int(snap.ids[k]))
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshot_series(snaps: list[Snapshot], directory) -> list[Path]:
    """One CSV per snapshot plus an index file listing them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    index_lines = ["index,time,file"]
    for k, snap in enumerate(snaps):
        name = f"snapshot_{k:06d}.csv"
        write_snapshot(snap, directory / name)
        paths.append(directory / name)
        index_lines.append(f"{k},{_FMT % snap.time},{name}")
    (directory / "index.csv").write_text("\n".join(index_lines) + "\n")
    return paths


def read_snapshot(path) -> Snapshot:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Snapshot(
        time=float(raw[0, 0]) if len(raw) else 0.0, step=0,
        ids=raw[:, 1].astype(np.int64), position=raw[:, 2:5],
        orientation=raw[:, 5:9], velocity=raw[:, 9:12],
        angular_velocity=raw[:, 12:15])


def write_table(path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_FMT % float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
