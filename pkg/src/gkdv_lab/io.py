"""On-disk formats: field snapshots, trajectory directories, run metadata.

A field snapshot is a two-column CSV ("x,value", 17 significant digits)
with a JSON sidecar {n, length, t}.  A trajectory directory holds
meta.json, times.csv, conserved.csv and numbered state snapshots.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .flows import Trajectory
from .grid import Field, GridSpec


def write_field_snapshot(f: Field, path: str | Path, t: float = 0.0) -> None:
    path = Path(path)
    lines = ["x,value"]
    for x, v in zip(f.grid.x, f.values):
        lines.append(f"{x:.17g},{v:.17g}")
    path.write_text("\n".join(lines) + "\n")
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps({"n": f.grid.n, "length": f.grid.length, "t": t}) + "\n")


def read_field_snapshot(path: str | Path) -> tuple[Field, float]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    rows = path.read_text().strip().split("\n")[1:]
    values = np.array([float(r.split(",")[1]) for r in rows])
    grid = GridSpec(n=int(sidecar["n"]), length=float(sidecar["length"]))
    return Field(grid, values), float(sidecar["t"])


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_trajectory(traj: Trajectory, directory: str | Path, stride: int = 1) -> None:
    """Persist a trajectory: meta.json, times.csv, conserved.csv, snapshots."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {k: v for k, v in traj.meta.items() if k not in ("conserved", "log", "extras")}
    meta["grid"] = {"n": traj.grid.n, "length": traj.grid.length}
    (directory / "meta.json").write_text(json.dumps(_jsonable(meta), indent=2) + "\n")

    times_lines = ["index,t"]
    for i, t in enumerate(traj.times):
        times_lines.append(f"{i},{t:.17g}")
    (directory / "times.csv").write_text("\n".join(times_lines) + "\n")

    cons = traj.meta.get("conserved")
    if cons is not None:
        lines = ["t,mass,energy"]
        for t, m, e in zip(cons["t"], cons["mass"], cons["energy"]):
            lines.append(f"{t:.17g},{m:.17g},{e:.17g}")
        (directory / "conserved.csv").write_text("\n".join(lines) + "\n")

    for i in range(0, len(traj), stride):
        write_field_snapshot(traj.field(i), directory / f"state_{i:06d}.csv", float(traj.times[i]))


def read_trajectory(directory: str | Path) -> Trajectory:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    grid = GridSpec(**meta.pop("grid"))
    snap_paths = sorted(directory.glob("state_*.csv"))
    if not snap_paths:
        raise FileNotFoundError(f"no state snapshots in {directory}")
    times, states = [], []
    for p in snap_paths:
        f, t = read_field_snapshot(p)
        times.append(t)
        states.append(f.values)
    cons_path = directory / "conserved.csv"
    if cons_path.exists():
        rows = cons_path.read_text().strip().split("\n")[1:]
        cons = np.array([[float(v) for v in r.split(",")] for r in rows])
        # keep only entries matching the stored snapshots
        mask = np.isin(np.round(cons[:, 0], 12), np.round(times, 12))
        meta["conserved"] = {
            "t": cons[mask, 0],
            "mass": cons[mask, 1],
            "energy": cons[mask, 2],
        }
    return Trajectory(grid, np.asarray(times), np.asarray(states), meta)
