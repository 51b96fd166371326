"""JSON serialization for grids, moments, and frame fields.

Floats go through Python's shortest round-trip repr, so a load after a dump
reproduces every value bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import BinGrid, FrameField, LocalFrame, LocalMoments

SCHEMA_VERSION = 1


def _key(idx: tuple[int, ...]) -> str:
    return ",".join(str(i) for i in idx)


def _unkey(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(","))


def grid_to_dict(grid: BinGrid, include_members: bool = True) -> dict:
    d = {
        "schema": SCHEMA_VERSION,
        "edges": [e.tolist() for e in grid.edges],
        "min_count": grid.min_count,
    }
    if include_members:
        d["members"] = {_key(k): v.tolist() for k, v in grid.members.items()}
    return d


def grid_from_dict(d: dict) -> BinGrid:
    members = {
        _unkey(k): np.asarray(v, dtype=np.int64)
        for k, v in d.get("members", {}).items()
    }
    return BinGrid(
        tuple(np.asarray(e) for e in d["edges"]), members, int(d["min_count"])
    )


def moments_to_dict(grid: BinGrid, moments: dict) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "grid": grid_to_dict(grid, include_members=False),
        "bins": {
            _key(k): {
                "count": m.count,
                "mean_vel": m.mean_vel.tolist(),
                "c2": m.c2.tolist(),
                "c4": m.c4.tolist(),
            }
            for k, m in moments.items()
        },
    }


def moments_from_dict(d: dict) -> tuple[BinGrid, dict]:
    grid = grid_from_dict(d["grid"])
    moments = {
        _unkey(k): LocalMoments(
            int(b["count"]),
            np.asarray(b["mean_vel"]),
            np.asarray(b["c2"]),
            np.asarray(b["c4"]),
        )
        for k, b in d["bins"].items()
    }
    return grid, moments


def field_to_dict(field: FrameField) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "grid": grid_to_dict(field.grid, include_members=True),
        "frames": {
            _key(k): {
                "m": f.m.tolist(),
                "d": f.d.tolist(),
                "degenerate": bool(f.degenerate_flag),
            }
            for k, f in field.frames.items()
        },
        "component_ids": {_key(k): c for k, c in field.component_ids.items()},
    }


def field_from_dict(d: dict) -> FrameField:
    grid = grid_from_dict(d["grid"])
    frames = {}
    for k, f in d["frames"].items():
        m = np.asarray(f["m"])
        frames[_unkey(k)] = LocalFrame(
            m, np.linalg.inv(m), np.asarray(f["d"]), bool(f["degenerate"])
        )
    comp = {_unkey(k): int(c) for k, c in d.get("component_ids", {}).items()}
    return FrameField(grid, frames, comp)


def json_default(o):
    """Coerce numpy scalars/arrays so reports serialize cleanly."""
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def dump_json(obj: dict, path) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, separators=(",", ":"), default=json_default)
        + "\n"
    )


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())
