"""Velocity estimation, state-space binning, and per-bin velocity moments."""

from __future__ import annotations

import numpy as np

from .model import MAX_DIM, BinGrid, LocalMoments, Trajectory, VelocitySeries


def default_min_count(dim: int) -> int:
    # fourth-moment estimates need several samples per tensor degree of freedom
    return 50 * dim * dim


def estimate_velocity(traj: Trajectory, scheme: str = "central") -> VelocitySeries:
    """Finite-difference velocity aligned with the trajectory.

    central: v[k] = (x[k+1]-x[k-1])/(2 dt), endpoints invalid.
    forward: v[k] = (x[k+1]-x[k])/dt, last sample invalid.
    """
    x = traj.samples
    n = traj.n_samples
    if n < 3:
        raise ValueError("need at least 3 samples")
    v = np.zeros_like(x)
    mask = np.ones(n, dtype=bool)
    if scheme == "central":
        v[1:-1] = (x[2:] - x[:-2]) / (2.0 * traj.dt)
        mask[0] = mask[-1] = False
    elif scheme == "forward":
        v[:-1] = (x[1:] - x[:-1]) / traj.dt
        mask[-1] = False
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return VelocitySeries(v, mask)


def build_grid(
    traj: Trajectory, bins_per_axis: list[int] | tuple[int, ...], min_count: int | None = None
) -> BinGrid:
    """Equal-width bin grid spanning the observed range per axis.

    Lower bins are half-open; the top edge is inclusive so every sample lands
    in exactly one bin.
    """
    counts = tuple(int(b) for b in bins_per_axis)
    if len(counts) != traj.dim:
        raise ValueError("need one bin count per axis")
    if any(c < 1 for c in counts):
        raise ValueError("bin counts must be >= 1")
    x = traj.samples
    edges = []
    for a, nb in enumerate(counts):
        lo, hi = x[:, a].min(), x[:, a].max()
        if not hi > lo:
            raise ValueError(f"axis {a} has zero range")
        edges.append(np.linspace(lo, hi, nb + 1))
    if min_count is None:
        min_count = default_min_count(traj.dim)

    grid = BinGrid(tuple(edges), {}, int(min_count))
    idx = grid.locate(x)  # all in range by construction
    flat = np.ravel_multi_index(idx.T, grid.shape)
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    boundaries = np.flatnonzero(np.diff(flat_sorted)) + 1
    groups = np.split(order, boundaries)
    members = {}
    for g in groups:
        multi = tuple(int(i) for i in idx[g[0]])
        members[multi] = np.sort(g)
    return BinGrid(tuple(edges), members, int(min_count))


def accumulate_moments(
    traj: Trajectory, vel: VelocitySeries, grid: BinGrid
) -> dict[tuple[int, ...], LocalMoments]:
    """Centered second- and fourth-order velocity moments per occupied bin.

    Member samples with invalid velocity are skipped; bins whose valid count
    drops below the grid's min_count are left out.  Accumulation iterates
    members in ascending sample order, so the result is independent of how
    the samples were originally ordered.
    """
    if len(vel) != traj.n_samples:
        raise ValueError("velocity series not aligned with trajectory")
    n_dim = traj.dim
    if n_dim > MAX_DIM:
        raise ValueError(f"dimension {n_dim} exceeds supported maximum {MAX_DIM}")
    out: dict[tuple[int, ...], LocalMoments] = {}
    for key, idx in grid.members.items():
        sel = idx[vel.valid_mask[idx]]
        if len(sel) < grid.min_count:
            continue
        v = vel.values[sel]
        mean = v.mean(axis=0)
        dvl = v - mean
        c2 = dvl.T @ dvl / len(sel)
        c2 = 0.5 * (c2 + c2.T)
        c4 = np.einsum("ti,tj,tk,tl->ijkl", dvl, dvl, dvl, dvl) / len(sel)
        out[key] = LocalMoments(len(sel), mean, c2, c4)
    if not out:
        raise ValueError("no occupied bins (min_count too high or data too sparse)")
    return out
