"""Core domain types: trajectories, grids, moments, frames, weights, and the
signed-permutation algebra that describes their residual gauge freedom.

All types are immutable after construction and safe to share across workers.
Weights are dimensionless: rows of a local frame matrix carry inverse-velocity
scale, so multiplying them into a velocity cancels the units.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

MAX_DIM = 6  # full fourth-moment tensors are stored densely; keep N small


class DimensionMismatchError(ValueError):
    """Operands have incompatible channel counts."""


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled multichannel measurement time series.

    samples has shape (n, N); dt is the sample interval in seconds.
    """

    samples: np.ndarray
    dt: float
    channel_names: tuple[str, ...] = ()

    def __post_init__(self):
        samples = _as_float_array(self.samples, "samples")
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2:
            raise ValueError("samples must be a (n_samples, n_channels) array")
        if samples.shape[0] < 3:
            raise ValueError("need at least 3 samples")
        if samples.shape[1] < 1:
            raise ValueError("need at least 1 channel")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        names = tuple(self.channel_names) or tuple(
            f"ch{i + 1}" for i in range(samples.shape[1])
        )
        if len(names) != samples.shape[1]:
            raise ValueError("channel_names length does not match sample dimension")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_names", names)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def channel(self, i: int) -> np.ndarray:
        return self.samples[:, i]


@dataclass(frozen=True)
class VelocitySeries:
    """Per-sample velocity estimates aligned index-for-index with a Trajectory.

    Boundary samples that the difference scheme cannot cover are masked invalid
    and excluded from every downstream statistic.
    """

    values: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.valid_mask, dtype=bool)
        if values.ndim != 2:
            raise ValueError("values must be (n_samples, n_channels)")
        if mask.shape != (values.shape[0],):
            raise ValueError("valid_mask must be one flag per sample")
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("valid velocity samples must be finite")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BinGrid:
    """Axis-aligned equal-width partition of measurement space.

    edges: one strictly increasing edge array per axis, spanning the data
    range; the last bin includes its upper edge.  members maps multi-index
    tuples to the sample indices that fell in the bin.
    """

    edges: tuple[np.ndarray, ...]
    members: Mapping[tuple[int, ...], np.ndarray]
    min_count: int

    def __post_init__(self):
        edges = tuple(np.asarray(e, dtype=float) for e in self.edges)
        for e in edges:
            if e.ndim != 1 or len(e) < 2 or not np.all(np.diff(e) > 0):
                raise ValueError("each axis needs >= 2 strictly increasing edges")
            e.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "members", dict(self.members))

    @property
    def dim(self) -> int:
        return len(self.edges)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.edges)

    def center(self, idx: tuple[int, ...]) -> np.ndarray:
        return np.array(
            [0.5 * (self.edges[a][i] + self.edges[a][i + 1]) for a, i in enumerate(idx)]
        )

    def occupied(self) -> list[tuple[int, ...]]:
        return [k for k, v in self.members.items() if len(v) >= self.min_count]

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Multi-index of each point, or -1 per axis when out of range.

        Lower bins are half-open; a point exactly on the top edge lands in
        the last bin.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError("point dimension does not match grid")
        out = np.empty(pts.shape, dtype=np.int64)
        for a, e in enumerate(self.edges):
            idx = np.searchsorted(e, pts[:, a], side="right") - 1
            idx[pts[:, a] == e[-1]] = len(e) - 2  # inclusive upper edge
            oob = (pts[:, a] < e[0]) | (pts[:, a] > e[-1])
            idx[oob] = -1
            out[:, a] = idx
        return out

    def step_sizes(self) -> np.ndarray:
        return np.array([e[1] - e[0] for e in self.edges])


@dataclass(frozen=True)
class LocalMoments:
    """Per-bin velocity statistics: mean, centered second and fourth moments."""

    count: int
    mean_vel: np.ndarray
    c2: np.ndarray
    c4: np.ndarray

    def __post_init__(self):
        mean = _as_float_array(self.mean_vel, "mean_vel")
        c2 = _as_float_array(self.c2, "c2")
        c4 = _as_float_array(self.c4, "c4")
        n = mean.shape[0]
        if c2.shape != (n, n) or c4.shape != (n, n, n, n):
            raise ValueError("moment shapes inconsistent with dimension")
        for a in (mean, c2, c4):
            a.setflags(write=False)
        object.__setattr__(self, "mean_vel", mean)
        object.__setattr__(self, "c2", c2)
        object.__setattr__(self, "c4", c4)

    @property
    def dim(self) -> int:
        return self.mean_vel.shape[0]


@dataclass(frozen=True)
class LocalFrame:
    """Per-bin matrix m whitening c2 and diagonalizing the contracted fourth
    moment; v holds the columns of m^-1 (the local basis vectors); d is the
    diagnostic diagonal, stored descending.
    """

    m: np.ndarray
    v: np.ndarray
    d: np.ndarray
    degenerate_flag: bool = False

    def __post_init__(self):
        m = _as_float_array(self.m, "m")
        v = _as_float_array(self.v, "v")
        d = _as_float_array(self.d, "d")
        n = m.shape[0]
        if m.shape != (n, n) or v.shape != (n, n) or d.shape != (n,):
            raise ValueError("frame shapes inconsistent")
        for a in (m, v, d):
            a.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "d", d)

    @property
    def dim(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True)
class FrameField:
    """Globally sign/permutation-consistent frames over the occupied bins of a
    grid.  Disconnected occupancy components are aligned independently;
    component_ids records which component each bin belongs to.
    """

    grid: BinGrid
    frames: Mapping[tuple[int, ...], LocalFrame]
    component_ids: Mapping[tuple[int, ...], int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "frames", dict(self.frames))
        object.__setattr__(self, "component_ids", dict(self.component_ids))
        if not self.frames:
            raise ValueError("frame field has no occupied bins")

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def n_components(self) -> int:
        return len(set(self.component_ids.values())) if self.component_ids else 1


@dataclass(frozen=True)
class WeightSeries:
    """The inner time series: dimensionless per-sample weights.

    fallback_mask marks samples served by a neighboring occupied bin instead
    of their own.
    """

    values: np.ndarray
    valid_mask: np.ndarray
    dt: float = 1.0
    fallback_mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.valid_mask, dtype=bool)
        if values.ndim != 2:
            raise ValueError("values must be (n_samples, n_channels)")
        if mask.shape != (values.shape[0],):
            raise ValueError("valid_mask must be one flag per sample")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("valid weights must be finite")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid_mask", mask)
        if self.fallback_mask is not None:
            fb = np.asarray(self.fallback_mask, dtype=bool)
            fb.setflags(write=False)
            object.__setattr__(self, "fallback_mask", fb)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SignedPermutation:
    """Permutation composed with per-channel reflections (0-based).

    Applying p to a vector w gives out[j] = signs[j] * w[perm[j]].
    """

    perm: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        signs = np.asarray(self.signs, dtype=np.int64)
        n = perm.shape[0]
        if sorted(perm.tolist()) != list(range(n)):
            raise ValueError("perm must be a permutation of 0..N-1")
        if signs.shape != (n,) or not np.all(np.abs(signs) == 1):
            raise ValueError("signs must be +-1 per channel")
        perm.setflags(write=False)
        signs.setflags(write=False)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "signs", signs)

    @property
    def dim(self) -> int:
        return self.perm.shape[0]

    @classmethod
    def identity(cls, n: int) -> "SignedPermutation":
        return cls(np.arange(n), np.ones(n, dtype=np.int64))

    def is_identity(self) -> bool:
        return bool(
            np.all(self.perm == np.arange(self.dim)) and np.all(self.signs == 1)
        )

    def matrix(self) -> np.ndarray:
        p = np.zeros((self.dim, self.dim))
        p[np.arange(self.dim), self.perm] = self.signs
        return p

    def inverse(self) -> "SignedPermutation":
        inv_perm = np.argsort(self.perm)
        return SignedPermutation(inv_perm, self.signs[inv_perm])

    def apply_to_array(self, values: np.ndarray) -> np.ndarray:
        """Apply along the last axis."""
        if values.shape[-1] != self.dim:
            raise DimensionMismatchError("array dimension does not match")
        return values[..., self.perm] * self.signs

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignedPermutation):
            return NotImplemented
        return bool(
            np.all(self.perm == other.perm) and np.all(self.signs == other.signs)
        )

    def __hash__(self):
        return hash((tuple(self.perm.tolist()), tuple(self.signs.tolist())))


def apply_signed_permutation(p: SignedPermutation, w: WeightSeries) -> WeightSeries:
    """Relabel/reflect the channels of a weight series; the validity mask is
    untouched."""
    if p.dim != w.dim:
        raise DimensionMismatchError(
            f"permutation dim {p.dim} != weight dim {w.dim}"
        )
    return WeightSeries(
        p.apply_to_array(w.values), w.valid_mask, dt=w.dt, fallback_mask=w.fallback_mask
    )


def compose_signed_permutations(
    a: SignedPermutation, b: SignedPermutation
) -> SignedPermutation:
    """Return c with apply(c, w) == apply(a, apply(b, w))."""
    if a.dim != b.dim:
        raise DimensionMismatchError("cannot compose different dimensions")
    return SignedPermutation(b.perm[a.perm], a.signs * b.signs[a.perm])


def all_signed_permutations(n: int) -> Iterator[SignedPermutation]:
    """Every element of the signed-permutation group on n channels (2^n n!)."""
    for perm in itertools.permutations(range(n)):
        for signs in itertools.product((1, -1), repeat=n):
            yield SignedPermutation(np.array(perm), np.array(signs))
