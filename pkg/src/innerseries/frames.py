"""Solve, canonicalize, and globally align local velocity-moment frames.

The per-bin solve is closed form, in two stages.  Stage 1 whitens the
second-order moment: c2 = E L E^T, W = L^{-1/2} E^T, so W c2 W^T = I.  Stage 2
contracts the fourth moment, T_kl = sum_mn (c2^-1)_mn c4_klmn, forms the
symmetric S = W T W^T, and eigendecomposes S = O D O^T.  For any M = O^T W the
whitening condition holds, and the M-transformed fourth-order contraction
equals O^T S O, so choosing O's columns as S's eigenvectors makes it diagonal.
The remaining freedom is exactly a signed permutation of rows (plus arbitrary
rotations inside degenerate eigenspaces of D).
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from .model import (
    BinGrid,
    FrameField,
    LocalFrame,
    LocalMoments,
    SignedPermutation,
)

DEFAULT_GAP_TOL = 1e-3
DEFAULT_COND_TOL = 1e-10


class FrameSolveError(ValueError):
    pass


def solve_frame(
    moments: LocalMoments,
    gap_tol: float = DEFAULT_GAP_TOL,
    cond_tol: float = DEFAULT_COND_TOL,
) -> LocalFrame:
    """Closed-form local frame from one bin's velocity moments.

    Returns M with M c2 M^T = I and the M-transformed fourth-order contraction
    diagonal (= diag(d), sorted descending).  degenerate_flag is set when two
    adjacent d values are closer than gap_tol * max|d|.
    """
    c2 = moments.c2
    c4 = moments.c4
    n = moments.dim
    evals, evecs = np.linalg.eigh(c2)
    if evals[0] <= cond_tol * evals[-1] or evals[-1] <= 0:
        raise FrameSolveError(
            f"c2 ill-conditioned: eigenvalues {evals[0]:.3e} .. {evals[-1]:.3e}"
        )
    w = evecs.T / np.sqrt(evals)[:, None]
    c2_inv = (evecs / evals) @ evecs.T
    t = np.einsum("mn,klmn->kl", c2_inv, c4)
    s = w @ t @ w.T
    s = 0.5 * (s + s.T)
    d_asc, o = np.linalg.eigh(s)
    order = np.argsort(d_asc)[::-1]
    d = d_asc[order]
    m = o[:, order].T @ w
    v = np.linalg.inv(m)
    degenerate = False
    if n > 1:
        scale = np.max(np.abs(d))
        gaps = np.abs(np.diff(d))
        degenerate = bool(np.any(gaps < gap_tol * max(scale, np.finfo(float).tiny)))
    return LocalFrame(m, v, d, degenerate)


def frame_residuals(frame: LocalFrame, moments: LocalMoments) -> tuple[float, float]:
    """(max |M c2 M^T - I|, max off-diagonal of the transformed fourth-order
    contraction, relative to max |d|)."""
    m = frame.m
    white = m @ moments.c2 @ m.T - np.eye(frame.dim)
    r1 = float(np.max(np.abs(white)))
    c2_inv = np.linalg.inv(moments.c2)
    t = np.einsum("mn,klmn->kl", c2_inv, moments.c4)
    contr = m @ t @ m.T
    off = contr - np.diag(np.diag(contr))
    scale = max(float(np.max(np.abs(frame.d))), np.finfo(float).tiny)
    r2 = float(np.max(np.abs(off))) / scale
    return r1, r2


def apply_signed_permutation_to_frame(
    p: SignedPermutation, frame: LocalFrame
) -> LocalFrame:
    """Row-relabel/reflect a frame; d follows its row, v is recomputed."""
    m = p.apply_to_array(frame.m.T).T  # permutes rows: row j <- signs[j]*row perm[j]
    d = frame.d[p.perm]
    return LocalFrame(m, np.linalg.inv(m), d, frame.degenerate_flag)


def canonicalize_frame(frame: LocalFrame) -> LocalFrame:
    """Fix the signed-permutation gauge: rows ordered by descending d (ties by
    lexicographic sign-fixed row comparison), each row's largest-magnitude
    entry made positive.  Idempotent and constant on signed-permutation
    orbits."""
    m = frame.m.copy()
    signs = np.ones(frame.dim)
    for i in range(frame.dim):
        pivot = m[i, np.argmax(np.abs(m[i]))]
        if pivot < 0:
            signs[i] = -1.0
    m = m * signs[:, None]
    keys = [(-frame.d[i], tuple(m[i])) for i in range(frame.dim)]
    order = sorted(range(frame.dim), key=lambda i: keys[i])
    m = m[order]
    d = frame.d[order]
    return LocalFrame(m, np.linalg.inv(m), d, frame.degenerate_flag)


def nearest_signed_permutation(r: np.ndarray) -> tuple[SignedPermutation, float]:
    """Signed permutation (as an operator on channels) whose matrix is nearest
    to r in Frobenius norm; returns it with the residual ||r - P||_F.

    Exhaustive over the group for N <= 4; greedy largest-entry assignment
    beyond.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    absr = np.abs(r)
    if n <= 4:
        best_perm, best_score = None, -np.inf
        for perm in itertools.permutations(range(n)):
            score = sum(absr[j, perm[j]] for j in range(n))
            if score > best_score:
                best_score, best_perm = score, perm
        perm = np.array(best_perm)
    else:
        perm = np.full(n, -1)
        work = absr.copy()
        for _ in range(n):
            j, k = np.unravel_index(np.argmax(work), work.shape)
            perm[j] = k
            work[j, :] = -np.inf
            work[:, k] = -np.inf
    signs = np.where(r[np.arange(n), perm] >= 0, 1, -1)
    p = SignedPermutation(perm, signs)
    residual = float(np.linalg.norm(r - p.matrix()))
    return p, residual


def _face_neighbors(idx: tuple[int, ...], shape: tuple[int, ...]):
    for a in range(len(idx)):
        for step in (-1, 1):
            j = idx[a] + step
            if 0 <= j < shape[a]:
                yield idx[:a] + (j,) + idx[a + 1 :]


def align_frame_field(
    grid: BinGrid, frames: dict[tuple[int, ...], LocalFrame]
) -> FrameField:
    """Make per-bin frames sign/permutation consistent across the grid.

    Breadth-first over the occupied-bin face adjacency starting from the most
    populated bin; each newly visited bin is corrected by the signed
    permutation minimizing ||P M_new M_ref^-1 - I||_F against an already
    aligned neighbor (non-degenerate reference preferred).  Disconnected
    components are aligned independently and tagged with component ids.
    """
    if not frames:
        raise ValueError("no frames to align")
    shape = grid.shape
    counts = {k: len(grid.members.get(k, ())) for k in frames}
    unvisited = set(frames)
    aligned: dict[tuple[int, ...], LocalFrame] = {}
    component_ids: dict[tuple[int, ...], int] = {}
    comp = 0
    while unvisited:
        root = min(unvisited, key=lambda k: (-counts[k], k))
        aligned[root] = canonicalize_frame(frames[root])
        component_ids[root] = comp
        unvisited.discard(root)
        queue = deque([root])
        while queue:
            cur = queue.popleft()
            for nb in _face_neighbors(cur, shape):
                if nb not in unvisited:
                    continue
                refs = [
                    k
                    for k in _face_neighbors(nb, shape)
                    if k in aligned and component_ids[k] == comp
                ]
                # prefer non-degenerate, then most populated, as the anchor
                ref = min(
                    refs,
                    key=lambda k: (aligned[k].degenerate_flag, -counts[k], k),
                )
                r = frames[nb].m @ aligned[ref].v  # v == m^-1
                q, _ = nearest_signed_permutation(r)
                aligned[nb] = apply_signed_permutation_to_frame(
                    q.inverse(), frames[nb]
                )
                component_ids[nb] = comp
                unvisited.discard(nb)
                queue.append(nb)
        comp += 1
    return FrameField(grid, aligned, component_ids)


def check_transform_law(
    m_x: np.ndarray, m_xprime: np.ndarray, jacobian: np.ndarray
) -> tuple[float, SignedPermutation]:
    """Check the covariant transformation law M' = P M (dx/dx').

    jacobian is dx/dx'.  Returns the Frobenius residual of M' (M J)^-1 from
    its nearest signed permutation, and that permutation.
    """
    m_x = np.asarray(m_x, dtype=float)
    m_xprime = np.asarray(m_xprime, dtype=float)
    jac = np.asarray(jacobian, dtype=float)
    if np.linalg.matrix_rank(jac) < jac.shape[0]:
        raise ValueError("singular jacobian")
    r = m_xprime @ np.linalg.inv(m_x @ jac)
    p, residual = nearest_signed_permutation(r)
    return residual, p
