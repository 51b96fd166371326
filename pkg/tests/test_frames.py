import numpy as np
import pytest

from innerseries.estimate import accumulate_moments, build_grid, estimate_velocity
from innerseries.frames import (
    FrameSolveError,
    align_frame_field,
    apply_signed_permutation_to_frame,
    canonicalize_frame,
    check_transform_law,
    frame_residuals,
    nearest_signed_permutation,
    solve_frame,
)
from innerseries.model import (
    BinGrid,
    LocalFrame,
    LocalMoments,
    SignedPermutation,
    all_signed_permutations,
)


def moments_from_samples(v):
    """Direct-average oracle for per-bin moments."""
    v = np.asarray(v, dtype=float)
    mean = v.mean(axis=0)
    d = v - mean
    c2 = d.T @ d / len(v)
    c4 = np.einsum("ti,tj,tk,tl->ijkl", d, d, d, d) / len(v)
    return LocalMoments(len(v), mean, c2, c4)


def diag_only_c4(diag):
    n = len(diag)
    c4 = np.zeros((n, n, n, n))
    for i, t in enumerate(diag):
        c4[i, i, i, i] = t
    return c4


class TestSolveFrame:
    def test_identity_c2_diagonal_t(self):
        n = 3
        diag = [5.0, 3.0, 1.0]
        mom = LocalMoments(100, np.zeros(n), np.eye(n), diag_only_c4(diag))
        frame = solve_frame(mom)
        # m must be a signed permutation of the identity
        _, residual = nearest_signed_permutation(frame.m)
        assert residual < 1e-12
        np.testing.assert_allclose(frame.d, sorted(diag, reverse=True), atol=1e-12)

    def test_1d_analytic_form(self):
        for c11 in (0.75, 0.19, 1.0):
            mom = LocalMoments(
                100, np.zeros(1), np.array([[c11]]), np.array([[[[3 * c11**2]]]])
            )
            frame = solve_frame(mom)
            assert abs(frame.m[0, 0]) == pytest.approx(1.0 / np.sqrt(c11))
            assert abs(frame.v[0, 0]) == pytest.approx(np.sqrt(c11))

    def test_defining_conditions_hold(self):
        rng = np.random.default_rng(0)
        v = np.stack(
            [rng.laplace(size=5000), rng.uniform(-1, 1, size=5000)], axis=1
        )
        mom = moments_from_samples(v @ rng.standard_normal((2, 2)))
        frame = solve_frame(mom)
        r1, r2 = frame_residuals(frame, mom)
        assert r1 < 1e-10
        assert r2 < 1e-8

    def test_scaled_independent_channels(self):
        # transform-samples-and-recheck oracle: M of independent channels
        # scaled by (s1, s2) is diag(1/s1, 1/s2) up to signed permutation,
        # and re-deriving moments in M-transformed coordinates gives identity
        # second moment and diagonal contraction
        rng = np.random.default_rng(1)
        s1, s2 = 2.5, 0.7
        v = np.stack(
            [s1 * rng.laplace(size=20000), s2 * rng.uniform(-1, 1, size=20000)],
            axis=1,
        )
        mom = moments_from_samples(v)
        frame = solve_frame(mom)
        target = np.diag(1.0 / v.std(axis=0))
        r = frame.m @ np.linalg.inv(target)
        _, residual = nearest_signed_permutation(r)
        assert residual < 0.1
        w = v @ frame.m.T
        mom_w = moments_from_samples(w)
        np.testing.assert_allclose(mom_w.c2, np.eye(2), atol=1e-10)
        t = np.einsum("mn,klmn->kl", np.linalg.inv(mom_w.c2), mom_w.c4)
        off = t - np.diag(np.diag(t))
        assert np.max(np.abs(off)) < 1e-6 * np.max(np.abs(t))

    def test_ill_conditioned_rejected(self):
        mom = LocalMoments(
            100, np.zeros(2), np.diag([1.0, 1e-14]), np.zeros((2, 2, 2, 2))
        )
        with pytest.raises(FrameSolveError):
            solve_frame(mom)

    def test_degenerate_flag(self):
        mom = LocalMoments(100, np.zeros(2), np.eye(2), diag_only_c4([3.0, 3.0001]))
        assert solve_frame(mom, gap_tol=1e-3).degenerate_flag
        mom2 = LocalMoments(100, np.zeros(2), np.eye(2), diag_only_c4([3.0, 1.0]))
        assert not solve_frame(mom2, gap_tol=1e-3).degenerate_flag

    def test_uniqueness_up_to_signed_permutation(self):
        # re-solving after an invertible linear change of coordinates gives
        # the same canonical frame (mapped back) within tight tolerance
        rng = np.random.default_rng(2)
        v = np.stack(
            [rng.laplace(size=8000), rng.uniform(-1, 1, size=8000)], axis=1
        )
        mom = moments_from_samples(v)
        frame = solve_frame(mom)
        lin = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        mom_t = moments_from_samples(v @ lin.T)
        frame_t = solve_frame(mom_t)
        back = LocalFrame(
            frame_t.m @ lin,
            np.linalg.inv(frame_t.m @ lin),
            frame_t.d,
            frame_t.degenerate_flag,
        )
        ca = canonicalize_frame(frame)
        cb = canonicalize_frame(back)
        np.testing.assert_allclose(ca.m, cb.m, atol=1e-8)


class TestCanonicalize:
    def _random_frame(self, rng, n=3):
        m = rng.standard_normal((n, n)) + 2 * np.eye(n)
        d = np.sort(rng.random(n) + 0.5)[::-1]
        return LocalFrame(m, np.linalg.inv(m), d)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        f = self._random_frame(rng)
        c1 = canonicalize_frame(f)
        c2 = canonicalize_frame(c1)
        np.testing.assert_array_equal(c1.m, c2.m)
        np.testing.assert_array_equal(c1.d, c2.d)

    def test_row_negation_collapses(self):
        rng = np.random.default_rng(1)
        f = self._random_frame(rng)
        m2 = f.m.copy()
        m2[1] *= -1
        f2 = LocalFrame(m2, np.linalg.inv(m2), f.d)
        np.testing.assert_allclose(
            canonicalize_frame(f).m, canonicalize_frame(f2).m, atol=1e-14
        )

    def test_orbit_collapse_exhaustive_n3(self):
        rng = np.random.default_rng(2)
        f = self._random_frame(rng, n=3)
        ref = canonicalize_frame(f)
        for p in all_signed_permutations(3):
            g = apply_signed_permutation_to_frame(p, f)
            c = canonicalize_frame(g)
            np.testing.assert_allclose(c.m, ref.m, atol=1e-12)
            np.testing.assert_allclose(c.d, ref.d, atol=1e-12)


class TestNearestSignedPermutation:
    def test_exact_recovery(self):
        rng = np.random.default_rng(0)
        for p in all_signed_permutations(3):
            q, residual = nearest_signed_permutation(p.matrix())
            assert q == p
            assert residual < 1e-14

    def test_noisy_recovery(self):
        rng = np.random.default_rng(1)
        p = SignedPermutation([2, 0, 1], [1, -1, 1])
        r = p.matrix() + 0.05 * rng.standard_normal((3, 3))
        q, residual = nearest_signed_permutation(r)
        assert q == p
        assert residual < 0.5

    def test_greedy_path_n5(self):
        rng = np.random.default_rng(2)
        perm = np.array([4, 2, 0, 1, 3])
        signs = np.array([1, -1, 1, 1, -1])
        p = SignedPermutation(perm, signs)
        q, _ = nearest_signed_permutation(p.matrix() + 0.01 * rng.standard_normal((5, 5)))
        assert q == p


def _grid_with_counts(shape, counts):
    edges = tuple(np.linspace(0, 1, s + 1) for s in shape)
    members = {k: np.arange(c) for k, c in counts.items()}
    return BinGrid(edges, members, 1)


class TestAlignFrameField:
    def _base_frame(self, rng, n=2):
        m = rng.standard_normal((n, n)) + 2 * np.eye(n)
        d = np.array([3.0, 1.0])[:n]
        return LocalFrame(m, np.linalg.inv(m), d)

    def test_shared_frame_identity_corrections(self):
        rng = np.random.default_rng(0)
        base = canonicalize_frame(self._base_frame(rng))
        counts = {(i, j): 10 for i in range(3) for j in range(3)}
        grid = _grid_with_counts((3, 3), counts)
        frames = {k: base for k in counts}
        field = align_frame_field(grid, frames)
        for f in field.frames.values():
            np.testing.assert_allclose(f.m, base.m, atol=1e-12)
        assert field.n_components == 1

    def test_row_swap_corrected(self):
        rng = np.random.default_rng(1)
        base = canonicalize_frame(self._base_frame(rng))
        swapped = apply_signed_permutation_to_frame(
            SignedPermutation([1, 0], [1, 1]), base
        )
        grid = _grid_with_counts((2,), {(0,): 20, (1,): 10})
        field = align_frame_field(grid, {(0,): base, (1,): swapped})
        np.testing.assert_allclose(field.frames[(1,)].m, base.m, atol=1e-12)

    def test_injection_recovery(self):
        # smooth synthetic field + random per-bin signed permutations:
        # alignment recovers the original up to one global signed permutation
        rng = np.random.default_rng(2)
        shape = (5, 5)
        true_frames = {}
        for i in range(shape[0]):
            for j in range(shape[1]):
                theta = 0.08 * (i + 2 * j)  # slowly varying rotation
                rot = np.array(
                    [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
                )
                m = rot @ np.diag([1.5, 0.8])
                true_frames[(i, j)] = LocalFrame(
                    m, np.linalg.inv(m), np.array([3.0, 1.0])
                )
        group = list(all_signed_permutations(2))
        scrambled = {
            k: apply_signed_permutation_to_frame(group[rng.integers(len(group))], f)
            for k, f in true_frames.items()
        }
        counts = {k: 10 + rng.integers(5) for k in true_frames}
        grid = _grid_with_counts(shape, counts)
        field = align_frame_field(grid, scrambled)
        # the residual of each aligned frame vs truth must share one global P
        globals_seen = set()
        for k, f in field.frames.items():
            r = f.m @ true_frames[k].v
            p, residual = nearest_signed_permutation(r)
            assert residual < 1e-8
            globals_seen.add(p)
        assert len(globals_seen) == 1

    def test_disconnected_components(self):
        rng = np.random.default_rng(3)
        base = canonicalize_frame(self._base_frame(rng))
        grid = _grid_with_counts((5,), {(0,): 10, (4,): 10})
        field = align_frame_field(grid, {(0,): base, (4,): base})
        assert field.n_components == 2


class TestCheckTransformLaw:
    def test_identity_p_zero_residual(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        jac = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        m_prime = m @ jac
        residual, p = check_transform_law(m, m_prime, jac)
        assert residual < 1e-12
        assert p.is_identity()

    def test_swap_reflect_recovered(self):
        rng = np.random.default_rng(1)
        m = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        jac = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        p_true = SignedPermutation([1, 0], [1, -1])
        m_prime = p_true.matrix() @ m @ jac
        residual, p = check_transform_law(m, m_prime, jac)
        assert residual < 1e-12
        assert p == p_true

    def test_singular_jacobian(self):
        with pytest.raises(ValueError):
            check_transform_law(np.eye(2), np.eye(2), np.zeros((2, 2)))

    def test_end_to_end_linear_map(self):
        from innerseries.experiments import linear_map_law_check

        worst, checked = linear_map_law_check(seed=0, n=40_000, bins=(5, 5))
        assert checked > 5
        assert worst < 1e-6
