import itertools

import numpy as np
import pytest

from innerseries.estimate import accumulate_moments, build_grid, estimate_velocity
from innerseries.ingest import gen_sine
from innerseries.model import Trajectory, VelocitySeries


class TestEstimateVelocity:
    def test_linear_ramp_central(self):
        traj = Trajectory(np.array([0.0, 1.0, 2.0]), 1.0)
        vel = estimate_velocity(traj, "central")
        assert vel.values[1, 0] == 1.0
        assert not vel.valid_mask[0] and not vel.valid_mask[-1]
        assert vel.valid_mask[1]

    def test_constant_signal(self):
        traj = Trajectory(np.full((10, 2), 3.0), 0.5)
        vel = estimate_velocity(traj)
        assert np.all(vel.values[vel.valid_mask] == 0.0)

    def test_forward_scheme(self):
        traj = Trajectory(np.array([0.0, 2.0, 6.0]), 2.0)
        vel = estimate_velocity(traj, "forward")
        np.testing.assert_allclose(vel.values[:2, 0], [1.0, 2.0])
        assert not vel.valid_mask[-1]

    def test_sine_derivative_taylor_remainder(self):
        # central difference of sin(k*0.01) at k=100 is cos(1) + O(dt^2)
        traj = gen_sine(1.0, 0.01, 200)
        vel = estimate_velocity(traj, "central")
        assert abs(vel.values[100, 0] - np.cos(1.0)) < 1e-4

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            estimate_velocity(Trajectory(np.arange(5.0), 1.0), "backward")


class TestBuildGrid:
    def test_edges_and_halfopen_bins(self):
        traj = Trajectory(np.array([0.0, 0.25, 0.5, 0.75, 1.0]), 1.0)
        grid = build_grid(traj, [4], min_count=1)
        np.testing.assert_allclose(grid.edges[0], [0, 0.25, 0.5, 0.75, 1.0])
        # sample 0.5 goes in the third bin (index 2): lower bins half-open
        assert grid.locate(np.array([[0.5]]))[0, 0] == 2

    def test_max_in_last_bin(self):
        traj = Trajectory(np.linspace(0, 1, 10), 1.0)
        grid = build_grid(traj, [4], min_count=1)
        assert grid.locate(np.array([[1.0]]))[0, 0] == 3

    def test_every_sample_in_exactly_one_bin(self):
        rng = np.random.default_rng(0)
        traj = Trajectory(rng.random((5000, 2)), 1.0)
        grid = build_grid(traj, [7, 5], min_count=1)
        total = sum(len(v) for v in grid.members.values())
        assert total == 5000
        seen = np.concatenate([v for v in grid.members.values()])
        assert len(np.unique(seen)) == 5000

    def test_uniform_occupancy_binomial(self):
        # every bin count within 4 sigma of n/bins for uniform data
        rng = np.random.default_rng(1)
        n, nb = 500_000, 128
        traj = Trajectory(rng.random(n), 1.0)
        grid = build_grid(traj, [nb], min_count=1)
        p = 1.0 / nb
        sigma = np.sqrt(n * p * (1 - p))
        for v in grid.members.values():
            assert abs(len(v) - n * p) < 4 * sigma

    def test_zero_range_axis(self):
        with pytest.raises(ValueError):
            build_grid(Trajectory(np.ones(5), 1.0), [4])

    def test_out_of_range_locate(self):
        traj = Trajectory(np.linspace(0, 1, 10), 1.0)
        grid = build_grid(traj, [4], min_count=1)
        assert grid.locate(np.array([[2.0]]))[0, 0] == -1


def _single_bin_setup(velocities):
    velocities = np.atleast_2d(np.asarray(velocities, dtype=float))
    if velocities.shape[0] == 1:
        velocities = velocities.T
    n = velocities.shape[0]
    traj = Trajectory(np.linspace(0, 1, n)[:, None], 1.0)
    grid = build_grid(traj, [1], min_count=1)
    vel = VelocitySeries(velocities, np.ones(n, dtype=bool))
    return traj, vel, grid


class TestAccumulateMoments:
    def test_pm_one_velocities(self):
        traj, vel, grid = _single_bin_setup([1.0, -1.0, 1.0, -1.0])
        moments = accumulate_moments(traj, vel, grid)
        m = moments[(0,)]
        assert m.mean_vel[0] == 0.0
        assert m.c2[0, 0] == 1.0
        assert m.c4[0, 0, 0, 0] == 1.0

    def test_identical_velocities_zero_c2(self):
        traj, vel, grid = _single_bin_setup([2.0] * 6)
        m = accumulate_moments(traj, vel, grid)[(0,)]
        assert m.c2[0, 0] == 0.0

    def test_min_count_filters_bins(self):
        rng = np.random.default_rng(0)
        traj = Trajectory(rng.random(200), 1.0)
        vel = VelocitySeries(rng.standard_normal((200, 1)), np.ones(200, dtype=bool))
        grid = build_grid(traj, [4], min_count=10**6)
        with pytest.raises(ValueError):
            accumulate_moments(traj, vel, grid)

    def test_occupancy_sum_matches_valid_samples(self):
        rng = np.random.default_rng(2)
        traj = Trajectory(rng.random(3000), 1.0)
        mask = np.ones(3000, dtype=bool)
        mask[:5] = False
        vel = VelocitySeries(rng.standard_normal((3000, 1)), mask)
        grid = build_grid(traj, [8], min_count=1)
        moments = accumulate_moments(traj, vel, grid)
        assert sum(m.count for m in moments.values()) == mask.sum()

    def test_symmetry_and_psd(self):
        rng = np.random.default_rng(3)
        traj = Trajectory(rng.random((4000, 2)), 1.0)
        vel = VelocitySeries(rng.standard_normal((4000, 2)), np.ones(4000, dtype=bool))
        grid = build_grid(traj, [3, 3], min_count=10)
        for m in accumulate_moments(traj, vel, grid).values():
            np.testing.assert_allclose(m.c2, m.c2.T)
            assert np.min(np.linalg.eigvalsh(m.c2)) >= -1e-12
            for perm in itertools.permutations(range(4)):
                np.testing.assert_allclose(
                    m.c4, np.transpose(m.c4, perm), rtol=1e-12, atol=1e-15
                )

    def test_order_independence(self):
        rng = np.random.default_rng(4)
        n = 5000
        pos = rng.random((n, 1))
        v = rng.standard_normal((n, 1))
        order = rng.permutation(n)
        traj_a = Trajectory(pos, 1.0)
        traj_b = Trajectory(pos[order], 1.0)
        vel_a = VelocitySeries(v, np.ones(n, dtype=bool))
        vel_b = VelocitySeries(v[order], np.ones(n, dtype=bool))
        ma = accumulate_moments(traj_a, vel_a, build_grid(traj_a, [8], min_count=1))
        mb = accumulate_moments(traj_b, vel_b, build_grid(traj_b, [8], min_count=1))
        assert ma.keys() == mb.keys()
        for k in ma:
            np.testing.assert_allclose(ma[k].c2, mb[k].c2, rtol=1e-10)
            np.testing.assert_allclose(ma[k].c4, mb[k].c4, rtol=1e-10)

    def test_affine_covariance_exact(self):
        # per-axis scaling by a power of two keeps bin membership identical
        # and scales the moments by the exact powers of the scale
        rng = np.random.default_rng(5)
        n, c = 4000, 4.0
        pos = rng.random((n, 2))
        v = rng.standard_normal((n, 2))
        scale = np.array([c, 1.0])
        traj_a = Trajectory(pos, 1.0)
        traj_b = Trajectory(pos * scale, 1.0)
        vel_a = VelocitySeries(v, np.ones(n, dtype=bool))
        vel_b = VelocitySeries(v * scale, np.ones(n, dtype=bool))
        ga = build_grid(traj_a, [4, 4], min_count=1)
        gb = build_grid(traj_b, [4, 4], min_count=1)
        assert ga.members.keys() == gb.members.keys()
        for k in ga.members:
            np.testing.assert_array_equal(ga.members[k], gb.members[k])
        ma = accumulate_moments(traj_a, vel_a, ga)
        mb = accumulate_moments(traj_b, vel_b, gb)
        s2 = np.outer(scale, scale)
        s4 = np.einsum("i,j,k,l->ijkl", scale, scale, scale, scale)
        for k in ma:
            np.testing.assert_array_equal(mb[k].c2, ma[k].c2 * s2)
            np.testing.assert_array_equal(mb[k].c4, ma[k].c4 * s4)

    def test_sine_c2_matches_analytic(self):
        # estimated C11 near a^2 - x^2 at bin centers for a unit sine
        a = 1.0
        traj = gen_sine(a, 0.01, 100_000)
        vel = estimate_velocity(traj, "central")
        grid = build_grid(traj, [128], min_count=50)
        moments = accumulate_moments(traj, vel, grid)
        assert len(moments) > 100
        for key, m in moments.items():
            xc = grid.center(key)[0]
            assert abs(m.c2[0, 0] - (a * a - xc * xc)) < 0.05
