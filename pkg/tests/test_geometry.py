import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orc.config import PAPER_BOUNDS, PAPER_INITIAL_POSITIONS
from orc.fields import paper_ti_density
from orc.geometry import (
    assign_voronoi,
    build_grid,
    centroid,
    centroids,
    control_step,
    locational_cost,
    lloyd,
)

PAPER_X0 = np.array(PAPER_INITIAL_POSITIONS)


@pytest.fixture(scope="module")
def paper_grid():
    return build_grid(PAPER_BOUNDS, 0.02)


@pytest.fixture(scope="module")
def coarse_grid():
    return build_grid(PAPER_BOUNDS, 0.1)


def _uniform(points):
    return np.ones(len(points))


class TestBuildGrid:
    def test_paper_grid_count(self, paper_grid):
        assert (paper_grid.nx, paper_grid.ny) == (160, 100)
        assert paper_grid.size == len(paper_grid.points) == 16000
        assert paper_grid.cell_area == pytest.approx(0.0004)

    def test_single_cell(self):
        g = build_grid((0, 1, 0, 1), 1.0)
        assert g.size == 1
        np.testing.assert_array_equal(g.points, [[0.5, 0.5]])

    def test_non_divisible_rejected(self):
        with pytest.raises(ValueError, match="does not divide"):
            build_grid((0, 1, 0, 1), 0.3)

    @pytest.mark.parametrize("bounds", [(1, 0, 0, 1), (0, 1, 1, 1)])
    def test_degenerate_bounds(self, bounds):
        with pytest.raises(ValueError):
            build_grid(bounds, 0.1)

    def test_row_major_x_fastest(self):
        g = build_grid((0, 3, 0, 2), 1.0)
        np.testing.assert_allclose(g.points[:4], [[0.5, 0.5], [1.5, 0.5], [2.5, 0.5], [0.5, 1.5]])

    def test_cells_cover_rectangle_once(self, coarse_grid):
        g = coarse_grid
        ix = np.round((g.points[:, 0] - g.x_min) / g.h - 0.5).astype(int)
        iy = np.round((g.points[:, 1] - g.y_min) / g.h - 0.5).astype(int)
        assert len(set(zip(ix, iy))) == g.size
        assert ix.min() == 0 and ix.max() == g.nx - 1
        assert iy.min() == 0 and iy.max() == g.ny - 1


class TestVoronoi:
    def test_single_robot_owns_everything(self, coarse_grid):
        part = assign_voronoi(coarse_grid, [[0.3, -0.2]])
        assert np.all(part.owner == 0)

    def test_symmetric_pair_splits_evenly(self, coarse_grid):
        part = assign_voronoi(coarse_grid, [[-0.5, 0.0], [0.5, 0.0]])
        counts = part.counts()
        assert counts[0] == counts[1] == coarse_grid.size // 2
        assert np.all(coarse_grid.points[part.owner == 0, 0] < 0)

    def test_paper_positions_partition(self, paper_grid):
        part = assign_voronoi(paper_grid, PAPER_X0)
        assert part.counts().sum() == 16000
        assert np.all(part.counts() > 0)

    def test_ties_go_to_lowest_index(self):
        g = build_grid((0, 2, 0, 1), 1.0)  # centers (0.5,0.5), (1.5,0.5)
        part = assign_voronoi(g, [[1.0, 0.0], [1.0, 1.0]])  # every cell equidistant
        assert np.all(part.owner == 0)

    def test_empty_positions_rejected(self, coarse_grid):
        with pytest.raises(ValueError):
            assign_voronoi(coarse_grid, np.empty((0, 2)))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1.6, 1.6), st.floats(-1, 1)), min_size=1, max_size=8))
    def test_owner_is_nearest_brute_force(self, pts):
        g = build_grid(PAPER_BOUNDS, 0.2)
        pos = np.array(pts)
        part = assign_voronoi(g, pos)
        for k, q in enumerate(g.points):
            d = [math.hypot(q[0] - p[0], q[1] - p[1]) for p in pos]
            assert d[part.owner[k]] <= min(d) + 1e-12
        assert part.counts().sum() == g.size


class TestCentroid:
    def test_uniform_rectangle_center(self, coarse_grid):
        part = assign_voronoi(coarse_grid, [[-0.5, 0.0], [0.5, 0.0]])
        np.testing.assert_allclose(centroid(part, _uniform, coarse_grid, 0), [-0.8, 0.0], atol=1e-12)
        np.testing.assert_allclose(centroid(part, _uniform, coarse_grid, 1), [0.8, 0.0], atol=1e-12)

    def test_point_mass(self, coarse_grid):
        f = np.zeros(coarse_grid.size)
        f[123] = 7.0
        part = assign_voronoi(coarse_grid, [[0.0, 0.0]])
        np.testing.assert_allclose(centroid(part, f, coarse_grid, 0), coarse_grid.points[123], atol=1e-12)

    def test_gmm_fine_grid_oracle(self):
        f = paper_ti_density()
        c = []
        for h in (0.02, 0.005):
            g = build_grid(PAPER_BOUNDS, h)
            c.append(centroid(assign_voronoi(g, [[0.0, 0.0]]), f.at(0), g, 0))
        assert np.max(np.abs(c[0] - c[1])) < 2 * 0.02

    def test_empty_cell_returns_own_position(self, coarse_grid):
        pos = np.array([[0.0, 0.0], [0.0, 0.0]])  # coincident: robot 2 owns nothing
        c, empty = centroids(assign_voronoi(coarse_grid, pos), _uniform, coarse_grid)
        assert empty.tolist() == [False, True]
        np.testing.assert_array_equal(c[1], pos[1])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_containment(self, seed):
        g = build_grid(PAPER_BOUNDS, 0.1)
        rng = np.random.default_rng(seed)
        pos = rng.uniform([-1.6, -1], [1.6, 1], size=(rng.integers(1, 8), 2))
        f = rng.uniform(0.1, 5.0, size=g.size)
        part = assign_voronoi(g, pos)
        c, empty = centroids(part, f, g)
        for i in np.flatnonzero(~empty):
            cell = g.points[part.owner == i]
            assert np.all(c[i] >= cell.min(axis=0) - 1e-12)
            assert np.all(c[i] <= cell.max(axis=0) + 1e-12)


class TestLocationalCost:
    def test_uniform_closed_form(self, paper_grid):
        a, b = 1.6, 1.0
        exact = 4 * a * b * (a * a + b * b) / 3
        assert exact == pytest.approx(7.5947, abs=1e-4)
        got = locational_cost([[0.0, 0.0]], _uniform, paper_grid)
        assert got == pytest.approx(exact, rel=0.01)

    def test_robot_on_every_cell_is_zero(self):
        g = build_grid((0, 1, 0, 1), 0.1)
        assert locational_cost(g.points, _uniform, g) == 0.0

    def test_gmm_fine_grid_oracle(self, paper_grid):
        f = paper_ti_density().at(0)
        fine = build_grid(PAPER_BOUNDS, 0.005)
        coarse = locational_cost(PAPER_X0, f, paper_grid)
        ref = locational_cost(PAPER_X0, f, fine)
        assert coarse == pytest.approx(ref, rel=0.02)

    def test_translation_invariance(self):
        rng = np.random.default_rng(5)
        pos = rng.uniform([-1.6, -1], [1.6, 1], size=(6, 2))
        off = np.array([3.7, -2.1])
        f = paper_ti_density()
        g0 = build_grid(PAPER_BOUNDS, 0.05)
        g1 = build_grid((-1.6 + off[0], 1.6 + off[0], -1 + off[1], 1 + off[1]), 0.05)
        l0 = locational_cost(pos, f.at(0), g0)
        l1 = locational_cost(pos + off, lambda p: f(p - off), g1)
        assert l1 == pytest.approx(l0, rel=1e-9)


class TestControlStep:
    def test_fixed_point(self, coarse_grid):
        x = np.array([[0.2, 0.1], [-0.4, 0.3]])
        np.testing.assert_array_equal(control_step(x, x, 1.0, 0.5, 1, coarse_grid), x)

    def test_unit_gain_jumps_to_centroid(self, coarse_grid):
        x = np.array([[0.2, 0.1]])
        c = np.array([[-0.7, 0.45]])
        np.testing.assert_allclose(control_step(x, c, 1.0, 1.0, 1, coarse_grid), c, atol=1e-15)

    def test_partial_gain_strictly_approaches(self, coarse_grid):
        x = np.array([[0.2, 0.1]])
        c = np.array([[-0.7, 0.45]])
        x1 = control_step(x, c, 2.0, 0.25, 1, coarse_grid)
        assert np.linalg.norm(x1 - c) < np.linalg.norm(x - c)

    def test_overshoot_rejected(self, coarse_grid):
        with pytest.raises(ValueError, match="overshoot"):
            control_step([[0, 0]], [[0.1, 0]], 2.0, 1.0, 1, coarse_grid)

    def test_clamped_to_domain(self, coarse_grid):
        out = control_step([[1.5, 0.9]], [[3.0, 3.0]], 1.0, 1.0, 1, coarse_grid)
        assert coarse_grid.contains(out)

    def test_inner_steps_recompute_centroids(self, coarse_grid):
        x0 = np.array([[1.2, 0.7]])
        c0, _ = centroids(assign_voronoi(coarse_grid, x0), _uniform, coarse_grid)
        out = control_step(x0, c0, 1.0, 0.5, 40, coarse_grid, density=_uniform)
        np.testing.assert_allclose(out, [[0.0, 0.0]], atol=1e-9)

    def test_uniform_lloyd_converges_to_center(self, paper_grid):
        x, _ = lloyd(paper_grid, _uniform, [[1.1, -0.6]])
        assert np.max(np.abs(x[0])) < paper_grid.h


class TestLloydDescent:
    def test_monotone_over_random_starts(self):
        g = build_grid(PAPER_BOUNDS, 0.05)
        f = g.values(paper_ti_density().at(0))
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.uniform([-1.6, -1], [1.6, 1], size=(int(rng.integers(2, 11)), 2))
            prev = locational_cost(x, f, g)
            for _ in range(5):
                c, _ = centroids(assign_voronoi(g, x), f, g)
                x = control_step(x, c, 1.0, 1.0, 1, g)
                cur = locational_cost(x, f, g)
                assert cur <= prev * (1 + 1e-12)
                prev = cur
