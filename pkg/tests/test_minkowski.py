import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from lorentz_bm.causal import check_reverse_triangle, emerald
from lorentz_bm.minkowski import (
    GridError,
    GridSpec,
    NotTotallyTimelike,
    OutOfDomain,
    ThetaMode,
    geodesic_point,
    grid_sample,
    is_totally_timelike,
    midpoint_set,
    minkowski_ell,
    point_space,
    theta,
)


class TestMinkowskiEll:
    def test_time_translation(self):
        assert minkowski_ell((0, 0), (1, 0)) == 1.0

    def test_spacelike(self):
        assert minkowski_ell((0, 0), (1, 2)) == -math.inf

    def test_closed_form(self):
        assert_allclose(minkowski_ell((0, 0), (2, 1)), math.sqrt(3), rtol=1e-15)

    def test_past_directed(self):
        assert minkowski_ell((1, 0), (0, 0)) == -math.inf

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            minkowski_ell((0, 0), (1, 0, 0))

    def test_broadcast(self):
        p = np.zeros((3, 1, 2))
        q = np.array([[[1.0, 0.0], [2.0, 1.0]]])
        assert minkowski_ell(p, q).shape == (3, 2)


class TestGrid:
    def test_four_cells(self):
        spec = GridSpec([[0, 1], [0, 1]], 2)
        s = grid_sample(spec)
        assert_allclose(s.coords, [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])
        assert_allclose(s.ref_mass, 0.25)
        assert check_reverse_triangle(s, 1e-9).passed

    def test_single_cell(self):
        s = grid_sample(GridSpec([[0, 1], [0, 1]], 1))
        assert s.n == 1
        assert s.ell.tolist() == [[0.0]]

    def test_cap(self):
        with pytest.raises(GridError, match="cap"):
            GridSpec([[0, 1], [0, 1]], 1001)

    def test_bad_bounds(self):
        with pytest.raises(GridError):
            GridSpec([[1, 0], [0, 1]], 2)
        with pytest.raises(GridError):
            GridSpec([[0, 1]], 2)

    def test_locate_faces(self):
        spec = GridSpec([[0, 1], [0, 1]], 4)
        # interior face goes up, outer face stays in the last cell
        cells = spec.multi_index(np.array([[0.25, 0.5], [1.0, 1.0], [0.0, 0.0]]))
        assert cells.tolist() == [[1, 2], [3, 3], [0, 0]]
        with pytest.raises(OutOfDomain):
            spec.locate(np.array([[1.2, 0.5]]))

    def test_json_round_trip(self):
        spec = GridSpec([[0, 4], [-2, 2]], (8, 16))
        assert GridSpec.from_json(spec.to_json()) == spec
        with pytest.raises(GridError):
            GridSpec.from_json({"bounds": [[0, 1], [0, 1]]})

    def test_block_cells(self):
        spec = GridSpec([[0, 1], [0, 1]], 4)
        idx = spec.block_cells((1, 2), (2, 2))
        assert idx.tolist() == [6, 7, 10, 11]
        assert spec.box_cells([[0.25, 0.75], [0.5, 1.0]]).tolist() == idx.tolist()


class TestGeodesicPoint:
    def test_midpoint(self):
        assert_allclose(geodesic_point((0, 0), (2, 0), 0.5), [1, 0])

    def test_endpoints(self):
        p, q = np.array([0.0, 0.0]), np.array([2.0, 1.0])
        assert_allclose(geodesic_point(p, q, 0.0), p)
        assert_allclose(geodesic_point(p, q, 1.0), q)

    def test_tilted(self):
        m = geodesic_point((0, 0), (2, 1), 0.5)
        assert_allclose(m, [1, 0.5])
        assert_allclose(minkowski_ell((0, 0), m), math.sqrt(3) / 2, rtol=1e-15)

    def test_non_causal(self):
        with pytest.raises(ValueError):
            geodesic_point((0, 0), (1, 2), 0.5)

    @given(
        st.floats(0.1, 5), st.floats(-0.99, 0.99), st.floats(-3, 3),
        st.floats(0, 1), st.floats(0, 1),
    )
    def test_affine_parametrization(self, T, v, x0, s, t):
        s, t = min(s, t), max(s, t)
        p = np.array([0.0, x0])
        q = np.array([T, x0 + v * T])
        gs, gt = geodesic_point(p, q, s), geodesic_point(p, q, t)
        assert abs(minkowski_ell(gs, gt) - (t - s) * minkowski_ell(p, q)) <= 1e-12 * max(1.0, T)


def _cell(spec, point):
    return int(spec.locate(np.array([point]))[0])


class TestMidpointSet:
    spec = GridSpec([[0, 4], [-2, 2]], 8)

    def test_single_midpoint(self):
        s = grid_sample(self.spec)
        a, b = _cell(self.spec, (0.25, 0.25)), _cell(self.spec, (2.25, 0.25))
        m = midpoint_set(s, [a], [b], 0.5)
        assert m.indices.tolist() == [_cell(self.spec, (1.25, 0.25))]
        assert m.mass == s.ref_mass[0]

    def test_congruent_squares(self):
        spec = GridSpec([[0, 4], [-2, 2]], 32)
        s = grid_sample(spec)
        A = spec.box_cells([[0.5, 1.0], [-0.5, 0.0]])
        B = spec.box_cells([[3.0, 3.5], [0.0, 0.5]])
        m = midpoint_set(s, A, B, 0.5)
        # brute-force: snap every pair midpoint and count cells
        pa, pb = s.coords[A], s.coords[B]
        mids = 0.5 * (pa[:, None, :] + pb[None, :, :]).reshape(-1, 2)
        oracle = np.unique(spec.locate(mids))
        assert m.indices.tolist() == oracle.tolist()
        assert_allclose(m.mass, 0.25, atol=spec.cell_volume)

    def test_all_spacelike_flagged(self):
        s = grid_sample(self.spec)
        a, b = _cell(self.spec, (1.25, -1.75)), _cell(self.spec, (1.25, 1.75))
        m = midpoint_set(s, [a], [b], 0.5)
        assert m.empty and len(m) == 0 and m.mass == 0.0

    @given(st.integers(0, 2**32 - 1), st.floats(0, 1))
    def test_inside_emerald(self, seed, t):
        s = grid_sample(GridSpec([[0, 2], [-1, 1]], 8))
        rng = np.random.default_rng(seed)
        A = rng.choice(s.n, 4, replace=False)
        B = rng.choice(s.n, 4, replace=False)
        m = midpoint_set(s, A, B, t)
        assert set(m.indices.tolist()) <= set(emerald(s, A, B).tolist())


class TestTheta:
    def _space(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.5], [2.0, 0.0], [2.5, 0.0]])
        return point_space(pts)

    def test_inf_and_sup(self):
        s = self._space()
        lo = theta(s, [0, 1], [2, 3], 1.0)
        hi = theta(s, [0, 1], [2, 3], -1.0)
        assert lo.mode is ThetaMode.INF and hi.mode is ThetaMode.SUP
        assert_allclose(lo.value, math.sqrt(4 - 0.25))
        assert_allclose(hi.value, 2.5)
        assert lo.value <= hi.value

    def test_null_pair_rejected(self):
        s = point_space(np.array([[0.0, 0.0], [1.0, 1.0]]))
        with pytest.raises(NotTotallyTimelike):
            theta(s, [0], [1], 0.0)
        assert not is_totally_timelike(s, [0], [1])
