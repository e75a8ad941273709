import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from lorentz_bm.causal import (
    NEG_INF,
    CausalError,
    DiscretePath,
    FiniteCausalSpace,
    Relation,
    age,
    causal_relation,
    check_reverse_triangle,
    emerald,
    is_geodesic_samples,
    lift_power,
)
from lorentz_bm.minkowski import minkowski_ell, point_space

from strategies import point_clouds


def line_space(points):
    return point_space(np.asarray(points, dtype=float))


class TestRelation:
    def test_three_cases(self):
        ell = [[0.0, 1.0, 0.0], [NEG_INF, 0.0, NEG_INF], [NEG_INF, NEG_INF, 0.0]]
        s = FiniteCausalSpace(np.ones(3), ell)
        assert causal_relation(s, 0, 1) is Relation.CHRONOLOGICAL
        assert causal_relation(s, 0, 2) is Relation.NULL_CAUSAL
        assert causal_relation(s, 1, 0) is Relation.UNRELATED

    def test_index_out_of_range(self):
        s = FiniteCausalSpace(np.ones(2), [[0, 1], [NEG_INF, 0]])
        with pytest.raises(IndexError):
            causal_relation(s, 0, 2)


class TestConstruction:
    def test_reflexivity_enforced(self):
        with pytest.raises(CausalError, match="reflexivity"):
            FiniteCausalSpace(np.ones(2), [[NEG_INF, 1], [NEG_INF, 0]])

    def test_positive_masses(self):
        with pytest.raises(CausalError):
            FiniteCausalSpace([1.0, 0.0], [[0, 1], [NEG_INF, 0]])

    def test_rejects_reverse_triangle_violation(self):
        ell = [[0, 1, 1.5], [NEG_INF, 0, 1], [NEG_INF, NEG_INF, 0]]
        with pytest.raises(CausalError, match="reverse triangle"):
            FiniteCausalSpace(np.ones(3), ell)

    def test_negative_finite_entry(self):
        with pytest.raises(CausalError):
            FiniteCausalSpace(np.ones(2), [[0, -1.0], [NEG_INF, 0]])

    def test_lift_power_absorbs(self):
        out = lift_power(np.array([NEG_INF, 0.0, 4.0]), 0.5)
        assert out[0] == NEG_INF
        assert_allclose(out[1:], [0.0, 2.0])


class TestReverseTriangle:
    def test_two_points_pass(self):
        s = FiniteCausalSpace(np.ones(2), [[0, 1], [NEG_INF, 0]])
        assert check_reverse_triangle(s, 0.0).passed

    def test_collinear_equality(self):
        s = line_space([(0, 0), (1, 0), (2, 0)])
        assert check_reverse_triangle(s, 0.0).passed

    def test_violation_reported(self):
        ell = [[0, 1, 1.5], [NEG_INF, 0, 1], [NEG_INF, NEG_INF, 0]]
        s = FiniteCausalSpace(np.ones(3), ell, validate=False)
        rep = check_reverse_triangle(s, 0.0)
        assert not rep.passed
        assert rep.violations == [(0, 1, 2)]
        assert rep.n_violations == 1

    def test_violation_cap(self):
        n = 12
        ell = np.full((n, n), 1.0)
        np.fill_diagonal(ell, 0.0)
        s = FiniteCausalSpace(np.ones(n), ell, validate=False)
        rep = check_reverse_triangle(s, 0.0, cap=5)
        assert len(rep.violations) == 5
        assert rep.n_violations > 5

    def test_negative_tol_rejected(self):
        s = FiniteCausalSpace(np.ones(1), [[0.0]])
        with pytest.raises(ValueError):
            check_reverse_triangle(s, -1.0)

    @given(point_clouds())
    def test_minkowski_samples_pass(self, pts):
        assert check_reverse_triangle(point_space(pts)).passed


class TestAge:
    def test_collinear(self):
        s = line_space([(0, 0), (1, 0), (2, 0)])
        assert age(s, DiscretePath.uniform([0, 1, 2])) == 2.0

    def test_bent_path(self):
        s = line_space([(0, 0), (1, 0.5), (2, 0)])
        # two segments of sqrt(1 - 0.25)
        assert_allclose(age(s, DiscretePath.uniform([0, 1, 2])), 1.7320508075688772, rtol=1e-15)

    def test_single_segment(self):
        s = line_space([(0, 0), (2, 1)])
        assert age(s, DiscretePath.uniform([0, 1])) == s[0, 1]

    def test_non_causal_path(self):
        s = line_space([(0, 0), (1, 3)])
        with pytest.raises(CausalError):
            age(s, DiscretePath.uniform([0, 1]))

    def test_bad_params(self):
        with pytest.raises(CausalError):
            DiscretePath((0, 1), (0.0, 0.5))
        with pytest.raises(CausalError):
            DiscretePath((0, 1, 2), (0.0, 0.6, 0.6))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(2, 6))
    def test_additive_and_reparametrization_invariant(self, seed, k1, k2):
        rng = np.random.default_rng(seed)
        # increasing times with small spatial steps keep every pair causal
        steps = np.c_[rng.uniform(0.5, 1.0, k1 + k2 - 1), rng.uniform(-0.2, 0.2, k1 + k2 - 1)]
        pts = np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])
        s = point_space(pts)
        first = DiscretePath.uniform(range(k1))
        second = DiscretePath.uniform(range(k1 - 1, k1 + k2 - 1))
        whole = first.concat(second)
        assert_allclose(age(s, whole), age(s, first) + age(s, second), rtol=1e-12)
        assert age(s, whole.reparametrize(lambda x: x ** 3)) == age(s, whole)
        # telescoped reverse triangle
        assert s[whole.points[0], whole.points[-1]] >= age(s, whole) - 1e-12


class TestGeodesic:
    def test_affine_collinear(self):
        s = line_space([(0, 0), (1, 0), (2, 0)])
        assert is_geodesic_samples(s, DiscretePath.uniform([0, 1, 2]))

    def test_bent_is_not(self):
        s = line_space([(0, 0), (1, 0.5), (2, 0)])
        assert not is_geodesic_samples(s, DiscretePath.uniform([0, 1, 2]))

    def test_null_chain(self):
        s = line_space([(0, 0), (1, 1), (2, 2)])
        assert is_geodesic_samples(s, DiscretePath.uniform([0, 1, 2]), tol=0.0)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 7))
    def test_geodesic_implies_maximal_age(self, seed, k):
        rng = np.random.default_rng(seed)
        p = np.array([0.0, 0.0])
        q = np.array([rng.uniform(1, 3), rng.uniform(-0.9, 0.9)])
        params = np.sort(np.r_[0.0, rng.uniform(0.01, 0.99, k - 2), 1.0])
        params = np.unique(params)
        pts = (1 - params)[:, None] * p + params[:, None] * q
        s = point_space(pts)
        path = DiscretePath(tuple(range(len(params))), tuple(params))
        assert is_geodesic_samples(s, path)
        assert_allclose(age(s, path), s[0, len(params) - 1], rtol=1e-12)


class TestEmerald:
    def test_single_point(self):
        s = line_space([(0, 0), (1, 3)])
        assert emerald(s, [0], [0]).tolist() == [0]

    def test_double_cone(self):
        ts = np.arange(0, 2.01, 0.25)
        xs = np.arange(-1, 1.01, 0.25)
        pts = np.array([(t, x) for t in ts for x in xs])
        s = point_space(pts)
        a = int(np.flatnonzero((pts[:, 0] == 0) & (pts[:, 1] == 0))[0])
        b = int(np.flatnonzero((pts[:, 0] == 2) & (pts[:, 1] == 0))[0])
        expect = np.flatnonzero(np.abs(pts[:, 1]) <= np.minimum(pts[:, 0], 2 - pts[:, 0]) + 1e-12)
        assert emerald(s, [a], [b]).tolist() == expect.tolist()

    def test_empty(self):
        s = line_space([(0, 0), (0, 1)])
        assert emerald(s, [0], [1]).size == 0

    def test_needs_nonempty(self):
        s = line_space([(0, 0)])
        with pytest.raises(ValueError):
            emerald(s, [], [0])


class TestSerialization:
    def test_round_trip(self, tmp_path):
        ell = [[0, 1, NEG_INF], [NEG_INF, 0, NEG_INF], [NEG_INF, NEG_INF, 0]]
        s = FiniteCausalSpace([1.0, 2.0, 0.5], ell, labels=["x", "y", "z"])
        doc = s.to_json()
        assert doc["ell"][0][2] == "-inf"
        path = tmp_path / "space.json"
        s.save(path)
        t = FiniteCausalSpace.load(path)
        assert t.labels == ("x", "y", "z")
        assert_allclose(t.ref_mass, s.ref_mass)
        assert np.array_equal(t.ell, s.ell)
        json.dumps(doc)

    def test_unknown_field_rejected(self):
        doc = {"n": 1, "ell": [[0]], "ref_mass": [1], "colour": "red"}
        with pytest.raises(CausalError, match="unknown"):
            FiniteCausalSpace.from_json(doc)

    def test_lazy_matches_dense(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1, 1, size=(30, 2))
        dense = point_space(pts)
        lazy = FiniteCausalSpace(np.ones(30), coords=pts, separation=minkowski_ell)
        assert np.array_equal(lazy.ell, dense.ell)
        assert lazy[3, 4] == dense[3, 4]
        assert math.isinf(dense.ell.min())
