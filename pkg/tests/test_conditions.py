import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lorentz_bm.conditions import (
    BLOWUP,
    ConditionSpec,
    default_nprime,
    verify_condition,
    verify_tbm,
    verify_tcd,
    verify_tcd_e,
    verify_tmcp,
)
from lorentz_bm.measures import renyi_entropy, uniform_measure
from lorentz_bm.minkowski import GridSpec, NotTotallyTimelike, grid_sample, midpoint_set
from lorentz_bm.transport import NotTimelike, plan_between

SPEC = GridSpec([[0, 4], [-2, 2]], 32)
T_GRID = (0.0, 0.125, 0.25, 0.5, 0.75, 1.0)


def boxes(spec, a, b):
    s = grid_sample(spec)
    A, B = spec.box_cells(a), spec.box_cells(b)
    return s, A, B, uniform_measure(s, A), uniform_measure(s, B)


CONGRUENT = ([[0.5, 1.0], [-0.5, 0.0]], [[3.0, 3.5], [0.0, 0.5]])


@st.composite
def box_pairs(draw, res=16):
    """Uniform boxes of unequal sides, the target in the future of the source."""
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    sa, sb = rng.uniform(0.3, 0.7, 2)
    c0 = np.array([rng.uniform(0.2, 0.8), rng.uniform(-1.0, 0.3)])
    c1 = np.array([rng.uniform(2.5, 3.2), c0[1] + rng.uniform(-0.4, 0.4)])
    a = [[c0[0], c0[0] + sa], [c0[1], c0[1] + sa]]
    b = [[c1[0], c1[0] + sb], [c1[1], c1[1] + sb]]
    return GridSpec([[0, 4], [-2, 2]], res), a, b


class TestSpec:
    def test_defaults(self):
        c = ConditionSpec("TCD")
        assert c.nprime_grid == default_nprime(2.0)
        assert c.t_grid == T_GRID
        assert c.uses_nprime and c.uses_plan
        assert not ConditionSpec("TBM").uses_plan

    @pytest.mark.parametrize("kw", [
        {"kind": "CD"}, {"kind": "TCD", "N": 1.0}, {"kind": "TCD", "q": 1.0},
        {"kind": "TCD", "t_grid": (0.5, 1.5)}, {"kind": "TCD", "nprime_grid": (1.5,)},
        {"kind": "TCD", "C": -1.0},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ConditionSpec(**kw)


class TestTBM:
    def test_equality_case(self):
        s, A, B, _, _ = boxes(SPEC, *CONGRUENT)
        rep = verify_tbm(s, A, B, 0.5, 0.0, 2.0)
        (row,) = rep.rows
        cell = SPEC.cell_volume
        assert abs(row.lhs ** 2 - row.rhs ** 2) <= cell
        assert rep.passed

    def test_passes_on_grid(self):
        s, A, B, _, _ = boxes(SPEC, *CONGRUENT)
        assert verify_tbm(s, A, B, T_GRID, 0.0, 2.0, tol=2 * SPEC.h).passed

    def test_lhs_is_midpoint_mass(self):
        s, A, B, _, _ = boxes(SPEC, *CONGRUENT)
        rep = verify_tbm(s, A, B, (0.25,), 0.0, 3.0)
        assert_allclose(rep.rows[0].lhs, midpoint_set(s, A, B, 0.25).mass ** (1 / 3))

    def test_domain_blowup(self):
        s, A, B, _, _ = boxes(SPEC, [[0.0, 0.5], [0.0, 0.5]], [[3.0, 3.5], [0.0, 0.5]])
        rep = verify_tbm(s, A, B, T_GRID, 10.0, 2.0)
        assert rep.info["Theta"] > 2.0
        inner = [r for r in rep.rows if 0 < r.t < 1]
        assert inner and all(r.reason == BLOWUP and r.margin == -math.inf for r in inner)
        assert not rep.passed

    def test_single_cell_not_totally_timelike(self):
        s = grid_sample(SPEC)
        with pytest.raises(NotTotallyTimelike):
            verify_tbm(s, [5], [5], 0.5, 0.0, 2.0)
        rep = verify_condition(ConditionSpec("TBM"), uniform_measure(s, [5]), A=np.array([5]), B=np.array([5]))
        assert rep.rows[0].reason == "NotTotallyTimelike"
        assert not rep.passed

    def test_strong_variants_on_translation(self):
        s, A, B, mu0, mu1 = boxes(SPEC, *CONGRUENT)
        plan = plan_between(mu0, mu1, 0.5)
        for variant in ("sTBM", "sTBMstar"):
            rep = verify_tbm(s, A, B, T_GRID, 0.0, 2.0, plan, variant)
            assert rep.info["chronology"] == "TOTALLY_TIMELIKE"
            for r in rep.rows:
                assert abs(r.margin) < 1e-12

    def test_strong_variant_needs_q_timelike(self):
        spec = GridSpec([[0, 2], [0, 2]], 2)
        s = grid_sample(spec)
        # cells (0.5, 0.5) and (1.5, 1.5) are null related
        with pytest.raises(NotTimelike):
            verify_tbm(s, [0], [3], 0.5, 0.0, 2.0, variant="sTBM")


class TestTCD:
    def test_endpoint_identities(self):
        _, _, _, mu0, mu1 = boxes(SPEC, [[0.5, 1.0], [-0.5, 0.0]], [[2.5, 3.25], [-0.25, 0.5]])
        plan = plan_between(mu0, mu1, 0.5)
        rep = verify_tcd(mu0, mu1, plan, 0.0, 2.0, t_grid=(0.0, 1.0))
        for r in rep.rows:
            assert abs(r.margin) <= 1e-9
            mu = mu0 if r.t == 0 else mu1
            assert_allclose(r.lhs, renyi_entropy(mu, r.Nprime), rtol=1e-12)
        rep = verify_tcd_e(mu0, mu1, plan, 0.0, 2.0, t_grid=(0.0, 1.0))
        assert all(abs(r.margin) <= 1e-9 for r in rep.rows)

    def test_translation_equality(self):
        _, _, _, mu0, mu1 = boxes(SPEC, *CONGRUENT)
        plan = plan_between(mu0, mu1, 0.5)
        reps = (verify_tcd(mu0, mu1, plan, 0.0, 2.0, tol=1e-12), verify_tcd_e(mu0, mu1, plan, 0.0, 2.0, tol=1e-12))
        for rep in reps:
            assert rep.passed
            assert max(abs(r.margin) for r in rep.rows) < 1e-12

    def test_lambda_diagonal(self):
        spec = GridSpec([[0, 4], [-2, 2]], 8)
        s = grid_sample(spec)
        A = spec.locate(np.array([[0.25, -1.25], [0.25, 1.25]]))
        B = spec.locate(np.array([[2.25, -1.25], [2.25, 1.25]]))
        mu0, mu1 = uniform_measure(s, A), uniform_measure(s, B)
        rep = verify_tcd_e(mu0, mu1, plan_between(mu0, mu1, 0.5), 0.0, 2.0)
        assert_allclose(rep.info["Lambda"], 2.0, rtol=1e-15)

    def test_domain_blowup(self):
        _, _, _, mu0, mu1 = boxes(SPEC, [[0.0, 0.5], [0.0, 0.5]], [[3.0, 3.5], [0.0, 0.5]])
        plan = plan_between(mu0, mu1, 0.5)
        rep = verify_tcd(mu0, mu1, plan, 10.0, 2.0)
        assert any(r.reason == BLOWUP for r in rep.rows)
        assert not rep.passed

    def test_nprime_validation(self):
        _, _, _, mu0, mu1 = boxes(SPEC, *CONGRUENT)
        with pytest.raises(ValueError):
            verify_tcd(mu0, mu1, plan_between(mu0, mu1, 0.5), 0.0, 2.0, nprime_grid=(2.0,))

    def test_negative_curvature_is_weaker(self):
        _, _, _, mu0, mu1 = boxes(SPEC, [[0.5, 1.0], [-0.5, 0.0]], [[2.5, 3.25], [-0.25, 0.5]])
        plan = plan_between(mu0, mu1, 0.5)
        m0 = verify_tcd(mu0, mu1, plan, 0.0, 2.0).rows
        m1 = verify_tcd(mu0, mu1, plan, -1.0, 2.0).rows
        for a, b in zip(m0, m1):
            assert b.margin >= a.margin - 1e-12


class TestTMCP:
    def _setup(self):
        s, A, _, mu, _ = boxes(SPEC, [[0.5, 1.0], [-0.5, 0.0]], [[3.0, 3.5], [0.0, 0.5]])
        x0 = int(SPEC.locate(np.array([[3.2, 0.2]]))[0])
        return mu, x0

    def test_endpoint_identity(self):
        mu, x0 = self._setup()
        rep = verify_tmcp(mu, x0, None, 0.0, 2.0, t_grid=(0.0,))
        assert all(abs(r.margin) <= 1e-9 for r in rep.rows)
        rep = verify_tmcp(mu, x0, None, 0.0, 2.0, "TMCPe", t_grid=(0.0,))
        assert all(abs(r.margin) <= 1e-9 for r in rep.rows)

    def test_passes_as_t_goes_to_one(self):
        mu, x0 = self._setup()
        for variant in ("TMCP", "TMCPe"):
            rep = verify_tmcp(mu, x0, None, 0.0, 2.0, variant, t_grid=(0.75, 0.9, 0.99, 1.0), tol=2 * SPEC.h)
            assert rep.passed

    def test_full_grid(self):
        mu, x0 = self._setup()
        for variant in ("TMCP", "TMCPe"):
            assert verify_tmcp(mu, x0, None, 0.0, 2.0, variant, tol=2 * SPEC.h).passed

    def test_point_outside_past(self):
        mu, _ = self._setup()
        x0 = int(SPEC.locate(np.array([[0.75, 1.5]]))[0])
        with pytest.raises(NotTotallyTimelike):
            verify_tmcp(mu, x0, None, 0.0, 2.0)

    def test_dispatch(self):
        mu, x0 = self._setup()
        rep = verify_condition(ConditionSpec("TMCPe"), mu, x0=x0, tol=2 * SPEC.h)
        assert rep.kind == "TMCPe" and rep.passed


class TestForwardImplication:
    @settings(max_examples=25)
    @given(box_pairs())
    def test_tcd_implies_stbm(self, pair):
        spec, a, b = pair
        s, A, B, mu0, mu1 = boxes(spec, a, b)
        plan = plan_between(mu0, mu1, 0.5)
        tol = 2.0 * spec.h
        if not verify_tcd(mu0, mu1, plan, 0.0, 2.0, tol=tol).passed:
            return
        for variant in ("sTBM", "sTBMstar"):
            assert verify_tbm(s, A, B, T_GRID, 0.0, 2.0, plan, variant, tol).passed

    @settings(max_examples=15)
    @given(box_pairs())
    def test_entropic_passes_at_two_resolutions(self, pair):
        spec, a, b = pair
        for res in (16, 32):
            g = GridSpec(spec.bounds, res)
            _, _, _, mu0, mu1 = boxes(g, a, b)
            plan = plan_between(mu0, mu1, 0.5)
            assert verify_tcd(mu0, mu1, plan, 0.0, 2.0, tol=2 * g.h).passed
            assert verify_tcd_e(mu0, mu1, plan, 0.0, 2.0, tol=2 * g.h).passed
