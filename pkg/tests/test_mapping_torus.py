import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import chain_oracle
from singsusp.mapping_torus import (
    FiberPoint,
    MappingTorus,
    bar_metric,
    chain3,
    project,
    rep_distances,
    suspension_flow,
)
from singsusp.systems import CatMap, CircleRotation, FullShift, SymbolSequence, orbit_segment

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)
cat_points = st.builds(lambda a, b, s: FiberPoint((a, b), s), unit, unit, unit)
CAT = MappingTorus(CatMap())


class TestFlow:
    def test_identity(self):
        p = FiberPoint((0.1, 0.2), 0.3)
        assert suspension_flow(CAT, 0.0, p) == p

    def test_fixed_point_height(self):
        q = suspension_flow(CAT, 2.5, FiberPoint((0.0, 0.0), 0.0))
        assert q.base == (0.0, 0.0)
        assert q.height == pytest.approx(0.5)

    def test_rotation_crossing(self):
        mt = MappingTorus(CircleRotation(0.25))
        q = suspension_flow(mt, 0.6, FiberPoint((0.1,), 0.7))
        assert q.base[0] == pytest.approx(0.35)
        assert q.height == pytest.approx(0.3)

    def test_negative_time(self):
        p = FiberPoint((0.3, 0.6), 0.2)
        q = suspension_flow(CAT, -1.7, suspension_flow(CAT, 1.7, p))
        assert bar_metric(CAT, p, q) < 1e-12

    def test_projection_of_periodic_orbit(self):
        mt = MappingTorus(CircleRotation(0.25))
        p = FiberPoint((0.1,), 0.0)
        orbit = {round(x[0], 9) for x in orbit_segment(mt.system, p.base, 0, 3)}
        for t in np.linspace(0, 4, 41):
            assert round(project(suspension_flow(mt, t, p))[0], 9) in orbit

    def test_project(self):
        assert project(FiberPoint((0.3, 0.4), 0.9)) == (0.3, 0.4)


class TestMetric:
    def test_zero(self):
        p = FiberPoint((0.3, 0.4), 0.2)
        assert bar_metric(CAT, p, p) == 0.0

    def test_same_vertical_segment(self):
        x = (0.31, 0.77)
        assert bar_metric(CAT, FiberPoint(x, 0.2), FiberPoint(x, 0.5)) == pytest.approx(0.3)

    def test_same_vertical_segment_matches_chain_search(self):
        x = (0.31, 0.77)
        p, q = FiberPoint(x, 0.2), FiberPoint(x, 0.5)
        assert chain_oracle(CatMap(), p, q) == pytest.approx(0.3)

    @pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-8])
    def test_gluing(self, eps):
        x = (0.2, 0.45)
        d = bar_metric(CAT, FiberPoint(x, 1 - eps), FiberPoint(CatMap().step(x), 0.0))
        assert d <= 1.0001 * eps

    def test_quotient_constant_independent_of_x(self):
        rng = np.random.default_rng(3)
        ratios = []
        for _ in range(50):
            x = tuple(rng.random(2))
            eps = 10 ** rng.uniform(-6, -2)
            ratios.append(bar_metric(CAT, FiberPoint(x, 1 - eps), FiberPoint(CatMap().step(x), 0.0)) / eps)
        assert max(ratios) <= 1.0 + 1e-6

    def test_shift_metric_matches_oracle(self):
        mt = MappingTorus(FullShift(2))
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = SymbolSequence(rng.integers(0, 2, 41), 20, (0,), (1,))
            b = SymbolSequence(rng.integers(0, 2, 41), 20, (0,), (1,))
            p, q = FiberPoint(a, rng.random()), FiberPoint(b, rng.random())
            assert bar_metric(mt, p, q) == pytest.approx(chain_oracle(FullShift(2), p, q), abs=1e-9)

    def test_chain3_upper_bounds_full_metric(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            p = FiberPoint(tuple(rng.random(2)), rng.random())
            q = FiberPoint(tuple(rng.random(2)), rng.random())
            D = rep_distances(CatMap(), p.base, q.base)
            assert bar_metric(CAT, p, q) <= chain3(D, p.height, q.height) + 1e-12


@settings(max_examples=300)
@given(cat_points, cat_points, cat_points)
def test_metric_axioms(p, q, r):
    dpq, dqp = bar_metric(CAT, p, q), bar_metric(CAT, q, p)
    assert dpq == dqp
    assert dpq >= 0.0
    assert bar_metric(CAT, p, r) <= dpq + bar_metric(CAT, q, r) + 1e-9


@settings(max_examples=200)
@given(cat_points, st.floats(-2.0, 2.0, allow_nan=False))
def test_flow_continuity(p, t):
    # moving along the flow for time t costs at most |t| (1 + Lip f)
    q = suspension_flow(CAT, t, p)
    lip = CatMap().lipschitz()
    assert bar_metric(CAT, p, q) <= abs(t) * (1 + lip) + 1e-9


def test_point_json_roundtrip():
    p = FiberPoint((0.25, 0.5), 0.75)
    assert FiberPoint.from_json(json.loads(json.dumps(p.to_json()))) == p


def test_reflect_is_isometry_onto_inverse_torus():
    rng = np.random.default_rng(11)
    rev = CAT.reversed()
    for _ in range(20):
        p = FiberPoint(tuple(rng.random(2)), rng.random())
        q = FiberPoint(tuple(rng.random(2)), rng.random())
        assert bar_metric(rev, CAT.reflect(p), CAT.reflect(q)) == pytest.approx(bar_metric(CAT, p, q), abs=1e-12)
