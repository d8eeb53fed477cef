import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singsusp.systems import (
    AffineTorus,
    CatMap,
    CircleRotation,
    FullShift,
    Product,
    SkewTorus,
    SymbolSequence,
    UsageError,
    base_distance,
    orbit_segment,
    point_from_json,
    point_to_json,
    step,
    step_inverse,
    system_from_json,
)

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)
torus2 = st.tuples(unit, unit)
words = st.lists(st.integers(0, 1), min_size=1, max_size=40)


def seq(word, origin=0):
    return SymbolSequence(word, origin, (0, 1), (1,))


class TestStep:
    def test_cat_fixed_point(self):
        assert step(CatMap(), (0.0, 0.0)) == (0.0, 0.0)

    def test_skew(self):
        assert step(SkewTorus(), (0.25, 0.5)) == pytest.approx((0.75, 0.5))

    def test_shift_drops_leading_symbol(self):
        x = SymbolSequence.from_window([0, 1, 1, 0], 0)
        y = step(FullShift(2), x)
        assert y.window(0, 2).tolist() == [1, 1, 0]

    def test_cat_matches_matrix(self):
        x = np.array([0.13, 0.71])
        expect = (np.array([[2, 1], [1, 1]]) @ x) % 1.0
        assert step(CatMap(), tuple(x)) == pytest.approx(tuple(expect))

    def test_wrong_point_kind(self):
        with pytest.raises(UsageError):
            step(CatMap(), seq([0, 1]))
        with pytest.raises(UsageError):
            step(FullShift(2), (0.1, 0.2))
        with pytest.raises(UsageError):
            step(CatMap(), (0.1,))

    def test_non_unimodular_rejected(self):
        with pytest.raises(UsageError):
            AffineTorus([[2, 0], [0, 1]])


class TestOrbitSegment:
    def test_rotation_quarter(self):
        pts = orbit_segment(CircleRotation(0.25), (0.0,), 0, 3)
        assert [p[0] for p in pts] == pytest.approx([0.0, 0.25, 0.5, 0.75])

    def test_empty_range_is_point(self):
        assert orbit_segment(CatMap(), (0.3, 0.4), 0, 0) == [(0.3, 0.4)]

    def test_cat_backward_by_composition(self):
        f = CatMap()
        x = (0.1, 0.1)
        seg = orbit_segment(f, x, -2, 2)
        back = step_inverse(f, step_inverse(f, x))
        assert seg[0] == pytest.approx(back)
        fwd = [back]
        for _ in range(4):
            fwd.append(step(f, fwd[-1]))
        for a, b in zip(seg, fwd):
            assert base_distance(f, a, b) < 1e-12


class TestDistance:
    def test_zero(self):
        assert base_distance(CatMap(), (0.3, 0.4), (0.3, 0.4)) == 0.0

    def test_wraparound(self):
        assert base_distance(CatMap(), (0.0, 0.0), (0.9, 0.0)) == pytest.approx(0.1)

    def test_shift_first_disagreement(self):
        a = [0] * 11
        b = list(a)
        b[5 + 3] = 1  # index 3, window starts at -5
        x = SymbolSequence.from_window(a, -5)
        y = SymbolSequence.from_window(b, -5)
        assert base_distance(FullShift(2), x, y) == 0.125

    def test_product_is_max(self):
        P = Product([CircleRotation(0.1), CatMap()])
        p = ((0.0,), (0.0, 0.0))
        q = ((0.2,), (0.05, 0.0))
        assert base_distance(P, p, q) == pytest.approx(0.2)


@given(torus2)
def test_cat_inverse_roundtrip(x):
    f = CatMap()
    assert base_distance(f, step(f, step_inverse(f, x)), x) <= 1e-12


@given(words, st.integers(-20, 20))
def test_shift_inverse_roundtrip_exact(w, origin):
    f = FullShift(2)
    x = seq(w, origin)
    assert base_distance(f, step(f, step_inverse(f, x)), x) == 0.0


@given(unit, unit, st.floats(0.0, 1.0, allow_nan=False))
def test_rotation_is_isometry(x, y, a):
    f = CircleRotation(a)
    d0 = base_distance(f, (x,), (y,))
    d1 = base_distance(f, step(f, (x,)), step(f, (y,)))
    assert abs(d1 - d0) <= 1e-12


@given(torus2, torus2, unit, unit)
def test_product_metric_is_max(a, b, c, d):
    P = Product([CatMap(), CircleRotation(0.3)])
    p, q = (a, (c,)), (b, (d,))
    assert base_distance(P, p, q) == max(base_distance(CatMap(), a, b), base_distance(CircleRotation(0.3), (c,), (d,)))


def test_cat_area_preservation():
    # push a uniform grid of N^2 cell centres forward and count cell occupancy
    N = 64
    g = (np.arange(N) + 0.5) / N
    X = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    Y = CatMap().apply(X, 1)
    idx = np.floor(Y * N).astype(int)
    counts = np.bincount(idx[:, 0] * N + idx[:, 1], minlength=N * N).reshape(N, N)
    # row and column marginals are uniform up to O(1/sqrt(N))
    rows = counts.sum(axis=1) / (N * N)
    assert np.max(np.abs(rows - 1.0 / N)) * N <= 3.0 / np.sqrt(N)
    assert counts.sum() == N * N


@pytest.mark.parametrize("obj", [
    {"kind": "CatMap"},
    {"kind": "CircleRotation", "params": {"angle": 0.25}},
    {"kind": "SkewTorus"},
    {"kind": "FullShift", "params": {"k": 3}},
    {"kind": "AffineTorus", "params": {"matrix": [[1, 1], [0, 1]], "offset": [0.5, 0.0]}},
    {"kind": "Product", "params": {"factors": [{"kind": "CatMap"}, {"kind": "CircleRotation", "params": {"angle": 0.1}}]}},
])
def test_system_json_roundtrip(obj):
    s = system_from_json(obj)
    again = system_from_json(json.loads(json.dumps(s.to_json())))
    assert again.to_json() == s.to_json()


def test_point_json_roundtrip():
    x = seq([1, 0, 1], 1)
    y = point_from_json(json.loads(json.dumps(point_to_json(x))))
    assert base_distance(FullShift(2), x, y) == 0.0
    assert point_from_json(point_to_json((0.25, 0.5))) == (0.25, 0.5)


def test_unknown_kind():
    with pytest.raises(UsageError):
        system_from_json({"kind": "Baker"})
