import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from singsusp.mapping_torus import FiberPoint, MappingTorus, bar_metric
from singsusp.singular import (
    Brake,
    DivergenceSuspected,
    Exponential,
    Finite,
    LebesgueOnBase,
    OrbitClosure,
    PointList,
    Power,
    SingularSuspension,
    WholeFiber,
    a_sing_sample,
    alpha_eval,
    clock,
    expected_gamma,
    gamma,
    lift_integral,
    psi_flow,
    psi_trajectory,
)
from singsusp.systems import CatMap, FullShift, SymbolSequence, UsageError

CAT = MappingTorus(CatMap())
SIGMA = FiberPoint((0.3, 0.6), 0.5)


def point_brake(profile, sigma=SIGMA):
    return SingularSuspension(CAT, Brake(PointList((sigma,)), profile))


def clock_oracle(ss, p, s, sigma=SIGMA):
    """Quadrature of 1/g(d(phi_u p, sigma)) with the chain metric computed from scratch."""
    prof = ss.profile

    def inv_alpha(u):
        r = bar_metric(CAT, CAT.flow(u, p), sigma)
        return 1.0 / float(prof.g(r))

    # breakpoints where the distance profile has kinks: the crossings of height 0/1 and of sigma's height
    pts = sorted({u for k in range(-1, int(s) + 2) for u in (k - p.height + 1, k + sigma.height - p.height)
                  if 0 < u < s})
    val, err = integrate.quad(inv_alpha, 0, s, points=pts or None, limit=400, epsabs=1e-11, epsrel=1e-10)
    return val


class TestProfiles:
    def test_power_rejects_nonpositive(self):
        with pytest.raises(UsageError):
            Power(0)
        with pytest.raises(UsageError):
            Exponential(-1)

    @settings(max_examples=60)
    @given(st.floats(0.3, 4.0), st.floats(1e-4, 0.04), st.floats(1e-4, 0.04), st.floats(1e-3, 0.5))
    def test_power_piece_matches_quadrature(self, k, r0, r1, w):
        prof = Power(k, 0.05)
        ref, _ = integrate.quad(lambda t: 1 / float(prof.g(r0 + (r1 - r0) * t / w)), 0, w, epsrel=1e-11)
        assert prof.piece(r0, r1, w) == pytest.approx(ref, rel=1e-7)

    @settings(max_examples=60)
    @given(st.floats(0.002, 0.04), st.floats(0.002, 0.04), st.floats(1e-3, 0.5))
    def test_exponential_piece_matches_quadrature(self, r0, r1, w):
        prof = Exponential(0.05, 0.05)
        ref, _ = integrate.quad(lambda t: 1 / float(prof.g(r0 + (r1 - r0) * t / w)), 0, w, epsrel=1e-11,
                                limit=200)
        assert prof.piece(r0, r1, w) == pytest.approx(ref, rel=1e-7)

    def test_unclipped_exponential(self):
        assert float(Exponential(1.0).g(0.5)) == pytest.approx(math.exp(-2.0))


class TestAlpha:
    def test_zero_on_singular_set(self):
        assert alpha_eval(Brake(PointList((SIGMA,)), Power(1)), SIGMA, CAT) == 0.0

    def test_regular_is_one(self):
        assert alpha_eval(Brake(), FiberPoint((0.1, 0.1), 0.2), CAT) == 1.0

    def test_power_one_at_half(self):
        sigma = FiberPoint((0.0, 0.0), 0.5)
        p = FiberPoint((0.5, 0.0), 0.5)
        assert bar_metric(CAT, p, sigma) == pytest.approx(0.5)
        assert alpha_eval(Brake(PointList((sigma,)), Power(1)), p, CAT) == pytest.approx(0.5)

    def test_brake_json_roundtrip(self):
        for b in (Brake(PointList((SIGMA,)), Power(2, 0.1)), Brake(WholeFiber(0.5), Exponential(1.0)),
                  Brake(OrbitClosure(SIGMA, 3), Power(1)), Brake()):
            assert Brake.from_json(json.loads(json.dumps(b.to_json()))) == b


class TestClock:
    def test_regular(self):
        ss = SingularSuspension(CAT)
        assert clock(ss, FiberPoint((0.1, 0.2), 0.3), 2.7) == 2.7

    @pytest.mark.parametrize("k", [1.0, 2.0])
    def test_through_singularity_diverges(self, k):
        ss = point_brake(Power(k, 0.05))
        det = ss.clock_detail(FiberPoint(SIGMA.base, 0.1), 1.0)
        assert math.isinf(det.value) and det.certificate == "hit"
        assert det.hit_time == pytest.approx(0.4)

    def test_refinement_lower_bounds_grow(self):
        # approaching sigma from below, the clock to sigma's height grows without bound
        ss = point_brake(Power(1, 0.05))
        vals = [ss.clock(FiberPoint(SIGMA.base, 0.3), 0.2 - 2.0 ** -j) for j in range(4, 20, 3)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] - vals[0] > 0.05 * math.log(2 ** 15) * 0.9

    @pytest.mark.parametrize("profile", [Power(2, 0.05), Power(0.5, 0.05), Exponential(0.05, 0.05)])
    def test_matches_quadrature(self, profile):
        ss = point_brake(profile)
        p = FiberPoint((SIGMA.base[0] + 0.004, SIGMA.base[1] - 0.002), 0.2)
        assert ss.clock(p, 1.6) == pytest.approx(clock_oracle(ss, p, 1.6), rel=1e-6)

    @settings(max_examples=40)
    @given(st.floats(0.0, 1.0, exclude_max=True), st.floats(0.0, 1.0, exclude_max=True),
           st.floats(0.0, 1.0, exclude_max=True), st.floats(0.01, 1.5), st.floats(0.01, 1.5))
    def test_additive(self, a, b, h, s1, s2):
        ss = point_brake(Power(1.5, 0.2))
        p = FiberPoint((a, b), h)
        total = ss.clock(p, s1 + s2)
        parts = ss.clock(p, s1) + ss.clock(CAT.flow(s1, p), s2)
        if math.isinf(total):
            assert math.isinf(parts)
        else:
            assert total == pytest.approx(parts, rel=1e-8, abs=1e-8)


class TestPsi:
    def test_regular_equals_phi(self):
        ss = SingularSuspension(CAT)
        p = FiberPoint((0.2, 0.7), 0.4)
        for t in (-2.3, 0.0, 0.5, 3.1):
            assert bar_metric(CAT, psi_flow(ss, t, p), CAT.flow(t, p)) < 1e-12

    def test_zero_time(self):
        ss = point_brake(Power(1, 0.05))
        p = FiberPoint((0.2, 0.7), 0.4)
        assert bar_metric(CAT, psi_flow(ss, 0.0, p), p) == 0.0

    def test_whole_fiber_trapping(self):
        ss = SingularSuspension(CAT, Brake(WholeFiber(0.5), Power(1)))
        p = FiberPoint((0.2, 0.7), 0.49)
        hs = [q.height for q in psi_trajectory(ss, p, [1.0, 10.0, 100.0, 1e4])]
        assert all(h <= 0.5 for h in hs)  # the last one rounds onto the fiber
        assert 0.5 - hs[-1] < 1e-6
        assert hs == sorted(hs)

    def test_point_trapping(self):
        ss = point_brake(Power(1, 0.05))
        p = FiberPoint(SIGMA.base, 0.2)
        ds = [bar_metric(CAT, q, SIGMA) for q in psi_trajectory(ss, p, [0.1, 0.25, 0.5, 1.0, 2.0, 4.0])]
        assert all(b <= a for a, b in zip(ds, ds[1:]))
        assert ds[2] < ds[1] < ds[0]
        assert ds[-1] < 1e-9

    @settings(max_examples=40)
    @given(st.floats(0.0, 1.0, exclude_max=True), st.floats(0.0, 1.0, exclude_max=True),
           st.floats(0.0, 1.0, exclude_max=True), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
    def test_semigroup(self, a, b, h, t, s):
        ss = point_brake(Power(1, 0.2))
        p = FiberPoint((a, b), h)
        one = psi_flow(ss, t + s, p)
        two = psi_flow(ss, t, psi_flow(ss, s, p))
        assert bar_metric(CAT, one, two) <= 1e-7

    @settings(max_examples=40)
    @given(st.floats(0.0, 1.0, exclude_max=True), st.floats(0.0, 1.0, exclude_max=True),
           st.floats(0.0, 1.0, exclude_max=True), st.floats(0.05, 3.0))
    def test_clock_inverts_flow_time(self, a, b, h, t):
        # psi_t(p) = phi_{s*}(p) lies on the phi-orbit of p and clock(p, s*) = t
        ss = point_brake(Power(1, 0.2))
        p = FiberPoint((a, b), h)
        m, hh, trapped = ss.orbit_offsets(p, [t])
        s_star = m[0] + hh[0] - p.height
        assert bar_metric(CAT, CAT.flow(s_star, p), psi_flow(ss, t, p)) <= 1e-7
        if not trapped[0]:
            assert ss.clock(p, s_star) == pytest.approx(t, abs=1e-8)

    def test_negative_times(self):
        ss = point_brake(Power(1, 0.2))
        p = FiberPoint((0.41, 0.13), 0.7)
        q = psi_flow(ss, -1.3, p)
        assert bar_metric(CAT, psi_flow(ss, 1.3, q), p) <= 1e-7

    def test_clock_strictly_increasing(self):
        ss = point_brake(Exponential(0.05, 0.05))
        p = FiberPoint((SIGMA.base[0] + 0.003, SIGMA.base[1]), 0.0)
        vals = [ss.clock(p, s) for s in np.linspace(0.01, 2.0, 60)]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestGamma:
    def test_regular(self):
        assert gamma(SingularSuspension(CAT), (0.3, 0.3)) == 1.0

    def test_infinite_over_projection(self):
        assert math.isinf(gamma(point_brake(Power(1, 0.05)), SIGMA.base))

    @pytest.mark.parametrize("profile", [Power(1, 0.005), Power(2, 0.005), Exponential(0.005, 0.005)])
    def test_divergence_along_ray(self, profile):
        ss = point_brake(profile)
        vals = [gamma(ss, ((SIGMA.base[0] + 2.0 ** -n) % 1.0, SIGMA.base[1])) for n in range(8, 31)]
        # strictly increasing while below the cap; past it the clock is reported infinite
        finite = [v for v in vals if math.isfinite(v)]
        assert all(b > a for a, b in zip(finite, finite[1:]))
        assert all(math.isinf(v) for v in vals[len(finite):])
        if not (isinstance(profile, Power) and profile.k == 1):
            # k = 1 only grows like log(1/d)
            assert vals[-1] > 1e4

    def test_exceeds_caps(self):
        ss = SingularSuspension(CAT, Brake(PointList((SIGMA,)), Power(2, 0.005)), cap=1e12)
        g = gamma(ss, ((SIGMA.base[0] + 2.0 ** -30) % 1.0, SIGMA.base[1]))
        assert g > 1e4


class TestExpectedGamma:
    def test_regular(self):
        res = expected_gamma(SingularSuspension(CAT), LebesgueOnBase(CatMap()), 200)
        assert res == Finite(1.0, 0.0)

    def test_rejects_small_samples(self):
        with pytest.raises(UsageError):
            expected_gamma(SingularSuspension(CAT), LebesgueOnBase(CatMap()), 10)

    def test_mild_brake_finite(self):
        res = expected_gamma(point_brake(Power(0.5, 0.05)), LebesgueOnBase(CatMap(), seed=1), 1300)
        assert isinstance(res, Finite)
        assert 1.0 <= res.estimate < 1.1

    def test_strong_brake_diverges(self):
        res = expected_gamma(point_brake(Power(4, 0.05)), LebesgueOnBase(CatMap(), seed=1), 1300)
        assert isinstance(res, DivergenceSuspected)

    def test_refinement_oracle(self):
        # k = 0.5 estimates settle as annuli are added; k = 4 lower bounds keep growing
        mild = [expected_gamma(point_brake(Power(0.5, 0.05)), LebesgueOnBase(CatMap(), seed=2), 1300, levels=L)
                for L in (6, 9, 12)]
        assert all(isinstance(r, Finite) for r in mild)
        assert abs(mild[2].estimate - mild[1].estimate) <= 3 * math.hypot(mild[2].stderr, mild[1].stderr)

        def bound(r):
            return r.lower_bound if isinstance(r, DivergenceSuspected) else r.estimate

        strong = [bound(expected_gamma(point_brake(Power(4, 0.05)), LebesgueOnBase(CatMap(), seed=2), 1300,
                                       levels=L)) for L in (6, 9, 12)]
        assert strong[0] < strong[1] < strong[2]

    def test_whole_fiber_diverges(self):
        ss = SingularSuspension(CAT, Brake(WholeFiber(0.5), Power(1)))
        assert isinstance(expected_gamma(ss, LebesgueOnBase(CatMap()), 200), DivergenceSuspected)


class TestASing:
    def test_empty(self):
        assert a_sing_sample(SingularSuspension(CAT), 3).points == ()

    def test_depth_two(self):
        f = CatMap()
        pts = a_sing_sample(point_brake(Power(1)), 2).points
        expect = [f.iterate(SIGMA.base, n) for n in range(-2, 3)]
        assert len(pts) == 5
        for e in expect:
            assert min(f.distance(e, q) for q in pts) < 1e-12

    def test_whole_fiber_flag(self):
        ss = SingularSuspension(CAT, Brake(WholeFiber(0.5), Power(1)))
        assert a_sing_sample(ss, 2).whole_space

    def test_periodic_point_dedup(self):
        mt = MappingTorus(FullShift(2))
        x = SymbolSequence.periodic([0, 0, 1])
        ss = SingularSuspension(mt, Brake(PointList((FiberPoint(x, 0.5),)), Power(1)))
        pts = a_sing_sample(ss, 8).points
        assert len({tuple(q.window(-5, 5)) for q in pts}) == 3

    def test_negative_depth(self):
        with pytest.raises(UsageError):
            a_sing_sample(SingularSuspension(CAT), -1)


class TestLift:
    def test_probability(self):
        ss = SingularSuspension(CAT)
        assert lift_integral(ss, LebesgueOnBase(CatMap()), lambda q: 1.0, 100) == pytest.approx(1.0)

    def test_half_fiber(self):
        ss = SingularSuspension(CAT)
        val = lift_integral(ss, LebesgueOnBase(CatMap()), lambda q: float(q.height < 0.5), 100)
        assert val == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("s", [0.37, 1.5])
    def test_invariance(self, s):
        ss = point_brake(Power(0.5, 0.2))
        mu = LebesgueOnBase(CatMap(), seed=4)
        xi = lambda q: math.cos(2 * math.pi * q.base[0]) + q.height
        a, sa = lift_integral(ss, mu, xi, 300, with_stderr=True)
        b, sb = lift_integral(ss, mu, lambda q: xi(psi_flow(ss, s, q)), 300, with_stderr=True)
        assert abs(a - b) <= 3 * math.hypot(sa, sb)
