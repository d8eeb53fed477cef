import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import CAT_ENTROPY, cat_entropy_from_eigen, shift_separated_count
from singsusp.entropy import (
    CylinderSampler,
    entropy_estimate_flow,
    entropy_estimate_map,
    fit_slopes,
    separated_count,
)
from singsusp.mapping_torus import MappingTorus
from singsusp.singular import Brake, LebesgueOnBase, SingularSuspension, WholeFiber, Power
from singsusp.symbolic import full_shift_entropy
from singsusp.systems import CatMap, CircleRotation, FullShift, Product, SymbolSequence, UsageError

LOG2 = math.log(2)


def test_cat_oracle_consistent():
    assert cat_entropy_from_eigen() == pytest.approx(CAT_ENTROPY, rel=1e-12)
    assert CAT_ENTROPY == pytest.approx(0.9624, abs=1e-4)


class TestSeparatedCount:
    @pytest.mark.parametrize("n", [0, 1, 3, 5])
    def test_shift_half_scale_counts_words(self, n):
        import itertools

        f = FullShift(2)
        pts = [SymbolSequence.from_window(w, 0) for w in itertools.product((0, 1), repeat=n + 1)]
        assert separated_count(pts, f.step, f.distance, n, 0.5) == shift_separated_count(n) == 2 ** (n + 1)

    @pytest.mark.parametrize("n", [1, 4, 9])
    def test_rotation_time_adds_nothing(self, n):
        f = CircleRotation(0.1234)
        rng = np.random.default_rng(0)
        pts = [(float(v),) for v in rng.random(300)]
        assert separated_count(pts, f.step, f.distance, n, 0.05) == separated_count(pts, f.step, f.distance, 0, 0.05)

    def test_single_point(self):
        f = CatMap()
        assert separated_count([(0.1, 0.2)], f.step, f.distance, 5, 0.01) == 1

    def test_empty_rejected(self):
        with pytest.raises(UsageError):
            separated_count([], CatMap().step, CatMap().distance, 1, 0.1)

    def test_greedy_order_factor_two(self):
        f = CatMap()
        rng = np.random.default_rng(1)
        pts = [tuple(v) for v in rng.random((400, 2))]
        counts = []
        for seed in range(5):
            order = np.random.default_rng(seed).permutation(len(pts))
            counts.append(separated_count([pts[i] for i in order], f.step, f.distance, 3, 0.125))
        assert max(counts) / min(counts) <= 2.0


class TestFit:
    def test_exponential(self):
        counts = {(n, 0.1): 2 ** n for n in range(2, 10)}
        fits, headline, inconclusive, sat = fit_slopes(counts, 10 ** 6)
        assert headline == pytest.approx(LOG2)
        assert not inconclusive and not sat

    def test_saturated_tail_dropped(self):
        counts = {(n, 0.1): min(2 ** n, 1000) for n in range(2, 14)}
        fits, headline, _, sat = fit_slopes(counts, 1000)
        assert headline == pytest.approx(LOG2)
        assert fits[0].n_window[1] == 6  # 2^7 > 1000 / 8
        assert (13, 0.1) in sat

    def test_grid_with_step_two(self):
        counts = {(n, 0.1): 3 ** n for n in range(2, 12, 2)}
        _, headline, inconclusive, _ = fit_slopes(counts, 10 ** 9)
        assert headline == pytest.approx(math.log(3))
        assert not inconclusive

    def test_linear_growth_reads_small_at_tail(self):
        counts = {(n, 0.1): 10 * n for n in range(2, 41)}
        _, headline, _, _ = fit_slopes(counts, 10 ** 9)
        assert headline < 0.05

    def test_all_saturated_inconclusive(self):
        counts = {(n, 0.1): 500 for n in range(2, 6)}
        fits, headline, inconclusive, _ = fit_slopes(counts, 1000)
        assert inconclusive and headline == 0.0

    def test_headline_is_max_over_eps(self):
        counts = {(n, 0.1): 2 ** n for n in range(2, 8)}
        counts.update({(n, 0.05): 3 ** n for n in range(2, 8)})
        _, headline, _, _ = fit_slopes(counts, 10 ** 6)
        assert headline == pytest.approx(math.log(3))


class TestMapEstimates:
    def test_shift_cylinders(self):
        est = entropy_estimate_map(FullShift(2), CylinderSampler(2), range(2, 15))
        assert est.headline == pytest.approx(LOG2, rel=0.05)
        assert est.check_monotone()

    def test_shift_consistent_with_word_count(self):
        est = entropy_estimate_map(FullShift(2), CylinderSampler(2), range(2, 12))
        assert est.headline == pytest.approx(full_shift_entropy(2), rel=0.05)

    def test_shift_cylinder_counts_exact(self):
        est = entropy_estimate_map(FullShift(2), CylinderSampler(2), range(2, 8), [0.5])
        for n in range(2, 8):
            assert est.counts[(n, 0.5)] == 2 ** (n + 1)

    def test_rotation_zero(self):
        est = entropy_estimate_map(CircleRotation(0.1234), LebesgueOnBase(CircleRotation(0.1234)), range(2, 11),
                                   n_samples=4096)
        assert est.headline <= 0.02
        assert est.check_monotone()

    def test_cat(self):
        est = entropy_estimate_map(CatMap(), LebesgueOnBase(CatMap()), range(2, 11), n_samples=1 << 14)
        assert est.headline == pytest.approx(CAT_ENTROPY, rel=0.10)
        assert est.check_monotone()

    def test_product_additive(self):
        f, g = CatMap(), CatMap()
        P = Product([f, g])
        eps = [0.25, 0.125]
        hp = entropy_estimate_map(P, LebesgueOnBase(P), range(1, 6), eps, n_samples=1 << 14).headline
        hf = entropy_estimate_map(f, LebesgueOnBase(f), range(1, 6), eps, n_samples=1 << 14).headline
        assert hp == pytest.approx(2 * hf, rel=0.15)

    def test_serialisation(self):
        est = entropy_estimate_map(FullShift(2), CylinderSampler(2), range(2, 5), [0.5, 0.25])
        obj = json.loads(json.dumps(est.to_json()))
        assert obj["headline"] == est.headline
        lines = est.to_tsv().splitlines()
        assert lines[0] == "n\teps\tcount\tlog_count"
        assert len(lines) == 1 + len(est.counts)

    def test_empty_grid(self):
        with pytest.raises(UsageError):
            entropy_estimate_map(FullShift(2), CylinderSampler(2), [], [0.5])


class TestFlowEstimates:
    def test_roof_one_shift(self):
        f = FullShift(2)
        ss = SingularSuspension(MappingTorus(f))
        base = entropy_estimate_map(f, CylinderSampler(2), range(2, 13)).headline
        flow = entropy_estimate_flow(ss, LebesgueOnBase(f), range(2, 9), [0.5, 0.25], n_samples=2048)
        assert flow.headline == pytest.approx(base, rel=0.10)
        assert flow.check_monotone()

    def test_fiber_kill(self):
        f = FullShift(2)
        ss = SingularSuspension(MappingTorus(f), Brake(WholeFiber(0.5), Power(1)))
        est = entropy_estimate_flow(ss, LebesgueOnBase(f), range(2, 11), [0.5, 0.25, 0.125], n_samples=2048)
        assert est.headline <= 0.05
        assert est.tail_slope(3) <= 0.05

    def test_rotation_regular(self):
        f = CircleRotation(0.1234)
        est = entropy_estimate_flow(SingularSuspension(MappingTorus(f)), LebesgueOnBase(f), range(2, 11),
                                    n_samples=2048)
        assert est.headline <= 0.02
        assert est.check_monotone()


@settings(max_examples=15)
@given(st.integers(0, 2 ** 31 - 1))
def test_map_counts_monotone(seed):
    est = entropy_estimate_map(CatMap(), LebesgueOnBase(CatMap(), seed=seed), range(1, 6), [0.25, 0.125],
                               n_samples=512)
    assert est.check_monotone()
