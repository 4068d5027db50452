import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import fcm_restart_reference, partition_oracle
from mfstl.flows import ABNORMAL, NORMAL
from mfstl.ifs import (CharacteristicModel, InsufficientDataError, IntuitionisticValue,
                       distinction_partition, fcm_centers, ifs_ad_classify, ifs_of_value,
                       interval_of, membership, membership_widths, nonmembership,
                       partition_domain, train_characteristic)


def model(centers, alpha=0.2, beta=0.8, ac=(0,), nc=None, values=None):
    centers = np.asarray(centers, float)
    values = centers if values is None else values
    bounds = partition_domain(values, centers, 1.0, 1.0)
    nc = tuple(i for i in range(len(centers)) if i not in ac) if nc is None else nc
    return CharacteristicModel("x", centers, bounds, 1.0, 1.0, alpha, beta, tuple(ac), nc)


class TestFcm:
    def test_two_point_masses(self):
        c = fcm_centers([0, 0, 0, 10, 10, 10], 2)
        assert c == pytest.approx([0, 10], abs=1e-3)

    def test_constant_series(self):
        with pytest.raises(InsufficientDataError):
            fcm_centers([3.0] * 10, 2)

    def test_too_few_distinct(self):
        with pytest.raises(InsufficientDataError):
            fcm_centers([1, 2, 2, 1], 3)

    def test_bimodal_against_restart_reference(self):
        rng = np.random.default_rng(7)
        x = np.concatenate([rng.normal(0, 1, 200), rng.normal(10, 1, 200)])
        got = fcm_centers(x, 2)
        ref = fcm_restart_reference(x, 2)
        assert got == pytest.approx(ref, abs=0.2)
        assert got == pytest.approx([x[:200].mean(), x[200:].mean()], abs=0.2)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=12, max_size=60, unique=True),
           st.integers(2, 5))
    @settings(max_examples=100, deadline=None)
    def test_sorted_and_inside_range(self, values, m):
        try:
            c = fcm_centers(values, m)
        except InsufficientDataError:
            return
        assert np.all(np.diff(c) > 0)
        assert min(values) - 1e-9 <= c[0] and c[-1] <= max(values) + 1e-9

    def test_affine_equivariance(self):
        rng = np.random.default_rng(1)
        x = rng.gamma(2.0, 3.0, 120)
        c = fcm_centers(x, 4)
        c2 = fcm_centers(5.0 * x - 7.0, 4)
        assert c2 == pytest.approx(5.0 * c - 7.0, rel=1e-9, abs=1e-9)


class TestDomain:
    def test_two_centres(self):
        assert list(partition_domain([0, 10], [0, 10], 1, 1)) == [-1, 5, 11]

    def test_three_centres(self):
        assert list(partition_domain([0, 5], [1, 2, 4], 1, 1)[1:-1]) == [1.5, 3]

    def test_margins_must_be_positive(self):
        with pytest.raises(ValueError):
            partition_domain([0, 1], [0, 1], 0, 1)

    def test_interval_lookup(self):
        b = [-1, 5, 11]
        assert [interval_of(x, b) for x in (-5, 0, 4.99, 5, 10, 50)] == [0, 0, 0, 1, 1, 1]


class TestMembership:
    def test_one_at_centre(self):
        mdl = model([0, 3, 10])
        for i, v in enumerate(mdl.centers):
            assert membership(v, i, mdl) == 1.0

    @pytest.mark.parametrize("alpha", [0.0, 0.2, 0.5, 0.9])
    def test_boundary_value(self, alpha):
        mdl = model([0, 3, 10], alpha=alpha)
        for i in (1, 2):
            mid = (mdl.centers[i - 1] + mdl.centers[i]) / 2
            assert membership(mid, i, mdl) == pytest.approx((1 - alpha) / 2, rel=1e-12)
        # the first interval borrows the right-hand gap
        assert membership(1.5, 0, mdl) == pytest.approx((1 - alpha) / 2, rel=1e-12)

    def test_alpha_point_two(self):
        mdl = model([0, 10], alpha=0.2)
        assert membership(5, 1, mdl) == pytest.approx(0.4)

    def test_widths_reject_alpha_one(self):
        with pytest.raises(ValueError):
            membership_widths([0, 1], 1.0)


class TestNonMembership:
    def test_examples(self):
        assert nonmembership(1.0, 0.8) == 0.0
        assert nonmembership(0.0, 0.8) == 1.0
        v = IntuitionisticValue.of(0.5, nonmembership(0.5, 1.0))
        assert (v.gamma, v.pi) == (0.5, 0.0)

    def test_beta_range(self):
        with pytest.raises(ValueError):
            nonmembership(0.5, 0.0)
        with pytest.raises(ValueError):
            nonmembership(0.5, 1.5)

    def test_grid_never_exceeds_complement(self):
        for beta in np.linspace(0.05, 1.0, 20):
            for mu in np.linspace(0, 1, 201):
                assert mu + nonmembership(mu, beta) <= 1.0 + 1e-12


class TestIfsOfValue:
    def test_at_centre(self):
        mdl = model([0, 10, 20])
        row = ifs_of_value(10, mdl)
        assert (row[1].mu, row[1].gamma, row[1].pi) == (1.0, 0.0, 0.0)

    def test_far_outside(self):
        mdl = model([0, 10, 20])
        for v in ifs_of_value(1e4, mdl):
            assert v.mu < 1e-6 and v.gamma > 1 - 1e-6

    @given(st.floats(-100, 100), st.floats(0.01, 1.0), st.floats(0.0, 0.9))
    @settings(max_examples=200)
    def test_invariants(self, x, beta, alpha):
        mdl = model([-5, 0, 2, 30], alpha=alpha, beta=beta)
        for v in ifs_of_value(x, mdl):
            assert 0 <= v.mu <= 1 and 0 <= v.gamma <= 1
            assert v.mu + v.gamma <= 1
            assert abs(v.pi - (1 - v.mu - v.gamma)) <= 1e-12


class TestDistinction:
    def test_perfect_separation(self):
        p = distinction_partition([(5, 0), (0, 7), (3, 0), (0, 1)])
        assert p.ac == (0, 2) and p.nc == (1, 3)
        assert p.tau == 1.0

    def test_uniform_mix(self):
        p = distinction_partition([(4, 4), (2, 2), (7, 7)])
        assert p.eta == 0 and p.tau == 0

    def test_three_interval_example(self):
        tallies = [(9, 1), (1, 9), (5, 5)]
        p = distinction_partition(tallies)
        ac, nc, tau = partition_oracle(tallies)
        assert (p.ac, p.nc) == (ac, nc)
        assert p.tau == pytest.approx(tau, abs=1e-12)

    def test_all_normal_is_degenerate(self):
        p = distinction_partition([(0, 3), (0, 4)])
        assert p.degenerate

    def test_errors(self):
        with pytest.raises(ValueError):
            distinction_partition([(1, 1)])
        with pytest.raises(ValueError):
            distinction_partition([(0, 0), (0, 0)])

    @given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=2, max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_matches_exhaustive_oracle(self, tallies):
        assume(sum(a + n for a, n in tallies) > 0)
        p = distinction_partition(tallies)
        ac, nc, tau = partition_oracle(tallies)
        assert (p.ac, p.nc) == (ac, nc)
        assert p.tau == pytest.approx(tau, abs=1e-12)
        assert 0 <= p.tau <= 1


def _labeled_series(seed, n=80):
    rng = random.Random(seed)
    vals, labs = [], []
    for _ in range(n):
        if rng.random() < 0.3:
            vals.append(rng.gauss(50, 4))
            labs.append(ABNORMAL)
        else:
            vals.append(rng.gauss(10, 3))
            labs.append(NORMAL)
    return np.array(vals), labs


class TestTrain:
    def test_separable_series(self):
        x, labs = _labeled_series(0)
        mdl = train_characteristic("edge_number", x, labs, m=4)
        assert mdl.tau > 0.9
        assert ifs_ad_classify(50, mdl) == ABNORMAL
        assert ifs_ad_classify(10, mdl) == NORMAL
        assert sum(a + n for a, n in mdl.tallies) == len(x)

    def test_classify_at_centres(self):
        x, labs = _labeled_series(1)
        mdl = train_characteristic("k", x, labs, m=5)
        for i, v in enumerate(mdl.centers):
            want = ABNORMAL if i in mdl.ac else NORMAL
            assert ifs_ad_classify(v, mdl) == want

    def test_far_outside_still_decides(self):
        mdl = model([0, 10], ac=(1,))
        assert ifs_ad_classify(1e6, mdl) == ABNORMAL
        assert ifs_ad_classify(-1e6, mdl) == NORMAL

    @pytest.mark.parametrize("scale, shift", [(2.0, 0.0), (0.01, 5.0), (1000.0, -3.0)])
    def test_affine_invariance(self, scale, shift):
        x, labs = _labeled_series(2)
        a = train_characteristic("k", x, labs, m=6)
        b = train_characteristic("k", scale * x + shift, labs, m=6)
        assert (a.ac, a.nc, a.tallies) == (b.ac, b.nc, b.tallies)
        assert a.tau == pytest.approx(b.tau, abs=1e-12)
        for v in (5.0, 20.0, 48.0):
            assert ifs_ad_classify(v, a) == ifs_ad_classify(scale * v + shift, b)

    def test_round_trip(self):
        x, labs = _labeled_series(3)
        mdl = train_characteristic("k", x, labs, m=4)
        back = CharacteristicModel.from_dict(mdl.to_dict())
        assert back.to_dict() == mdl.to_dict()
        assert ifs_ad_classify(33.3, back) == ifs_ad_classify(33.3, mdl)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            train_characteristic("k", [1, 2, 3], [NORMAL])


def test_of_clamps_float_noise():
    v = IntuitionisticValue.of(0.7, 0.30000000000000004)
    assert v.mu + v.gamma <= 1 and v.pi >= 0
    assert math.isclose(v.score(), 0.4) and math.isclose(v.precision(), 1.0)
