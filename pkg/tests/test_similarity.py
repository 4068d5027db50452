import ipaddress
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flow, random_records
from oracles import lcp_bits_oracle
from mfstl.similarity import (ServicePortMap, SimilarityWeights, candidate_pair_components,
                              combined_similarity, component_similarities, entropy_weights,
                              ip_similarity, payload_similarity, port_similarity,
                              protocol_similarity, train_entropy_weights)
from mfstl.flows import SamplePartition


class TestIp:
    def test_identical(self):
        assert ip_similarity(flow(sa="10.0.0.1"), flow(sa="10.0.0.1")) == 1.0

    def test_half_prefix_against_bit_oracle(self):
        a = flow(sa="192.168.0.0", da="1.0.0.0")
        b = flow(sa="192.168.128.0", da="255.0.0.0")
        expect = max(lcp_bits_oracle(x, y) for x in (a.sa, a.da) for y in (b.sa, b.da)) / 32
        assert expect == 0.5
        assert ip_similarity(a, b) == expect

    def test_cross_family(self):
        a = flow(sa="10.0.0.1", da="10.0.0.2")
        b = flow(sa="::1", da="2001:db8::1")
        assert ip_similarity(a, b) == 0.0

    @given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1),
           st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
    @settings(max_examples=300)
    def test_matches_bit_oracle(self, i1, i2, i3, i4):
        ips = [str(ipaddress.IPv4Address(i)) for i in (i1, i2, i3, i4)]
        a, b = flow(sa=ips[0], da=ips[1]), flow(sa=ips[2], da=ips[3])
        expect = max(lcp_bits_oracle(x, y) for x in (a.sa, a.da) for y in (b.sa, b.da)) / 32
        assert ip_similarity(a, b) == expect
        assert ip_similarity(b, a) == expect


class TestPort:
    def test_same_http_port(self):
        assert port_similarity(flow(dp=80), flow(dp=80)) == 1

    def test_bittorrent_range(self):
        assert port_similarity(flow(sp=50000, dp=6881), flow(sp=50001, dp=6889)) == 1

    def test_distinct_services(self):
        assert port_similarity(flow(sp=50000, dp=80), flow(sp=50001, dp=53)) == 0

    def test_unmapped_ports_only_match_themselves(self):
        m = ServicePortMap.default()
        assert m.service(50000) != m.service(50001)
        assert port_similarity(flow(sp=50000, dp=80), flow(sp=443, dp=50000)) == 1

    def test_custom_map_from_file(self, tmp_path):
        path = tmp_path / "ports.txt"
        path.write_text("# comment\n80,web\n8080,web\n9000-9010,app\n")
        m = ServicePortMap.load(str(path))
        assert m.service(8080) == m.service(80) == "web"
        assert m.service(9005) == "app"
        assert port_similarity(flow(sp=1, dp=80), flow(sp=2, dp=8080), m) == 1

    def test_overlapping_ranges_rejected(self):
        with pytest.raises(ValueError):
            ServicePortMap({}, [(10, 20, "a"), (15, 30, "b")])


class TestProtocolPayload:
    @pytest.mark.parametrize("a, b, out", [(6, 6, 1), (6, 17, 0), (1, 1, 1)])
    def test_protocol(self, a, b, out):
        assert protocol_similarity(flow(pr=a), flow(pr=b)) == out

    @pytest.mark.parametrize("a, b, out", [(500, 1000, 0.5), (0, 0, 1.0), (1024, 1024, 1.0),
                                           (0, 7, 0.0)])
    def test_payload(self, a, b, out):
        assert payload_similarity(flow(ps=a), flow(ps=b)) == out


class TestCombined:
    def test_identical_flows(self):
        f = flow()
        assert combined_similarity(f, f, SimilarityWeights()) == 1.0

    def test_all_zero(self):
        a = flow(sa="0.0.0.0", da="0.0.0.0", sp=1, dp=2, pr=6, ps=0)
        b = flow(sa="255.255.255.255", da="255.255.255.255", sp=3, dp=4, pr=17, ps=9)
        assert component_similarities(a, b) == (0.0, 0, 0, 0.0)
        assert combined_similarity(a, b, SimilarityWeights()) == 0.0

    def test_uniform_arithmetic(self):
        a = flow(sa="192.168.0.0", da="1.0.0.0", sp=1, dp=80, ps=500)
        b = flow(sa="192.168.128.0", da="255.0.0.0", sp=2, dp=80, ps=1000)
        assert component_similarities(a, b) == (0.5, 1, 1, 0.5)
        assert combined_similarity(a, b, SimilarityWeights()) == pytest.approx(0.75)

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            SimilarityWeights(0.5, 0.5, 0.5, 0.0)
        with pytest.raises(ValueError):
            SimilarityWeights(1.2, -0.2, 0.0, 0.0)

    def test_symmetry_and_range_on_random_flows(self):
        rng = random.Random(1)
        recs = random_records(rng, 80, 1.0)
        w = SimilarityWeights(0.1, 0.4, 0.2, 0.3)
        for a in recs:
            for b in recs[:20]:
                r = combined_similarity(a, b, w)
                assert 0.0 <= r <= 1.0 + 1e-12
                assert r == pytest.approx(combined_similarity(b, a, w), abs=1e-15)


def entropy_oracle(x):
    """Textbook entropy weights written directly from the definition."""
    x = np.asarray(x, float)
    n, k = x.shape
    d = []
    for j in range(k):
        s = x[:, j].sum()
        if s == 0:
            d.append(0.0)
            continue
        e = 0.0
        for v in x[:, j] / s:
            if v > 0:
                e -= v * math.log(v)
        d.append(max(0.0, 1 - e / math.log(n)))
    tot = sum(d)
    return [1 / k] * k if tot == 0 else [v / tot for v in d]


class TestEntropyWeights:
    def test_constant_column_gets_zero(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, size=(50, 4))
        x[:, 2] = 0.7
        w = entropy_weights(x)
        assert w.w_pr == pytest.approx(0.0, abs=1e-12)
        assert sum(w.as_tuple()) == pytest.approx(1.0)

    def test_identical_columns(self):
        col = np.linspace(0.1, 1, 20)
        w = entropy_weights(np.column_stack([col] * 4))
        assert w.as_tuple() == pytest.approx((0.25,) * 4)

    def test_padded_identity(self):
        w = entropy_weights([[1, 0, 0, 0], [0, 1, 0, 0]])
        assert w.as_tuple() == pytest.approx(tuple(entropy_oracle([[1, 0, 0, 0], [0, 1, 0, 0]])))
        assert w.as_tuple() == pytest.approx((0.5, 0.5, 0.0, 0.0))

    def test_all_constant_is_uniform(self):
        assert entropy_weights(np.full((5, 4), 0.3)).as_tuple() == pytest.approx((0.25,) * 4)

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            entropy_weights(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            entropy_weights(np.zeros((1, 4)))
        with pytest.raises(ValueError):
            entropy_weights([[2, 0, 0, 0], [0, 0, 0, 0]])

    @given(st.lists(st.lists(st.floats(0, 1), min_size=4, max_size=4), min_size=2, max_size=40),
           st.randoms(use_true_random=False))
    @settings(max_examples=200, deadline=None)
    def test_oracle_and_row_permutation(self, rows, rnd):
        w = entropy_weights(rows)
        assert w.as_tuple() == pytest.approx(tuple(entropy_oracle(rows)), abs=1e-9)
        shuffled = list(rows)
        rnd.shuffle(shuffled)
        assert entropy_weights(shuffled).as_tuple() == pytest.approx(w.as_tuple(), abs=1e-9)
        assert all(v >= 0 for v in w.as_tuple())


class TestTraining:
    def test_candidate_pairs_window_and_keys(self):
        a = flow(0.0, sp=1)
        b = flow(0.05, sp=1)          # same key as a
        c = flow(0.08, sp=2)
        d = flow(0.5, sp=3)
        rows = candidate_pair_components([a, b, c, d], 0.1)
        assert len(rows) == 2        # a-c and b-c

    def test_fallback_uniform(self):
        p = SamplePartition(0, 0, 60, (flow(0.0),))
        assert train_entropy_weights([p], 0.1) == SimilarityWeights.uniform()

    def test_cap_is_deterministic(self):
        rng = random.Random(3)
        p = SamplePartition(0, 0, 60, tuple(random_records(rng, 300, 2.0)))
        w1 = train_entropy_weights([p], 0.5, cap=50)
        w2 = train_entropy_weights([p], 0.5, cap=50)
        assert w1 == w2
        assert sum(w1.as_tuple()) == pytest.approx(1.0)
