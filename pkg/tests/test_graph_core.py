"""Graph core: construction, set algebra, and the k-power verifier."""

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from hampow import (
    build_graph,
    common_neighborhood,
    complete_graph,
    cycle_power,
    edges_between,
    gnp,
    verify_kpower,
)
from hampow.bits import bit_list, iter_bits, mask_of
from hampow.graph import end_tuple, start_tuple


def naive_edges_between(g, a, b):
    return sum(1 for u in a for v in b if g.has_edge(u, v))


def naive_common_neighborhood(g, t, x):
    out = set(x)
    for v in t:
        out &= set(g.neighbors(v))
    return out


class TestBuildGraph:
    def test_triangle(self):
        g = build_graph(3, [(0, 1), (1, 2), (0, 2)])
        assert g.m == 3
        assert all(g.degree(v) == 2 for v in range(3))

    def test_edgeless(self):
        g = build_graph(2, [])
        assert g.m == 0

    def test_duplicate_collapse(self):
        g = build_graph(4, [(0, 1), (1, 0)])
        assert g.m == 1

    def test_out_of_range_names_index(self):
        with pytest.raises(ValueError, match="edge 1"):
            build_graph(3, [(0, 1), (0, 5)])

    def test_loop_names_index(self):
        with pytest.raises(ValueError, match="edge 0"):
            build_graph(3, [(2, 2)])

    def test_symmetry_and_edge_count_invariant(self):
        g = gnp(30, 0.4, seed=8)
        for v in range(g.n):
            for u in iter_bits(g.rows[v]):
                assert g.has_edge(u, v)
            assert not g.rows[v] >> v & 1
        assert sum(r.bit_count() for r in g.rows) == 2 * g.m


class TestEdgesBetween:
    def test_complete_bipartite_count(self):
        g = complete_graph(4)
        assert edges_between(g, mask_of([0, 1]), mask_of([2, 3])) == 4

    def test_edgeless(self):
        g = build_graph(6, [])
        assert edges_between(g, mask_of([0, 1]), mask_of([3, 4])) == 0

    def test_matches_naive_on_random_sets(self):
        g = gnp(12, 0.5, seed=1)
        rng = random.Random(0)
        for _ in range(25):
            verts = rng.sample(range(12), 8)
            a, b = verts[:4], verts[4:]
            assert edges_between(g, mask_of(a), mask_of(b)) == naive_edges_between(g, a, b)

    def test_symmetric(self):
        g = gnp(14, 0.4, seed=2)
        a, b = mask_of([0, 2, 4]), mask_of([1, 3, 5])
        assert edges_between(g, a, b) == edges_between(g, b, a)

    def test_overlap_rejected(self):
        g = complete_graph(4)
        with pytest.raises(ValueError):
            edges_between(g, mask_of([0, 1]), mask_of([1, 2]))


class TestCommonNeighborhood:
    def test_complete_graph(self):
        g = complete_graph(5)
        assert common_neighborhood(g, (0, 1), mask_of([2, 3, 4])) == mask_of([2, 3, 4])

    def test_path(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        assert common_neighborhood(g, (0, 2), mask_of([1])) == mask_of([1])

    def test_empty_tuple_returns_x(self):
        g = gnp(8, 0.5, seed=3)
        x = mask_of([1, 4, 6])
        assert common_neighborhood(g, (), x) == x

    def test_matches_naive(self):
        g = gnp(14, 0.6, seed=3)
        rng = random.Random(1)
        for _ in range(20):
            t = tuple(rng.sample(range(14), 2))
            got = common_neighborhood(g, t, g.full_mask)
            assert set(bit_list(got)) == naive_common_neighborhood(g, t, range(14))

    def test_arity_monotone_nesting(self):
        g = gnp(16, 0.5, seed=4)
        x = g.full_mask
        t = (0, 1, 2)
        inner = common_neighborhood(g, t, x)
        outer = common_neighborhood(g, t[1:], x)
        assert inner & ~outer == 0


class TestVerifyKPower:
    def test_cycle_power_identity(self):
        g = cycle_power(10, 2)
        assert verify_kpower(g, list(range(10)), 2, cyclic=True)

    def test_k5_any_permutation(self):
        g = complete_graph(5)
        for perm in itertools.permutations(range(5)):
            assert verify_kpower(g, list(perm), 2, cyclic=True)

    def test_plain_cycle_missing_chords(self):
        g = build_graph(10, [(i, (i + 1) % 10) for i in range(10)])
        assert not verify_kpower(g, list(range(10)), 2, cyclic=True)

    def test_prefix_property(self):
        g = gnp(20, 0.8, seed=5)
        rng = random.Random(2)
        for _ in range(50):
            order = rng.sample(range(20), 8)
            if verify_kpower(g, order, 2):
                for cut in range(1, 8):
                    assert verify_kpower(g, order[:cut], 2)

    def test_short_sequence_is_clique_check(self):
        g = build_graph(3, [(0, 1)])
        assert verify_kpower(g, [0, 1], 3)
        assert not verify_kpower(g, [0, 2], 3)

    def test_repeated_vertex_fails(self):
        g = complete_graph(5)
        assert not verify_kpower(g, [0, 1, 0], 2)


def test_tuple_conventions():
    order = [3, 1, 4, 1 + 4, 9, 2]
    assert start_tuple(order, 2) == (1, 3)
    assert end_tuple(order, 2) == (9, 2)


def test_randomized_cross_check_against_naive():
    """All three core ops agree with naive references on 100+ small graphs."""
    rng = random.Random(99)
    for trial in range(110):
        n = rng.randint(4, 16)
        g = gnp(n, rng.choice([0.2, 0.5, 0.8]), seed=trial)
        verts = list(range(n))
        rng.shuffle(verts)
        half = max(1, n // 3)
        a, b = verts[:half], verts[half : 2 * half]
        assert edges_between(g, mask_of(a), mask_of(b)) == naive_edges_between(g, a, b)
        t = tuple(verts[:2])
        assert set(bit_list(common_neighborhood(g, t, g.full_mask))) == (
            naive_common_neighborhood(g, t, range(n))
        )
        order = verts[: min(n, 6)]
        k = rng.choice([1, 2, 3])
        naive_ok = all(
            g.has_edge(order[i], order[j])
            for i in range(len(order))
            for j in range(i + 1, min(len(order), i + k + 1))
        )
        assert verify_kpower(g, order, k) == naive_ok


@given(st.integers(4, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_edges_between_partition_sums_to_degree(n, seed):
    g = gnp(n, 0.5, seed=seed)
    v = 0
    rest = list(range(1, n))
    a = mask_of(rest[: n // 2])
    b = mask_of(rest[n // 2 :])
    assert (
        edges_between(g, 1, a) + edges_between(g, 1, b) == g.degree(v)
    )
