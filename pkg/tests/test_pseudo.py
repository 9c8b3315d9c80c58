"""Pseudorandomness checkers, spectral certifier, connectedness predicates."""

import math
import random

import pytest

from hampow import (
    PseudoParams,
    build_graph,
    certify_via_spectrum,
    check_jumbled,
    check_pseudorandom_exact,
    check_pseudorandom_sampled,
    complete_graph,
    connectedness_witness,
    cycle_power,
    edges_between,
    gnp,
    implied_density,
    is_connected_tuple,
    low_degree_vertices,
    paley,
    second_eigenvalue,
)
from hampow.bits import bit_list, mask_of
from hampow.graph import common_neighborhood
from hampow.pseudo import (
    SATISFIED,
    UNDETERMINED,
    VIOLATED,
    critical_epsilon,
    max_jumbled_discrepancy,
    witness_is_valid,
)


class TestSecondEigenvalue:
    def test_complete_graph(self):
        assert second_eigenvalue(complete_graph(4)) == pytest.approx(1.0, abs=1e-9)

    def test_cycle_closed_form(self):
        # eigenvalues of C_6 are 2cos(2*pi*j/6); the most negative is -2
        lam = second_eigenvalue(build_graph(6, [(i, (i + 1) % 6) for i in range(6)]))
        expected = max(abs(2 * math.cos(2 * math.pi * j / 6)) for j in range(1, 6))
        assert lam == pytest.approx(expected, rel=1e-9)
        assert lam == pytest.approx(2.0, rel=1e-9)

    def test_paley_13(self):
        assert second_eigenvalue(paley(13)) == pytest.approx(
            (math.sqrt(13) + 1) / 2, rel=1e-6
        )

    def test_rejects_irregular(self):
        with pytest.raises(ValueError, match="regular"):
            second_eigenvalue(build_graph(3, [(0, 1)]))


class TestCheckJumbled:
    def test_complete_graph_zero_discrepancy(self):
        assert check_jumbled(complete_graph(6), 1.0, 0.0).status == SATISFIED

    def test_edgeless_violated_with_witness(self):
        g = build_graph(6, [])
        verdict = check_jumbled(g, 0.5, 0.1)
        assert verdict.status == VIOLATED
        w = verdict.witness
        asz, bsz = w.x_mask.bit_count(), w.y_mask.bit_count()
        assert edges_between(g, w.x_mask, w.y_mask) == w.observed == 0
        assert abs(0 - 0.5 * asz * bsz) > 0.1 * math.sqrt(asz * bsz)
        # the size-3 pair from the definition also violates: p|A||B| = 2.25 > 0.3
        assert 0.5 * 9 > 0.1 * 3

    def test_threshold_sharpness_on_random_graph(self):
        g = gnp(10, 0.5, seed=2)
        beta_max = max_jumbled_discrepancy(g, 0.5)
        assert check_jumbled(g, 0.5, beta_max + 1e-9).status == SATISFIED
        assert check_jumbled(g, 0.5, 0.99 * beta_max).status == VIOLATED

    def test_exact_mode_cap(self):
        with pytest.raises(ValueError, match="sampled"):
            check_jumbled(gnp(19, 0.5, seed=0), 0.5, 1.0, mode="exact")

    def test_sampled_finds_gross_violation(self):
        g = build_graph(40, [])
        verdict = check_jumbled(g, 0.5, 0.1, mode="sampled", budget=5000, seed=1)
        assert verdict.status == VIOLATED
        w = verdict.witness
        assert edges_between(g, w.x_mask, w.y_mask) == w.observed

    def test_sampled_undetermined_on_tight_instance(self):
        g = complete_graph(30)
        verdict = check_jumbled(g, 1.0, 0.0, mode="sampled", budget=300, seed=0)
        assert verdict.status == UNDETERMINED


class TestCheckPseudorandomExact:
    def test_complete_graph_satisfied(self):
        params = PseudoParams(0.1, 0.999, 1, 2)
        assert check_pseudorandom_exact(complete_graph(6), params).status == SATISFIED

    def test_edgeless_violated(self):
        params = PseudoParams(0.1, 0.5, 0, 1)
        verdict = check_pseudorandom_exact(build_graph(6, []), params)
        assert verdict.status == VIOLATED
        assert verdict.witness.observed == 0

    def test_threshold_sharpness(self):
        g = gnp(14, 0.5, seed=5)
        eps_star = critical_epsilon(g, 0.5, 0, 0)
        assert eps_star > 0
        assert check_pseudorandom_exact(g, PseudoParams(1.05 * eps_star, 0.5, 0, 0)).status == SATISFIED
        assert check_pseudorandom_exact(g, PseudoParams(0.95 * eps_star, 0.5, 0, 0)).status == VIOLATED

    def test_cap(self):
        with pytest.raises(ValueError):
            check_pseudorandom_exact(gnp(19, 0.5, seed=0), PseudoParams(0.1, 0.5, 1, 2))

    def test_violated_witness_reevaluates(self):
        g = gnp(12, 0.3, seed=7)
        params = PseudoParams(0.05, 0.3, 0, 0)
        verdict = check_pseudorandom_exact(g, params)
        if verdict.status == VIOLATED:
            w = verdict.witness
            e = edges_between(g, w.x_mask, w.y_mask)
            xs, ys = w.x_mask.bit_count(), w.y_mask.bit_count()
            assert e == w.observed
            assert xs >= params.x_min(g.n) and ys >= params.y_min(g.n)
            assert abs(e - params.p * xs * ys) >= params.epsilon * params.p * xs * ys - 1e-6

    def test_sampled_pseudorandom_falsifier(self):
        g = build_graph(60, [])
        # plant one edge so density is not exactly zero
        g = build_graph(60, [(0, 1)])
        verdict = check_pseudorandom_sampled(
            g, PseudoParams(0.2, 0.5, 0, 0), budget=8000, seed=3
        )
        assert verdict.status == VIOLATED


class TestCertifyViaSpectrum:
    def test_k8_formula_and_soundness(self):
        g = complete_graph(8)
        verdict = certify_via_spectrum(g, p=7 / 8, k=1, l=2)
        assert verdict.status == SATISFIED
        lam = second_eigenvalue(g)
        expected = math.sqrt(lam / ((7 / 8) ** 2.5 * 8))
        assert verdict.certified_epsilon == pytest.approx(expected, rel=1e-4)
        exact = check_pseudorandom_exact(
            g, PseudoParams(verdict.certified_epsilon, 7 / 8, 1, 2)
        )
        assert exact.status == SATISFIED

    def test_paley_17(self):
        g = paley(17)
        verdict = certify_via_spectrum(g, k=1, l=2)
        lam = (math.sqrt(17) + 1) / 2
        expected = math.sqrt(lam / ((8 / 17) ** 2.5 * 17))
        assert verdict.certified_epsilon == pytest.approx(expected, rel=1e-4)

    def test_cycle_bound_fails(self):
        g = build_graph(6, [(i, (i + 1) % 6) for i in range(6)])
        verdict = certify_via_spectrum(g, p=1 / 3, k=1, l=2)
        assert verdict.status == UNDETERMINED
        assert verdict.witness is None

    def test_rejects_irregular(self):
        with pytest.raises(ValueError):
            certify_via_spectrum(build_graph(3, [(0, 1)]), k=1, l=2)


class TestLowDegreeVertices:
    def test_complete_graph_none_below(self):
        g = complete_graph(5)
        assert low_degree_vertices(g, mask_of([0, 1]), 1.5, "below") == 0

    def test_star(self):
        g = build_graph(5, [(0, i) for i in range(1, 5)])
        got = low_degree_vertices(g, mask_of([1, 2]), 0.5, "below")
        assert got == mask_of([3, 4])

    def test_matches_naive_scan(self):
        g = gnp(16, 0.5, seed=9)
        x = mask_of(range(8))
        threshold = 0.9 * 0.5 * 8
        for side in ("below", "above"):
            got = low_degree_vertices(g, x, threshold, side)
            for v in range(8, 16):
                deg = sum(1 for u in range(8) if g.has_edge(u, v))
                hit = deg < threshold if side == "below" else deg > threshold
                assert bool(got >> v & 1) == hit

    def test_rejects_empty_x(self):
        with pytest.raises(ValueError):
            low_degree_vertices(complete_graph(4), 0, 1.0)


class TestConnectedness:
    def test_complete_graph(self):
        g = complete_graph(10)
        assert is_connected_tuple(g, (0, 1), mask_of(range(2, 10)), 1.0, 1.0)

    def test_non_clique_fails(self):
        g = build_graph(6, [(0, 2), (1, 2), (0, 3), (1, 3), (2, 3)])
        assert not is_connected_tuple(g, (0, 1), mask_of([2, 3]), 0.01, 0.5)

    def test_matches_direct_formula(self):
        g = gnp(400, 0.3, seed=4)
        rng = random.Random(6)
        p, rho = 0.3, 1 / 8
        for _ in range(20):
            u = rng.randrange(400)
            nbrs = bit_list(g.rows[u])
            if not nbrs:
                continue
            v = rng.choice(nbrs)
            x = g.full_mask & ~mask_of([u, v])
            xsz = x.bit_count()
            direct = True
            t = (u, v)
            for i in (1, 2):
                deg = common_neighborhood(g, t[i - 1 :], x).bit_count()
                if deg < rho * (p / 2) ** (2 - i + 1) * xsz - 1e-9:
                    direct = False
            assert is_connected_tuple(g, t, x, rho, p) == direct

    def test_tuple_inside_x_rejected(self):
        g = complete_graph(5)
        with pytest.raises(ValueError, match="inside X"):
            is_connected_tuple(g, (0, 1), mask_of([1, 2, 3]), 0.5, 0.5)


class TestConnectednessWitness:
    def test_complete_graph_size(self):
        g = complete_graph(10)
        x = mask_of(range(2, 10))
        w = connectedness_witness(g, (0, 1), x, 1.0, 1.0)
        assert w.y_mask.bit_count() == math.ceil(1.0 * 0.5 * 8)
        assert witness_is_valid(g, w, x)

    def test_quotas_monotone_in_suffix_depth(self):
        g = complete_graph(10)
        w = connectedness_witness(g, (0, 1, 2), mask_of(range(3, 10)), 0.9, 0.9)
        assert list(w.quotas) == sorted(w.quotas)  # deepest suffix has smallest quota

    def test_boundary_deletion(self):
        # deleting down to ceil of the innermost quota keeps that quota exactly
        g = complete_graph(10)
        x = mask_of(range(2, 10))
        w = connectedness_witness(g, (0, 1), x, 1.0, 1.0)
        inner_quota = math.ceil(w.quotas[0])
        room = w.y_mask.bit_count() - inner_quota
        inner = common_neighborhood(g, (0, 1), x)
        kept = w.y_mask
        removed = 0
        for v in bit_list(kept & inner):
            if removed == room:
                break
            kept &= ~(1 << v)
            removed += 1
        assert (kept & inner).bit_count() >= inner_quota - removed

    def test_recount_on_random_graph(self):
        g = gnp(500, 0.3, seed=6)
        rng = random.Random(3)
        p = 0.3
        hits = 0
        for _ in range(50):
            u = rng.randrange(500)
            nbrs = bit_list(g.rows[u])
            v = rng.choice(nbrs)
            x = g.full_mask & ~mask_of([u, v])
            if not is_connected_tuple(g, (u, v), x, 1 / 8, p):
                continue
            w = connectedness_witness(g, (u, v), x, 1 / 8, p)
            assert witness_is_valid(g, w, x)
            hits += 1
        assert hits > 5

    def test_error_names_first_violated_suffix(self):
        g = build_graph(6, [(0, 1), (0, 2), (1, 2)])
        with pytest.raises(ValueError, match="suffix"):
            connectedness_witness(g, (0, 1), mask_of([2, 3, 4, 5]), 1.0, 1.0)


def test_implied_density():
    params = PseudoParams(0.1, 0.5, 1, 2)
    assert implied_density(params, 100)      # 0.25 * 100 = 25 > 10
    assert not implied_density(params, 30)   # 7.5 < 10


def test_certify_soundness_small_circulants():
    """Whenever the spectral route certifies on a small regular graph, the
    exhaustive check agrees."""
    rng = random.Random(5)
    checked = 0
    for _ in range(30):
        n = rng.randint(8, 14)
        offs = sorted(rng.sample(range(1, n // 2 + 1), rng.randint(2, max(2, n // 3))))
        edges = set()
        for i in range(n):
            for d in offs:
                if d == n - d and n % 2 == 0:
                    edges.add((min(i, (i + d) % n), max(i, (i + d) % n)))
                else:
                    edges.add((min(i, (i + d) % n), max(i, (i + d) % n)))
        g = build_graph(n, sorted(edges))
        try:
            d = g.regular_degree()
        except ValueError:
            continue
        if d == 0 or d == n - 1:
            continue
        k, l = 1, 2
        verdict = certify_via_spectrum(g, k=k, l=l)
        if verdict.status != SATISFIED:
            continue
        params = PseudoParams(verdict.certified_epsilon, d / g.n, k, l)
        assert check_pseudorandom_exact(g, params).status == SATISFIED
        checked += 1
    assert checked >= 3
