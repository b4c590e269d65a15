"""Link measures, chain probabilities, fringe densities, limit sampling."""

from __future__ import annotations

import math

import pytest

from sublimits.enumeration import (
    all_unlabelled_rooted_members,
    all_unlabelled_rooted_trees,
    fringe_count,
    leaf_stats_from_level_sequence,
    level_sequences,
)
from sublimits.graphs import RootedGraph, automorphisms, canonical_rooted, cycle_monomial
from sublimits.limits import (
    ChainPrefix,
    Link,
    MassCutoffError,
    bs_chain_probability,
    chain_graph,
    chain_probability,
    enumerate_links,
    fringe_total_series,
    leaf_link,
    link_aut_order,
    link_labellings,
    link_mass_by_size,
    mu_fringe_labelled,
    mu_fringe_unlabelled,
    mu_fringe_unlabelled_closed,
    mu_from_size,
    p_link,
    q_link,
    sample_limit_chain,
    source_orbit_count,
)
from sublimits.series import SeriesError, find_singularity, solve_unlabelled_class


@pytest.fixture(scope="module")
def sing_tl(trees_labelled):
    return find_singularity(trees_labelled, order=200)


@pytest.fixture(scope="module")
def sing_tu(trees_unlabelled):
    return find_singularity(trees_unlabelled, order=200)


@pytest.fixture(scope="module")
def sing_cu(cacti_unlabelled):
    return find_singularity(cacti_unlabelled, order=120)


class TestEnumerateLinks:
    def test_trees_max1(self, trees_labelled):
        links = enumerate_links(trees_labelled, 1)
        assert len(links) == 1
        assert links[0].size == 1 and links[0].block.n == 2

    def test_trees_max2(self, trees_labelled):
        links = enumerate_links(trees_labelled, 2)
        assert [l.size for l in links] == [1, 2]

    def test_trees_counts_match_rooted_trees(self, trees_labelled):
        links = enumerate_links(trees_labelled, 6)
        by_size = {}
        for l in links:
            by_size[l.size] = by_size.get(l.size, 0) + 1
        assert by_size == {1: 1, 2: 1, 3: 2, 4: 4, 5: 9, 6: 20}

    def test_cacti_against_decomposition_oracle(self, cacti_labelled):
        links = enumerate_links(cacti_labelled, 3)
        # oracle: rooted cacti on <= 4 vertices whose root lies in one block,
        # marked at each non-root vertex of the root block
        from sublimits.graphs import block_cut_tree

        oracle = set()
        for m in range(2, 5):
            for j in all_unlabelled_rooted_members(cacti_labelled, m):
                at_root = block_cut_tree(j).blocks_at(j.root)
                if len(at_root) != 1:
                    continue
                for v in sorted(at_root[0]):
                    if v != j.root:
                        oracle.add(canonical_rooted(j, marks={v: 1}))
        assert {l.key() for l in links} == oracle


class TestLabelledMeasure:
    def test_leaf_probability(self, trees_labelled, sing_tl):
        p = p_link(leaf_link(trees_labelled), sing_tl)
        assert abs(p - math.exp(-1)) < 1e-12

    def test_size2_labellings(self, trees_labelled, sing_tl):
        two = [l for l in enumerate_links(trees_labelled, 2) if l.size == 2][0]
        assert link_labellings(two) == 2
        assert abs(p_link(two, sing_tl) - math.exp(-2)) < 1e-12

    def test_symmetric_link_aut(self, trees_labelled):
        # C4 link with two identical single-vertex branches: |Aut| = 2
        c4 = RootedGraph.cycle(4).with_root(2)
        link = Link(
            c4,
            source=0,
            sink=2,
            branches=(
                RootedGraph.single(),
                RootedGraph.single(),
                None,
                RootedGraph.single(),
            ),
        )
        assert link_aut_order(link) == 2
        assert link_labellings(link) == 3

    def test_positivity(self, trees_labelled, sing_tl):
        for link in enumerate_links(trees_labelled, 6):
            assert 0 < p_link(link, sing_tl) < 1

    def test_exhaustive_root_leaf_fraction_tends_to_p(self):
        # exact P_n(root is a leaf) = (1-1/n)^(n-2) -> 1/e monotonically
        vals = [(1 - 1 / n) ** (n - 2) for n in range(4, 31)]
        diffs = [abs(v - math.exp(-1)) for v in vals]
        assert all(b < a for a, b in zip(diffs, diffs[1:]))


class TestUnlabelledMeasure:
    def test_leaf_probability_is_rho(self, trees_unlabelled, sing_tu):
        q = q_link(leaf_link(trees_unlabelled), sing_tu)
        assert q == sing_tu.rho
        assert abs(q - 0.338322) < 1e-5

    def test_partial_sums_increase_below_one(self, trees_unlabelled, sing_tu):
        links = enumerate_links(trees_unlabelled, 10)
        partial = []
        acc = 0.0
        for m in range(1, 11):
            acc += sum(q_link(l, sing_tu) for l in links if l.size == m)
            partial.append(acc)
        assert all(b > a for a, b in zip(partial, partial[1:]))
        assert partial[-1] < 1

    def test_cacti_leaf_is_rho(self, cacti_unlabelled, sing_cu):
        assert q_link(leaf_link(cacti_unlabelled), sing_cu) == sing_cu.rho

    def test_cacti_root_leaf_fraction_decreases_to_rho(self, cacti_unlabelled, sing_cu):
        fractions = {}
        for n in range(5, 10):
            members = all_unlabelled_rooted_members(cacti_unlabelled, n)
            fractions[n] = sum(1 for g in members if g.degree(g.root) == 1) / len(members)
        diffs = {n: abs(f - sing_cu.rho) for n, f in fractions.items()}
        # convergence carries a small parity wobble; compare two sizes apart
        for n in range(5, 8):
            assert diffs[n + 2] < diffs[n]

    def test_collapse_matches_cycle_index_composition(self, trees_unlabelled, sing_tu):
        # reference evaluation of Z_L(rho, rho^2, ...) by brute force over
        # the automorphisms of the assembled link fixing source and sink
        link = [l for l in enumerate_links(trees_unlabelled, 4) if l.size == 4][0]
        g, src, snk = link.assembled()
        counted = [v for v in range(g.n) if v != snk]
        vals = []
        for perm in automorphisms(g.with_root(snk), fixed=(src,)):
            mono = cycle_monomial(perm, counted)
            vals.append(
                math.prod(sing_tu.rho ** (length * mult) for length, mult in mono)
            )
        z_l = sum(vals) / len(vals)
        assert abs(z_l - q_link(link, sing_tu)) < 1e-15


class TestChainProbability:
    def test_empty_chain(self, trees_labelled, sing_tl):
        assert chain_probability(trees_labelled, sing_tl, []) == 1.0

    def test_multiplicative(self, trees_labelled, sing_tl):
        links = enumerate_links(trees_labelled, 3)
        chain = [links[0], links[1], links[2]]
        full = chain_probability(trees_labelled, sing_tl, chain)
        split = chain_probability(trees_labelled, sing_tl, chain[:1]) * chain_probability(
            trees_labelled, sing_tl, chain[1:]
        )
        assert abs(full - split) < 1e-15

    def test_leaf_leaf_value(self, trees_labelled, sing_tl):
        leaf = leaf_link(trees_labelled)
        assert abs(
            chain_probability(trees_labelled, sing_tl, [leaf, leaf]) - math.exp(-2)
        ) < 1e-12

    def test_leaf_leaf_exact_counts_approach(self):
        # exact P_n(root leaf, neighbour degree 2) = (n-1)(n-2)^(n-3)/n^(n-2)
        vals = [(n - 1) * (n - 2) ** (n - 3) / n ** (n - 2) for n in range(5, 31)]
        diffs = [abs(v - math.exp(-2)) for v in vals]
        assert all(b < a for a, b in zip(diffs, diffs[1:]))

    def test_rooted_unlabelled_chain_fractions(self, sing_tu):
        # fraction of rooted unlabelled trees with a root leaf -> q = rho, and
        # with root leaf + depth-2 neighbour of degree 2 -> q^2
        rho = sing_tu.rho
        f1, f2 = {}, {}
        for n in (7, 14):
            total = leaf1 = leaf2 = 0
            for seq in level_sequences(n):
                total += 1
                root_children = sum(1 for lvl in seq if lvl == 2)
                if root_children != 1:
                    continue
                leaf1 += 1
                child_children = sum(1 for lvl in seq if lvl == 3)
                if child_children == 1:
                    leaf2 += 1
            f1[n] = leaf1 / total
            f2[n] = leaf2 / total
        assert abs(f1[14] - rho) < abs(f1[7] - rho)
        assert abs(f2[14] - rho * rho) < abs(f2[7] - rho * rho)


class TestMuFringeLabelled:
    def test_leaf_density(self, trees_labelled, sing_tl):
        h = RootedGraph.make(2, [(0, 1)], 0)
        mu = mu_fringe_labelled(h, trees_labelled, sing_tl)
        assert abs(mu - math.exp(-1)) < 1e-12
        # oracle: P(a vertex of a uniform labelled tree is a leaf) = (1-1/n)^(n-2)
        diffs = [abs((1 - 1 / n) ** (n - 2) - mu) for n in range(4, 11)]
        assert all(b < a for a, b in zip(diffs, diffs[1:]))

    def test_two_vertex_path_density(self, trees_labelled, sing_tl):
        h = RootedGraph.path(3, 0)
        mu = mu_fringe_labelled(h, trees_labelled, sing_tl)
        assert abs(mu - math.exp(-2) / 2) < 1e-12
        # exhaustive fringe-count oracle at n = 7 (shape density = l(H) mu)
        from sublimits.enumeration import all_labelled_trees

        n = 7
        total = 0
        for g in all_labelled_trees(n):
            for v in range(n):
                total += fringe_count(g.with_root(v), h)
        shape_density = total / (n * n ** (n - 1))
        assert abs(shape_density - 2 * mu) < 0.05

    def test_density_bound(self, cacti_labelled):
        sing = find_singularity(cacti_labelled, order=120)
        tri = RootedGraph.cycle(3)
        assert 0 < mu_fringe_labelled(tri, cacti_labelled, sing) <= 1

    def test_rejects_bad_heads(self, trees_labelled, sing_tl):
        from sublimits.graphs import GraphError
        from sublimits.classes import ClassError

        with pytest.raises(GraphError):
            mu_fringe_labelled(RootedGraph.path(3, 1), trees_labelled, sing_tl)
        with pytest.raises(ClassError):
            mu_fringe_labelled(RootedGraph.cycle(3), trees_labelled, sing_tl)


class TestMuFringeUnlabelled:
    def test_series_matches_exhaustive_counts_trees(self, trees_unlabelled):
        d1 = fringe_total_series(trees_unlabelled, 1, 12, exact=True)
        d2 = fringe_total_series(trees_unlabelled, 2, 12, exact=True)
        h1 = RootedGraph.make(2, [(0, 1)], 0)
        h2 = RootedGraph.path(3, 0)
        for n in range(2, 11):
            tot1 = sum(fringe_count(t, h1) for t in all_unlabelled_rooted_trees(n))
            assert tot1 == int(d1.coeffs[n])
            if n >= 3:
                tot2 = sum(fringe_count(t, h2) for t in all_unlabelled_rooted_trees(n))
                assert tot2 == int(d2.coeffs[n])

    def test_series_matches_exhaustive_counts_cacti(self, cacti_unlabelled):
        d1 = fringe_total_series(cacti_unlabelled, 1, 7, exact=True)
        d2 = fringe_total_series(cacti_unlabelled, 2, 7, exact=True)
        h1 = RootedGraph.make(2, [(0, 1)], 0)
        tri = RootedGraph.cycle(3)
        for n in range(2, 8):
            members = all_unlabelled_rooted_members(cacti_unlabelled, n)
            tot1 = sum(fringe_count(g, h1) for g in members)
            assert tot1 == int(d1.coeffs[n])
            if n >= 3:
                # both size-2 heads (planted path and rooted triangle) share
                # the same total: the relation depends only on the size
                tot_path = sum(fringe_count(g, RootedGraph.path(3, 0)) for g in members)
                tot_tri = sum(fringe_count(g, tri) for g in members)
                assert tot_path + tot_tri == int(d2.coeffs[n]) * 2
                assert tot_path == tot_tri == int(d2.coeffs[n])

    def test_leaf_constant(self, trees_unlabelled):
        h = RootedGraph.make(2, [(0, 1)], 0)
        mu = mu_fringe_unlabelled(h, trees_unlabelled, 200)
        assert abs(mu - 0.438156) < 1e-3

    def test_closed_form_agrees(self, trees_unlabelled, cacti_unlabelled, sing_tu, sing_cu):
        mu_t = mu_from_size(trees_unlabelled, 1, 200)
        assert abs(mu_t - mu_fringe_unlabelled_closed(trees_unlabelled, 1, sing_tu, 200)) < 1e-5
        mu_c = mu_from_size(cacti_unlabelled, 1, 120)
        assert abs(mu_c - mu_fringe_unlabelled_closed(cacti_unlabelled, 1, sing_cu, 120)) < 1e-5

    def test_order_too_low(self, trees_unlabelled):
        with pytest.raises(SeriesError, match="order too low"):
            mu_from_size(trees_unlabelled, 1, 40, tol=1e-12)

    def test_oversized_head_contributes_nothing(self, trees_unlabelled):
        d = fringe_total_series(trees_unlabelled, 9, 8, exact=True)
        assert d.is_zero()


class TestBsChainProbability:
    def test_leaf_constant(self, trees_unlabelled):
        leaf = leaf_link(trees_unlabelled)
        p = bs_chain_probability(trees_unlabelled, [leaf], 200)
        assert abs(p - 0.438156) < 1e-3

    def test_differs_from_rooted_measure(self, trees_unlabelled, sing_tu):
        leaf = leaf_link(trees_unlabelled)
        bs = bs_chain_probability(trees_unlabelled, [leaf], 200)
        rooted = q_link(leaf, sing_tu)
        assert abs(bs - 0.438156) < 1e-3
        assert abs(rooted - 0.338322) < 1e-5
        assert bs > rooted

    def test_conditional_ratios(self, trees_unlabelled):
        leaf = leaf_link(trees_unlabelled)
        p1 = bs_chain_probability(trees_unlabelled, [leaf], 200)
        p2 = bs_chain_probability(trees_unlabelled, [leaf, leaf], 200)
        p3 = bs_chain_probability(trees_unlabelled, [leaf, leaf, leaf], 200)
        assert 0 <= p2 / p1 <= 1
        assert 0 <= p3 / p2 <= 1

    def test_source_orbit_count(self, trees_unlabelled):
        # chain (leaf link, K2 link with a 2-vertex branch): the assembled
        # head is a root with one child carrying two leaves; omega = 2
        leaf = leaf_link(trees_unlabelled)
        two = [l for l in enumerate_links(trees_unlabelled, 2) if l.size == 2][0]
        chain = chain_graph([leaf, two])
        assert source_orbit_count(chain) == 2
        p = bs_chain_probability(trees_unlabelled, [leaf, two], 200)
        assert abs(p - 2 * mu_from_size(trees_unlabelled, 3, 200)) < 1e-12

    def test_k1_partial_sums_approach_one(self, trees_unlabelled):
        c = solve_unlabelled_class(trees_unlabelled, 10)
        acc = 0.0
        partial = []
        for m in range(1, 11):
            acc += int(c.coeffs[m]) * mu_from_size(trees_unlabelled, m, 200)
            partial.append(acc)
        assert all(b > a for a, b in zip(partial, partial[1:]))
        assert partial[-1] < 1
        assert partial[-1] > 0.75  # slow square-root tail, but clearly heading up

    def test_empty_chain(self, trees_unlabelled):
        assert bs_chain_probability(trees_unlabelled, [], 200) == 1.0


class TestLinkMassBySize:
    def test_labelled_trees_closed_form(self, trees_labelled, sing_tl):
        masses = link_mass_by_size(trees_labelled, sing_tl, 12)
        for m in range(1, 13):
            expect = m ** (m - 1) * math.exp(-m) / math.factorial(m)
            assert abs(masses[m] - expect) < 1e-12

    def test_matches_enumeration(self, trees_labelled, trees_unlabelled, sing_tl, sing_tu):
        for cls, sing, weigh in (
            (trees_labelled, sing_tl, p_link),
            (trees_unlabelled, sing_tu, q_link),
        ):
            masses = link_mass_by_size(cls, sing, 8)
            links = enumerate_links(cls, 8)
            for m in range(1, 9):
                total = sum(weigh(l, sing) for l in links if l.size == m)
                assert abs(masses[m] - total) < 1e-12

    def test_matches_enumeration_cacti(self, cacti_labelled, cacti_unlabelled, sing_cu):
        sing_cl = find_singularity(cacti_labelled, order=120)
        for cls, sing, weigh in (
            (cacti_labelled, sing_cl, p_link),
            (cacti_unlabelled, sing_cu, q_link),
        ):
            masses = link_mass_by_size(cls, sing, 5)
            links = enumerate_links(cls, 5)
            for m in range(1, 6):
                total = sum(weigh(l, sing) for l in links if l.size == m)
                assert abs(masses[m] - total) < 1e-12


class TestSampleLimitChain:
    def test_default_epsilon_unreachable(self, trees_labelled, sing_tl):
        with pytest.raises(MassCutoffError, match="increase"):
            sample_limit_chain(trees_labelled, sing_tl, 3, seed=1)

    def test_k0(self, trees_labelled, sing_tl):
        chain = sample_limit_chain(trees_labelled, sing_tl, 0, seed=1, eps=0.5, max_size=8)
        assert chain.assembled_graph.n == 1

    def test_deterministic(self, trees_labelled, sing_tl):
        a = sample_limit_chain(trees_labelled, sing_tl, 4, seed=42, eps=0.5, max_size=8)
        b = sample_limit_chain(trees_labelled, sing_tl, 4, seed=42, eps=0.5, max_size=8)
        assert a.links == b.links

    def test_prefix_consistency(self, trees_labelled, sing_tl):
        for seed in range(20):
            k2 = sample_limit_chain(trees_labelled, sing_tl, 2, seed=seed, eps=0.5, max_size=8)
            k1 = sample_limit_chain(trees_labelled, sing_tl, 1, seed=seed, eps=0.5, max_size=8)
            assert k2.links[:1] == k1.links

    def test_leaf_frequency_binomial(self, trees_labelled, sing_tl):
        max_size = 8
        links = enumerate_links(trees_labelled, max_size)
        total = sum(p_link(l, sing_tl) for l in links)
        target = p_link(leaf_link(trees_labelled), sing_tl) / total
        draws = 20000
        leaf_key = leaf_link(trees_labelled).key()
        hits = 0
        for seed in range(draws):
            chain = sample_limit_chain(
                trees_labelled, sing_tl, 1, seed=seed, eps=0.5, max_size=max_size
            )
            if chain.links[0].key() == leaf_key:
                hits += 1
        freq = hits / draws
        sigma = math.sqrt(target * (1 - target) / draws)
        assert abs(freq - target) < 3 * sigma

    def test_truncation_bias_is_reported_epsilon(self, trees_labelled, sing_tl):
        # the renormalized leaf mass differs from the true one by < eps
        max_size = 8
        links = enumerate_links(trees_labelled, max_size)
        total = sum(p_link(l, sing_tl) for l in links)
        eps = 1 - total
        p_true = p_link(leaf_link(trees_labelled), sing_tl)
        assert abs(p_true / total - p_true) < eps


def _exact_labelled_chain_p(n: int, sizes, ells) -> float:
    total = sum(sizes)
    m = n - total
    if m <= total:
        return 0.0
    ways = math.factorial(n)
    for s in sizes:
        ways //= math.factorial(s)
    ways //= math.factorial(m)
    for ell in ells:
        ways *= ell
    ways *= m ** (m - 1)
    return ways / n ** (n - 1)


class TestChainOracleEquivalence:
    def _chains_up_to(self, cls, total_max):
        links = enumerate_links(cls, total_max)
        chains = []

        def extend(prefix, size):
            if prefix:
                chains.append(list(prefix))
            for link in links:
                if size + link.size <= total_max:
                    prefix.append(link)
                    extend(prefix, size + link.size)
                    prefix.pop()

        extend([], 0)
        return chains

    def test_labelled_margins_shrink_for_all_small_chains(self, trees_labelled, sing_tl):
        # every chain of total size <= 4: the exact-count margin shrinks in n
        chains = self._chains_up_to(trees_labelled, 4)
        assert len(chains) == 21
        for chain in chains:
            sizes = [l.size for l in chain]
            ells = [link_labellings(l) for l in chain]
            theory = chain_probability(trees_labelled, sing_tl, chain)
            lo = 2 * sum(sizes) + 1
            margins = [
                abs(_exact_labelled_chain_p(n, sizes, ells) - theory)
                for n in range(lo, 41)
            ]
            assert all(b < a for a, b in zip(margins, margins[1:]))

    def test_labelled_formula_equals_exhaustive_matching(self, trees_labelled):
        # chains of total size <= 2 at n = 6: raw matching agrees with the count
        from sublimits.enumeration import all_labelled_trees, matches_chain

        n = 6
        for chain in self._chains_up_to(trees_labelled, 2):
            sizes = [l.size for l in chain]
            ells = [link_labellings(l) for l in chain]
            hits = 0
            for g in all_labelled_trees(n):
                for v in range(n):
                    if matches_chain(g.with_root(v), chain, trees_labelled):
                        hits += 1
            assert hits / n ** (n - 1) == pytest.approx(
                _exact_labelled_chain_p(n, sizes, ells), abs=1e-12
            )

    @pytest.mark.slow
    def test_labelled_formula_equals_exhaustive_matching_size3(self, trees_labelled):
        from sublimits.enumeration import all_labelled_trees, matches_chain

        n = 7
        for chain in self._chains_up_to(trees_labelled, 3):
            if sum(l.size for l in chain) != 3:
                continue
            sizes = [l.size for l in chain]
            ells = [link_labellings(l) for l in chain]
            hits = 0
            for g in all_labelled_trees(n):
                for v in range(n):
                    if matches_chain(g.with_root(v), chain, trees_labelled):
                        hits += 1
            assert hits / n ** (n - 1) == pytest.approx(
                _exact_labelled_chain_p(n, sizes, ells), abs=1e-12
            )

    def test_unlabelled_rooted_margins_shrink(self, trees_unlabelled, sing_tu):
        # chains against prod q over exhaustively enumerated rooted trees
        from sublimits.enumeration import all_unlabelled_rooted_trees, matches_chain

        two = [l for l in enumerate_links(trees_unlabelled, 2) if l.size == 2][0]
        leaf = leaf_link(trees_unlabelled)
        for chain in ([leaf], [two], [leaf, leaf]):
            theory = chain_probability(trees_unlabelled, sing_tu, chain)
            margins = {}
            for n in (8, 12):
                hits = total = 0
                for g in all_unlabelled_rooted_trees(n):
                    total += 1
                    if matches_chain(g, chain, trees_unlabelled):
                        hits += 1
                margins[n] = abs(hits / total - theory)
            assert margins[12] < margins[8]
