"""Exhaustive generators, uniform samplers, fringe counts, chain matching."""

from __future__ import annotations

import itertools
import math
import random
from collections import Counter

import pytest

from conftest import chi2_stat, chi2_threshold
from sublimits.classes import builtin
from sublimits.enumeration import (
    all_class_members_labelled,
    all_labelled_trees,
    all_unlabelled_rooted_members,
    all_unlabelled_rooted_trees,
    class_contains,
    fringe_count,
    leaf_stats_from_level_sequence,
    level_sequences,
    matches_chain,
    prufer_decode,
    rooted_variants,
    sample_many,
    sample_uniform_rooted,
    tree_from_level_sequence,
)
from sublimits.graphs import (
    GraphError,
    RootedGraph,
    block_cut_tree,
    canonical_rooted,
    is_tree,
)
from sublimits.limits import Link, chain_graph, leaf_link
from sublimits.series import solve_labelled_class, solve_unlabelled_class


class TestLabelledTrees:
    def test_small_counts(self):
        assert sum(1 for _ in all_labelled_trees(1)) == 1
        assert sum(1 for _ in all_labelled_trees(3)) == 3
        assert sum(1 for _ in all_labelled_trees(6)) == 1296

    def test_n6_against_edge_subset_oracle(self):
        # independent oracle: all 5-subsets of the 15 edges of K6 forming a tree
        pairs = list(itertools.combinations(range(6), 2))
        count = 0
        for subset in itertools.combinations(pairs, 5):
            g = RootedGraph.make(6, subset)
            if g.is_connected():
                count += 1
        assert count == 1296

    def test_all_distinct(self):
        seen = {frozenset(t.edges) for t in all_labelled_trees(5)}
        assert len(seen) == 125

    def test_out_of_range(self):
        with pytest.raises(GraphError):
            next(all_labelled_trees(13))

    def test_prufer_roundtrip_degree(self):
        # degree of v = multiplicity in the sequence + 1
        rng = random.Random(9)
        for _ in range(200):
            n = rng.randrange(3, 10)
            seq = [rng.randrange(n) for _ in range(n - 2)]
            g = RootedGraph.make(n, prufer_decode(seq, n))
            assert is_tree(g)
            for v in range(n):
                assert g.degree(v) == seq.count(v) + 1


class TestUnlabelledTrees:
    def test_counts(self):
        expect = [1, 1, 2, 4, 9, 20, 48, 115, 286, 719]
        got = [sum(1 for _ in all_unlabelled_rooted_trees(n)) for n in range(1, 11)]
        assert got == expect

    def test_single_edge(self):
        trees = list(all_unlabelled_rooted_trees(2))
        assert len(trees) == 1

    def test_pairwise_non_isomorphic(self):
        for n in range(1, 9):
            codes = [canonical_rooted(t) for t in all_unlabelled_rooted_trees(n)]
            assert len(codes) == len(set(codes))

    def test_covers_all_rootings(self):
        # every rooted labelled tree on 5 vertices is isomorphic to exactly
        # one generated representative
        reps = {canonical_rooted(t) for t in all_unlabelled_rooted_trees(5)}
        seen = set()
        for g in all_labelled_trees(5):
            for v in range(5):
                seen.add(canonical_rooted(g.with_root(v)))
        assert seen == reps

    def test_generator_is_canonical(self):
        # regenerating the level sequence from the canonical child order is
        # the identity on the generator's output
        for n in range(1, 9):
            for seq in level_sequences(n):
                g = tree_from_level_sequence(seq)
                assert _canonical_level_sequence(g) == seq


def _canonical_level_sequence(g: RootedGraph) -> list[int]:
    from sublimits.graphs import tree_children

    children = g and tree_children(g)

    def sub(v):
        subs = sorted((sub(w) for w in children[v]), reverse=True)
        out = [1]
        for s in subs:
            out.extend(x + 1 for x in s)
        return out

    return sub(g.root)


class TestClassMembers:
    def test_trees_filter_n5(self, trees_labelled):
        assert sum(1 for _ in all_class_members_labelled(5, trees_labelled)) == 125

    def test_single_vertex(self, cacti_labelled):
        assert sum(1 for _ in all_class_members_labelled(1, cacti_labelled)) == 1

    def test_cacti_n4_frozen(self, cacti_labelled):
        # regression value from the 2^6 edge-subset filter
        assert sum(1 for _ in all_class_members_labelled(4, cacti_labelled)) == 31

    def test_counts_match_series_n6(self, cacti_labelled, blockgraphs_labelled):
        for cls in (cacti_labelled, blockgraphs_labelled):
            c = solve_labelled_class(cls, 6)
            for n in range(1, 7):
                unrooted = sum(1 for _ in all_class_members_labelled(n, cls))
                assert c.coeffs[n] * math.factorial(n) == n * unrooted

    @pytest.mark.slow
    def test_counts_match_series_n7(self, cacti_labelled, blockgraphs_labelled, trees_labelled):
        for cls in (trees_labelled, cacti_labelled, blockgraphs_labelled):
            c = solve_labelled_class(cls, 7)
            unrooted = sum(1 for _ in all_class_members_labelled(7, cls))
            assert c.coeffs[7] * math.factorial(7) == 7 * unrooted

    def test_class_contains(self, trees_labelled, cacti_labelled):
        triangle = RootedGraph.cycle(3)
        assert not class_contains(trees_labelled, triangle)
        assert class_contains(cacti_labelled, triangle)
        two_triangles = RootedGraph.make(
            5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]
        )
        assert class_contains(cacti_labelled, two_triangles)


class TestUnlabelledMembers:
    def test_counts_match_series(self, cacti_unlabelled, trees_unlabelled):
        for cls, order in ((cacti_unlabelled, 8), (trees_unlabelled, 8)):
            c = solve_unlabelled_class(cls, order)
            for n in range(1, order + 1):
                assert len(all_unlabelled_rooted_members(cls, n)) == int(c.coeffs[n])


class TestBlockCutTree:
    def test_tree_blocks(self):
        g = RootedGraph.path(6)
        bct = block_cut_tree(g)
        assert len(bct.blocks) == 5
        assert all(len(b) == 2 for b in bct.blocks)

    def test_cycle(self):
        bct = block_cut_tree(RootedGraph.cycle(5))
        assert len(bct.blocks) == 1 and not bct.cutvertices

    def test_two_triangles(self):
        g = RootedGraph.make(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)])
        bct = block_cut_tree(g)
        assert sorted(sorted(b) for b in bct.blocks) == [[0, 1, 2], [2, 3, 4]]
        assert bct.cutvertices == frozenset({2})

    def test_disconnected_rejected(self):
        with pytest.raises(GraphError):
            block_cut_tree(RootedGraph.make(3, [(0, 1)]))


class TestSamplers:
    def test_deterministic_under_seed(self, trees_unlabelled, cacti_labelled):
        for cls, n in ((trees_unlabelled, 9), (cacti_labelled, 7)):
            a = sample_uniform_rooted(cls, n, seed=123)
            b = sample_uniform_rooted(cls, n, seed=123)
            assert a == b

    def test_single_vertex(self, trees_labelled):
        g = sample_uniform_rooted(trees_labelled, 1, seed=0)
        assert g.n == 1

    def test_unlabelled_trees_uniform_n5(self, trees_unlabelled):
        counts = Counter(
            canonical_rooted(g) for g in sample_many(trees_unlabelled, 5, 18000, 11)
        )
        assert len(counts) == 9
        stat = chi2_stat(counts.values(), [18000 / 9] * 9)
        assert stat < chi2_threshold(8)

    def test_unlabelled_trees_uniform_n6(self, trees_unlabelled):
        counts = Counter(
            canonical_rooted(g) for g in sample_many(trees_unlabelled, 6, 40000, 12)
        )
        assert len(counts) == 20
        stat = chi2_stat(counts.values(), [2000] * 20)
        assert stat < chi2_threshold(19)

    def test_labelled_trees_root_degree_n4(self, trees_labelled):
        exact = Counter()
        for g in all_labelled_trees(4):
            for v in range(4):
                exact[g.degree(v)] += 1
        total = sum(exact.values())
        n_samples = 20000
        counts = Counter(
            g.degree(g.root) for g in sample_many(trees_labelled, 4, n_samples, 13)
        )
        stat = chi2_stat(
            [counts[d] for d in sorted(exact)],
            [n_samples * exact[d] / total for d in sorted(exact)],
        )
        assert stat < chi2_threshold(len(exact) - 1)

    @pytest.mark.parametrize("name", ["cacti_labelled", "blockgraphs_labelled"])
    def test_labelled_members_uniform_n5(self, name):
        cls = builtin(name)
        members = [
            (frozenset(g.edges), v)
            for g in all_class_members_labelled(5, cls)
            for v in range(5)
        ]
        n_samples = 12 * len(members)
        counts = Counter(
            (frozenset(g.edges), g.root) for g in sample_many(cls, 5, n_samples, 17)
        )
        assert set(counts) <= set(members)
        stat = chi2_stat(
            [counts[m] for m in members], [n_samples / len(members)] * len(members)
        )
        assert stat < chi2_threshold(len(members) - 1)

    def test_unlabelled_cacti_uniform_n5(self, cacti_unlabelled):
        members = all_unlabelled_rooted_members(cacti_unlabelled, 5)
        n_samples = 200 * len(members)
        counts = Counter(
            canonical_rooted(g) for g in sample_many(cacti_unlabelled, 5, n_samples, 19)
        )
        stat = chi2_stat(
            [counts[canonical_rooted(m)] for m in members],
            [n_samples / len(members)] * len(members),
        )
        assert stat < chi2_threshold(len(members) - 1)


class TestFringeCount:
    def test_star_center(self):
        leaf_edge = RootedGraph.make(2, [(0, 1)], 0)
        assert fringe_count(RootedGraph.star(3), leaf_edge) == 3

    def test_path_end(self):
        leaf_edge = RootedGraph.make(2, [(0, 1)], 0)
        assert fringe_count(RootedGraph.path(3, 0), leaf_edge) == 1

    def test_rejects_multi_block_root(self):
        bad = RootedGraph.path(3, 1)  # root in two K2 blocks
        with pytest.raises(GraphError, match="single block"):
            fringe_count(RootedGraph.star(3), bad)

    def test_rooted_vs_unrooted_difference(self):
        # for n > 2|H|+1 the two modes differ by at most one occurrence
        leaf_edge = RootedGraph.make(2, [(0, 1)], 0)
        rng = random.Random(5)
        for _ in range(60):
            n = rng.randrange(6, 10)
            seq = [rng.randrange(n) for _ in range(n - 2)]
            g = RootedGraph.make(n, prufer_decode(seq, n), rng.randrange(n))
            diff = fringe_count(g, leaf_edge, "unrooted") - fringe_count(g, leaf_edge)
            assert diff in (0, 1)

    def test_rooting_sum_identity(self):
        # sum over rootings of F_H(G@v) = (n - |H| + 1) * unrooted count
        rng = random.Random(7)
        h = RootedGraph.path(3, 0)
        for _ in range(40):
            n = rng.randrange(5, 10)
            seq = [rng.randrange(n) for _ in range(n - 2)]
            g = RootedGraph.make(n, prufer_decode(seq, n))
            unrooted = fringe_count(g, h, "unrooted")
            rooted_sum = sum(fringe_count(g.with_root(v), h) for v in range(n))
            assert rooted_sum == unrooted * (n - (h.n - 1))


class TestMatchesChain:
    def test_assembled_chain_matches(self, trees_labelled):
        leaf = leaf_link(trees_labelled)
        chain = chain_graph([leaf, leaf])
        # attach a remainder path of 5 vertices at the final sink
        g = chain.assembled_graph
        edges = list(g.edges)
        prev = chain.final_sink
        for k in range(5):
            edges.append((prev, g.n + k))
            prev = g.n + k
        big = RootedGraph.make(g.n + 5, edges, g.root)
        assert matches_chain(big, [leaf, leaf], trees_labelled)
        assert matches_chain(big, [leaf], trees_labelled)

    def test_root_degree_two_fails_leaf_chain(self, trees_labelled):
        g = RootedGraph.path(6, 2)
        assert not matches_chain(g, [leaf_link(trees_labelled)], trees_labelled)

    def test_remainder_must_dominate(self, trees_labelled):
        leaf = leaf_link(trees_labelled)
        assert not matches_chain(RootedGraph.path(2, 0), [leaf], trees_labelled)
        assert matches_chain(RootedGraph.path(3, 0), [leaf], trees_labelled)

    def test_empty_chain_is_membership(self, trees_labelled):
        assert matches_chain(RootedGraph.path(4, 1), [], trees_labelled)
        assert not matches_chain(RootedGraph.cycle(4), [], trees_labelled)

    def test_exhaustive_root_leaf_equality(self, trees_labelled):
        leaf = leaf_link(trees_labelled)
        n = 7
        matched = 0
        rootleaf = 0
        for g in all_labelled_trees(n):
            for v in range(n):
                if matches_chain(g.with_root(v), [leaf], trees_labelled):
                    matched += 1
                if g.degree(v) == 1:
                    rootleaf += 1
        assert matched == rootleaf == n * (n - 1) ** (n - 2)

    def test_cacti_triangle_chain(self, cacti_labelled):
        # triangle link: block C3, source adjacent to sink, trivial branches
        tri = RootedGraph.cycle(3).with_root(2)
        link = Link(
            tri, source=0, sink=2, branches=(RootedGraph.single(), RootedGraph.single(), None)
        )
        chain = chain_graph([link])
        g = chain.assembled_graph
        edges = list(g.edges)
        prev = chain.final_sink
        for k in range(4):
            edges.append((prev, g.n + k))
            prev = g.n + k
        big = RootedGraph.make(g.n + 4, edges, g.root)
        assert matches_chain(big, [link], cacti_labelled)
        assert not matches_chain(big, [leaf_link(cacti_labelled)], cacti_labelled)


class TestLeafStats:
    def test_matches_graph_counts(self):
        for n in range(2, 9):
            for seq in level_sequences(n):
                g = tree_from_level_sequence(seq)
                graph_leaves, childless = leaf_stats_from_level_sequence(seq)
                assert graph_leaves == sum(1 for v in range(n) if g.degree(v) == 1)
                dist = g.distances()
                assert childless == sum(
                    1 for v in range(n) if v != g.root and g.degree(v) == 1
                )


class TestGraphCorpus:
    def test_roundtrip(self, tmp_path):
        from sublimits.enumeration import read_graph_corpus, write_graph_corpus

        graphs = [t.with_root(0) for t in all_unlabelled_rooted_trees(5)]
        path = str(tmp_path / "corpus.jsonl")
        assert write_graph_corpus(path, graphs) == 9
        back = list(read_graph_corpus(path))
        assert back == graphs
