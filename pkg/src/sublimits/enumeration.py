"""Exhaustive generation, uniform sampling, fringe counting, chain matching.

This is the brute-force oracle layer: everything here is independent of the
generating-function machinery so that series coefficients, link measures and
limit probabilities can be checked against raw counts.
"""

from __future__ import annotations

import itertools
import math
import random
from typing import Iterable, Iterator, Sequence

from .classes import BlockClass, ClassError
from .graphs import (
    BlockCutTree,
    GraphError,
    RootedGraph,
    block_cut_tree,
    canonical_rooted,
    canonical_unrooted,
    isomorphisms,
)
from .series import TruncatedSeries, solve_labelled_class

LABELLED_TREE_MAX = 12
UNLABELLED_TREE_MAX = 18
FILTER_MAX = 7
GENERIC_LABELLED_SAMPLER_MAX = 60
GENERIC_UNLABELLED_SAMPLER_MAX = 10


# ---------------------------------------------------------------------------
# labelled trees via Pruefer sequences
# ---------------------------------------------------------------------------


def prufer_decode(seq: Sequence[int], n: int) -> list[tuple[int, int]]:
    """Edges of the labelled tree on 0..n-1 with Pruefer sequence ``seq``."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    idx = 0
    leaf = -1
    for v in seq:
        if leaf < 0:
            while degree[idx] != 1:
                idx += 1
            leaf = idx
        edges.append((leaf, v))
        degree[leaf] = 0
        degree[v] -= 1
        if degree[v] == 1 and v < idx:
            leaf = v
        else:
            leaf = -1
    rest = [w for w in range(n) if degree[w] == 1]
    edges.append((rest[0], rest[1]))
    return edges


def all_labelled_trees(n: int) -> Iterator[RootedGraph]:
    """Every labelled tree on {0..n-1} exactly once (n^(n-2) many), root 0.

    The root field is a placeholder; use ``rooted_variants`` to range over
    the n rootings of each tree.
    """
    if not (1 <= n <= LABELLED_TREE_MAX):
        raise GraphError(f"all_labelled_trees supports 1 <= n <= {LABELLED_TREE_MAX}")
    if n == 1:
        yield RootedGraph.single()
        return
    if n == 2:
        yield RootedGraph.make(2, [(0, 1)])
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        yield RootedGraph.make(n, prufer_decode(seq, n))


def rooted_variants(g: RootedGraph) -> Iterator[RootedGraph]:
    for v in range(g.n):
        yield g.with_root(v)


def sample_labelled_tree(n: int, rng: random.Random) -> RootedGraph:
    """Uniform rooted labelled tree: random Pruefer sequence + random root."""
    if n == 1:
        return RootedGraph.single()
    if n == 2:
        return RootedGraph.make(2, [(0, 1)], rng.randrange(2))
    seq = [rng.randrange(n) for _ in range(n - 2)]
    return RootedGraph.make(n, prufer_decode(seq, n), rng.randrange(n))


# ---------------------------------------------------------------------------
# unlabelled rooted trees via level-sequence successor generation
# ---------------------------------------------------------------------------


def level_sequences(n: int) -> Iterator[list[int]]:
    """Canonical level sequences of all rooted trees on n vertices.

    Beyer-Hedetniemi successor rule on sequences (1, 2, ...): take the last
    position above level 2 and repeat the block back to its parent level.
    """
    if n < 1:
        raise GraphError("level_sequences needs n >= 1")
    seq = list(range(1, n + 1))
    while True:
        yield seq
        p = -1
        for i in range(n - 1, -1, -1):
            if seq[i] > 2:
                p = i
                break
        if p < 0:
            return
        q = -1
        for i in range(p - 1, -1, -1):
            if seq[i] == seq[p] - 1:
                q = i
                break
        span = p - q
        nxt = seq[:p]
        while len(nxt) < n:
            nxt.append(nxt[len(nxt) - span])
        seq = nxt


def tree_from_level_sequence(seq: Sequence[int]) -> RootedGraph:
    last_at_level: dict[int, int] = {}
    edges = []
    for i, lvl in enumerate(seq):
        last_at_level[lvl] = i
        if lvl > 1:
            edges.append((last_at_level[lvl - 1], i))
    return RootedGraph.make(len(seq), edges, 0)


def all_unlabelled_rooted_trees(n: int) -> Iterator[RootedGraph]:
    """One representative per isomorphism class of rooted trees on n vertices."""
    if not (1 <= n <= UNLABELLED_TREE_MAX):
        raise GraphError(f"all_unlabelled_rooted_trees supports 1 <= n <= {UNLABELLED_TREE_MAX}")
    for seq in level_sequences(n):
        yield tree_from_level_sequence(seq)


def leaf_stats_from_level_sequence(seq: Sequence[int]) -> tuple[int, int]:
    """(number of degree-1 vertices, number of non-root childless vertices)."""
    n = len(seq)
    if n == 1:
        return 1, 0
    childless = 0
    for i in range(n):
        if i == n - 1 or seq[i + 1] <= seq[i]:
            childless += 1
    root_children = sum(1 for lvl in seq if lvl == 2)
    graph_leaves = childless + (1 if root_children == 1 else 0)
    # the root is never childless for n >= 2
    return graph_leaves, childless


# ---------------------------------------------------------------------------
# generic class membership and the 2^C(n,2) filter oracle
# ---------------------------------------------------------------------------


def _generator_codes(cls: BlockClass, max_size: int) -> set[bytes]:
    key = ("generator_codes", max_size)
    if key not in cls._cache:
        if cls.block_generator is None:
            raise ClassError(f"{cls.name} has no block generator")
        cls._cache[key] = {canonical_unrooted(b) for b in cls.block_generator(max_size)}
    return cls._cache[key]


def class_contains(cls: BlockClass, g: RootedGraph) -> bool:
    """Is the (connected) graph a member, i.e. is every block a class block?"""
    if not g.is_connected():
        return False
    if g.n == 1:
        return True
    codes = _generator_codes(cls, g.n)
    for block in block_cut_tree(g).blocks:
        sub = g.induced(block, min(block))
        if canonical_unrooted(sub) not in codes:
            return False
    return True


def all_class_members_labelled(n: int, cls: BlockClass) -> Iterator[RootedGraph]:
    """Every labelled connected graph on n vertices whose blocks all lie in cls.

    Filter over all 2^C(n,2) edge subsets; intended as an oracle for n <= 7.
    """
    if n > FILTER_MAX:
        raise GraphError(f"all_class_members_labelled supports n <= {FILTER_MAX}")
    if cls.block_generator is None:
        raise ClassError(f"{cls.name} has no block generator")
    if n == 1:
        yield RootedGraph.single()
        return
    pairs = list(itertools.combinations(range(n), 2))
    m = len(pairs)
    full = (1 << n) - 1
    for mask in range(1 << m):
        if mask.bit_count() < n - 1:
            continue
        adj = [0] * n
        for b in range(m):
            if mask >> b & 1:
                u, v = pairs[b]
                adj[u] |= 1 << v
                adj[v] |= 1 << u
        # bitmask BFS connectivity before touching heavier machinery
        seen = 1
        frontier = 1
        while frontier:
            nxt = 0
            w = frontier
            while w:
                v = (w & -w).bit_length() - 1
                w &= w - 1
                nxt |= adj[v]
            frontier = nxt & ~seen
            seen |= nxt
        if seen != full:
            continue
        g = RootedGraph.make(n, [pairs[b] for b in range(m) if mask >> b & 1])
        if class_contains(cls, g):
            yield g


# ---------------------------------------------------------------------------
# unlabelled rooted members by recursive block assembly
# ---------------------------------------------------------------------------


def _attach_branches(block: RootedGraph, branches: Sequence[RootedGraph]) -> RootedGraph:
    """Identify branch roots with the block's non-root vertices."""
    positions = [v for v in range(block.n) if v != block.root]
    n_total = 1 + sum(b.n for b in branches)
    edges: list[tuple[int, int]] = []
    place: dict[int, int] = {block.root: 0}
    nxt = 1
    for pos, br in zip(positions, branches):
        offset = nxt
        mapping = {br.root: offset}
        cur = offset + 1
        for v in range(br.n):
            if v != br.root:
                mapping[v] = cur
                cur += 1
        for u, v in br.edges:
            edges.append((mapping[u], mapping[v]))
        place[pos] = offset
        nxt = cur
    for u, v in block.edges:
        edges.append((place[u], place[v]))
    return RootedGraph.make(n_total, edges, 0)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _derived_reps(cls: BlockClass, max_block: int) -> list[RootedGraph]:
    key = ("derived_reps", max_block)
    if key not in cls._cache:
        reps = []
        for b in cls.block_generator(max_block):
            seen = set()
            for v in range(b.n):
                code = canonical_rooted(b.with_root(v))
                if code not in seen:
                    seen.add(code)
                    reps.append(b.with_root(v))
        cls._cache[key] = reps
    return cls._cache[key]


def root_assemblies(cls: BlockClass, size: int) -> list[RootedGraph]:
    """All block-with-branches structures of the given size, rooted at the
    block's distinguished vertex (one per isomorphism class)."""
    cache = cls._cache.setdefault("assemblies", {})
    if size in cache:
        return cache[size]
    if cls.block_generator is None:
        raise ClassError(f"{cls.name} has no block generator")
    out: dict[bytes, RootedGraph] = {}
    for rep in _derived_reps(cls, size + 1):
        b = rep.n - 1
        if b > size:
            continue
        positions = [v for v in range(rep.n) if v != rep.root]
        for sizes in _compositions(size, len(positions)):
            pools = [all_unlabelled_rooted_members(cls, s) for s in sizes]
            for combo in itertools.product(*pools):
                g = _attach_branches(rep, combo)
                out.setdefault(canonical_rooted(g), g)
    result = sorted(out.values(), key=lambda g: canonical_rooted(g))
    cache[size] = result
    return result


def _is_tree_class(cls: BlockClass) -> bool:
    if "is_tree_class" not in cls._cache:
        blocks = cls.block_generator(3) if cls.block_generator else []
        cls._cache["is_tree_class"] = bool(blocks) and all(b.n == 2 for b in blocks)
    return cls._cache["is_tree_class"]


def all_unlabelled_rooted_members(cls: BlockClass, n: int) -> list[RootedGraph]:
    """One rooted representative per isomorphism class of size-n members."""
    cache = cls._cache.setdefault("members", {})
    if n in cache:
        return cache[n]
    if n < 1:
        return []
    if n == 1:
        result = [RootedGraph.single()]
    elif _is_tree_class(cls) and n <= UNLABELLED_TREE_MAX:
        result = list(all_unlabelled_rooted_trees(n))
    else:
        out: dict[bytes, RootedGraph] = {}

        def extend(base: RootedGraph | None, remaining: int, min_key):
            if remaining == 0:
                out.setdefault(canonical_rooted(base), base)
                return
            for size in range(1, remaining + 1):
                for asm in root_assemblies(cls, size):
                    key = (size, canonical_rooted(asm))
                    if min_key is not None and key < min_key:
                        continue
                    merged = _merge_at_root(base, asm) if base is not None else asm
                    extend(merged, remaining - size, key)

        extend(None, n - 1, None)
        result = sorted(out.values(), key=canonical_rooted)
    cache[n] = result
    return result


def _merge_at_root(a: RootedGraph, b: RootedGraph) -> RootedGraph:
    """Join: identify the roots of two rooted graphs."""
    mapping_b = {b.root: a.root}
    nxt = a.n
    for v in range(b.n):
        if v != b.root:
            mapping_b[v] = nxt
            nxt += 1
    edges = list(a.edges) + [(mapping_b[u], mapping_b[v]) for u, v in b.edges]
    return RootedGraph.make(a.n + b.n - 1, edges, a.root)


# ---------------------------------------------------------------------------
# uniform sampling
# ---------------------------------------------------------------------------


def _rooted_tree_counts(n: int) -> list[int]:
    """A000081: t[m] = number of rooted trees on m vertices (t[0] unused)."""
    t = [0] * (n + 1)
    if n >= 1:
        t[1] = 1
    s = [0] * (n + 1)
    for m in range(1, n):
        s[m] = sum(d * t[d] for d in range(1, m + 1) if m % d == 0)
        t[m + 1] = sum(s[k] * t[m + 1 - k] for k in range(1, m + 1)) // m
    return t


def _ranrut_edges(n: int, rng: random.Random, t: list[int], offset: int) -> tuple[int, list[tuple[int, int]]]:
    """Nijenhuis-Wilf RANRUT; returns (root, edges) with vertices offset.."""
    if n == 1:
        return offset, []
    if n == 2:
        return offset, [(offset, offset + 1)]
    r = rng.randrange((n - 1) * t[n])
    acc = 0
    pick = None
    for d in range(1, n):
        td = t[d]
        if td == 0:
            continue
        for j in range(1, (n - 1) // d + 1):
            w = d * td * t[n - j * d]
            acc += w
            if r < acc:
                pick = (j, d)
                break
        if pick:
            break
    j, d = pick
    root, edges = _ranrut_edges(n - j * d, rng, t, offset)
    sub_root, sub_edges = _ranrut_edges(d, rng, t, offset + (n - j * d))
    base = offset + (n - j * d)
    for copy in range(j):
        shift = copy * d
        edges.extend((u + shift, v + shift) for u, v in sub_edges)
        edges.append((root, sub_root + shift))
    return root, edges


def sample_unlabelled_rooted_tree(n: int, rng: random.Random) -> RootedGraph:
    """Exactly uniform over isomorphism classes of rooted trees on n vertices."""
    counts = _rooted_tree_counts(n)
    root, edges = _ranrut_edges(n, rng, counts, 0)
    g = RootedGraph.make(n, edges, root)
    return g


# -- exact recursive sampler for labelled built-ins -------------------------


def _labelled_sampler_tables(cls: BlockClass, n: int) -> dict:
    key = ("sampler_tables", n)
    if key in cls._cache:
        return cls._cache[key]
    c_series = solve_labelled_class(cls, n)
    w_series = cls.bprime_apply(c_series)
    s_series = w_series.exp()
    fact = [math.factorial(k) for k in range(n + 1)]
    C = [int(c_series.coeffs[k] * fact[k]) for k in range(n + 1)]
    W = [int(w_series.coeffs[k] * fact[k]) for k in range(n + 1)]
    S = [int(s_series.coeffs[k] * fact[k]) for k in range(n + 1)]
    beta_series = cls.bprime_coeffs(n)
    beta = [int(beta_series.coeffs[b] * fact[b]) if b <= beta_series.order else 0 for b in range(n + 1)]
    q: list[list[int]] = [[0] * (n + 1) for _ in range(n + 1)]  # q[b][j] = j![z^j] C^b
    q[0][0] = 1
    power = TruncatedSeries.one(n)
    for b in range(1, n + 1):
        power = power * c_series
        q[b] = [int(power.coeffs[j] * fact[j]) for j in range(n + 1)]
    tables = {"C": C, "W": W, "S": S, "beta": beta, "q": q, "fact": fact}
    cls._cache[key] = tables
    return tables


def _realize_block(cls: BlockClass, root: int, slots: list[int], rng: random.Random) -> list[tuple[int, int]]:
    b = len(slots)
    if cls.name.startswith("trees"):
        return [(root, slots[0])]
    if cls.name.startswith("cacti"):
        if b == 1:
            return [(root, slots[0])]
        order = slots[:]
        rng.shuffle(order)
        ring = [root] + order
        return [(ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring))]
    if cls.name.startswith("blockgraphs"):
        verts = [root] + slots
        return list(itertools.combinations(verts, 2))
    raise ClassError(f"no block realizer for class {cls.name}")


def _sample_labelled_member(cls: BlockClass, n: int, rng: random.Random) -> RootedGraph:
    tab = _labelled_sampler_tables(cls, n)
    C, W, S, beta, q, fact = (
        tab["C"],
        tab["W"],
        tab["S"],
        tab["beta"],
        tab["q"],
        tab["fact"],
    )
    edges: list[tuple[int, int]] = []

    def comb(a: int, b: int) -> int:
        return math.comb(a, b)

    def sample_component_structure(root: int, labels: list[int]) -> None:
        """One block assembly: derived block on b slots + recursive branches."""
        j = len(labels)
        # block size b with weight beta_b * q[b][j] / b!; scale by n! to stay integral
        scale = fact[n]
        r = rng.randrange(W[j] * scale)
        acc = 0
        b_pick = None
        for b in range(1, j + 1):
            if beta[b] == 0:
                continue
            acc += beta[b] * q[b][j] * (scale // fact[b])
            if r < acc:
                b_pick = b
                break
        assert b_pick is not None, "block size selection fell through"
        labels = labels[:]
        rng.shuffle(labels)
        # split into ordered slot subsets by sequential size choice
        chunks: list[list[int]] = []
        rest = j
        rem = labels
        for slot in range(b_pick, 0, -1):
            if slot == 1:
                chunks.append(rem)
                break
            r2 = rng.randrange(q[slot][rest])
            acc2 = 0
            for i in range(1, rest - slot + 2):
                acc2 += comb(rest, i) * C[i] * q[slot - 1][rest - i]
                if r2 < acc2:
                    break
            chunk, rem = rem[:i], rem[i:]
            rest -= i
            chunks.append(chunk)
        slot_roots = []
        for chunk in chunks:
            sub_root = sample_rooted(chunk)
            slot_roots.append(sub_root)
        edges.extend(_realize_block(cls, root, slot_roots, rng))

    def sample_rooted(labels: list[int]) -> int:
        """Uniform rooted member on the given labels; returns the root label."""
        root = labels[rng.randrange(len(labels))]
        rest = [x for x in labels if x != root]
        sample_set(root, rest)
        return root

    def sample_set(root: int, labels: list[int]) -> None:
        k = len(labels)
        while k > 0:
            r = rng.randrange(S[k])
            acc = 0
            for j in range(1, k + 1):
                acc += comb(k - 1, j - 1) * W[j] * S[k - j]
                if r < acc:
                    break
            smallest = min(labels)
            others = [x for x in labels if x != smallest]
            chosen = rng.sample(others, j - 1) if j > 1 else []
            component = [smallest] + chosen
            sample_component_structure(root, component)
            labels = [x for x in others if x not in set(chosen)]
            k -= j

    root = rng.randrange(n)
    rest = [x for x in range(n) if x != root]
    sample_set(root, rest)
    return RootedGraph.make(n, edges, root)


def sample_uniform_rooted(cls: BlockClass, n: int, seed: int) -> RootedGraph:
    """Exactly uniform rooted member of size n, deterministic under seed."""
    rng = random.Random(seed)
    return _sample_uniform(cls, n, rng)


def _sample_uniform(cls: BlockClass, n: int, rng: random.Random) -> RootedGraph:
    if n < 1:
        raise GraphError("sample_uniform_rooted needs n >= 1")
    if cls.kind == "labelled":
        if cls.name == "trees_labelled":
            return sample_labelled_tree(n, rng)
        if n > GENERIC_LABELLED_SAMPLER_MAX:
            raise ClassError(
                f"labelled sampler for {cls.name} capped at n <= {GENERIC_LABELLED_SAMPLER_MAX}"
            )
        cls.check_order(n)
        return _sample_labelled_member(cls, n, rng)
    if cls.name == "trees_unlabelled":
        return sample_unlabelled_rooted_tree(n, rng)
    if n > GENERIC_UNLABELLED_SAMPLER_MAX:
        raise ClassError(
            f"unlabelled sampler for {cls.name} capped at n <= {GENERIC_UNLABELLED_SAMPLER_MAX}"
        )
    members = all_unlabelled_rooted_members(cls, n)
    return members[rng.randrange(len(members))]


def sample_many(cls: BlockClass, n: int, count: int, seed: int) -> Iterator[RootedGraph]:
    rng = random.Random(seed)
    for _ in range(count):
        yield _sample_uniform(cls, n, rng)


# ---------------------------------------------------------------------------
# fringe subgraph counting
# ---------------------------------------------------------------------------


def _components_without(g: RootedGraph, x: int) -> list[list[int]]:
    seen = {x}
    comps = []
    for start in range(g.n):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            for w in g.adjacency[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    stack.append(w)
        comps.append(comp)
    return comps


def check_fringe_head(h: RootedGraph) -> None:
    if h.n < 2:
        raise GraphError("fringe subgraphs need at least one non-root vertex")
    if len(block_cut_tree(h).blocks_at(h.root)) != 1:
        raise GraphError("fringe subgraph root must belong to a single block")


def fringe_count(g: RootedGraph, h: RootedGraph, mode: str = "rooted") -> int:
    """Occurrences of h as a fringe subgraph of g.

    ``rooted`` excludes occurrences containing g's root strictly inside
    (root == cutvertex x is fine); ``unrooted`` drops that restriction.
    """
    if mode not in ("rooted", "unrooted"):
        raise GraphError(f"fringe_count mode must be rooted|unrooted, got {mode}")
    check_fringe_head(h)
    h_code = canonical_rooted(h)
    count = 0
    for x in range(g.n):
        for comp in _components_without(g, x):
            if len(comp) + 1 != h.n:
                continue
            if mode == "rooted" and g.root != x and g.root in comp:
                continue
            k = g.induced(comp + [x], x)
            if canonical_rooted(k) == h_code:
                count += 1
    return count


# ---------------------------------------------------------------------------
# chain-event matching
# ---------------------------------------------------------------------------


def _hang(g: RootedGraph, v: int, block_side: int) -> RootedGraph:
    """v plus every component of g - v not containing ``block_side``, rooted at v."""
    keep = [v]
    for comp in _components_without(g, v):
        if block_side not in comp:
            keep.extend(comp)
    return g.induced(keep, v)


def matches_chain(g: RootedGraph, links: Sequence, cls: BlockClass) -> bool:
    """Does g decompose as the 2-ended link chain followed by a class remainder?

    Isomorphisms fix source and sink at every step, and the remainder behind
    the last sink must be strictly larger than the whole chain (the finite-n
    tie-break for the sink's uniqueness).
    """
    if not g.is_connected():
        raise GraphError("matches_chain expects a connected graph")
    if not links:
        return class_contains(cls, g)
    total = sum(link.size for link in links)
    if g.n - total <= total:
        return False
    return _match_from(g, g.root, list(links), cls)


def _match_from(g: RootedGraph, s: int, links: list, cls: BlockClass) -> bool:
    if not links:
        return class_contains(cls, g)
    link = links[0]
    lb = link.block
    if g.n < lb.n:
        return False
    for bl in block_cut_tree(g).blocks_at(s):
        if len(bl) != lb.n:
            continue
        vs = sorted(bl)
        sub = g.induced(vs, s)
        s_idx = vs.index(s)
        seen_assignments = set()
        for phi in isomorphisms(lb, sub, pins={link.source: s_idx}):
            assignment = tuple(phi)
            if assignment in seen_assignments:
                continue
            seen_assignments.add(assignment)
            t = vs[phi[link.sink]]
            ok = True
            for u in range(lb.n):
                if u == link.sink:
                    continue
                gv = vs[phi[u]]
                other = next(x for x in vs if x != gv)
                hang = _hang(g, gv, other)
                branch = link.branches[u]
                if hang.n != branch.n or canonical_rooted(hang) != canonical_rooted(branch):
                    ok = False
                    break
            if not ok:
                continue
            other_t = next(x for x in vs if x != t)
            remainder = _hang(g, t, other_t)
            if _match_from(remainder, remainder.root, links[1:], cls):
                return True
    return False


# ---------------------------------------------------------------------------
# JSON-lines graph corpora
# ---------------------------------------------------------------------------


def write_graph_corpus(path: str, graphs: Iterable[RootedGraph]) -> int:
    """Stream graphs to a JSON-lines corpus file; returns the count."""
    import json

    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_dict(), sort_keys=True) + "\n")
            count += 1
    return count


def read_graph_corpus(path: str) -> Iterator[RootedGraph]:
    """Stream graphs from a JSON-lines corpus file."""
    import json

    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield RootedGraph.from_dict(json.loads(line))
