"""Finite rooted graphs: canonical forms, automorphisms, block decomposition.

Everything downstream (enumeration, link measures, the similarity metric)
shares the small immutable :class:`RootedGraph` defined here.  Canonical
codes are produced by colour refinement seeded with the root colour plus
backtracking over refinement-stable cells, which is exact at the sizes this
package works with (n <= 20).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Sequence

CANON_MAX_VERTICES = 20
AUT_MAX_VERTICES = 12


class GraphError(ValueError):
    """Invalid graph input (bad edge, bad root, size bound exceeded...)."""


def _normalize_edges(n: int, edges: Iterable[Sequence[int]]) -> frozenset[tuple[int, int]]:
    out = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if u == v:
            raise GraphError(f"loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u},{v}) out of range for n={n}")
        out.add((u, v) if u < v else (v, u))
    return frozenset(out)


@dataclass(frozen=True)
class RootedGraph:
    """Simple undirected graph on vertices 0..n-1 with a distinguished root."""

    n: int
    edges: frozenset[tuple[int, int]]
    root: int = 0
    _adj: tuple[tuple[int, ...], ...] = field(
        init=False, repr=False, compare=False, hash=False, default=()
    )

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one vertex")
        if not (0 <= self.root < self.n):
            raise GraphError(f"root {self.root} out of range")
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    @classmethod
    def make(cls, n: int, edges: Iterable[Sequence[int]], root: int = 0) -> "RootedGraph":
        return cls(n, _normalize_edges(n, edges), root)

    # -- basic accessors ------------------------------------------------

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        return self._adj

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        key = (u, v) if u < v else (v, u)
        return key in self.edges

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            for w in self._adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    def with_root(self, root: int) -> "RootedGraph":
        return RootedGraph(self.n, self.edges, root)

    def relabel(self, perm: Sequence[int]) -> "RootedGraph":
        """Apply vertex map old -> perm[old]."""
        edges = frozenset(
            (perm[u], perm[v]) if perm[u] < perm[v] else (perm[v], perm[u])
            for u, v in self.edges
        )
        return RootedGraph(self.n, edges, perm[self.root])

    def induced(self, vertices: Iterable[int], root: int) -> "RootedGraph":
        """Induced subgraph on ``vertices`` (must contain ``root``), relabelled 0..k-1."""
        vs = sorted(set(vertices))
        index = {v: i for i, v in enumerate(vs)}
        if root not in index:
            raise GraphError("root not among induced vertices")
        edges = [
            (index[u], index[v]) for u, v in self.edges if u in index and v in index
        ]
        return RootedGraph.make(len(vs), edges, index[root])

    def distances(self, source: int | None = None) -> list[int]:
        """BFS distances from the root (or ``source``); unreachable = -1."""
        s = self.root if source is None else source
        dist = [-1] * self.n
        dist[s] = 0
        queue = [s]
        for v in queue:
            for w in self._adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        return dist

    # -- JSON wire format (see enumeration module docs) ------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "root": self.root,
            "edges": sorted([u, v] for u, v in self.edges),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "RootedGraph":
        return cls.make(int(obj["n"]), obj.get("edges", []), int(obj.get("root", 0)))

    # -- small builders ---------------------------------------------------

    @staticmethod
    def single() -> "RootedGraph":
        return RootedGraph(1, frozenset())

    @staticmethod
    def path(n: int, root: int = 0) -> "RootedGraph":
        return RootedGraph.make(n, [(i, i + 1) for i in range(n - 1)], root)

    @staticmethod
    def star(leaves: int, root_at_center: bool = True) -> "RootedGraph":
        g = RootedGraph.make(leaves + 1, [(0, i + 1) for i in range(leaves)], 0)
        return g if root_at_center else g.with_root(1)

    @staticmethod
    def cycle(n: int) -> "RootedGraph":
        return RootedGraph.make(n, [(i, (i + 1) % n) for i in range(n)], 0)

    @staticmethod
    def complete(n: int) -> "RootedGraph":
        return RootedGraph.make(n, itertools.combinations(range(n), 2), 0)

    @staticmethod
    def fan(path_vertices: int) -> "RootedGraph":
        """Apex (the root) joined to every vertex of a path."""
        edges = [(0, i) for i in range(1, path_vertices + 1)]
        edges += [(i, i + 1) for i in range(1, path_vertices)]
        return RootedGraph.make(path_vertices + 1, edges, 0)


# ---------------------------------------------------------------------------
# canonical forms
# ---------------------------------------------------------------------------


def _refine(adj, colors):
    """Colour refinement; returns stable colours numbered by sorted signature."""
    ncls = len(set(colors))
    while True:
        sig = [
            (colors[v], tuple(sorted(colors[w] for w in adj[v])))
            for v in range(len(adj))
        ]
        order = {s: i for i, s in enumerate(sorted(set(sig)))}
        colors = [order[s] for s in sig]
        k = len(order)
        if k == ncls:
            return colors
        ncls = k


def _code_from_discrete(adj, colors, marks):
    order = sorted(range(len(adj)), key=lambda v: colors[v])
    pos = {v: i for i, v in enumerate(order)}
    bits = bytearray()
    acc = 0
    nb = 0
    for i in range(len(order)):
        ai = set(adj[order[i]])
        for j in range(i + 1, len(order)):
            acc = (acc << 1) | (1 if order[j] in ai else 0)
            nb += 1
            if nb == 8:
                bits.append(acc)
                acc, nb = 0, 0
    if nb:
        bits.append(acc << (8 - nb))
    markrow = tuple(marks[v] for v in order)
    return (markrow, bytes(bits))


def _canon_search(adj, colors, marks):
    colors = _refine(adj, colors)
    cells: dict[int, list[int]] = {}
    for v, c in enumerate(colors):
        cells.setdefault(c, []).append(v)
    target = None
    for c in sorted(cells):
        if len(cells[c]) > 1:
            target = cells[c]
            break
    if target is None:
        return _code_from_discrete(adj, colors, marks)
    best = None
    fresh = max(colors) + 1
    for v in target:
        branch = list(colors)
        branch[v] = fresh
        code = _canon_search(adj, branch, marks)
        if best is None or code < best:
            best = code
    return best


def _tree_code(n, adj, root, markmap):
    """Canonical bytes for a rooted (marked) tree, or None when not a tree."""
    parent = [-2] * n
    parent[root] = -1
    order = [root]
    for v in order:
        for w in adj[v]:
            if parent[w] == -2:
                parent[w] = v
                order.append(w)
            elif w != parent[v]:
                return None  # cycle
    if len(order) != n:
        return None  # disconnected
    shape = [None] * n
    for v in reversed(order):
        kids = sorted(shape[w] for w in adj[v] if parent[w] == v)
        shape[v] = (markmap.get(v, 0), tuple(kids))
    return b"T" + repr(shape[root]).encode()


@lru_cache(maxsize=200_000)
def _canonical_code_cached(n, edges, root, markitems):
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    markmap = dict(markitems)
    if len(edges) == n - 1:
        code = _tree_code(n, adj, root, markmap)
        if code is not None:
            return code
    marks = [(1 if v == root else 0, markmap.get(v, 0)) for v in range(n)]
    order = {m: i for i, m in enumerate(sorted(set(marks)))}
    colors = [order[m] for m in marks]
    markrow, bits = _canon_search(tuple(tuple(a) for a in adj), colors, marks)
    return bytes([n]) + repr(markrow).encode() + bits


def canonical_rooted(g: RootedGraph, marks: Mapping[int, int] | None = None) -> bytes:
    """Canonical code; equal codes iff rooted-isomorphic (marks respected).

    ``marks`` assigns extra colours to vertices (used to pin link sources and
    sinks); unmarked vertices share the default colour.
    """
    if g.n > CANON_MAX_VERTICES:
        raise GraphError(f"canonicalization bound exceeded: n={g.n} > {CANON_MAX_VERTICES}")
    items = tuple(sorted((int(k), int(v)) for k, v in (marks or {}).items()))
    return _canonical_code_cached(g.n, tuple(sorted(g.edges)), g.root, items)


def canonical_unrooted(g: RootedGraph) -> bytes:
    """Root-agnostic canonical code (minimum over all rootings)."""
    return min(canonical_rooted(g.with_root(v)) for v in range(g.n))


def are_isomorphic(g: RootedGraph, h: RootedGraph) -> bool:
    if g.n != h.n or len(g.edges) != len(h.edges):
        return False
    return canonical_rooted(g) == canonical_rooted(h)


# ---------------------------------------------------------------------------
# automorphisms
# ---------------------------------------------------------------------------


def automorphisms(
    g: RootedGraph, fixed: Sequence[int] = (), include_root: bool = True
) -> Iterator[tuple[int, ...]]:
    """Yield all automorphisms (as tuples v -> perm[v]) fixing root and ``fixed``.

    Plain backtracking over refinement colours; intended for graphs up to
    ~AUT_MAX_VERTICES vertices.
    """
    if g.n > AUT_MAX_VERTICES:
        raise GraphError(f"automorphism search bound exceeded: n={g.n}")
    pins = list(fixed) + ([g.root] if include_root else [])
    marks = [0] * g.n
    for i, v in enumerate(pins):
        marks[v] = i + 1
    order = {m: i for i, m in enumerate(sorted(set(marks)))}
    colors = _refine(g.adjacency, [order[m] for m in marks])
    verts = sorted(range(g.n), key=lambda v: (colors[v], v))
    by_color: dict[int, list[int]] = {}
    for v in range(g.n):
        by_color.setdefault(colors[v], []).append(v)
    adjsets = [set(a) for a in g.adjacency]
    perm = [-1] * g.n
    used = [False] * g.n

    def backtrack(i: int) -> Iterator[tuple[int, ...]]:
        if i == len(verts):
            yield tuple(perm)
            return
        v = verts[i]
        for w in by_color[colors[v]]:
            if used[w]:
                continue
            ok = True
            for u in g.adjacency[v]:
                if perm[u] >= 0 and perm[u] not in adjsets[w]:
                    ok = False
                    break
            if ok and g.degree(v) == g.degree(w):
                perm[v] = w
                used[w] = True
                yield from backtrack(i + 1)
                used[w] = False
                perm[v] = -1

    yield from backtrack(0)


def automorphism_count(g: RootedGraph, fixed: Sequence[int] = (), include_root: bool = True) -> int:
    if is_tree(g) and not fixed and include_root:
        return tree_aut_order(g)
    return sum(1 for _ in automorphisms(g, fixed, include_root))


def isomorphisms(
    g: RootedGraph, h: RootedGraph, pins: Mapping[int, int] | None = None
) -> Iterator[tuple[int, ...]]:
    """All isomorphisms g -> h extending ``pins`` (roots are NOT pinned here)."""
    if g.n != h.n or len(g.edges) != len(h.edges):
        return
    if g.n > AUT_MAX_VERTICES:
        raise GraphError(f"isomorphism search bound exceeded: n={g.n}")
    pins = dict(pins or {})
    degs_g = sorted(g.degree(v) for v in range(g.n))
    degs_h = sorted(h.degree(v) for v in range(h.n))
    if degs_g != degs_h:
        return
    hadj = [set(a) for a in h.adjacency]
    order = sorted(range(g.n), key=lambda v: (v not in pins, -g.degree(v)))
    perm = [-1] * g.n
    used = [False] * h.n

    def backtrack(i: int) -> Iterator[tuple[int, ...]]:
        if i == g.n:
            yield tuple(perm)
            return
        v = order[i]
        candidates = [pins[v]] if v in pins else range(h.n)
        for w in candidates:
            if used[w] or h.degree(w) != g.degree(v):
                continue
            ok = True
            for u in g.adjacency[v]:
                if perm[u] >= 0 and perm[u] not in hadj[w]:
                    ok = False
                    break
            if ok:
                # prune: mapped neighbours of v must account for every used
                # neighbour of w (non-edges cannot land on edges)
                deg_mapped = sum(1 for u in g.adjacency[v] if perm[u] >= 0)
                wdeg_mapped = sum(1 for x in hadj[w] if used[x])
                if deg_mapped != wdeg_mapped:
                    continue
                perm[v] = w
                used[w] = True
                yield from backtrack(i + 1)
                used[w] = False
                perm[v] = -1

    yield from backtrack(0)


def cycle_monomial(perm: Sequence[int], counted: Iterable[int]) -> tuple[tuple[int, int], ...]:
    """Cycle type of ``perm`` restricted to ``counted`` vertices, as sorted (len, mult)."""
    counted = set(counted)
    seen = set()
    lengths: dict[int, int] = {}
    for v in counted:
        if v in seen:
            continue
        length = 0
        w = v
        while w not in seen:
            seen.add(w)
            length += 1
            w = perm[w]
        lengths[length] = lengths.get(length, 0) + 1
    return tuple(sorted(lengths.items()))


# ---------------------------------------------------------------------------
# rooted trees: fast canonical tuples, automorphism order, cycle index values
# ---------------------------------------------------------------------------


def is_tree(g: RootedGraph) -> bool:
    return len(g.edges) == g.n - 1 and g.is_connected()


def tree_children(g: RootedGraph) -> list[list[int]]:
    """Children lists oriented away from the root (input must be a tree)."""
    children: list[list[int]] = [[] for _ in range(g.n)]
    seen = {g.root}
    queue = [g.root]
    for v in queue:
        for w in g.adjacency[v]:
            if w not in seen:
                seen.add(w)
                children[v].append(w)
                queue.append(w)
    if len(seen) != g.n:
        raise GraphError("tree_children: graph is not connected")
    return children


def tree_canonical_tuple(g: RootedGraph):
    """Nested-tuple canonical form of a rooted tree (cheap, tree-only)."""
    children = tree_children(g)

    def rec(v: int):
        return tuple(sorted(rec(w) for w in children[v]))

    return rec(g.root)


def tree_aut_order(g: RootedGraph) -> int:
    """Order of the automorphism group fixing the root (tree-only)."""
    children = tree_children(g)

    def rec(v: int) -> tuple:
        shapes = []
        total = 1
        for w in children[v]:
            shape, a = rec(w)
            shapes.append((shape, a))
            total *= a
        shapes.sort(key=lambda t: t[0])
        mult = 1
        i = 0
        while i < len(shapes):
            j = i
            while j < len(shapes) and shapes[j][0] == shapes[i][0]:
                j += 1
            for k in range(2, j - i + 1):
                mult *= k
            i = j
        return tuple(s for s, _ in shapes), total * mult

    return rec(g.root)[1]


def _partitions(m: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Partitions of m as sorted (part, multiplicity) tuples."""

    def gen(rest: int, maxpart: int):
        if rest == 0:
            yield ()
            return
        for part in range(min(rest, maxpart), 0, -1):
            mult = 1
            total = part
            while total <= rest:
                for tail in gen(rest - total, part - 1):
                    yield ((part, mult),) + tail
                mult += 1
                total += part
        return

    yield from gen(m, m)


def sym_group_cycle_apply(m: int, value_at: Callable[[int], object]):
    """Z_{Sym(m)} with the j-th power sum replaced by ``value_at(j)``.

    Values may be numbers or TruncatedSeries; only +, * and scalar division
    are used.
    """
    total = None
    for lam in _partitions(m):
        weight = Fraction(1)
        term = None
        for part, mult in lam:
            weight /= Fraction(part) ** mult * _factorial(mult)
            for _ in range(mult):
                piece = value_at(part)
                term = piece if term is None else term * piece
        term = term * weight
        total = term if total is None else total + term
    return total


@lru_cache(maxsize=None)
def _factorial(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def tree_cycle_index_eval(g: RootedGraph, value_at: Callable[[int], object]):
    """Evaluate the rooted tree's automorphism cycle index at s_j = value_at(j).

    All vertices, the (fixed) root included, are counted.  Recursion over the
    canonical child decomposition, so large symmetric trees stay cheap.
    """
    children = tree_children(g)

    def shape(v: int):
        return tuple(sorted(shape(w) for w in children[v]))

    def rec(v: int, stretch: int):
        groups: dict[tuple, list[int]] = {}
        for w in children[v]:
            groups.setdefault(shape(w), []).append(w)
        out = value_at(stretch)
        for shp, members in sorted(groups.items()):
            rep = members[0]
            m = len(members)
            out = out * sym_group_cycle_apply(m, lambda j: rec(rep, stretch * j))
        return out

    return rec(g.root, 1)


# ---------------------------------------------------------------------------
# block decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockCutTree:
    """Blocks (maximal 2-connected pieces or bridges) and cutvertices of a graph."""

    blocks: tuple[frozenset[int], ...]
    cutvertices: frozenset[int]

    def blocks_at(self, v: int) -> list[frozenset[int]]:
        return [b for b in self.blocks if v in b]


def block_cut_tree(g: RootedGraph) -> BlockCutTree:
    """Hopcroft-Tarjan biconnected components; every edge lands in one block."""
    if not g.is_connected():
        raise GraphError("block_cut_tree: graph must be connected")
    n = g.n
    if n == 1:
        return BlockCutTree((), frozenset())
    disc = [-1] * n
    low = [0] * n
    parent = [-1] * n
    cuts: set[int] = set()
    blocks: list[frozenset[int]] = []
    stack: list[tuple[int, int]] = []
    timer = 0
    # iterative DFS: (vertex, neighbor-iterator index)
    it_pos = [0] * n
    dfs: list[int] = [g.root]
    disc[g.root] = low[g.root] = timer
    timer += 1
    root_children = 0
    while dfs:
        v = dfs[-1]
        advanced = False
        while it_pos[v] < len(g.adjacency[v]):
            w = g.adjacency[v][it_pos[v]]
            it_pos[v] += 1
            if disc[w] < 0:
                parent[w] = v
                stack.append((v, w))
                disc[w] = low[w] = timer
                timer += 1
                if v == g.root:
                    root_children += 1
                dfs.append(w)
                advanced = True
                break
            elif w != parent[v] and disc[w] < disc[v]:
                stack.append((v, w))
                low[v] = min(low[v], disc[w])
        if advanced:
            continue
        dfs.pop()
        if dfs:
            u = dfs[-1]
            low[u] = min(low[u], low[v])
            if low[v] >= disc[u]:
                comp = set()
                while stack and stack[-1] != (u, v):
                    a, b = stack.pop()
                    comp.update((a, b))
                if stack:
                    a, b = stack.pop()
                    comp.update((a, b))
                blocks.append(frozenset(comp))
                if u != g.root or root_children > 1:
                    cuts.add(u)
    return BlockCutTree(tuple(blocks), frozenset(cuts))


def is_two_connected_block(g: RootedGraph) -> bool:
    """True for K2 and for 2-connected graphs on >= 3 vertices."""
    if g.n == 2:
        return len(g.edges) == 1
    if g.n < 2 or not g.is_connected():
        return False
    bct = block_cut_tree(g)
    return len(bct.blocks) == 1 and len(bct.blocks[0]) == g.n
