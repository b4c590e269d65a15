"""The similarity pseudometric on countable rooted graphs.

r(G,H) is read cumulatively: the largest r such that G and H admit exactly
the same rooted connected induced subgraph (RCIS) isomorphism types at every
size <= r, and d = 1/r.  Infinite graphs enter through a small constructor
DSL whose members have closed profile rules; cores split a graph with
infinite-degree vertices into ground floor, first floor and their span.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .graphs import GraphError, RootedGraph, canonical_rooted

DEFAULT_R_MAX = 8
RADO_R_MAX = 6

Profile = dict[bytes, RootedGraph]


class DslError(ValueError):
    """Family DSL parse error; carries the source position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class CoreUndefinedError(ValueError):
    """The root is an infinite-degree vertex: the ground floor is undefined."""


# ---------------------------------------------------------------------------
# graph families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphFamily:
    """Base of the family DSL; subclasses implement exact RCIS profiles."""

    def profile_cap(self) -> int:
        return 10**9

    def rcis_profile(self, r: int) -> Profile:
        if r < 1:
            raise GraphError("profiles are defined for sizes r >= 1")
        if r > self.profile_cap():
            raise GraphError(
                f"{self.label()}: profiles computable only to r <= {self.profile_cap()}"
            )
        key = (self, r)
        if key not in _PROFILE_CACHE:
            _PROFILE_CACHE[key] = self._profile(r)
        return _PROFILE_CACHE[key]

    def _profile(self, r: int) -> Profile:
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError


_PROFILE_CACHE: dict = {}


def _prof(graphs: Iterable[RootedGraph]) -> Profile:
    out: Profile = {}
    for g in graphs:
        out.setdefault(canonical_rooted(g), g)
    return out


@dataclass(frozen=True)
class Finite(GraphFamily):
    graph: RootedGraph

    def _profile(self, r: int) -> Profile:
        g = self.graph
        if r > g.n:
            return {}
        others = [v for v in range(g.n) if v != g.root]
        found: Profile = {}
        for extra in itertools.combinations(others, r - 1):
            sub = g.induced((g.root,) + extra, g.root)
            if sub.is_connected():
                found.setdefault(canonical_rooted(sub), sub)
        return found

    def label(self) -> str:
        return f"finite(n={self.graph.n})"


@dataclass(frozen=True)
class Path(GraphFamily):
    """Path on n vertices rooted at an end."""

    n: int

    def _profile(self, r: int) -> Profile:
        if r > self.n:
            return {}
        return _prof([RootedGraph.path(r, 0)])

    def label(self) -> str:
        return f"path({self.n})"


@dataclass(frozen=True)
class Ray(GraphFamily):
    def _profile(self, r: int) -> Profile:
        return _prof([RootedGraph.path(r, 0)])

    def label(self) -> str:
        return "ray"


@dataclass(frozen=True)
class Star(GraphFamily):
    """Star with n leaves, rooted at the center."""

    n: int

    def _profile(self, r: int) -> Profile:
        if r - 1 > self.n:
            return {}
        return _prof([RootedGraph.star(r - 1)])

    def label(self) -> str:
        return f"star({self.n})"


@dataclass(frozen=True)
class StarInf(GraphFamily):
    def _profile(self, r: int) -> Profile:
        return _prof([RootedGraph.star(r - 1)])

    def label(self) -> str:
        return "star(inf)"


def _fan_pieces(path_lengths: Sequence[int]) -> RootedGraph:
    """Apex root joined to every vertex of disjoint paths of given lengths."""
    edges = []
    nxt = 1
    for length in path_lengths:
        verts = list(range(nxt, nxt + length))
        edges.extend((0, v) for v in verts)
        edges.extend((verts[i], verts[i + 1]) for i in range(length - 1))
        nxt += length
    return RootedGraph.make(nxt, edges, 0)


def _partitions_of(total: int) -> Iterable[tuple[int, ...]]:
    if total == 0:
        yield ()
        return

    def gen(rest, maxpart):
        if rest == 0:
            yield ()
            return
        for part in range(min(rest, maxpart), 0, -1):
            for tail in gen(rest - part, part):
                yield (part,) + tail

    yield from gen(total, total)


@dataclass(frozen=True)
class Fan(GraphFamily):
    """Fan of order n: a path on n vertices plus an adjacent-to-all apex root."""

    n: int

    def _profile(self, r: int) -> Profile:
        out: Profile = {}
        for lam in _partitions_of(r - 1):
            if sum(lam) + max(len(lam) - 1, 0) <= self.n:
                g = _fan_pieces(lam)
                out.setdefault(canonical_rooted(g), g)
        return out

    def label(self) -> str:
        return f"fan({self.n})"


@dataclass(frozen=True)
class FanInf(GraphFamily):
    def _profile(self, r: int) -> Profile:
        return _prof(_fan_pieces(lam) for lam in _partitions_of(r - 1))

    def label(self) -> str:
        return "fan(inf)"


def join_graphs(graphs: Sequence[RootedGraph]) -> RootedGraph:
    """Disjoint union with all roots identified into a single root."""
    if not graphs:
        return RootedGraph.single()
    edges: list[tuple[int, int]] = []
    nxt = 1
    for g in graphs:
        mapping = {g.root: 0}
        for v in range(g.n):
            if v != g.root:
                mapping[v] = nxt
                nxt += 1
        edges.extend((mapping[a], mapping[b]) for a, b in g.edges)
    return RootedGraph.make(nxt, edges, 0)


def _join_of_profiles(parts: Sequence[Profile], budget: int, unbounded: bool) -> Profile:
    """All joins assembled from the given profiles with ``budget`` non-root
    vertices in total; each profile used at most once unless ``unbounded``."""
    trivial = RootedGraph.single()
    state: dict[bytes, tuple[RootedGraph, int]] = {
        canonical_rooted(trivial): (trivial, 0)
    }
    pieces: list[tuple[RootedGraph, int]] = []
    for prof in parts:
        for g in prof.values():
            if 0 < g.n - 1 <= budget:
                pieces.append((g, g.n - 1))
    if unbounded:
        # one pool, any multiplicities: plain knapsack closure
        frontier = list(state.items())
        while frontier:
            new_frontier = []
            for _, (base, used) in frontier:
                for g, w in pieces:
                    if used + w > budget:
                        continue
                    joined = join_graphs([base, g])
                    code = canonical_rooted(joined)
                    if code not in state:
                        state[code] = (joined, used + w)
                        new_frontier.append((code, (joined, used + w)))
            frontier = new_frontier
        return {
            code: g for code, (g, used) in state.items() if used == budget
        }
    for prof in parts:
        nxt = dict(state)
        for _, (base, used) in state.items():
            for g in prof.values():
                w = g.n - 1
                if w == 0 or used + w > budget:
                    continue
                joined = join_graphs([base, g])
                code = canonical_rooted(joined)
                nxt.setdefault(code, (joined, used + w))
        state = nxt
    return {code: g for code, (g, used) in state.items() if used == budget}


@dataclass(frozen=True)
class Join(GraphFamily):
    members: tuple[GraphFamily, ...]

    def profile_cap(self) -> int:
        return min(m.profile_cap() for m in self.members)

    def _profile(self, r: int) -> Profile:
        parts = []
        for m in self.members:
            prof: Profile = {}
            for s in range(2, r + 1):
                prof.update(m.rcis_profile(s))
            parts.append(prof)
        return _join_of_profiles(parts, r - 1, unbounded=False)

    def label(self) -> str:
        return "join(" + ", ".join(m.label() for m in self.members) + ")"


@dataclass(frozen=True)
class JoinAll(GraphFamily):
    """Join of the whole monotone family path(n) (or fan(n)) over all n.

    Every member profile is eventually available in arbitrarily many copies,
    so the joint profile is the set of all finite joins from the union of the
    member profiles.
    """

    family: str  # "paths" | "fans"

    def _profile(self, r: int) -> Profile:
        member: GraphFamily = Ray() if self.family == "paths" else FanInf()
        pool: Profile = {}
        for s in range(2, r + 1):
            pool.update(member.rcis_profile(s))
        return _join_of_profiles([pool], r - 1, unbounded=True)

    def label(self) -> str:
        return f"joinall({self.family})"


@lru_cache(maxsize=None)
def connected_rooted_graphs(r: int) -> tuple[RootedGraph, ...]:
    """All connected rooted graphs on exactly r vertices, one per iso class."""
    if r > RADO_R_MAX:
        raise GraphError(f"rooted-graph enumeration capped at r <= {RADO_R_MAX}")
    if r == 1:
        return (RootedGraph.single(),)
    pairs = list(itertools.combinations(range(r), 2))
    out: Profile = {}
    for mask in range(1 << len(pairs)):
        if mask.bit_count() < r - 1:
            continue
        edges = [pairs[b] for b in range(len(pairs)) if mask >> b & 1]
        g = RootedGraph.make(r, edges, 0)
        if not g.is_connected():
            continue
        for v in range(r):
            gv = g.with_root(v)
            out.setdefault(canonical_rooted(gv), gv)
    return tuple(out.values())


@dataclass(frozen=True)
class Rado(GraphFamily):
    def profile_cap(self) -> int:
        return RADO_R_MAX

    def _profile(self, r: int) -> Profile:
        return _prof(connected_rooted_graphs(r))

    def label(self) -> str:
        return "rado"


# ---------------------------------------------------------------------------
# radius of similarity and the pseudometric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimilarityResult:
    r: int
    saturated: bool  # true: profiles agreed through r_max, so r(G,H) >= r_max
    differing_size: int | None

    @property
    def d(self) -> float:
        return 1.0 / self.r

    def describe(self) -> dict:
        return {
            "r": self.r,
            "saturated": self.saturated,
            "d": self.d,
            "d_is_upper_bound": self.saturated,
            "differing_size": self.differing_size,
        }


def radius_similarity(f: GraphFamily, g: GraphFamily, r_max: int = DEFAULT_R_MAX) -> SimilarityResult:
    """Largest r <= r_max with equal RCIS profiles at every size <= r."""
    r_max = min(r_max, f.profile_cap(), g.profile_cap())
    for s in range(1, r_max + 1):
        if f.rcis_profile(s).keys() != g.rcis_profile(s).keys():
            return SimilarityResult(s - 1, False, s)
    return SimilarityResult(r_max, True, None)


def d_value(f: GraphFamily, g: GraphFamily, r_max: int = DEFAULT_R_MAX) -> SimilarityResult:
    res = radius_similarity(f, g, r_max)
    if res.r == 0:
        # profiles can only differ from size 2 on (both contain the root);
        # r >= 1 always, so a size-1 difference cannot occur
        raise AssertionError("profiles at size 1 always agree")
    return res


def similarity_witness(f: GraphFamily, g: GraphFamily, r_max: int = DEFAULT_R_MAX) -> dict:
    res = radius_similarity(f, g, r_max)
    out = res.describe()
    if res.differing_size is not None:
        s = res.differing_size
        pf, pg = f.rcis_profile(s), g.rcis_profile(s)
        out["only_in_first"] = [pf[c].to_dict() for c in sorted(pf.keys() - pg.keys())]
        out["only_in_second"] = [pg[c].to_dict() for c in sorted(pg.keys() - pf.keys())]
    return out


def ball(g: RootedGraph, r: int) -> RootedGraph:
    dist = g.distances()
    keep = [v for v in range(g.n) if 0 <= dist[v] <= r]
    return g.induced(keep, g.root)


def d_neighbourhood(g: RootedGraph, h: RootedGraph, r_max: int = DEFAULT_R_MAX) -> SimilarityResult:
    """Neighbourhood metric: largest r with isomorphic radius-r balls."""
    for r in range(1, r_max + 1):
        if canonical_rooted(ball(g, r)) != canonical_rooted(ball(h, r)):
            return SimilarityResult(r - 1, False, r)
    return SimilarityResult(r_max, True, None)


def ball_census(families: Sequence[GraphFamily], k: int) -> dict:
    """Partition families by equality of all size-<=k RCIS profiles.

    The number of parts is checked against 2^|K| with |K| the number of
    connected rooted graphs on at most k vertices, computed by enumeration.
    """
    keys = []
    for fam in families:
        keys.append(tuple(frozenset(fam.rcis_profile(s).keys()) for s in range(1, k + 1)))
    parts: dict[tuple, list[int]] = {}
    for i, key in enumerate(keys):
        parts.setdefault(key, []).append(i)
    n_types = sum(len(connected_rooted_graphs(s)) for s in range(1, k + 1))
    bound = 2 ** n_types
    if len(parts) > bound:
        raise AssertionError("ball bound violated: more parts than 2^|K|")
    return {
        "k": k,
        "num_parts": len(parts),
        "parts": sorted(parts.values()),
        "num_rooted_graph_types": n_types,
        "bound": bound,
    }


# ---------------------------------------------------------------------------
# cores of graphs with infinite-degree vertices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OmegaMarkedGraph:
    """Finite base graph with marked vertices standing for infinite degree."""

    base: RootedGraph
    marked: frozenset[int]

    @classmethod
    def make(cls, base: RootedGraph, marked: Iterable[int]) -> "OmegaMarkedGraph":
        marked = frozenset(int(v) for v in marked)
        if any(not 0 <= v < base.n for v in marked):
            raise GraphError("marked vertex out of range")
        return cls(base, marked)


@dataclass(frozen=True)
class CoreResult:
    core: RootedGraph
    ground_floor: tuple[int, ...]  # vertex ids of the base graph
    first_floor: tuple[int, ...]
    infinite_in_core: tuple[int, ...]  # positions of first-floor vertices in core

    def describe(self) -> dict:
        return {
            "core": self.core.to_dict(),
            "ground_floor": list(self.ground_floor),
            "first_floor": list(self.first_floor),
            "infinite_in_core": list(self.infinite_in_core),
        }


def core(m: OmegaMarkedGraph) -> CoreResult:
    """Ground floor, first floor and the spanned core of a marked graph."""
    g, w = m.base, m.marked
    if g.root in w:
        raise CoreUndefinedError(
            "the root has infinite degree: the ground floor is undefined"
        )
    seen = {g.root}
    stack = [g.root]
    while stack:
        for nb in g.adjacency[stack.pop()]:
            if nb not in seen and nb not in w:
                seen.add(nb)
                stack.append(nb)
    ground = sorted(seen)
    first = sorted(
        v for v in w if any(nb in seen for nb in g.adjacency[v])
    )
    keep = ground + first
    sub = g.induced(keep, g.root)
    index = {v: i for i, v in enumerate(sorted(keep))}
    return CoreResult(
        core=sub,
        ground_floor=tuple(ground),
        first_floor=tuple(first),
        infinite_in_core=tuple(index[v] for v in first),
    )


# ---------------------------------------------------------------------------
# family DSL
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*([a-z]+|\d+|[(),])")


def parse_family(text: str) -> GraphFamily:
    """Parse the family DSL: path(5), ray, star(inf), fan(7), join(...),
    joinall(paths|fans), rado.  Whitespace-insensitive."""
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise DslError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    idx = 0

    def peek():
        return tokens[idx] if idx < len(tokens) else (None, len(text))

    def take(expected: str | None = None):
        nonlocal idx
        tok, at = peek()
        if tok is None:
            raise DslError("unexpected end of input", at)
        if expected is not None and tok != expected:
            raise DslError(f"expected {expected!r}, found {tok!r}", at)
        idx += 1
        return tok, at

    def parse_int_or_inf(allow_inf: bool):
        tok, at = take()
        if tok == "inf":
            if not allow_inf:
                raise DslError("'inf' is not allowed here", at)
            return None
        if not tok.isdigit():
            raise DslError(f"expected a number, found {tok!r}", at)
        val = int(tok)
        if val < 1:
            raise DslError("sizes must be positive", at)
        return val

    def family() -> GraphFamily:
        tok, at = take()
        if tok == "ray":
            return Ray()
        if tok == "rado":
            return Rado()
        if tok == "path":
            take("(")
            n = parse_int_or_inf(allow_inf=False)
            take(")")
            return Path(n)
        if tok == "star":
            take("(")
            n = parse_int_or_inf(allow_inf=True)
            take(")")
            return StarInf() if n is None else Star(n)
        if tok == "fan":
            take("(")
            n = parse_int_or_inf(allow_inf=True)
            take(")")
            return FanInf() if n is None else Fan(n)
        if tok == "join":
            take("(")
            members = [family()]
            while peek()[0] == ",":
                take(",")
                members.append(family())
            take(")")
            return Join(tuple(members))
        if tok == "joinall":
            take("(")
            kind, kat = take()
            if kind not in ("paths", "fans"):
                raise DslError("joinall expects 'paths' or 'fans'", kat)
            take(")")
            return JoinAll(kind)
        raise DslError(f"unknown family {tok!r}", at)

    fam = family()
    tok, at = peek()
    if tok is not None:
        raise DslError(f"trailing input {tok!r}", at)
    return fam
