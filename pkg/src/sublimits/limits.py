"""2-ended links, their measures, fringe constants, and limit-chain sampling.

The labelled measure weighs a link by l(L) rho^|L| / |L|!; the unlabelled
rooted measure by Z_L(rho, rho^2, ...), which collapses to rho^|L| because
every automorphism permutes exactly the |L| non-sink vertices.  The
Benjamini-Schramm measure P^(k) is assembled from fringe densities mu_H and
source-orbit counts omega(H).
"""

from __future__ import annotations

import itertools
import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .classes import BlockClass, ClassError
from .enumeration import (
    _compositions,
    all_unlabelled_rooted_members,
    class_contains,
)
from .graphs import (
    GraphError,
    RootedGraph,
    automorphisms,
    block_cut_tree,
    canonical_rooted,
    is_tree,
    tree_aut_order,
)
from .series import (
    SeriesError,
    SingularityData,
    TruncatedSeries,
    solve_class,
    solve_unlabelled_class,
    substitute_powers,
)

LINK_MAX_SIZE = 12


class MassCutoffError(ArithmeticError):
    """Enumerated link mass below 1 - epsilon; a larger cutoff is needed."""


# ---------------------------------------------------------------------------
# links and chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Link:
    """A block with source and sink, every non-sink vertex carrying a branch.

    ``block.root`` is the sink by convention; ``branches[v]`` is the rooted
    branch graph at block vertex v (None exactly at the sink).
    """

    block: RootedGraph
    source: int
    sink: int
    branches: tuple

    def __post_init__(self):
        if self.source == self.sink:
            raise GraphError("link source and sink must differ")
        for v in range(self.block.n):
            if (self.branches[v] is None) != (v == self.sink):
                raise GraphError("every non-sink block vertex needs a branch")

    @property
    def size(self) -> int:
        return sum(b.n for b in self.branches if b is not None)

    def assembled(self) -> tuple[RootedGraph, int, int]:
        """(graph, source-vertex, sink-vertex); graph rooted at the sink."""
        return _assemble_link(self)

    def key(self) -> bytes:
        g, src, _ = self.assembled()
        return canonical_rooted(g, marks={src: 1})

    def describe(self) -> dict:
        g, src, snk = self.assembled()
        return {
            "size": self.size,
            "block_n": self.block.n,
            "graph": g.to_dict(),
            "source": src,
            "sink": snk,
        }


def _assemble_link(link: Link) -> tuple[RootedGraph, int, int]:
    place: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    nxt = 0
    for v in range(link.block.n):
        if v == link.sink:
            place[v] = nxt
            nxt += 1
            continue
        br = link.branches[v]
        offset = nxt
        mapping = {br.root: offset}
        cur = offset + 1
        for w in range(br.n):
            if w != br.root:
                mapping[w] = cur
                cur += 1
        edges.extend((mapping[a], mapping[b]) for a, b in br.edges)
        place[v] = offset
        nxt = cur
    edges.extend((place[a], place[b]) for a, b in link.block.edges)
    g = RootedGraph.make(nxt, edges, place[link.sink])
    return g, place[link.source], place[link.sink]


def leaf_link(cls: BlockClass) -> Link:
    """The K2 link with a trivial source branch (|L| = 1)."""
    k2 = RootedGraph.make(2, [(0, 1)], 1)
    return Link(k2, source=0, sink=1, branches=(RootedGraph.single(), None))


@dataclass(frozen=True)
class ChainPrefix:
    """A finite chain of links glued sink-to-source, rooted at the first source."""

    links: tuple[Link, ...]
    assembled_graph: RootedGraph
    final_sink: int


def chain_graph(links: Sequence[Link]) -> ChainPrefix:
    links = tuple(links)
    if not links:
        return ChainPrefix((), RootedGraph.single(), 0)
    g, src, snk = links[0].assembled()
    g = g.with_root(src)
    cur_sink = snk
    for link in links[1:]:
        h, h_src, h_snk = link.assembled()
        mapping = {h_src: cur_sink}
        nxt = g.n
        for v in range(h.n):
            if v != h_src:
                mapping[v] = nxt
                nxt += 1
        edges = list(g.edges) + [(mapping[a], mapping[b]) for a, b in h.edges]
        g = RootedGraph.make(nxt, edges, g.root)
        cur_sink = mapping[h_snk]
    return ChainPrefix(links, g, cur_sink)


# ---------------------------------------------------------------------------
# link enumeration
# ---------------------------------------------------------------------------


def enumerate_links(cls: BlockClass, max_size: int) -> list[Link]:
    """All 2-ended links with |L| <= max_size, one per isomorphism class.

    Isomorphisms fix source and sink; links are ordered by (size, canonical
    key) so indices are stable across runs.
    """
    if max_size < 1 or max_size > LINK_MAX_SIZE:
        raise GraphError(f"enumerate_links supports 1 <= max_size <= {LINK_MAX_SIZE}")
    if cls.block_generator is None:
        raise ClassError(f"{cls.name} has no block generator for link enumeration")
    cache = cls._cache.setdefault("links", {})
    if max_size in cache:
        return cache[max_size]
    out: dict[bytes, Link] = {}
    for block in cls.block_generator(max_size + 1):
        if block.n - 1 > max_size:
            continue
        for sink in range(block.n):
            bg = block.with_root(sink)
            positions = [v for v in range(block.n) if v != sink]
            for source in positions:
                for total in range(block.n - 1, max_size + 1):
                    for sizes in _compositions(total, len(positions)):
                        pools = [all_unlabelled_rooted_members(cls, s) for s in sizes]
                        for combo in itertools.product(*pools):
                            branches: list[RootedGraph | None] = [None] * block.n
                            for pos, br in zip(positions, combo):
                                branches[pos] = br
                            link = Link(bg, source, sink, tuple(branches))
                            out.setdefault(link.key(), link)
    links = sorted(out.values(), key=lambda l: (l.size, l.key()))
    cache[max_size] = links
    return links


# ---------------------------------------------------------------------------
# link measures
# ---------------------------------------------------------------------------


def _branch_aut_order(branch: RootedGraph) -> int:
    if is_tree(branch):
        return tree_aut_order(branch)
    return sum(1 for _ in automorphisms(branch))


def link_aut_order(link: Link) -> int:
    """|Aut(L)| with source and sink fixed, branch symmetries included.

    Sums over block automorphisms sigma compatible with the branch decoration;
    each contributes prod_cycles |Aut(branch)|^(cycle length) lifts.
    """
    block = link.block
    codes = {
        v: canonical_rooted(link.branches[v]) for v in range(block.n) if v != link.sink
    }
    total = 0
    for sigma in automorphisms(block, fixed=(link.source,)):
        weight = 1
        seen: set[int] = set()
        ok = True
        for v in range(block.n):
            if v == link.sink or v in seen:
                continue
            cycle = [v]
            w = sigma[v]
            while w != v:
                cycle.append(w)
                w = sigma[w]
            seen.update(cycle)
            first = codes[cycle[0]]
            if any(codes[u] != first for u in cycle[1:]):
                ok = False
                break
            weight *= _branch_aut_order(link.branches[cycle[0]]) ** len(cycle)
        if ok:
            total += weight
    return total


@lru_cache(maxsize=100_000)
def link_labellings(link: Link) -> int:
    """l(L): labellings of the non-sink vertices up to link isomorphism."""
    return math.factorial(link.size) // link_aut_order(link)


def p_link(link: Link, sing: SingularityData) -> float:
    """Labelled link mass l(L) rho^|L| / |L|!."""
    m = link.size
    return link_labellings(link) * sing.rho ** m / math.factorial(m)


def q_link(link: Link, sing: SingularityData) -> float:
    """Unlabelled rooted link mass Z_L(rho, rho^2, ...) = rho^|L|."""
    return sing.rho ** link.size


def chain_probability(cls: BlockClass, sing: SingularityData, links: Sequence[Link], mode: str | None = None) -> float:
    """prod p_L (labelled) or prod q_L (unlabelled rooted) over the chain."""
    mode = mode or ("labelled" if cls.kind == "labelled" else "unlabelled_rooted")
    if mode not in ("labelled", "unlabelled_rooted"):
        raise ClassError(f"chain mode must be labelled|unlabelled_rooted, got {mode}")
    weigh = p_link if mode == "labelled" else q_link
    out = 1.0
    for link in links:
        out *= weigh(link, sing)
    return out


def link_mass_by_size(cls: BlockClass, sing: SingularityData, max_size: int) -> list[float]:
    """masses[m] = total link mass at |L| = m, from the link generating function.

    Labelled: [z^m] C(z) B''(C(z)) * rho^m; unlabelled: the same shape with
    Z_B''(C(z), C(z^2), ...), whose coefficients count links.
    """
    c = solve_class(cls, max_size)
    if cls.kind == "labelled":
        series = c * cls.bdoubleprime_apply(c)
    else:
        tab = {
            k: substitute_powers(c.truncate(max_size // k).lift(max_size), k)
            for k in range(2, max_size + 1)
        }
        zero = TruncatedSeries.zero(max_size)

        def arg(k: int) -> TruncatedSeries:
            return c if k == 1 else tab.get(k, zero)

        series = c * cls.z_bdoubleprime(arg, max_size)
    return [float(series.coeffs[m]) * sing.rho ** m if m else 0.0 for m in range(max_size + 1)]


# ---------------------------------------------------------------------------
# fringe densities (labelled closed form; unlabelled series ratio)
# ---------------------------------------------------------------------------


def _check_fringe_head(h: RootedGraph, cls: BlockClass) -> None:
    if h.n < 2:
        raise GraphError("fringe subgraphs need at least one non-root vertex")
    if len(block_cut_tree(h).blocks_at(h.root)) != 1:
        raise GraphError("the fringe root must belong to a single block")
    if not class_contains(cls, h):
        raise ClassError(f"fringe subgraph is not a member of {cls.name}")


def mu_fringe_labelled(h: RootedGraph, cls: BlockClass, sing: SingularityData) -> float:
    """Limit density of one labelled fringe subgraph: rho^|H| / (|H|! C(rho)).

    |H| counts the labelled (non-root) vertices; multiply by the number of
    distinct labellings |H|!/|Aut(H)| for the density of the unlabelled shape.
    """
    _check_fringe_head(h, cls)
    m = h.n - 1
    return sing.rho ** m / (math.factorial(m) * sing.tau)


def fringe_total_series(
    cls: BlockClass, nonroot_size: int, N: int, exact: bool = False
) -> TruncatedSeries:
    """OGF of total fringe-occurrence counts over rooted members.

    Solves the linear relation for the u-derivative of the marked cycle index
    series on the diagonal; the head enters only through its non-root size
    (every automorphism permutes all of its non-root vertices).
    """
    if nonroot_size < 1:
        raise SeriesError("fringe heads need a positive non-root size")
    c = solve_unlabelled_class(cls, N, exact=True)
    if not exact:
        c = c.to_float()
    one = TruncatedSeries.one(N, exact)
    tab = {k: substitute_powers(c.truncate(N // k).lift(N), k) for k in range(2, N + 1)}
    zero = TruncatedSeries.zero(N, exact)

    def arg(k: int) -> TruncatedSeries:
        return c if k == 1 else tab.get(k, zero)

    partials = {ell: cls.z_bprime_partial(ell, arg, N) for ell in cls.partial_indices}
    if not exact:
        partials = {ell: p.to_float() for ell, p in partials.items()}
    u = TruncatedSeries.zero(N, exact)
    i = 1
    while i * nonroot_size <= N:
        u = u + TruncatedSeries.monomial(i * nonroot_size, 1, N, exact)
        i += 1
    denom = one - c * partials.get(1, zero)
    d = TruncatedSeries.zero(N, exact)
    good = 1
    while good < N:
        m2 = min(N, 2 * good)
        rest = TruncatedSeries.zero(N, exact)
        for ell, p_ell in partials.items():
            e_ell = substitute_powers(d.truncate(N // ell).lift(N), ell) * p_ell
            start = 2 if ell == 1 else 1
            for i in range(start, N // max(ell, 1) + 1):
                piece = substitute_powers(e_ell.truncate(N // i).lift(N), i)
                if piece.is_zero() and i > 1:
                    break
                rest = rest + piece * ell
        d = (c * (rest + u)) / denom
        good = m2
    return d.truncate(N)


def _ratio_limit(num: TruncatedSeries, den_c: TruncatedSeries, N: int) -> float:
    """Richardson limit of num_n / (n * c_n)."""
    pairs = []
    for n in range(max(8, N // 3), N + 1):
        cn = float(den_c.coeffs[n])
        if cn == 0:
            continue
        pairs.append((n, float(num.coeffs[n]) / (n * cn)))
    for p in (1, 2):
        out = []
        for (n0, a0), (n1, a1) in zip(pairs, pairs[1:]):
            w0, w1 = float(n0) ** p, float(n1) ** p
            out.append((n1, (w1 * a1 - w0 * a0) / (w1 - w0)))
        pairs = out
    return pairs[-1][1]


def mu_from_size(cls: BlockClass, nonroot_size: int, N: int, tol: float = 1e-4) -> float:
    """Fringe density for any head of the given non-root size, by series ratio.

    Two truncation orders must agree within tol, else the order is too low.
    """
    key = ("mu", nonroot_size, N, tol)
    if key in cls._cache:
        return cls._cache[key]
    c = solve_unlabelled_class(cls, N, exact=False)
    d_full = fringe_total_series(cls, nonroot_size, N)
    mu_full = _ratio_limit(d_full, c, N)
    half = max(N // 2, 3 * nonroot_size + 12)
    d_half = fringe_total_series(cls, nonroot_size, half)
    mu_half = _ratio_limit(d_half, solve_unlabelled_class(cls, half, exact=False), half)
    if not math.isfinite(mu_full) or abs(mu_full - mu_half) > tol:
        raise SeriesError(
            f"order too low: mu estimates {mu_full:.6g} / {mu_half:.6g} disagree beyond {tol:g}"
        )
    cls._cache[key] = mu_full
    return mu_full


def mu_fringe_unlabelled(h: RootedGraph, cls: BlockClass, N: int | None = None, tol: float = 1e-4) -> float:
    """Limit density of occurrences of the rooted head h at the fringe."""
    _check_fringe_head(h, cls)
    N = N if N is not None else cls.default_order
    return mu_from_size(cls, h.n - 1, N, tol)


def mu_fringe_unlabelled_closed(
    cls: BlockClass, nonroot_size: int, sing: SingularityData, N: int | None = None
) -> float:
    """Cross-check value A_u(rho,rho) / (1 + rho A_z(rho,rho)) from the
    solved linear system; usable at built-ins where the pieces converge."""
    N = N if N is not None else cls.default_order
    c = solve_unlabelled_class(cls, N, exact=False)
    d = fringe_total_series(cls, nonroot_size, N)
    rho, tau = sing.rho, sing.tau
    cprime = [n * c.coeffs[n] for n in range(1, c.order + 1)]

    def horner(cs, x):
        acc = 0.0
        for v in reversed(cs):
            acc = acc * x + v
        return acc

    def zpartial_point(ell: int, argp) -> float:
        const = lambda v: TruncatedSeries((float(v),), False)
        return float(cls.z_bprime_partial(ell, lambda k: const(argp(k)), 0).coeffs[0])

    def args_at(i: int):
        def argp(m: int) -> float:
            if i == 1 and m == 1:
                return tau
            return horner(c.coeffs, rho ** (i * m))

        return argp

    a_u = 0.0
    a_z = 0.0
    for i in range(1, 200):
        if rho ** i < 1e-18:
            break
        argp = args_at(i)
        for ell in cls.partial_indices:
            if i == 1 and ell == 1:
                continue  # the (1,1) term sits in the solved denominator
            zk = zpartial_point(ell, argp)
            x = rho ** (i * ell)
            a_u += ell * horner(d.coeffs, x) * zk
            a_z += ell * (x / rho) * horner(cprime, x) * zk
        a_u += rho ** (i * nonroot_size)
    return a_u / (1.0 + rho * a_z)


# ---------------------------------------------------------------------------
# the Benjamini-Schramm chain measure
# ---------------------------------------------------------------------------


def source_orbit_count(chain: ChainPrefix) -> int:
    """omega(H): vertices equivalent to the chain source, sink taken as root."""
    h = chain.assembled_graph.with_root(chain.final_sink)
    source = chain.assembled_graph.root
    target = canonical_rooted(h, marks={source: 1})
    return sum(
        1 for v in range(h.n) if canonical_rooted(h, marks={v: 1}) == target
    )


def bs_chain_probability(cls: BlockClass, links: Sequence[Link], N: int | None = None) -> float:
    """P^(k)(L_1..L_k) = omega(H) mu_H for the assembled chain graph H."""
    if cls.kind != "unlabelled":
        raise ClassError("the BS chain measure applies to unlabelled classes")
    links = list(links)
    if not links:
        return 1.0
    chain = chain_graph(links)
    N = N if N is not None else cls.default_order
    mu = mu_from_size(cls, chain.assembled_graph.n - 1, N)
    return source_orbit_count(chain) * mu


# ---------------------------------------------------------------------------
# sampling the limit chain
# ---------------------------------------------------------------------------


def sample_limit_chain(
    cls: BlockClass,
    sing: SingularityData,
    k: int,
    mode: str | None = None,
    seed: int = 0,
    eps: float = 1e-3,
    max_size: int = LINK_MAX_SIZE,
) -> ChainPrefix:
    """k independent draws from the truncated-and-renormalized link measure.

    The enumerated links must carry mass >= 1 - eps, otherwise this raises
    MassCutoffError; the truncation bias of any chain event is at most eps*k.
    """
    mode = mode or ("labelled" if cls.kind == "labelled" else "unlabelled_rooted")
    links = enumerate_links(cls, max_size)
    cache_key = ("link_cdf", mode, sing.rho, max_size)
    if cache_key not in cls._cache:
        weigh = p_link if mode == "labelled" else q_link
        cls._cache[cache_key] = list(
            itertools.accumulate(weigh(link, sing) for link in links)
        )
    cum = cls._cache[cache_key]
    total = cum[-1]
    if total < 1.0 - eps:
        raise MassCutoffError(
            f"links up to size {max_size} carry mass {total:.4f} < 1 - eps = "
            f"{1 - eps:.4f}; increase max_size or relax eps"
        )
    rng = random.Random(seed)
    chosen = []
    for _ in range(k):
        r = rng.random() * total
        chosen.append(links[min(bisect_right(cum, r), len(links) - 1)])
    return chain_graph(chosen)
