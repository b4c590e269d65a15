"""Subcritical block class descriptors: built-ins, plug-ins, cycle indices.

A :class:`BlockClass` packages the block-series suppliers a class needs:
labelled classes carry B'/B'' as series transformers plus scalar evaluators,
unlabelled classes carry the corresponding cycle-index-series evaluators
Z_B', Z_B'' and the partial derivatives Z_B',l.  Built-ins use closed forms;
plug-in classes are assembled from explicit coefficients or block lists.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .graphs import (
    GraphError,
    RootedGraph,
    automorphisms,
    canonical_rooted,
    cycle_monomial,
    is_two_connected_block,
)
from .series import SeriesError, TruncatedSeries

BUILTIN_NAMES = (
    "trees_labelled",
    "cacti_labelled",
    "blockgraphs_labelled",
    "trees_unlabelled",
    "cacti_unlabelled",
)


class ClassError(ValueError):
    """Bad class description (unknown name, invalid plug-in data...)."""


# ---------------------------------------------------------------------------
# cycle indices
# ---------------------------------------------------------------------------

Monomial = tuple[tuple[int, int], ...]  # sorted ((cycle_length, multiplicity), ...)


@dataclass(frozen=True)
class CycleIndex:
    """Finite rational combination of cycle-structure monomials."""

    terms: tuple[tuple[Monomial, Fraction], ...]

    @staticmethod
    def from_map(mapping: Mapping[Monomial, Fraction]) -> "CycleIndex":
        items = tuple(sorted((m, Fraction(c)) for m, c in mapping.items() if c != 0))
        return CycleIndex(items)

    def as_map(self) -> dict[Monomial, Fraction]:
        return dict(self.terms)

    def __add__(self, other: "CycleIndex") -> "CycleIndex":
        out = self.as_map()
        for m, c in other.terms:
            out[m] = out.get(m, Fraction(0)) + c
        return CycleIndex.from_map(out)

    def scale(self, c) -> "CycleIndex":
        return CycleIndex.from_map({m: v * Fraction(c) for m, v in self.terms})

    def total_weight(self) -> Fraction:
        return sum((c for _, c in self.terms), Fraction(0))

    def support(self) -> set[int]:
        return {length for m, _ in self.terms for length, _ in m}

    def partial(self, ell: int) -> "CycleIndex":
        """Derivative with respect to the variable s_ell."""
        out: dict[Monomial, Fraction] = {}
        for mono, coeff in self.terms:
            entries = dict(mono)
            mult = entries.get(ell)
            if not mult:
                continue
            if mult == 1:
                del entries[ell]
            else:
                entries[ell] = mult - 1
            key = tuple(sorted(entries.items()))
            out[key] = out.get(key, Fraction(0)) + coeff * mult
        return CycleIndex.from_map(out)

    def evaluate(self, arg: Callable[[int], TruncatedSeries], order: int) -> TruncatedSeries:
        total = TruncatedSeries.zero(order)
        for mono, coeff in self.terms:
            term = TruncatedSeries.one(order)
            for length, mult in mono:
                f = arg(length).lift(order).truncate(order)
                for _ in range(mult):
                    term = term * f
            total = total + term * coeff
        return total

    def evaluate_point(self, argp: Callable[[int], float]) -> float:
        total = 0.0
        for mono, coeff in self.terms:
            term = float(coeff)
            for length, mult in mono:
                term *= argp(length) ** mult
            total += term
        return total


def cycle_index_of_group(perms: Iterable[Sequence[int]], counted: Iterable[int]) -> CycleIndex:
    counted = tuple(counted)
    acc: dict[Monomial, int] = {}
    total = 0
    for perm in perms:
        mono = cycle_monomial(perm, counted)
        acc[mono] = acc.get(mono, 0) + 1
        total += 1
    if total == 0:
        raise ClassError("empty permutation collection")
    return CycleIndex.from_map({m: Fraction(c, total) for m, c in acc.items()})


def cycle_index_derived_block(block: RootedGraph) -> CycleIndex:
    """Cycle index of the root stabilizer, cycles over non-root vertices only.

    The root plays the derived class's distinguished-but-uncounted vertex.
    """
    if block.n > 9:
        raise GraphError("derived-block cycle index limited to blocks on <= 9 vertices")
    if not is_two_connected_block(block):
        raise ClassError("cycle_index_derived_block requires a 2-connected block (or K2)")
    counted = [v for v in range(block.n) if v != block.root]
    return cycle_index_of_group(automorphisms(block), counted)


# ---------------------------------------------------------------------------
# the class descriptor
# ---------------------------------------------------------------------------

ArgSeries = Callable[[int], TruncatedSeries]
ArgPoint = Callable[[int], float]


@dataclass(frozen=True)
class BlockClass:
    """All series data of one block-stable class, labelled or unlabelled."""

    kind: str
    name: str
    default_order: int
    max_order: int | None = None
    # labelled suppliers
    bprime_apply: Callable[[TruncatedSeries], TruncatedSeries] | None = None
    bdoubleprime_apply: Callable[[TruncatedSeries], TruncatedSeries] | None = None
    bprime_point: Callable[[float], float] | None = None
    bdoubleprime_point: Callable[[float], float] | None = None
    bprime_radius: float = math.inf
    # unlabelled suppliers
    z_bprime: Callable[[ArgSeries, int], TruncatedSeries] | None = None
    z_bdoubleprime: Callable[[ArgSeries, int], TruncatedSeries] | None = None
    z_bprime_partial: Callable[[int, ArgSeries, int], TruncatedSeries] | None = None
    partial_indices: tuple[int, ...] = ()
    z_bprime_point: Callable[[ArgPoint], float] | None = None
    z_bdoubleprime_point: Callable[[ArgPoint], float] | None = None
    # exhaustive 2-connected member blocks up to a vertex count (oracles, links)
    block_generator: Callable[[int], list[RootedGraph]] | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def check_order(self, n: int) -> None:
        if self.max_order is not None and n > self.max_order:
            raise SeriesError(
                f"class {self.name} only supplies data to order {self.max_order}, asked {n}"
            )

    def bprime_coeffs(self, order: int) -> TruncatedSeries:
        """B'(y) as a truncated series in y (labelled classes)."""
        if self.bprime_apply is None:
            raise ClassError(f"{self.name} has no labelled suppliers")
        return self.bprime_apply(TruncatedSeries.identity(order))

    def bdoubleprime_coeffs(self, order: int) -> TruncatedSeries:
        if self.bdoubleprime_apply is None:
            raise ClassError(f"{self.name} has no labelled suppliers")
        return self.bdoubleprime_apply(TruncatedSeries.identity(order))


# ---------------------------------------------------------------------------
# block generators shared by the built-ins
# ---------------------------------------------------------------------------


def _k2_blocks(m: int) -> list[RootedGraph]:
    return [RootedGraph.make(2, [(0, 1)])] if m >= 2 else []


def _cacti_blocks(m: int) -> list[RootedGraph]:
    out = _k2_blocks(m)
    out.extend(RootedGraph.cycle(k) for k in range(3, m + 1))
    return out


def _blockgraph_blocks(m: int) -> list[RootedGraph]:
    out = _k2_blocks(m)
    out.extend(RootedGraph.complete(k) for k in range(3, m + 1))
    return out


# ---------------------------------------------------------------------------
# built-in classes
# ---------------------------------------------------------------------------


def _half(series_mode_exact: bool):
    return Fraction(1, 2) if series_mode_exact else 0.5


def _geom(f: TruncatedSeries) -> TruncatedSeries:
    """1/(1-f) for a series with zero constant term."""
    return (TruncatedSeries.one(f.order, f.exact) - f).inverse()


def _trees_labelled() -> BlockClass:
    return BlockClass(
        kind="labelled",
        name="trees_labelled",
        default_order=200,
        bprime_apply=lambda f: f,
        bdoubleprime_apply=lambda f: TruncatedSeries.one(f.order, f.exact),
        bprime_point=lambda t: t,
        bdoubleprime_point=lambda t: 1.0,
        bprime_radius=math.inf,
        block_generator=_k2_blocks,
    )


def _cacti_labelled() -> BlockClass:
    def bprime(f: TruncatedSeries) -> TruncatedSeries:
        return f + f * f * _geom(f) * _half(f.exact)

    def bdouble(f: TruncatedSeries) -> TruncatedSeries:
        inv = _geom(f)
        return (
            TruncatedSeries.one(f.order, f.exact)
            + (f * 2 - f * f) * inv * inv * _half(f.exact)
        )

    return BlockClass(
        kind="labelled",
        name="cacti_labelled",
        default_order=120,
        bprime_apply=bprime,
        bdoubleprime_apply=bdouble,
        bprime_point=lambda t: t + t * t / (2 * (1 - t)),
        bdoubleprime_point=lambda t: 1 + (2 * t - t * t) / (2 * (1 - t) ** 2),
        bprime_radius=1.0,
        block_generator=_cacti_blocks,
    )


def _blockgraphs_labelled() -> BlockClass:
    return BlockClass(
        kind="labelled",
        name="blockgraphs_labelled",
        default_order=120,
        bprime_apply=lambda f: f.exp() - 1,
        bdoubleprime_apply=lambda f: f.exp(),
        bprime_point=math.expm1,
        bdoubleprime_point=math.exp,
        bprime_radius=math.inf,
        block_generator=_blockgraph_blocks,
    )


def _trees_unlabelled() -> BlockClass:
    def zb(arg: ArgSeries, order: int) -> TruncatedSeries:
        return arg(1).lift(order).truncate(order)

    def zbb(arg: ArgSeries, order: int) -> TruncatedSeries:
        return TruncatedSeries.one(order, arg(1).exact)

    def zpart(ell: int, arg: ArgSeries, order: int) -> TruncatedSeries:
        if ell == 1:
            return TruncatedSeries.one(order, arg(1).exact)
        return TruncatedSeries.zero(order, arg(1).exact)

    return BlockClass(
        kind="unlabelled",
        name="trees_unlabelled",
        default_order=200,
        z_bprime=zb,
        z_bdoubleprime=zbb,
        z_bprime_partial=zpart,
        partial_indices=(1,),
        z_bprime_point=lambda argp: argp(1),
        z_bdoubleprime_point=lambda argp: 1.0,
        block_generator=_k2_blocks,
    )


def _cacti_unlabelled() -> BlockClass:
    # Z_B' = s1 + s1^2/(2(1-s1)) + (1+s1) s2 / (2(1-s2)):
    # K2 contributes s1; derived k-cycles have the order-2 reflection stabilizer.
    def zb(arg: ArgSeries, order: int) -> TruncatedSeries:
        f1 = arg(1).lift(order).truncate(order)
        f2 = arg(2).lift(order).truncate(order)
        half = _half(f1.exact)
        one = TruncatedSeries.one(order, f1.exact)
        return f1 + f1 * f1 * _geom(f1) * half + (one + f1) * f2 * _geom(f2) * half

    def zbb(arg: ArgSeries, order: int) -> TruncatedSeries:
        f1 = arg(1).lift(order).truncate(order)
        f2 = arg(2).lift(order).truncate(order)
        half = _half(f1.exact)
        inv1 = _geom(f1)
        one = TruncatedSeries.one(order, f1.exact)
        return one + (f1 * 2 - f1 * f1) * inv1 * inv1 * half + f2 * _geom(f2) * half

    def zpart(ell: int, arg: ArgSeries, order: int) -> TruncatedSeries:
        f1 = arg(1).lift(order).truncate(order)
        f2 = arg(2).lift(order).truncate(order)
        half = _half(f1.exact)
        if ell == 1:
            return zbb(arg, order)
        if ell == 2:
            inv2 = _geom(f2)
            one = TruncatedSeries.one(order, f1.exact)
            return (one + f1) * inv2 * inv2 * half
        return TruncatedSeries.zero(order, f1.exact)

    def zb_point(argp: ArgPoint) -> float:
        f1, f2 = argp(1), argp(2)
        return f1 + f1 * f1 / (2 * (1 - f1)) + (1 + f1) * f2 / (2 * (1 - f2))

    def zbb_point(argp: ArgPoint) -> float:
        f1, f2 = argp(1), argp(2)
        return 1 + (2 * f1 - f1 * f1) / (2 * (1 - f1) ** 2) + f2 / (2 * (1 - f2))

    return BlockClass(
        kind="unlabelled",
        name="cacti_unlabelled",
        default_order=120,
        z_bprime=zb,
        z_bdoubleprime=zbb,
        z_bprime_partial=zpart,
        partial_indices=(1, 2),
        z_bprime_point=zb_point,
        z_bdoubleprime_point=zbb_point,
        block_generator=_cacti_blocks,
    )


_BUILTIN_FACTORIES = {
    "trees_labelled": _trees_labelled,
    "cacti_labelled": _cacti_labelled,
    "blockgraphs_labelled": _blockgraphs_labelled,
    "trees_unlabelled": _trees_unlabelled,
    "cacti_unlabelled": _cacti_unlabelled,
}

_BUILTIN_CACHE: dict[str, BlockClass] = {}


def builtin(name: str) -> BlockClass:
    """Return a built-in class by name (validated once, then cached)."""
    if name not in _BUILTIN_FACTORIES:
        raise ClassError(f"unknown class {name!r}; known: {', '.join(BUILTIN_NAMES)}")
    if name not in _BUILTIN_CACHE:
        cls = _BUILTIN_FACTORIES[name]()
        validate_class(cls)
        _BUILTIN_CACHE[name] = cls
    return _BUILTIN_CACHE[name]


# ---------------------------------------------------------------------------
# plug-in classes
# ---------------------------------------------------------------------------


def custom_labelled(
    bprime_coeffs: Sequence, name: str = "custom_labelled", truncated: bool = False
) -> BlockClass:
    """Class from explicit B'(y) coefficients (taken as a complete polynomial).

    With ``truncated=True`` the coefficients are a truncation instead and all
    downstream series orders are capped accordingly.
    """
    coeffs = [Fraction(c) for c in bprime_coeffs]
    if not coeffs or coeffs[0] != 0:
        raise ClassError("custom_labelled requires bprime_coeffs[0] = 0")
    poly = TruncatedSeries.from_coeffs(coeffs)
    dpoly = poly.derivative()

    cls = BlockClass(
        kind="labelled",
        name=name,
        default_order=min(40, len(coeffs) + 1) if truncated else 40,
        max_order=len(coeffs) if truncated else None,
        bprime_apply=lambda f: poly.lift(f.order).truncate(f.order).compose(f)
        if f.exact
        else poly.to_float().lift(f.order).truncate(f.order).compose(f),
        bdoubleprime_apply=lambda f: dpoly.lift(f.order).truncate(f.order).compose(f)
        if f.exact
        else dpoly.to_float().lift(f.order).truncate(f.order).compose(f),
        bprime_point=lambda t: float(poly.evaluate(Fraction(t))),
        bdoubleprime_point=lambda t: float(dpoly.evaluate(Fraction(t))),
        bprime_radius=math.inf,
    )
    validate_class(cls)
    return cls


def _root_orbit_reps(block: RootedGraph) -> list[RootedGraph]:
    """One rooted copy of the block per root orbit."""
    seen = set()
    reps = []
    for v in range(block.n):
        code = canonical_rooted(block.with_root(v))
        if code not in seen:
            seen.add(code)
            reps.append(block.with_root(v))
    return reps


def custom_unlabelled(blocks: Sequence[RootedGraph], name: str = "custom_unlabelled", complete: bool = False) -> BlockClass:
    """Class from an explicit block list; Z_B' is assembled over all root orbits.

    The class is valid to the order of the largest supplied block unless
    ``complete=True`` declares the list to be the entire block family.
    """
    blocks = list(blocks)
    if not blocks:
        raise ClassError("custom_unlabelled needs at least one block")
    codes = set()
    has_k2 = False
    for b in blocks:
        if not is_two_connected_block(b):
            raise ClassError("custom_unlabelled blocks must be 2-connected (or K2)")
        code = min(canonical_rooted(b.with_root(v)) for v in range(b.n))
        if code in codes:
            raise ClassError("custom_unlabelled blocks must be pairwise non-isomorphic")
        codes.add(code)
        if b.n == 2:
            has_k2 = True
    if not has_k2:
        raise ClassError("every class must contain K2 as a block")
    ci = CycleIndex(())
    for b in blocks:
        for rep in _root_orbit_reps(b):
            ci = ci + cycle_index_derived_block(rep)
    dci = ci.partial(1)
    partials = tuple(sorted(ci.support()))
    max_order = None if complete else max(b.n for b in blocks)
    block_cap = max(b.n for b in blocks)

    def gen(m: int) -> list[RootedGraph]:
        return [b for b in blocks if b.n <= m]

    cls = BlockClass(
        kind="unlabelled",
        name=name,
        default_order=max_order if max_order is not None else 60,
        max_order=max_order,
        z_bprime=lambda arg, order: ci.evaluate(arg, order),
        z_bdoubleprime=lambda arg, order: dci.evaluate(arg, order),
        z_bprime_partial=lambda ell, arg, order: ci.partial(ell).evaluate(arg, order),
        partial_indices=partials,
        z_bprime_point=ci.evaluate_point,
        z_bdoubleprime_point=dci.evaluate_point,
        block_generator=gen,
    )
    cls._cache["block_cap"] = block_cap
    validate_class(cls)
    return cls


def load_class(spec: Mapping | str) -> BlockClass:
    """Load a class from a JSON document (path or parsed mapping).

    Formats: {"kind": "labelled", "bprime": ["0", "1", "1/2", ...]} or
    {"kind": "unlabelled", "blocks": [{"n":..., "root":..., "edges": [...]}]}.
    """
    if isinstance(spec, str):
        with open(spec, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    kind = spec.get("kind")
    name = spec.get("name", "custom")
    if kind == "labelled":
        coeffs = [Fraction(str(c)) for c in spec["bprime"]]
        return custom_labelled(coeffs, name=name, truncated=bool(spec.get("truncated", False)))
    if kind == "unlabelled":
        blocks = [RootedGraph.from_dict(b) for b in spec["blocks"]]
        return custom_unlabelled(blocks, name=name, complete=bool(spec.get("complete", False)))
    raise ClassError(f"class file kind must be 'labelled' or 'unlabelled', got {kind!r}")


# ---------------------------------------------------------------------------
# instantiation-time checks
# ---------------------------------------------------------------------------

_VALIDATE_ORDER = 10


def _labelled_derived_count(block: RootedGraph) -> Fraction:
    """Labelled derived blocks contributed by one block on k+1 vertices: (k+1)!/|Aut|."""
    aut = sum(1 for _ in automorphisms(block, include_root=False))
    return Fraction(math.factorial(block.n), aut)


def validate_class(cls: BlockClass) -> None:
    order = _VALIDATE_ORDER
    if cls.max_order is not None:
        order = min(order, cls.max_order)
    if cls.kind == "labelled":
        bp = cls.bprime_coeffs(order)
        if bp.coeffs[0] != 0:
            raise ClassError(f"{cls.name}: B'(0) must vanish")
        bpp = cls.bdoubleprime_coeffs(order - 1)
        diff = bp.derivative().truncate(order - 1) - bpp
        if not diff.is_zero():
            raise ClassError(f"{cls.name}: B'' is not the derivative of B'")
        if cls.block_generator is not None:
            gen_max = min(6, order + 1)
            blocks = cls.block_generator(gen_max)
            for k in range(1, gen_max):
                expect = sum(
                    (_labelled_derived_count(b) for b in blocks if b.n == k + 1),
                    Fraction(0),
                )
                got = bp.coeffs[k] * math.factorial(k)
                if got != expect:
                    raise ClassError(
                        f"{cls.name}: B' coefficient at y^{k} disagrees with the "
                        f"block generator ({got} vs {expect})"
                    )
    elif cls.kind == "unlabelled":

        def arg(k: int) -> TruncatedSeries:
            return TruncatedSeries.monomial(k, 1, order)

        ogf = cls.z_bprime(arg, order)
        dogf = cls.z_bprime_partial(1, arg, order)
        direct = cls.z_bdoubleprime(arg, order)
        if not (dogf - direct).is_zero():
            raise ClassError(f"{cls.name}: Z_B'' differs from the s1-partial of Z_B'")
        if cls.block_generator is not None:
            gen_max = min(6, order + 1)
            blocks = cls.block_generator(gen_max)
            for k in range(1, gen_max):
                expect = 0
                for b in blocks:
                    if b.n == k + 1:
                        expect += len(_root_orbit_reps(b))
                if ogf.coeffs[k] != expect:
                    raise ClassError(
                        f"{cls.name}: derived-block OGF coefficient z^{k} disagrees "
                        f"with the block generator ({ogf.coeffs[k]} vs {expect})"
                    )
    else:
        raise ClassError(f"{cls.name}: kind must be labelled or unlabelled")

