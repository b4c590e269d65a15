"""Batch experiment driver: constants, chain verification, metric, cores.

Exit codes: 0 ok, 2 configuration errors, 3 numeric failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .classes import BUILTIN_NAMES, BlockClass, ClassError, builtin, load_class
from .enumeration import (
    all_class_members_labelled,
    all_labelled_trees,
    all_unlabelled_rooted_members,
    all_unlabelled_rooted_trees,
    matches_chain,
    rooted_variants,
    sample_many,
)
from .graphs import GraphError, RootedGraph
from .limits import (
    MassCutoffError,
    bs_chain_probability,
    chain_probability,
    enumerate_links,
    leaf_link,
    link_mass_by_size,
    mu_from_size,
    p_link,
    q_link,
    sample_limit_chain,
)
from .metric import CoreUndefinedError, DslError, OmegaMarkedGraph, core, parse_family, similarity_witness
from .series import (
    AsymptoticsMismatchError,
    NotSubcriticalError,
    SeriesError,
    find_singularity,
    solve_class,
)
from .report import emit, envelope, figure_chain, figure_constants

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

EXHAUSTIVE_LABELLED_MAX = 7
EXHAUSTIVE_UNLABELLED_MAX = 16


class CliConfigError(ValueError):
    pass


def _load_block_class(args) -> BlockClass:
    if getattr(args, "class_file", None):
        return load_class(args.class_file)
    name = getattr(args, "block_class", None)
    if not name:
        raise CliConfigError("specify --class or --class-file")
    return builtin(name)


def _parse_n_range(spec: str) -> list[int]:
    parts = spec.split(":")
    if not 1 <= len(parts) <= 3:
        raise CliConfigError(f"bad --n range {spec!r}; use A or A:B or A:B:STEP")
    try:
        nums = [int(p) for p in parts]
    except ValueError as exc:
        raise CliConfigError(f"bad --n range {spec!r}: {exc}") from exc
    if len(nums) == 1:
        return nums
    a, b = nums[0], nums[1]
    step = nums[2] if len(nums) == 3 else 1
    if step < 1 or b < a or a < 1:
        raise CliConfigError(f"bad --n range {spec!r}")
    return list(range(a, b + 1, step))


def _resolve_chain(cls: BlockClass, spec: str, max_size: int):
    """Chain spec: '' (empty), or comma list of 'leaf' / link indices."""
    spec = spec.strip()
    if not spec or spec == "empty":
        return [], []
    links = None
    out = []
    ids = []
    for token in spec.split(","):
        token = token.strip()
        if token == "leaf":
            out.append(leaf_link(cls))
            ids.append("leaf")
        elif token.isdigit():
            if links is None:
                links = enumerate_links(cls, max_size)
            idx = int(token)
            if idx >= len(links):
                raise CliConfigError(
                    f"link index {idx} out of range ({len(links)} links at max size {max_size})"
                )
            out.append(links[idx])
            ids.append(idx)
        else:
            raise CliConfigError(f"bad chain token {token!r}; use 'leaf' or link indices")
    return out, ids


def _exhaustive_members(cls: BlockClass, n: int):
    if cls.kind == "labelled":
        if n > EXHAUSTIVE_LABELLED_MAX:
            return None
        if cls.name == "trees_labelled":
            return (g.with_root(v) for g in all_labelled_trees(n) for v in range(n))
        return (g.with_root(v) for g in all_class_members_labelled(n, cls) for v in range(n))
    if n > EXHAUSTIVE_UNLABELLED_MAX:
        return None
    if cls.name == "trees_unlabelled":
        return all_unlabelled_rooted_trees(n)
    if n > 9:
        return None
    return iter(all_unlabelled_rooted_members(cls, n))


def cmd_constants(args) -> dict:
    cls = _load_block_class(args)
    order = args.order or cls.default_order
    sing = find_singularity(cls, tol=args.tol, order=order)
    series = solve_class(cls, order)
    mass_cut = min(args.max_size, order)
    masses = link_mass_by_size(cls, sing, mass_cut)
    report = {
        "class": cls.name,
        "kind": cls.kind,
        "singularity": sing.as_dict(),
        "leaf_probability_rooted": sing.rho,
        "link_mass_by_size": {str(m): masses[m] for m in range(1, mass_cut + 1)},
    }
    if cls.kind == "unlabelled":
        report["leaf_probability_bs"] = mu_from_size(cls, 1, order)
    else:
        # labelled classes: the BS and rooted chain measures coincide
        report["leaf_probability_bs"] = sing.rho / sing.tau
    points = []
    rho_pow = 1.0
    for n in range(1, order + 1):
        rho_pow *= sing.rho
        try:
            points.append((n, float(series.coeffs[n]) * rho_pow * n ** 1.5))
        except OverflowError:
            points.append((n, float("nan")))
    rows = [
        {"quantity": "rho", "value": sing.rho},
        {"quantity": "tau", "value": sing.tau},
        {"quantity": "b", "value": sing.b},
        {"quantity": "A", "value": sing.A},
        {"quantity": "residual", "value": sing.residual},
        {"quantity": "leaf_probability_rooted", "value": report["leaf_probability_rooted"]},
        {"quantity": "leaf_probability_bs", "value": report["leaf_probability_bs"]},
    ]
    figure = figure_constants(points, sing.A, masses[1:])
    return {"report": report, "rows": rows, "figure": figure}


def cmd_verify_chain(args) -> dict:
    cls = _load_block_class(args)
    order = args.order or cls.default_order
    sing = find_singularity(cls, tol=args.tol, order=order)
    chain, ids = _resolve_chain(cls, args.chain, args.max_size)
    measure = args.measure
    if measure == "bs" and cls.kind != "unlabelled":
        raise CliConfigError("--measure bs requires an unlabelled class")
    if measure == "bs":
        theory = bs_chain_probability(cls, chain, order)
    else:
        theory = chain_probability(cls, sing, chain)
    rows = []
    for n in _parse_n_range(args.n):
        row: dict = {"n": n, "exhaustive": None, "empirical": None, "samples": 0}
        members = _exhaustive_members(cls, n)
        if members is not None:
            hits = 0
            total = 0
            for g in members:
                total += 1
                if matches_chain(g, chain, cls):
                    hits += 1
            row["exhaustive"] = hits / total if total else None
        if args.samples:
            hits = 0
            for g in sample_many(cls, n, args.samples, args.seed + n):
                if matches_chain(g, chain, cls):
                    hits += 1
            p_hat = hits / args.samples
            half = 1.96 * math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / args.samples)
            row.update(
                empirical=p_hat,
                ci_low=max(0.0, p_hat - half),
                ci_high=min(1.0, p_hat + half),
                samples=args.samples,
            )
        rows.append(row)
    link_table = [
        dict(id=i, size=link.size, p=(p_link if cls.kind == "labelled" else q_link)(link, sing))
        for i, link in zip(ids, chain)
    ]
    limit_sampling = None
    if args.samples and measure == "rooted":
        # frequency of this exact chain under the truncated limit measure
        try:
            target = tuple(link.key() for link in chain)
            hits = 0
            for j in range(args.samples):
                draw = sample_limit_chain(
                    cls,
                    sing,
                    len(chain),
                    seed=args.seed * 1_000_003 + j,
                    eps=args.epsilon,
                    max_size=args.max_size,
                )
                if tuple(link.key() for link in draw.links) == target:
                    hits += 1
            limit_sampling = {
                "frequency": hits / args.samples,
                "draws": args.samples,
                "epsilon": args.epsilon,
            }
        except MassCutoffError as exc:
            limit_sampling = {"error": str(exc), "epsilon": args.epsilon}
    report = {
        "class": cls.name,
        "rho": sing.rho,
        "measure": measure,
        "links": link_table,
        "limit_sampling": limit_sampling,
        "chains": [
            {
                "links": ids,
                "theory": theory,
                "rows": rows,
            }
        ],
    }
    return {"report": report, "rows": rows, "figure": figure_chain(rows, theory)}


def cmd_metric(args) -> dict:
    fam_a = parse_family(args.family_a)
    fam_b = parse_family(args.family_b)
    witness = similarity_witness(fam_a, fam_b, args.rmax)
    report = {
        "family_a": fam_a.label(),
        "family_b": fam_b.label(),
        "rmax": args.rmax,
        **witness,
    }
    rows = [
        {
            "family_a": fam_a.label(),
            "family_b": fam_b.label(),
            "r": witness["r"],
            "saturated": witness["saturated"],
            "d": witness["d"],
        }
    ]
    return {"report": report, "rows": rows, "figure": None}


def cmd_core(args) -> dict:
    with open(args.graph, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    base = RootedGraph.from_dict(payload)
    marked = payload.get("marked", [])
    result = core(OmegaMarkedGraph.make(base, marked))
    report = result.describe()
    rows = [
        {
            "ground_floor": " ".join(map(str, result.ground_floor)),
            "first_floor": " ".join(map(str, result.first_floor)),
            "core_n": result.core.n,
            "core_edges": len(result.core.edges),
        }
    ]
    return {"report": report, "rows": rows, "figure": None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sublimits",
        description="Local limits of subcritical graph classes and the RCIS pseudometric.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_class=True):
        if with_class:
            p.add_argument("--class", dest="block_class", choices=BUILTIN_NAMES, help="built-in class")
            p.add_argument("--class-file", help="JSON file describing a custom class")
            p.add_argument("--order", type=int, default=None, help="series truncation order")
            p.add_argument("--tol", type=float, default=1e-10, help="singular-system tolerance")
        p.add_argument("--out", default=None, help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p = sub.add_parser("constants", help="singularity constants and leaf probabilities")
    add_common(p)
    p.add_argument("--max-size", type=int, default=12, help="link-mass cutoff for the report")
    p.set_defaults(fn=cmd_constants)

    p = sub.add_parser("verify-chain", help="chain-event probabilities: theory vs counts")
    add_common(p)
    p.add_argument("--chain", default="leaf", help="'' (empty), or comma list of 'leaf'/link ids")
    p.add_argument("--n", default="4:10", help="sizes A:B[:STEP]")
    p.add_argument("--samples", type=int, default=0, help="Monte-Carlo samples per size")
    p.add_argument("--seed", type=int, default=1, help="RNG seed (required for sampling)")
    p.add_argument("--max-size", type=int, default=6, help="link enumeration cutoff for ids")
    p.add_argument("--measure", choices=("rooted", "bs"), default="rooted")
    p.add_argument("--epsilon", type=float, default=1e-3, help="mass cutoff for limit sampling")
    p.set_defaults(fn=cmd_verify_chain)

    p = sub.add_parser("metric", help="radius of similarity and pseudometric distance")
    p.add_argument("family_a", help="family DSL, e.g. 'star(3)' or 'joinall(fans)'")
    p.add_argument("family_b")
    p.add_argument("--rmax", type=int, default=8)
    add_common(p, with_class=False)
    p.set_defaults(fn=cmd_metric)

    p = sub.add_parser("core", help="ground floor, first floor and core of a marked graph")
    p.add_argument("--graph", required=True, help="JSON graph file with a 'marked' list")
    add_common(p, with_class=False)
    p.set_defaults(fn=cmd_core)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("fn",) and not callable(v)
    }
    try:
        result = args.fn(args)
    except (CliConfigError, ClassError, DslError, GraphError, CoreUndefinedError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"sublimits: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotSubcriticalError, AsymptoticsMismatchError, MassCutoffError, SeriesError, OverflowError) as exc:
        print(f"sublimits: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    doc = envelope(args.command, config, result["report"])
    emit(
        doc,
        result["rows"],
        args.out,
        args.format,
        figure=result["figure"],
        figures_enabled=not args.no_figures,
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
