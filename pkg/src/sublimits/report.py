"""Report emission: canonical JSON, CSV views, and matplotlib figures.

Reports embed the full config and a content hash so identical configs and
seeds reproduce byte-identical output; figures are rendered next to the
delimited output file unless disabled.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from pathlib import Path
from typing import Callable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from . import __version__


def content_hash(payload: dict) -> str:
    """Git-style SHA-1 of the canonical JSON encoding of the inputs."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    header = f"blob {len(blob)}\0".encode()
    return hashlib.sha1(header + blob).hexdigest()


def envelope(command: str, config: dict, report: dict) -> dict:
    return {
        "command": command,
        "config": config,
        "inputs_hash": content_hash({"command": command, "config": config}),
        "versions": {"sublimits": __version__},
        "report": report,
    }


def render_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def render_csv(rows: Sequence[dict]) -> str:
    """Lossy convenience view: one row set, stable column order."""
    if not rows:
        return ""
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def emit(
    doc: dict,
    rows: Sequence[dict],
    out: str | None,
    fmt: str,
    figure: Callable[[str], None] | None = None,
    figures_enabled: bool = True,
) -> None:
    """Write the report; when writing to a file, render the figure alongside."""
    text = render_json(doc) if fmt == "json" else render_csv(rows)
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text, encoding="utf-8")
    if figure is not None and figures_enabled:
        figure(str(path.with_suffix(".png")))


def figure_constants(series_points: list[tuple[int, float]], a_value: float, masses: list[float]):
    def draw(path: str) -> None:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
        if series_points:
            ns = [n for n, _ in series_points]
            vals = [v for _, v in series_points]
            ax1.plot(ns, vals, lw=1, label=r"$c_n \rho^n n^{3/2}$")
            ax1.axhline(a_value, color="crimson", ls="--", lw=1, label="fitted A")
            ax1.set_xlabel("n")
            ax1.set_ylabel("scaled coefficient")
            ax1.legend(frameon=False, fontsize=8)
        cum = []
        acc = 0.0
        for m in masses:
            acc += m
            cum.append(acc)
        ax2.plot(range(1, len(cum) + 1), cum, marker="o", ms=3, lw=1)
        ax2.axhline(1.0, color="grey", ls=":", lw=1)
        ax2.set_xlabel("link size cutoff M")
        ax2.set_ylabel("cumulative link mass")
        ax2.set_ylim(0, 1.05)
        fig.tight_layout()
        fig.savefig(path, dpi=130, metadata={"Software": "sublimits"})
        plt.close(fig)

    return draw


def figure_chain(rows: list[dict], theory: float):
    def draw(path: str) -> None:
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        exh = [(r["n"], r["exhaustive"]) for r in rows if r.get("exhaustive") is not None]
        emp = [
            (r["n"], r["empirical"], r.get("ci_low"), r.get("ci_high"))
            for r in rows
            if r.get("empirical") is not None
        ]
        if exh:
            ax.plot([n for n, _ in exh], [v for _, v in exh], "o-", ms=4, lw=1, label="exhaustive")
        if emp:
            ns = [n for n, *_ in emp]
            vals = [v for _, v, *_ in emp]
            lo = [v - l if l is not None else 0 for _, v, l, _ in emp]
            hi = [h - v if h is not None else 0 for _, v, _, h in emp]
            ax.errorbar(ns, vals, yerr=[lo, hi], fmt="s", ms=4, capsize=3, label="sampled")
        ax.axhline(theory, color="crimson", ls="--", lw=1, label="limit value")
        ax.set_xlabel("n")
        ax.set_ylabel("P(chain event)")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(path, dpi=130, metadata={"Software": "sublimits"})
        plt.close(fig)

    return draw
