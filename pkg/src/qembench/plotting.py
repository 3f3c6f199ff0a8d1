"""Minimal SVG line charts for accuracy-versus-noise figures."""

from __future__ import annotations

import csv
import io
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from .bench import level_means

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


@dataclass
class Series:
    label: str
    xs: list[float]
    ys: list[float]


@dataclass
class Figure:
    name: str
    title: str
    levels: list[float]
    series: list[Series]
    xlabel: str = "noise probability p"
    ylabel: str = "validation accuracy"


def render_svg(fig: Figure, width: int = 640, height: int = 420) -> str:
    """Draw ``fig``; noise levels are spaced evenly on the x axis."""
    left, right, top, bottom = 70, 160, 40, 60
    pw, ph = width - left - right, height - top - bottom
    n = max(len(fig.levels), 2)

    def sx(p):
        return left + pw * fig.levels.index(p) / (n - 1)

    def sy(v):
        return top + ph * (1 - v)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(fig.title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(6):
        v = i / 5
        y = sy(v)
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    for p in fig.levels:
        x = sx(p)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{p:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 15}" text-anchor="middle">{escape(fig.xlabel)}</text>')
    out.append(
        f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2})">{escape(fig.ylabel)}</text>'
    )
    for k, s in enumerate(fig.series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(s.xs, s.ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in zip(s.xs, s.ys):
            out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        ly = top + 10 + 18 * k
        lx = left + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def figure_csv(fig: Figure) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "p", "val_acc"])
    for s in fig.series:
        for x, y in zip(s.xs, s.ys):
            w.writerow([s.label, f"{x:g}", f"{y:.4f}"])
    return buf.getvalue()


def build_figures(records: Sequence[Mapping]) -> list[Figure]:
    """One chart per noise kind (a series per technique) plus a baseline overview."""
    means = level_means(records)
    if not means:
        return []
    kinds = list(dict.fromkeys(k for k, _, _ in sorted(means)))
    figs = []
    for kind in kinds:
        mits = sorted({m for k, m, _ in means if k == kind}, key=lambda m: (m != "none", m))
        levels = sorted({p for k, _, p in means if k == kind})
        series = []
        for m in mits:
            pts = sorted((p, sum(v) / len(v)) for (k, mm, p), v in means.items() if k == kind and mm == m)
            series.append(Series("baseline" if m == "none" else m, [p for p, _ in pts], [a for _, a in pts]))
        figs.append(Figure(f"accuracy_{kind}", f"Validation accuracy, {kind.replace('_', ' ')} noise", levels, series))
    base = {key: v for key, v in means.items() if key[1] == "none"}
    if base:
        levels = sorted({p for _, _, p in base})
        series = []
        for kind in kinds:
            pts = sorted((p, sum(v) / len(v)) for (k, _, p), v in base.items() if k == kind)
            if pts:
                series.append(Series(kind, [p for p, _ in pts], [a for _, a in pts]))
        figs.append(Figure("baseline_overview", "Baseline validation accuracy without mitigation", levels, series))
    return figs


def write_figures(records: Sequence[Mapping], out_dir: str | Path, data_only: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fig in build_figures(records):
        if data_only:
            path = out_dir / f"{fig.name}.csv"
            path.write_text(figure_csv(fig))
        else:
            path = out_dir / f"{fig.name}.svg"
            path.write_text(render_svg(fig))
        paths.append(path)
    return paths
