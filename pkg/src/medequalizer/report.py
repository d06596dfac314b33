"""Audit and comparison reports: canonical JSON plus SVG sunbursts and histograms."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from . import __version__
from .dataset import Dataset
from .disparity import (
    DEFAULT_RING_ORDER,
    TIER_ORDER,
    DisparityRecord,
    SunburstNode,
    Tier,
    TierHistogram,
    build_sunburst,
    disparity_table,
    tally_histogram,
)
from .pattern import Pattern
from .subgroups import CoverageEntry, CoverageReport, coverage_report

TIER_COLORS = {
    Tier.HIGHLY_OVER: "#1f3b99",
    Tier.OVER: "#3b6fd4",
    Tier.ADEQUATE: "#2a9d8f",
    Tier.UNDER: "#f4a261",
    Tier.HIGHLY_UNDER: "#e76f51",
    Tier.ABSENT_IN_REAL: "#9e9e9e",
    Tier.ABSENT_IN_SYNTHETIC: "#9e9e9e",
}


class ReportError(ValueError):
    pass


def _q(v: float | None) -> float | None:
    return None if v is None else float(f"{v:.6f}")


def _quantize(rec: DisparityRecord) -> DisparityRecord:
    return DisparityRecord(rec.pattern, rec.p_synthetic, rec.p_real, _q(rec.value), rec.tier)


def _quantize_tree(node: SunburstNode) -> SunburstNode:
    return SunburstNode(node.label, node.attribute, node.depth, _quantize(node.record),
                        [_quantize_tree(c) for c in node.children])


@dataclass
class AuditReport:
    metadata: dict
    attributes: tuple[str, ...]
    table: list[DisparityRecord]
    histogram: TierHistogram
    sunburst: SunburstNode
    coverage: CoverageReport | None = None

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "attributes": list(self.attributes),
            "table": [_record_to_dict(r) for r in self.table],
            "histogram": {t.value: self.histogram.counts[t] for t in TIER_ORDER},
            "sunburst": _node_to_dict(self.sunburst),
            "coverage": None if self.coverage is None else {
                "tau": self.coverage.tau,
                "attributes": list(self.coverage.attributes),
                "entries": [
                    {"pattern": e.pattern.as_dict(), "count": e.count, "covered": e.covered}
                    for e in self.coverage.entries
                ],
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AuditReport":
        cov = data.get("coverage")
        coverage = None
        if cov is not None:
            coverage = CoverageReport(
                cov["tau"], tuple(cov["attributes"]),
                tuple(CoverageEntry(Pattern(e["pattern"]), e["count"], e["covered"])
                      for e in cov["entries"]),
            )
        return cls(
            metadata=data["metadata"],
            attributes=tuple(data["attributes"]),
            table=[_record_from_dict(r) for r in data["table"]],
            histogram=TierHistogram({t: int(data["histogram"][t.value]) for t in TIER_ORDER}),
            sunburst=_node_from_dict(data["sunburst"]),
            coverage=coverage,
        )


def _record_to_dict(r: DisparityRecord) -> dict:
    return {
        "pattern": r.pattern.as_dict(),
        "p_synthetic": r.p_synthetic,
        "p_real": r.p_real,
        "value": _q(r.value),
        "tier": r.tier.value,
    }


def _record_from_dict(d: Mapping) -> DisparityRecord:
    return DisparityRecord(Pattern(d["pattern"]), float(d["p_synthetic"]), float(d["p_real"]),
                           _q(d["value"]), Tier(d["tier"]))


def _node_to_dict(n: SunburstNode) -> dict:
    return {
        "label": n.label,
        "attribute": n.attribute,
        "depth": n.depth,
        "record": _record_to_dict(n.record),
        "children": [_node_to_dict(c) for c in n.children],
    }


def _node_from_dict(d: Mapping) -> SunburstNode:
    return SunburstNode(d["label"], d["attribute"], d["depth"], _record_from_dict(d["record"]),
                        [_node_from_dict(c) for c in d["children"]])


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def build_audit(
    real: Dataset,
    synthetic: Dataset,
    attributes: Sequence[str] | None = None,
    ring_order: Sequence[str] | None = None,
    tau: int | None = None,
    metadata: Mapping | None = None,
) -> AuditReport:
    """Disparity table, tier tally, sunburst and optional coverage for one real/synthetic pair."""
    attributes = tuple(attributes or real.schema.require_protected())
    ring_order = tuple(ring_order or [c for c in DEFAULT_RING_ORDER if c in real.schema.names]
                       or attributes)
    table = [_quantize(r) for r in disparity_table(real, synthetic, attributes)]
    meta = {
        "tool_version": __version__,
        "real_rows": len(real),
        "synthetic_rows": len(synthetic),
        "ring_order": list(ring_order),
    }
    meta.update(metadata or {})
    return AuditReport(
        metadata=meta,
        attributes=attributes,
        table=table,
        histogram=tally_histogram(table),
        sunburst=_quantize_tree(build_sunburst(real, synthetic, ring_order)),
        coverage=None if tau is None else coverage_report(real, tau, attributes),
    )


def emit_audit_json(r: AuditReport, path: str | Path) -> None:
    Path(path).write_text(canonical_json(r.to_dict()), encoding="utf-8")


def load_audit_json(path: str | Path) -> AuditReport:
    return AuditReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ----------------------------------------------------------------------------
# before/after comparison


@dataclass
class ComparisonReport:
    attributes: tuple[str, ...]
    before: dict[Tier, int]
    after: dict[Tier, int]
    transitions: list[tuple[Pattern, Tier, Tier]] = field(default_factory=list)

    @property
    def deltas(self) -> dict[Tier, int]:
        return {t: self.after[t] - self.before[t] for t in TIER_ORDER}

    def to_dict(self) -> dict:
        return {
            "attributes": list(self.attributes),
            "before": {t.value: self.before[t] for t in TIER_ORDER},
            "after": {t.value: self.after[t] for t in TIER_ORDER},
            "deltas": {t.value: d for t, d in self.deltas.items()},
            "transitions": [
                {"pattern": p.as_dict(), "before": b.value, "after": a.value}
                for p, b, a in self.transitions
            ],
        }


def compare_reports(before: AuditReport, after: AuditReport) -> ComparisonReport:
    if tuple(before.attributes) != tuple(after.attributes):
        raise ReportError(
            f"attribute sets differ: {list(before.attributes)} vs {list(after.attributes)}"
        )
    after_tiers = {r.pattern: r.tier for r in after.table}
    transitions = []
    for r in before.table:
        t = after_tiers.get(r.pattern)
        if t is None:
            raise ReportError(f"subgroup {r.pattern.label()} missing from the second report")
        if t != r.tier:
            transitions.append((r.pattern, r.tier, t))
    return ComparisonReport(
        tuple(before.attributes),
        dict(tally_histogram(before.table).counts),
        dict(tally_histogram(after.table).counts),
        transitions,
    )


# ----------------------------------------------------------------------------
# SVG


@dataclass(frozen=True)
class Sector:
    pattern: Pattern
    depth: int
    start: float  # degrees, clockwise from 12 o'clock
    extent: float
    tier: Tier
    value: float | None

    @property
    def fill(self) -> str:
        return TIER_COLORS[self.tier]


def sunburst_sectors(root: SunburstNode) -> list[Sector]:
    """Angular layout: a child's share of its parent's arc is its share of the
    parent's real-data proportion."""
    out: list[Sector] = []

    def place(node: SunburstNode, start: float, extent: float):
        parent_p = node.record.p_real
        pos = start
        for c in node.children:
            ext = extent * c.record.p_real / parent_p if parent_p > 0 else 0.0
            out.append(Sector(c.pattern, c.depth, pos, ext, c.record.tier, c.record.value))
            place(c, pos, ext)
            pos += ext

    place(root, 0.0, 360.0)
    return out


def _polar(cx, cy, r, deg):
    a = math.radians(deg)
    return cx + r * math.sin(a), cy - r * math.cos(a)


def _annular_path(cx, cy, r0, r1, start, extent) -> str:
    if extent >= 359.999:
        # a full ring cannot be drawn as a single arc
        return (_annular_path(cx, cy, r0, r1, start, 180.0) + " "
                + _annular_path(cx, cy, r0, r1, start + 180.0, 180.0))
    end = start + extent
    large = 1 if extent > 180 else 0
    x0, y0 = _polar(cx, cy, r1, start)
    x1, y1 = _polar(cx, cy, r1, end)
    x2, y2 = _polar(cx, cy, r0, end)
    x3, y3 = _polar(cx, cy, r0, start)
    return (f"M{x0:.3f},{y0:.3f} A{r1:.3f},{r1:.3f} 0 {large} 1 {x1:.3f},{y1:.3f} "
            f"L{x2:.3f},{y2:.3f} A{r0:.3f},{r0:.3f} 0 {large} 0 {x3:.3f},{y3:.3f} Z")


def _fmt_value(v: float | None) -> str:
    return "n/a" if v is None else f"{v:+.3f}"


def sunburst_svg(root: SunburstNode, size: int = 640, title: str | None = None) -> str:
    depth = max(n.depth for n in root.walk())
    cx = cy = size / 2
    hole = size * 0.08
    ring = (size / 2 - hole - 10) / max(depth, 1)
    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
    ]
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    for s in sunburst_sectors(root):
        if s.extent <= 0:
            continue
        r0 = hole + (s.depth - 1) * ring
        d = _annular_path(cx, cy, r0, r0 + ring, s.start, s.extent)
        note = f"{s.pattern.label()} log disparity {_fmt_value(s.value)} ({s.tier.value})"
        parts.append(f'<g class="sector depth-{s.depth}">')
        parts.append(f'<path d="{d}" fill="{s.fill}" stroke="#ffffff" stroke-width="0.5">'
                     f"<title>{escape(note)}</title></path>")
        if s.extent >= 12:
            tx, ty = _polar(cx, cy, r0 + ring / 2, s.start + s.extent / 2)
            label = s.pattern.get(_last_attr(root, s.depth)) or ""
            parts.append(f'<text x="{tx:.2f}" y="{ty:.2f}" font-size="9" text-anchor="middle" '
                         f'fill="#ffffff">{escape(label)}</text>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _last_attr(root: SunburstNode, depth: int) -> str | None:
    node = root
    for _ in range(depth):
        if not node.children:
            return None
        node = node.children[0]
    return node.attribute


def render_sunburst_svg(root: SunburstNode, path: str | Path, size: int = 640,
                        title: str | None = None) -> None:
    Path(path).write_text(sunburst_svg(root, size, title), encoding="utf-8")


def histogram_svg(series: Mapping[str, TierHistogram], width: int = 640, height: int = 360) -> str:
    """Grouped bars: one group per tier, one bar per named series."""
    tiers = [t for t in TIER_ORDER if any(h.counts.get(t, 0) for h in series.values())] \
        or list(TIER_ORDER[:5])
    names = list(series)
    top = max([h.counts.get(t, 0) for h in series.values() for t in tiers] + [1])
    left, bottom, pad = 40, 60, 10
    plot_w, plot_h = width - left - pad, height - bottom - pad
    group_w = plot_w / len(tiers)
    bar_w = group_w * 0.8 / max(len(names), 1)
    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<line x1="{left}" y1="{pad + plot_h}" x2="{width - pad}" y2="{pad + plot_h}" stroke="#333"/>',
    ]
    for gi, t in enumerate(tiers):
        gx = left + gi * group_w + group_w * 0.1
        for si, name in enumerate(names):
            c = series[name].counts.get(t, 0)
            h = plot_h * c / top
            x = gx + si * bar_w
            y = pad + plot_h - h
            opacity = 1.0 - 0.45 * si / max(len(names) - 1, 1)
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w * 0.95:.2f}" height="{h:.2f}" '
                f'fill="{TIER_COLORS[t]}" fill-opacity="{opacity:.2f}">'
                f"<title>{escape(name)}: {t.value} = {c}</title></rect>"
            )
            parts.append(f'<text x="{x + bar_w / 2:.2f}" y="{y - 2:.2f}" font-size="9" '
                         f'text-anchor="middle">{c}</text>')
        parts.append(f'<text x="{gx + group_w * 0.4:.2f}" y="{pad + plot_h + 16}" font-size="10" '
                     f'text-anchor="middle">{escape(t.value)}</text>')
    for si, name in enumerate(names):
        parts.append(f'<text x="{left}" y="{height - 20 + 12 * si - 12 * (len(names) - 1)}" '
                     f'font-size="10">bar {si + 1}: {escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_histogram_svg(series: Mapping[str, TierHistogram], path: str | Path) -> None:
    Path(path).write_text(histogram_svg(series), encoding="utf-8")
