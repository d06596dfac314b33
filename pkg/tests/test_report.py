import json
import math
import xml.etree.ElementTree as ET

import pytest

from medequalizer.dataset import ColumnSpec, Dataset, Schema
from medequalizer.disparity import Tier, TierHistogram, build_sunburst
from medequalizer.report import (
    TIER_COLORS,
    AuditReport,
    ReportError,
    build_audit,
    canonical_json,
    compare_reports,
    emit_audit_json,
    histogram_svg,
    load_audit_json,
    sunburst_sectors,
    sunburst_svg,
)

SVG = "{http://www.w3.org/2000/svg}"


def binary(name="g"):
    return Schema((ColumnSpec(name, ("a", "b"), protected=True),
                   ColumnSpec("h", ("x", "y"), protected=True)))


def ds(schema, counts):
    """counts: {(v1, v2): n}"""
    rows = [k for k, n in counts.items() for _ in range(n)]
    return Dataset(schema, rows)


def test_round_trip_identity(demo_cohort, tmp_path):
    synth = Dataset(demo_cohort.schema, demo_cohort.rows[:3000])
    rep = build_audit(demo_cohort, synth, ("gender", "race", "age"), tau=150)
    p = tmp_path / "r.json"
    emit_audit_json(rep, p)
    back = load_audit_json(p)
    assert back.to_dict() == rep.to_dict()
    emit_audit_json(back, tmp_path / "r2.json")
    assert p.read_bytes() == (tmp_path / "r2.json").read_bytes()


def test_absent_in_real_serialises_as_null():
    s = binary()
    real = ds(s, {("a", "x"): 5, ("b", "y"): 5})
    synth = ds(s, {("a", "x"): 4, ("a", "y"): 2, ("b", "y"): 4})
    d = build_audit(real, synth, ("g", "h"), ring_order=("g", "h")).to_dict()
    absent = [r for r in d["table"] if r["tier"] == "absent_in_real"]
    assert len(absent) == 2 and all(r["value"] is None for r in absent)
    assert "NaN" not in canonical_json(d) and "Infinity" not in canonical_json(d)


def test_values_quantised():
    s = binary()
    real = ds(s, {("a", "x"): 3, ("a", "y"): 3, ("b", "x"): 3, ("b", "y"): 2})
    synth = ds(s, {("a", "x"): 2, ("a", "y"): 3, ("b", "x"): 3, ("b", "y"): 3})
    for r in build_audit(real, synth, ("g", "h")).table:
        assert r.value == round(r.value, 6)


def test_metadata_carries_version():
    s = binary()
    real = ds(s, {("a", "x"): 1})
    meta = build_audit(real, real, ("g",), metadata={"label": "t"}).metadata
    assert meta["tool_version"] and meta["label"] == "t"


def test_sector_angles_follow_real_proportions():
    s = binary()
    real = ds(s, {("a", "x"): 1, ("b", "x"): 3})
    root = build_sunburst(real, real, ("g",))
    sectors = sunburst_sectors(root)
    assert [(x.start, x.extent) for x in sectors] == [(0.0, 90.0), (90.0, 270.0)]
    assert all(x.fill == TIER_COLORS[Tier.ADEQUATE] == "#2a9d8f" for x in sectors)


def test_under_sector_colour():
    s = binary()
    real = ds(s, {("a", "x"): 2, ("b", "x"): 8})
    synth = ds(s, {("a", "x"): 1, ("b", "x"): 9})
    sec = {x.pattern.get("g"): x for x in sunburst_sectors(build_sunburst(real, synth, ("g",)))}
    assert sec["a"].value == pytest.approx(math.log(0.5))
    assert sec["a"].fill == TIER_COLORS[Tier.HIGHLY_UNDER]
    assert TIER_COLORS[Tier.UNDER] != TIER_COLORS[Tier.HIGHLY_UNDER]


def test_ring_extents_sum_to_full_circle(demo_cohort):
    synth = Dataset(demo_cohort.schema, demo_cohort.rows[:2000])
    sectors = sunburst_sectors(build_sunburst(demo_cohort, synth))
    for depth in range(1, 5):
        assert sum(x.extent for x in sectors if x.depth == depth) == pytest.approx(360.0)


def test_sunburst_svg_well_formed(demo_cohort):
    synth = Dataset(demo_cohort.schema, demo_cohort.rows[:2000])
    svg = sunburst_svg(build_sunburst(demo_cohort, synth), title="audit")
    root = ET.fromstring(svg.encode())
    paths = root.findall(f".//{SVG}path")
    assert paths
    assert all(p.find(f"{SVG}title").text.count("log disparity") == 1 for p in paths)
    assert {p.get("fill") for p in paths} <= set(TIER_COLORS.values())


def test_single_category_full_ring():
    s = Schema((ColumnSpec("g", ("a",), protected=True),))
    real = Dataset(s, [("a",)] * 3)
    svg = sunburst_svg(build_sunburst(real, real, ("g",)))
    path = ET.fromstring(svg.encode()).find(f".//{SVG}path")
    assert path.get("d").count("M") == 2


def test_histogram_svg_series():
    h1 = TierHistogram({Tier.ADEQUATE: 3, Tier.UNDER: 1})
    h2 = TierHistogram({Tier.ADEQUATE: 4})
    root = ET.fromstring(histogram_svg({"before": h1, "after": h2}).encode())
    rects = root.findall(f".//{SVG}rect")
    assert len(rects) == 4  # two tiers present, two series


def test_compare_transitions_and_deltas():
    s = binary()
    real = ds(s, {("a", "x"): 5, ("a", "y"): 5, ("b", "x"): 5, ("b", "y"): 5})
    skew = ds(s, {("a", "x"): 10, ("a", "y"): 5, ("b", "x"): 5, ("b", "y"): 0})
    before = build_audit(real, skew, ("g", "h"))
    after = build_audit(real, real, ("g", "h"))
    cmp = compare_reports(before, after)
    assert cmp.after[Tier.ADEQUATE] == 4
    assert cmp.deltas[Tier.ADEQUATE] == 4 - cmp.before[Tier.ADEQUATE]
    assert sum(cmp.deltas.values()) == 0
    moved = {p.label(): (b, a) for p, b, a in cmp.transitions}
    assert moved["g=a/h=x"] == (Tier.HIGHLY_OVER, Tier.ADEQUATE)
    assert moved["g=b/h=y"] == (Tier.ABSENT_IN_SYNTHETIC, Tier.ADEQUATE)
    json.dumps(cmp.to_dict())


def test_compare_attribute_mismatch():
    s = binary()
    real = ds(s, {("a", "x"): 1, ("b", "y"): 1})
    with pytest.raises(ReportError):
        compare_reports(build_audit(real, real, ("g",)), build_audit(real, real, ("g", "h")))


def test_from_dict_without_coverage():
    s = binary()
    real = ds(s, {("a", "x"): 2})
    rep = build_audit(real, real, ("g",))
    assert AuditReport.from_dict(rep.to_dict()).coverage is None
