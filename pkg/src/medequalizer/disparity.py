"""Log-disparity between synthetic and real subgroup proportions.

The metric is ``log(p_synthetic / p_real)``.  Five representativeness bands
are cut at ``±log(0.9)`` and ``±log(0.8)``; a zero proportion on either side
gets one of two "absent" tiers instead of a number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .dataset import Dataset, SchemaError
from .pattern import Pattern
from .subgroups import combination_counts, full_combinations


class Tier(str, Enum):
    HIGHLY_OVER = "highly_over"
    OVER = "over"
    ADEQUATE = "adequate"
    UNDER = "under"
    HIGHLY_UNDER = "highly_under"
    ABSENT_IN_REAL = "absent_in_real"
    ABSENT_IN_SYNTHETIC = "absent_in_synthetic"

    @property
    def extreme(self) -> bool:
        return self in (Tier.HIGHLY_OVER, Tier.HIGHLY_UNDER,
                        Tier.ABSENT_IN_REAL, Tier.ABSENT_IN_SYNTHETIC)


TIER_ORDER = tuple(Tier)
DEFAULT_RING_ORDER = ("mortality", "race", "age", "gender")


def _log(x: float, base: float) -> float:
    return math.log(x) if base == math.e else math.log(x, base)


def log_disparity(p_s: float, p_r: float, base: float = math.e) -> float:
    """``log(p_s / p_r)``.

    Zero proportions give IEEE markers: ``+inf``/``nan`` when the subgroup is
    absent from the real data, ``-inf`` when only the synthetic side is empty.
    """
    for name, p in (("p_s", p_s), ("p_r", p_r)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name}={p} is not a proportion")
    if p_r == 0.0:
        return math.inf if p_s > 0 else math.nan
    if p_s == 0.0:
        return -math.inf
    return _log(p_s / p_r, base)


def classify_tier(value: float | None, base: float = math.e) -> Tier:
    """Map a log-disparity value to its band.

    Boundaries close toward the milder band: ``±log(0.9)`` is adequate,
    ``log(0.8)`` is under and ``-log(0.8)`` is over.
    """
    if value is None or math.isnan(value) or value == math.inf:
        return Tier.ABSENT_IN_REAL
    if value == -math.inf:
        return Tier.ABSENT_IN_SYNTHETIC
    l8, l9 = _log(0.8, base), _log(0.9, base)
    if value > -l8:
        return Tier.HIGHLY_OVER
    if value > -l9:
        return Tier.OVER
    if value >= l9:
        return Tier.ADEQUATE
    if value >= l8:
        return Tier.UNDER
    return Tier.HIGHLY_UNDER


@dataclass(frozen=True)
class DisparityRecord:
    pattern: Pattern
    p_synthetic: float
    p_real: float
    value: float | None
    tier: Tier

    @classmethod
    def from_proportions(cls, pattern: Pattern, p_s: float, p_r: float) -> "DisparityRecord":
        v = log_disparity(p_s, p_r)
        return cls(pattern, p_s, p_r, v if math.isfinite(v) else None, classify_tier(v))


def _check_pair(real: Dataset, synthetic: Dataset) -> None:
    if real.schema != synthetic.schema:
        raise SchemaError("real and synthetic datasets have different schemas")
    if len(real) == 0 or len(synthetic) == 0:
        raise ValueError("disparity needs non-empty real and synthetic datasets")


def disparity_table(real: Dataset, synthetic: Dataset, attributes: Sequence[str]) -> list[DisparityRecord]:
    """One record per full combination over ``attributes``, lexicographic order."""
    _check_pair(real, synthetic)
    attributes = tuple(attributes)
    if not attributes:
        raise SchemaError("attribute list is empty")
    pr = combination_counts(real, attributes).ravel() / len(real)
    ps = combination_counts(synthetic, attributes).ravel() / len(synthetic)
    return [
        DisparityRecord.from_proportions(p, float(s), float(r))
        for p, s, r in zip(full_combinations(real.schema, attributes), ps, pr)
    ]


@dataclass
class SunburstNode:
    label: str
    attribute: str | None
    depth: int
    record: DisparityRecord
    children: list["SunburstNode"] = field(default_factory=list)

    @property
    def pattern(self) -> Pattern:
        return self.record.pattern

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def build_sunburst(
    real: Dataset, synthetic: Dataset, ring_order: Sequence[str] = DEFAULT_RING_ORDER
) -> SunburstNode:
    """Disparity tree; depth ``k`` holds the records for the first ``k`` ring attributes."""
    _check_pair(real, synthetic)
    ring_order = tuple(ring_order)
    if not ring_order:
        raise SchemaError("ring order is empty")
    cols = [real.schema.column(a) for a in ring_order]
    n_r, n_s = len(real), len(synthetic)
    cr = combination_counts(real, ring_order)
    cs = combination_counts(synthetic, ring_order)

    def node(depth: int, index: tuple[int, ...], pattern: Pattern) -> SunburstNode:
        axes = tuple(range(depth, len(ring_order)))
        r = cr[index].sum() if axes else cr[index]
        s = cs[index].sum() if axes else cs[index]
        rec = DisparityRecord.from_proportions(pattern, float(s) / n_s, float(r) / n_r)
        attr = ring_order[depth - 1] if depth else None
        label = pattern.get(attr) if attr else "*"
        n = SunburstNode(label, attr, depth, rec)
        if depth < len(ring_order):
            col = cols[depth]
            for j, v in enumerate(col.values):
                n.children.append(node(depth + 1, index + (j,), pattern.bind(col.name, v)))
        return n

    return node(0, (), Pattern())


@dataclass(frozen=True)
class TierHistogram:
    counts: dict[Tier, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, tier: Tier) -> int:
        return self.counts[tier]

    @property
    def extreme(self) -> int:
        return sum(c for t, c in self.counts.items() if t.extreme)


def tally_histogram(table: Iterable[DisparityRecord]) -> TierHistogram:
    counts = {t: 0 for t in TIER_ORDER}
    for rec in table:
        counts[rec.tier] += 1
    return TierHistogram(counts)

