"""Row-level rule predicates: which of the 40 rules a row of panels satisfies.

A rule constrains one dimension across the three panels of a row.  Uniform
relations (constant, progressions, arithmetic) on an attribute require each
panel's objects to agree on that attribute and the three per-panel values to
follow the relation; on the number dimension they apply to object counts.
Logic relations (xor/or/and) compare the per-panel *sets* - distinct
attribute values, or occupied-slot positions - and require exact set
equality with a nonempty right-hand side.

A row is checkable only when every panel is structurally valid and
nonempty; otherwise no rule applies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Mapping, Optional, Sequence

from .core import (
    ATTRIBUTE_DIMENSIONS,
    Dimension,
    Panel,
    Relation,
    Row,
    RuleId,
    RuleSet,
    Sample,
    rule_for,
    _RELATIONS_BY_DIMENSION,
)


def value_triple_relations(v1: int, v2: int, v3: int) -> set[Relation]:
    """Uniform-family relations satisfied by a value (or count) triple.

    Domain membership is the caller's concern; this is pure arithmetic, so a
    triple like (0, 0, 0) co-reports constant and arith_sum by design.
    """
    rels = set()
    if v1 == v2 == v3:
        rels.add(Relation.CONSTANT)
    d1, d2 = v2 - v1, v3 - v2
    if d1 == d2 == 1:
        rels.add(Relation.PROG_PLUS1)
    elif d1 == d2 == -1:
        rels.add(Relation.PROG_MINUS1)
    elif d1 == d2 == 2:
        rels.add(Relation.PROG_PLUS2)
    elif d1 == d2 == -2:
        rels.add(Relation.PROG_MINUS2)
    if v3 == v1 + v2:
        rels.add(Relation.ARITH_SUM)
    if v3 == v1 - v2:
        rels.add(Relation.ARITH_DIFF)
    return rels


def set_triple_relations(
    s1: AbstractSet[int], s2: AbstractSet[int], s3: AbstractSet[int]
) -> set[Relation]:
    """Logic relations satisfied by a set triple (exact equality, s3 nonempty).

    Sets may coincide: disjoint s1, s2 make xor and or agree, and a
    constant row's singleton sets satisfy both or and and.
    """
    rels = set()
    if s3:
        if s3 == s1 ^ s2:
            rels.add(Relation.XOR)
        if s3 == s1 | s2:
            rels.add(Relation.OR)
        if s3 == s1 & s2:
            rels.add(Relation.AND)
    return rels


@dataclass(frozen=True)
class PanelSummary:
    """Per-panel facts the rule predicates consume."""

    occupied: frozenset[int]
    count: int
    #: per attribute dimension, the objects' values in slot order
    values: Mapping[Dimension, tuple[int, ...]]
    #: per attribute dimension, the set of distinct values
    distinct: Mapping[Dimension, frozenset[int]]
    #: per attribute dimension, the shared value if the panel is uniform, else None
    uniform: Mapping[Dimension, Optional[int]]


def panel_summary(panel: Panel) -> Optional[PanelSummary]:
    """Summarize a panel, or None when it is empty or structurally invalid."""
    if panel.is_empty or not panel.is_structurally_valid:
        return None
    objs = panel.objects
    values: dict[Dimension, tuple[int, ...]] = {}
    distinct: dict[Dimension, frozenset[int]] = {}
    uniform: dict[Dimension, Optional[int]] = {}
    for dim in ATTRIBUTE_DIMENSIONS:
        vals = tuple(o.value(dim) for o in objs)
        dset = frozenset(vals)
        values[dim] = vals
        distinct[dim] = dset
        uniform[dim] = vals[0] if len(dset) == 1 else None
    return PanelSummary(
        occupied=frozenset(panel.occupied),
        count=len(objs),
        values=values,
        distinct=distinct,
        uniform=uniform,
    )


def _relations_by_dimension(
    summaries: Sequence[PanelSummary],
) -> dict[Dimension, set[Relation]]:
    s1, s2, s3 = summaries
    out: dict[Dimension, set[Relation]] = {}
    for dim in ATTRIBUTE_DIMENSIONS:
        rels = set_triple_relations(s1.distinct[dim], s2.distinct[dim], s3.distinct[dim])
        u1, u2, u3 = s1.uniform[dim], s2.uniform[dim], s3.uniform[dim]
        if u1 is not None and u2 is not None and u3 is not None:
            rels |= value_triple_relations(u1, u2, u3)
        out[dim] = rels
    out[Dimension.NUMBER] = value_triple_relations(s1.count, s2.count, s3.count)
    out[Dimension.POSITION] = set_triple_relations(s1.occupied, s2.occupied, s3.occupied)
    return out


def applicable_rules(row: Row) -> RuleSet:
    """Every inventory rule the row satisfies, as a RuleSet.

    Empty when any panel is empty or structurally invalid.
    """
    summaries = [panel_summary(p) for p in row.panels]
    if any(s is None for s in summaries):
        return RuleSet()
    by_dim = _relations_by_dimension(summaries)  # type: ignore[arg-type]
    mask = 0
    for dim, rels in by_dim.items():
        allowed = _RELATIONS_BY_DIMENSION[dim]
        for rel in rels:
            if rel in allowed:
                mask |= 1 << rule_for(rel, dim).index
    return RuleSet(mask)


def rule_applies(rule: RuleId, row: Row) -> bool:
    """Does this one rule hold on the row?"""
    return rule in applicable_rules(row)


@dataclass(frozen=True)
class SharedRules:
    """Per-row applicable sets and their agreement across a sample."""

    per_row: tuple[RuleSet, RuleSet, RuleSet]

    @property
    def all_shared(self) -> RuleSet:
        a, b, c = self.per_row
        return a & b & c

    @property
    def is_c3(self) -> bool:
        """At least one rule applies to all three rows."""
        return bool(self.all_shared)

    @property
    def is_c2(self) -> bool:
        """At least one rule applies to at least two rows (c3 implies c2)."""
        a, b, c = self.per_row
        return bool(a & b) or bool(a & c) or bool(b & c)

    @property
    def valid_rows(self) -> tuple[bool, bool, bool]:
        """Per row, whether any rule at all applies."""
        a, b, c = self.per_row
        return (bool(a), bool(b), bool(c))


def shared_rules(sample: Sample) -> SharedRules:
    """Applicable sets for each row of a sample plus their intersections."""
    a, b, c = (applicable_rules(r) for r in sample.rows)
    return SharedRules((a, b, c))
