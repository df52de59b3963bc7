"""Panel completion: pick a ninth panel consistent with the first eight.

Candidate rules are those applicable to both complete rows and feasible for
the third row's two given panels.  Construction draws a panel satisfying the
chosen rule's constraint; it does not impose purity on the other dimensions
(scoring only asks whether some rule is shared by all three rows).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    ATTRIBUTE_DIMENSIONS,
    Dimension,
    LOGIC_RELATIONS,
    ObjectSpec,
    PROGRESSION_STEPS,
    Panel,
    Relation,
    Row,
    RuleId,
    RuleSet,
    Sample,
    attribute_domain,
    rule_inventory,
)
from .rng import Stream
from .rules import PanelSummary, applicable_rules, panel_summary


class InvalidContextError(ValueError):
    """A context panel is structurally invalid."""


class NoSharedRuleError(RuntimeError):
    """The two complete rows plus the prefix admit no candidate rule."""


class InfeasibleRuleError(RuntimeError):
    """No ninth panel can satisfy this rule given the prefix."""


class AllInfeasibleError(RuntimeError):
    """Every candidate rule failed construction."""


@dataclass(frozen=True)
class CompletionContext:
    """Two complete rows plus the third row's first two panels."""

    rows: tuple[Row, Row]
    prefix: tuple[Panel, Panel]

    @classmethod
    def from_sample(cls, sample: Sample) -> "CompletionContext":
        r3 = sample.rows[2]
        return cls((sample.rows[0], sample.rows[1]), (r3.panels[0], r3.panels[1]))

    @property
    def panels(self) -> tuple[Panel, ...]:
        return self.rows[0].panels + self.rows[1].panels + self.prefix

    def with_completion(self, panel: Panel) -> Sample:
        third = Row((self.prefix[0], self.prefix[1], panel))
        return Sample((self.rows[0], self.rows[1], third))

    def validate(self) -> None:
        for i, p in enumerate(self.panels):
            if not p.is_structurally_valid:
                raise InvalidContextError(f"context panel {i} is structurally invalid")


# A constraint pins what the ninth panel must show for one rule:
# ("attr_value", dim, v) - every object has attribute value v
# ("attr_set", dim, values) - the distinct values are exactly this set
# ("count", n) - exactly n objects
# ("positions", slots) - exactly these slots occupied
Constraint = tuple


def _value_successor(rel: Relation, v7: int, v8: int, domain: range) -> Optional[int]:
    if rel is Relation.CONSTANT:
        v9 = v7 if v7 == v8 else None
    elif rel in PROGRESSION_STEPS:
        k = PROGRESSION_STEPS[rel]
        v9 = v8 + k if v8 - v7 == k else None
    elif rel is Relation.ARITH_SUM:
        v9 = v7 + v8
    elif rel is Relation.ARITH_DIFF:
        v9 = v7 - v8
    else:
        return None
    if v9 is None or v9 not in domain:
        return None
    return v9


def _set_result(rel: Relation, s7: frozenset, s8: frozenset) -> Optional[frozenset]:
    if rel is Relation.XOR:
        s9 = s7 ^ s8
    elif rel is Relation.OR:
        s9 = s7 | s8
    elif rel is Relation.AND:
        s9 = s7 & s8
    else:
        return None
    if not s9 or len(s9) > 9:
        return None
    return s9


def _constraint_for(
    rule: RuleId, s7: PanelSummary, s8: PanelSummary
) -> Optional[Constraint]:
    rel, dim = rule.relation, rule.dimension
    if dim is Dimension.NUMBER:
        n9 = _value_successor(rel, s7.count, s8.count, range(1, 10))
        return None if n9 is None else ("count", n9)
    if dim is Dimension.POSITION:
        p9 = _set_result(rel, s7.occupied, s8.occupied)
        return None if p9 is None else ("positions", p9)
    if rel in LOGIC_RELATIONS:
        v9 = _set_result(rel, s7.distinct[dim], s8.distinct[dim])
        return None if v9 is None else ("attr_set", dim, v9)
    u7, u8 = s7.uniform[dim], s8.uniform[dim]
    if u7 is None or u8 is None:
        return None
    v9 = _value_successor(rel, u7, u8, attribute_domain(dim))
    return None if v9 is None else ("attr_value", dim, v9)


def feasible_rules_for_prefix(p7: Panel, p8: Panel) -> RuleSet:
    """Rules for which some ninth panel could complete (p7, p8, _)."""
    s7, s8 = panel_summary(p7), panel_summary(p8)
    if s7 is None or s8 is None:
        return RuleSet()
    mask = 0
    for rule in rule_inventory():
        if _constraint_for(rule, s7, s8) is not None:
            mask |= 1 << rule.index
    return RuleSet(mask)


def candidate_rules(ctx: CompletionContext) -> RuleSet:
    """Rules applicable to both complete rows and feasible for the prefix."""
    ctx.validate()
    return (
        applicable_rules(ctx.rows[0])
        & applicable_rules(ctx.rows[1])
        & feasible_rules_for_prefix(*ctx.prefix)
    )


def _random_object(stream: Stream, fixed: dict[Dimension, int]) -> ObjectSpec:
    return ObjectSpec(
        fixed.get(Dimension.SHAPE, stream.randbelow(7)),
        fixed.get(Dimension.SIZE, stream.randbelow(10)),
        fixed.get(Dimension.COLOR, stream.randbelow(10)),
    )


def _panel_from_values(
    positions: tuple[int, ...], dim: Dimension, values: list[int], stream: Stream
) -> Panel:
    slots: list[Optional[ObjectSpec]] = [None] * 9
    for pos, v in zip(positions, values):
        slots[pos] = _random_object(stream, {dim: v})
    return Panel(tuple(slots))


def third_panel_for_rule(
    rule: RuleId, prefix: tuple[Panel, Panel], stream: Stream
) -> Panel:
    """A ninth panel satisfying the rule, free dimensions drawn at random."""
    s7, s8 = panel_summary(prefix[0]), panel_summary(prefix[1])
    if s7 is None or s8 is None:
        raise InfeasibleRuleError(f"{rule.name}: prefix panel empty or invalid")
    c = _constraint_for(rule, s7, s8)
    if c is None:
        raise InfeasibleRuleError(f"{rule.name}: no ninth panel fits the prefix")

    kind = c[0]
    if kind == "positions":
        positions = tuple(sorted(c[1]))
        slots: list[Optional[ObjectSpec]] = [None] * 9
        for pos in positions:
            slots[pos] = _random_object(stream, {})
        return Panel(tuple(slots))
    if kind == "count":
        positions = stream.subset_indices(9, c[1])
        slots = [None] * 9
        for pos in positions:
            slots[pos] = _random_object(stream, {})
        return Panel(tuple(slots))
    if kind == "attr_value":
        _, dim, v = c
        n = stream.randbelow(9) + 1
        positions = stream.subset_indices(9, n)
        return _panel_from_values(positions, dim, [v] * n, stream)
    # attr_set
    _, dim, vals = c
    base = sorted(vals)
    n = len(base) + stream.randbelow(10 - len(base))
    values = base + [base[stream.randbelow(len(base))] for _ in range(n - len(base))]
    stream.shuffle(values)
    positions = stream.subset_indices(9, n)
    return _panel_from_values(positions, dim, values, stream)


@dataclass(frozen=True)
class CompletionResult:
    panel: Panel
    rule: RuleId
    candidates: RuleSet


def complete_panel(
    ctx: CompletionContext, stream: Stream, strategy: str = "first"
) -> CompletionResult:
    """Complete the ninth panel.

    ``strategy`` picks which candidate rule to satisfy: "first" walks the
    inventory order, "random" shuffles the candidates.  The stream also
    drives the free dimensions of the constructed panel.
    """
    candidates = candidate_rules(ctx)
    if not candidates:
        raise NoSharedRuleError("no rule is shared by the first two rows and the prefix")
    order = list(candidates)
    if strategy == "random":
        stream.shuffle(order)
    elif strategy != "first":
        raise ValueError(f"unknown strategy {strategy!r}")
    last_err: Optional[InfeasibleRuleError] = None
    for rule in order:
        try:
            panel = third_panel_for_rule(rule, ctx.prefix, stream)
        except InfeasibleRuleError as e:
            last_err = e
            continue
        return CompletionResult(panel, rule, candidates)
    raise AllInfeasibleError(f"all {len(order)} candidate rules failed construction") from last_err
