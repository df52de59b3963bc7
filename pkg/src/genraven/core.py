"""Core domain model: grids, panels, the 40-rule inventory, and the integer encoding.

A sample is a 3x3 grid of panels.  Each panel has 9 slots (a 3x3 cell
layout, row-major); a slot is either empty or holds one object with three
attributes: shape in 0..6, size in 0..9, color in 0..9.  The canonical
array encoding of a sample is a (3, 9, 9) integer tensor: channel axis
(shape, size, color), then the 9 panels in raster order, then the 9 slots.
Empty slots encode as -1 on every channel.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

GRID_SIDE = 3
PANEL_SLOTS = 9
PANELS_PER_SAMPLE = 9
CHANNELS = 3
SAMPLE_SHAPE = (CHANNELS, PANELS_PER_SAMPLE, PANEL_SLOTS)
SAMPLE_SIZE = CHANNELS * PANELS_PER_SAMPLE * PANEL_SLOTS  # 243

EMPTY_TRIPLE = (-1, -1, -1)


class Relation(Enum):
    """The ten row relations an attribute or structure dimension can follow."""

    CONSTANT = "constant"
    PROG_PLUS1 = "prog_plus1"
    PROG_MINUS1 = "prog_minus1"
    PROG_PLUS2 = "prog_plus2"
    PROG_MINUS2 = "prog_minus2"
    ARITH_SUM = "arith_sum"
    ARITH_DIFF = "arith_diff"
    XOR = "xor"
    OR = "or"
    AND = "and"


#: Progression step per progression relation.
PROGRESSION_STEPS = {
    Relation.PROG_PLUS1: 1,
    Relation.PROG_MINUS1: -1,
    Relation.PROG_PLUS2: 2,
    Relation.PROG_MINUS2: -2,
}

LOGIC_RELATIONS = (Relation.XOR, Relation.OR, Relation.AND)
UNIFORM_RELATIONS = (
    Relation.CONSTANT,
    Relation.PROG_PLUS1,
    Relation.PROG_MINUS1,
    Relation.PROG_PLUS2,
    Relation.PROG_MINUS2,
    Relation.ARITH_SUM,
    Relation.ARITH_DIFF,
)


class Dimension(Enum):
    """What a rule constrains: an object attribute, the count, or the layout."""

    SHAPE = "shape"
    SIZE = "size"
    COLOR = "color"
    NUMBER = "number"
    POSITION = "position"


ATTRIBUTE_DIMENSIONS = (Dimension.SHAPE, Dimension.SIZE, Dimension.COLOR)

_ATTR_DOMAINS = {
    Dimension.SHAPE: range(0, 7),
    Dimension.SIZE: range(0, 10),
    Dimension.COLOR: range(0, 10),
}

#: Valid object counts per panel (a panel must hold at least one object).
COUNT_DOMAIN = range(1, 10)


def attribute_domain(dim: Dimension) -> range:
    """Value domain of an attribute dimension (shape 0..6, size/color 0..9)."""
    try:
        return _ATTR_DOMAINS[dim]
    except KeyError:
        raise ValueError(f"{dim} is not an attribute dimension") from None


# Relation order is fixed; the inventory enumerates dimensions in the order
# below and, within each dimension, relations in the order above.  NUMBER
# takes only the uniform-family relations; POSITION only the logic ones.
_RELATIONS_BY_DIMENSION = {
    Dimension.SHAPE: tuple(Relation),
    Dimension.SIZE: tuple(Relation),
    Dimension.COLOR: tuple(Relation),
    Dimension.NUMBER: UNIFORM_RELATIONS,
    Dimension.POSITION: LOGIC_RELATIONS,
}


@dataclass(frozen=True)
class RuleId:
    """One of the 40 row rules: a (relation, dimension) pair with a stable index."""

    relation: Relation
    dimension: Dimension
    index: int

    @property
    def name(self) -> str:
        return f"{self.relation.value}-{self.dimension.value}"

    def __repr__(self) -> str:  # keep reprs short in test output
        return f"RuleId({self.name!r}, index={self.index})"


def _build_inventory() -> tuple[RuleId, ...]:
    rules = []
    for dim in Dimension:
        for rel in _RELATIONS_BY_DIMENSION[dim]:
            rules.append(RuleId(rel, dim, len(rules)))
    return tuple(rules)


RULES: tuple[RuleId, ...] = _build_inventory()
RULE_COUNT = len(RULES)  # 40
RULES_BY_NAME = {r.name: r for r in RULES}
_RULES_BY_PAIR = {(r.relation, r.dimension): r for r in RULES}


def rule_inventory() -> tuple[RuleId, ...]:
    """The fixed 40-rule inventory, in canonical index order."""
    return RULES


def rule_named(name: str) -> RuleId:
    """Look up a rule by its canonical name, e.g. ``"prog_plus1-number"``."""
    try:
        return RULES_BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown rule name: {name!r}") from None


def rule_for(relation: Relation, dimension: Dimension) -> RuleId:
    """The inventory rule for a (relation, dimension) pair, if it exists."""
    try:
        return _RULES_BY_PAIR[(relation, dimension)]
    except KeyError:
        raise KeyError(f"no rule {relation.value}-{dimension.value} in the inventory") from None


def inventory_digest(names: Optional[Sequence[str]] = None) -> str:
    """16-hex-char digest of a rule-name list: first 8 bytes of sha256 of the
    newline-joined names.  Defaults to the canonical inventory."""
    if names is None:
        names = [r.name for r in RULES]
    h = hashlib.sha256("\n".join(names).encode("utf-8")).digest()
    return h[:8].hex()


INVENTORY_DIGEST = inventory_digest()


@dataclass(frozen=True)
class ObjectSpec:
    """One object: its shape, size, and color attribute values."""

    shape: int
    size: int
    color: int

    @property
    def is_well_formed(self) -> bool:
        return 0 <= self.shape <= 6 and 0 <= self.size <= 9 and 0 <= self.color <= 9

    def value(self, dim: Dimension) -> int:
        return getattr(self, dim.value)


Slot = Optional[ObjectSpec]


@dataclass(frozen=True)
class Panel:
    """Nine slots, row-major; each empty or holding one object."""

    slots: tuple[Slot, ...]

    def __post_init__(self):
        if len(self.slots) != PANEL_SLOTS:
            raise ValueError(f"a panel has {PANEL_SLOTS} slots, got {len(self.slots)}")

    @classmethod
    def from_placed(cls, placed: dict[int, ObjectSpec]) -> "Panel":
        """Build a panel from a slot-index -> object mapping."""
        slots: list[Slot] = [None] * PANEL_SLOTS
        for idx, obj in placed.items():
            if not 0 <= idx < PANEL_SLOTS:
                raise ValueError(f"slot index out of range: {idx}")
            slots[idx] = obj
        return cls(tuple(slots))

    @property
    def occupied(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.slots) if s is not None)

    @property
    def objects(self) -> tuple[ObjectSpec, ...]:
        return tuple(s for s in self.slots if s is not None)

    @property
    def count(self) -> int:
        return sum(1 for s in self.slots if s is not None)

    @property
    def is_empty(self) -> bool:
        return self.count == 0

    @property
    def is_structurally_valid(self) -> bool:
        """True when every occupied slot holds a well-formed object."""
        return all(s is None or s.is_well_formed for s in self.slots)


@dataclass(frozen=True)
class Row:
    """Three panels read left to right."""

    panels: tuple[Panel, Panel, Panel]

    def __post_init__(self):
        if len(self.panels) != GRID_SIDE:
            raise ValueError(f"a row has {GRID_SIDE} panels, got {len(self.panels)}")


@dataclass(frozen=True)
class Sample:
    """A full 3x3 grid of panels, with an optional generating-rule label."""

    rows: tuple[Row, Row, Row]
    label: Optional[RuleId] = None

    def __post_init__(self):
        if len(self.rows) != GRID_SIDE:
            raise ValueError(f"a sample has {GRID_SIDE} rows, got {len(self.rows)}")

    @property
    def panels(self) -> tuple[Panel, ...]:
        """The nine panels in raster order."""
        return tuple(p for row in self.rows for p in row.panels)

    def with_label(self, label: Optional[RuleId]) -> "Sample":
        return replace(self, label=label)


class SlotStatus(Enum):
    VALID_OBJECT = "valid-object"
    VALID_EMPTY = "valid-empty"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class StructureReport:
    """Per-slot structural classification of a decoded sample.

    ``statuses`` is indexed by panel (raster order) then slot.
    """

    statuses: tuple[tuple[SlotStatus, ...], ...]

    @property
    def is_fully_valid(self) -> bool:
        return all(s is not SlotStatus.MALFORMED for panel in self.statuses for s in panel)

    def malformed_slots(self) -> tuple[tuple[int, int], ...]:
        """(panel_index, slot_index) of every malformed slot."""
        return tuple(
            (p, s)
            for p, panel in enumerate(self.statuses)
            for s, status in enumerate(panel)
            if status is SlotStatus.MALFORMED
        )

    def panel_is_valid(self, panel_index: int) -> bool:
        return all(s is not SlotStatus.MALFORMED for s in self.statuses[panel_index])


class GridShapeError(ValueError):
    """The array does not have 243 entries / a (3, 9, 9) layout."""


def encode_sample(sample: Sample) -> np.ndarray:
    """Encode a sample as a (3, 9, 9) int64 array.

    Total for structurally arbitrary samples: malformed objects encode their
    attribute values verbatim, empty slots encode as -1 on all channels.
    """
    out = np.full(SAMPLE_SHAPE, -1, dtype=np.int64)
    for p, panel in enumerate(sample.panels):
        for s, obj in enumerate(panel.slots):
            if obj is not None:
                out[0, p, s] = obj.shape
                out[1, p, s] = obj.size
                out[2, p, s] = obj.color
    return out


def decode_sample(array) -> tuple[Sample, StructureReport]:
    """Decode a 243-integer array into a Sample plus a structure report.

    Accepts any integer array of shape (3, 9, 9) or any layout with 243
    entries (reshaped in C order).  Decoding never fails on *values*: a slot
    whose triple is (-1, -1, -1) is empty, a triple fully inside the
    attribute domains is a valid object, and anything else decodes to an
    object carrying the raw values, flagged malformed in the report.
    """
    a = np.asarray(array)
    if not np.issubdtype(a.dtype, np.integer):
        raise GridShapeError(f"expected an integer array, got dtype {a.dtype}")
    if a.size != SAMPLE_SIZE:
        raise GridShapeError(f"expected {SAMPLE_SIZE} entries, got {a.size}")
    a = a.reshape(SAMPLE_SHAPE)

    panels: list[Panel] = []
    statuses: list[tuple[SlotStatus, ...]] = []
    for p in range(PANELS_PER_SAMPLE):
        slots: list[Slot] = []
        panel_status: list[SlotStatus] = []
        for s in range(PANEL_SLOTS):
            triple = (int(a[0, p, s]), int(a[1, p, s]), int(a[2, p, s]))
            if triple == EMPTY_TRIPLE:
                slots.append(None)
                panel_status.append(SlotStatus.VALID_EMPTY)
            else:
                obj = ObjectSpec(*triple)
                slots.append(obj)
                panel_status.append(
                    SlotStatus.VALID_OBJECT if obj.is_well_formed else SlotStatus.MALFORMED
                )
        panels.append(Panel(tuple(slots)))
        statuses.append(tuple(panel_status))

    rows = tuple(Row(tuple(panels[r * 3 : r * 3 + 3])) for r in range(GRID_SIDE))
    return Sample(rows), StructureReport(tuple(statuses))


class RuleSet:
    """A set of inventory rules, stored as a 40-bit mask.

    Supports the usual set algebra (&, |, ^, -, ~ within the 40-rule
    universe), membership by RuleId, index, or name, and iteration in
    inventory order.
    """

    __slots__ = ("mask",)

    FULL_MASK = (1 << RULE_COUNT) - 1

    def __init__(self, mask: int = 0):
        if not 0 <= mask <= self.FULL_MASK:
            raise ValueError(f"mask out of range: {mask:#x}")
        self.mask = mask

    @classmethod
    def from_rules(cls, rules: Iterable[RuleId]) -> "RuleSet":
        mask = 0
        for r in rules:
            mask |= 1 << r.index
        return cls(mask)

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> "RuleSet":
        mask = 0
        for i in indices:
            if not 0 <= i < RULE_COUNT:
                raise ValueError(f"rule index out of range: {i}")
            mask |= 1 << i
        return cls(mask)

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "RuleSet":
        return cls.from_rules(rule_named(n) for n in names)

    @classmethod
    def full(cls) -> "RuleSet":
        return cls(cls.FULL_MASK)

    def __contains__(self, rule: Union[RuleId, int, str]) -> bool:
        if isinstance(rule, RuleId):
            i = rule.index
        elif isinstance(rule, str):
            i = rule_named(rule).index
        else:
            i = rule
        return 0 <= i < RULE_COUNT and bool(self.mask >> i & 1)

    def __iter__(self) -> Iterator[RuleId]:
        m = self.mask
        while m:
            low = m & -m
            yield RULES[low.bit_length() - 1]
            m ^= low

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __eq__(self, other) -> bool:
        return isinstance(other, RuleSet) and self.mask == other.mask

    def __hash__(self) -> int:
        return hash(("RuleSet", self.mask))

    def __and__(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(self.mask & other.mask)

    def __or__(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(self.mask | other.mask)

    def __xor__(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(self.mask ^ other.mask)

    def __sub__(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(self.mask & ~other.mask & self.FULL_MASK)

    def __invert__(self) -> "RuleSet":
        return RuleSet(~self.mask & self.FULL_MASK)

    def issubset(self, other: "RuleSet") -> bool:
        return self.mask & ~other.mask == 0

    def indices(self) -> tuple[int, ...]:
        return tuple(r.index for r in self)

    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self)

    def __repr__(self) -> str:
        return f"RuleSet({{{', '.join(self.names())}}})"
