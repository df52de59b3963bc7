"""Procedural sample generation.

Each row is built for one target rule: draw the target dimension's structure
(a value tuple, value sets, position sets, or a count tuple), place objects,
fill every unconstrained dimension uniformly at random, then enforce purity
by rejection - while any *non-target* dimension accidentally satisfies an
inventory rule, that dimension is resampled.  Budgets bound the rejection:
``max_stage_attempts`` resamples within one structural draw, then the whole
row restarts with fresh structure, up to ``max_row_restarts`` times.

Samples are three independently generated rows for the same target rule.
Dataset generation keys one random stream per (seed, split, rule index,
sample index), which makes every sample reproducible in isolation: the same
config prefix yields byte-identical samples no matter how many samples,
rules, or worker processes the run uses.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    ATTRIBUTE_DIMENSIONS,
    COUNT_DOMAIN,
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
    rule_named,
    rule_inventory,
)
from .io import Dataset, DatasetManifest
from .rng import Stream, unit_stream
from .rules import set_triple_relations, value_triple_relations

#: Default rules withheld from the train split: one per dimension, mixed
#: relation families.
DEFAULT_HELD_OUT: tuple[RuleId, ...] = tuple(
    rule_named(n)
    for n in ("constant-color", "prog_plus1-size", "arith_diff-number", "xor-shape", "and-position")
)

SPLITS = ("train", "test")

#: Protocol defaults: 4000 samples per trained rule, 50 per rule for test sets.
DEFAULT_TRAIN_SAMPLES_PER_RULE = 4000
DEFAULT_TEST_SAMPLES_PER_RULE = 50


class GenerationError(RuntimeError):
    """Row construction exhausted its rejection budgets."""


@dataclass
class GenConfig:
    """Configuration for dataset generation.

    ``rules`` defaults to the full inventory; on the train split, rules in
    ``held_out`` are excluded from generation.  The effective rule list is
    deduplicated and sorted by inventory index.
    """

    seed: int = 0
    samples_per_rule: int = DEFAULT_TRAIN_SAMPLES_PER_RULE
    rules: tuple[RuleId, ...] = field(default_factory=rule_inventory)
    held_out: tuple[RuleId, ...] = DEFAULT_HELD_OUT
    split: str = "train"
    max_stage_attempts: int = 100
    max_row_restarts: int = 10

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.samples_per_rule < 1:
            raise ValueError("samples_per_rule must be at least 1")
        if self.max_stage_attempts < 1 or self.max_row_restarts < 1:
            raise ValueError("rejection budgets must be at least 1")

    @property
    def generated_rules(self) -> tuple[RuleId, ...]:
        rules = set(self.rules)
        if self.split == "train":
            rules -= set(self.held_out)
        if not rules:
            raise ValueError("no rules left to generate after the held-out exclusion")
        return tuple(sorted(rules, key=lambda r: r.index))


# --- target-structure draws -------------------------------------------------

_TUPLE_SUPPORT: dict[tuple[Relation, int, int], tuple[tuple[int, int, int], ...]] = {}


def value_tuple_support(relation: Relation, domain: range) -> tuple[tuple[int, int, int], ...]:
    """All (x1, x2, x3) in domain^3 satisfying a uniform-family relation.

    Enumerated once per (relation, domain) and cached; the generator draws
    uniformly from this support.
    """
    key = (relation, domain.start, domain.stop)
    cached = _TUPLE_SUPPORT.get(key)
    if cached is not None:
        return cached
    if relation is Relation.CONSTANT:
        support = tuple((v, v, v) for v in domain)
    elif relation in PROGRESSION_STEPS:
        k = PROGRESSION_STEPS[relation]
        support = tuple(
            (v, v + k, v + 2 * k) for v in domain if v + k in domain and v + 2 * k in domain
        )
    elif relation is Relation.ARITH_SUM:
        support = tuple((a, b, a + b) for a in domain for b in domain if a + b in domain)
    elif relation is Relation.ARITH_DIFF:
        support = tuple((a, b, a - b) for a in domain for b in domain if a - b in domain)
    else:
        raise ValueError(f"{relation} has no value-tuple form")
    if not support:
        raise ValueError(f"empty support for {relation} over {domain}")
    _TUPLE_SUPPORT[key] = support
    return support


def _mask_to_values(mask: int, domain: range) -> tuple[int, ...]:
    return tuple(v for i, v in enumerate(domain) if mask >> i & 1)


_SET_DRAW_CAP = 1000


def _sample_set_masks(relation: Relation, width: int, max_size: int, stream: Stream) -> tuple[int, int, int]:
    """Bitmasks (m1, m2, m3) with m3 = op(m1, m2): nonempty, distinct
    operands, every set at most max_size elements."""
    full = (1 << width) - 1
    for _ in range(_SET_DRAW_CAP):
        m1 = stream.randbelow(full) + 1
        m2 = stream.randbelow(full) + 1
        if m1 == m2 or m1.bit_count() > max_size or m2.bit_count() > max_size:
            continue
        if relation is Relation.XOR:
            m3 = m1 ^ m2
        elif relation is Relation.OR:
            m3 = m1 | m2
        else:
            m3 = m1 & m2
        if m3 == 0 or m3.bit_count() > max_size:
            continue
        return m1, m2, m3
    raise GenerationError(f"could not draw sets for {relation.value} over width {width}")


def sample_value_sets(
    relation: Relation, domain: range, stream: Stream
) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Distinct-value sets (as sorted tuples) for an attribute logic rule."""
    masks = _sample_set_masks(relation, len(domain), 9, stream)
    return tuple(_mask_to_values(m, domain) for m in masks)  # type: ignore[return-value]


def sample_position_sets(
    relation: Relation, stream: Stream
) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Occupied-slot sets (as sorted tuples) for a position logic rule."""
    masks = _sample_set_masks(relation, 9, 9, stream)
    return tuple(_mask_to_values(m, range(9)) for m in masks)  # type: ignore[return-value]


# --- row construction -------------------------------------------------------


class _RowState:
    """Working representation of a row under construction.

    ``attrs[dim][p]`` holds panel p's attribute values aligned with
    ``positions[p]`` (j-th value sits at the j-th listed slot).
    """

    __slots__ = ("counts", "positions", "attrs")

    def __init__(self):
        self.counts: list[int] = [0, 0, 0]
        self.positions: list[tuple[int, ...]] = [(), (), ()]
        self.attrs: dict[Dimension, list[list[int]]] = {}


def _draw_free_counts(state: _RowState, stream: Stream) -> None:
    state.counts = [stream.randbelow(9) + 1 for _ in range(3)]


def _draw_positions(state: _RowState, stream: Stream) -> None:
    state.positions = [stream.subset_indices(9, n) for n in state.counts]


def _draw_free_attr(state: _RowState, dim: Dimension, stream: Stream) -> None:
    domain = attribute_domain(dim)
    w = len(domain)
    state.attrs[dim] = [
        [domain[stream.randbelow(w)] for _ in range(n)] for n in state.counts
    ]


def _fit_uniform_target(state: _RowState, dim: Dimension, triple) -> None:
    state.attrs[dim] = [[triple[i]] * state.counts[i] for i in range(3)]


def _fit_logic_target(state: _RowState, dim: Dimension, sets, stream: Stream) -> None:
    # Panel i shows every value of sets[i] at least once; the remaining
    # slots repeat values from the same set.  Arrangement is shuffled.
    cols = []
    for i in range(3):
        base = list(sets[i])
        extras = [base[stream.randbelow(len(base))] for _ in range(state.counts[i] - len(base))]
        vals = base + extras
        stream.shuffle(vals)
        cols.append(vals)
    state.attrs[dim] = cols


def _draw_logic_counts(state: _RowState, sets, stream: Stream) -> None:
    state.counts = [len(s) + stream.randbelow(10 - len(s)) for s in sets]


def _state_relations(state: _RowState, dim: Dimension) -> set[Relation]:
    """Inventory relations dimension ``dim`` currently satisfies."""
    if dim is Dimension.NUMBER:
        return value_triple_relations(*state.counts)
    if dim is Dimension.POSITION:
        p1, p2, p3 = (set(p) for p in state.positions)
        return set_triple_relations(p1, p2, p3)
    lists = state.attrs[dim]
    s1, s2, s3 = (set(l) for l in lists)
    rels = set_triple_relations(s1, s2, s3)
    if len(s1) == 1 and len(s2) == 1 and len(s3) == 1:
        rels |= value_triple_relations(lists[0][0], lists[1][0], lists[2][0])
    return rels


def _build_state(target: RuleId, stream: Stream) -> tuple[_RowState, object]:
    """Fresh row state for one structural draw of the target.

    Returns the state plus the drawn target structure (needed to re-fit the
    target dimension when free dimensions are resampled).
    """
    rel, dim = target.relation, target.dimension
    state = _RowState()

    if dim is Dimension.POSITION:
        sets = sample_position_sets(rel, stream)
        state.positions = list(sets)
        state.counts = [len(p) for p in sets]
        for d in ATTRIBUTE_DIMENSIONS:
            _draw_free_attr(state, d, stream)
        return state, sets

    if dim is Dimension.NUMBER:
        triple = value_tuple_support(rel, COUNT_DOMAIN)[
            stream.randbelow(len(value_tuple_support(rel, COUNT_DOMAIN)))
        ]
        state.counts = list(triple)
        _draw_positions(state, stream)
        for d in ATTRIBUTE_DIMENSIONS:
            _draw_free_attr(state, d, stream)
        return state, triple

    if rel in LOGIC_RELATIONS:
        sets = sample_value_sets(rel, attribute_domain(dim), stream)
        _draw_logic_counts(state, sets, stream)
        _draw_positions(state, stream)
        _fit_logic_target(state, dim, sets, stream)
        for d in ATTRIBUTE_DIMENSIONS:
            if d is not dim:
                _draw_free_attr(state, d, stream)
        return state, sets

    support = value_tuple_support(rel, attribute_domain(dim))
    triple = support[stream.randbelow(len(support))]
    _draw_free_counts(state, stream)
    _draw_positions(state, stream)
    _fit_uniform_target(state, dim, triple)
    for d in ATTRIBUTE_DIMENSIONS:
        if d is not dim:
            _draw_free_attr(state, d, stream)
    return state, triple


def _refit_target_attr(state: _RowState, target: RuleId, structure, stream: Stream) -> None:
    if target.relation in LOGIC_RELATIONS:
        _fit_logic_target(state, target.dimension, structure, stream)
    else:
        _fit_uniform_target(state, target.dimension, structure)


def _purify(
    target: RuleId, state: _RowState, structure, stream: Stream, max_stage_attempts: int
) -> bool:
    """Resample non-target dimensions until none satisfies any rule.

    Returns False when the attempt budget runs out (caller restarts the row
    with fresh target structure).
    """
    rel, tdim = target.relation, target.dimension
    check_dims = [d for d in Dimension if d is not tdim]

    for _ in range(max_stage_attempts):
        violated = [d for d in check_dims if _state_relations(state, d)]
        if not violated:
            return True

        if Dimension.NUMBER in violated:
            if tdim is Dimension.POSITION:
                # Counts are pinned by the position sets; only a fresh
                # structural draw can move them.
                sets = sample_position_sets(rel, stream)
                state.positions = list(sets)
                state.counts = [len(p) for p in sets]
                structure = sets
                for d in ATTRIBUTE_DIMENSIONS:
                    _draw_free_attr(state, d, stream)
                continue
            # Counts are free: redraw them and everything shaped by them.
            if rel in LOGIC_RELATIONS and tdim in ATTRIBUTE_DIMENSIONS:
                _draw_logic_counts(state, structure, stream)
            else:
                _draw_free_counts(state, stream)
            _draw_positions(state, stream)
            if tdim in ATTRIBUTE_DIMENSIONS:
                _refit_target_attr(state, target, structure, stream)
            for d in ATTRIBUTE_DIMENSIONS:
                if d is not tdim:
                    _draw_free_attr(state, d, stream)
            continue

        if Dimension.POSITION in violated:
            _draw_positions(state, stream)
        for d in violated:
            if d in ATTRIBUTE_DIMENSIONS:
                _draw_free_attr(state, d, stream)
    return False


def _generate_row_state(
    target: RuleId, stream: Stream, max_stage_attempts: int, max_row_restarts: int
) -> _RowState:
    for _ in range(max_row_restarts):
        state, structure = _build_state(target, stream)
        if _purify(target, state, structure, stream, max_stage_attempts):
            return state
    raise GenerationError(
        f"row generation for {target.name} exhausted "
        f"{max_row_restarts} restarts x {max_stage_attempts} attempts"
    )


def _state_to_row(state: _RowState) -> Row:
    shp = state.attrs[Dimension.SHAPE]
    siz = state.attrs[Dimension.SIZE]
    col = state.attrs[Dimension.COLOR]
    panels = []
    for i in range(3):
        slots: list[Optional[ObjectSpec]] = [None] * 9
        for j, pos in enumerate(state.positions[i]):
            slots[pos] = ObjectSpec(shp[i][j], siz[i][j], col[i][j])
        panels.append(Panel(tuple(slots)))
    return Row((panels[0], panels[1], panels[2]))


def _state_into_block(state: _RowState, block: np.ndarray) -> None:
    # block is a (3, 3, 9) int8 view: channel, panel-in-row, slot.
    block.fill(-1)
    shp = state.attrs[Dimension.SHAPE]
    siz = state.attrs[Dimension.SIZE]
    col = state.attrs[Dimension.COLOR]
    for i in range(3):
        for j, pos in enumerate(state.positions[i]):
            block[0, i, pos] = shp[i][j]
            block[1, i, pos] = siz[i][j]
            block[2, i, pos] = col[i][j]


def generate_row(
    target: RuleId,
    stream: Stream,
    *,
    max_stage_attempts: int = 100,
    max_row_restarts: int = 10,
) -> Row:
    """One row satisfying the target rule and, off the target dimension, no rule."""
    state = _generate_row_state(target, stream, max_stage_attempts, max_row_restarts)
    return _state_to_row(state)


def generate_sample(
    target: RuleId,
    stream: Stream,
    *,
    max_stage_attempts: int = 100,
    max_row_restarts: int = 10,
) -> Sample:
    """Three independent rows for the target rule, labeled with it."""
    rows = tuple(
        generate_row(
            target,
            stream,
            max_stage_attempts=max_stage_attempts,
            max_row_restarts=max_row_restarts,
        )
        for _ in range(3)
    )
    return Sample(rows, label=target)


# --- dataset generation -----------------------------------------------------


def _fill_sample_grid(grid: np.ndarray, cfg: GenConfig, rule: RuleId, index: int) -> None:
    stream = unit_stream(cfg.seed, cfg.split, rule.index, index)
    for r in range(3):
        state = _generate_row_state(rule, stream, cfg.max_stage_attempts, cfg.max_row_restarts)
        _state_into_block(state, grid[:, r * 3 : r * 3 + 3, :])


def _generate_block(
    seed: int,
    split: str,
    rule_index: int,
    i0: int,
    i1: int,
    max_stage_attempts: int,
    max_row_restarts: int,
) -> bytes:
    cfg = GenConfig(
        seed=seed,
        split=split,
        max_stage_attempts=max_stage_attempts,
        max_row_restarts=max_row_restarts,
    )
    rule = rule_inventory()[rule_index]
    out = np.empty((i1 - i0, 3, 9, 9), np.int8)
    for i in range(i0, i1):
        _fill_sample_grid(out[i - i0], cfg, rule, i)
    return out.tobytes()


def generate_dataset(cfg: GenConfig, workers: int = 1) -> tuple[Dataset, DatasetManifest]:
    """Generate samples_per_rule samples for every effective rule.

    Records are ordered by (rule inventory index, sample index).  Output is
    a pure function of (seed, split, rule index, sample index), so worker
    count never changes the bytes, and a smaller samples_per_rule run is a
    per-rule prefix of a larger one.
    """
    rules = cfg.generated_rules
    n = cfg.samples_per_rule
    total = len(rules) * n
    grids = np.empty((total, 3, 9, 9), np.int8)
    labels = np.empty(total, np.int16)
    for k, rule in enumerate(rules):
        labels[k * n : (k + 1) * n] = rule.index

    if workers <= 1:
        for k, rule in enumerate(rules):
            base = k * n
            for i in range(n):
                _fill_sample_grid(grids[base + i], cfg, rule, i)
    else:
        chunk = max(1, -(-n // (workers * 4)))
        jobs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for k, rule in enumerate(rules):
                for i0 in range(0, n, chunk):
                    i1 = min(n, i0 + chunk)
                    fut = pool.submit(
                        _generate_block,
                        cfg.seed,
                        cfg.split,
                        rule.index,
                        i0,
                        i1,
                        cfg.max_stage_attempts,
                        cfg.max_row_restarts,
                    )
                    jobs.append((k * n + i0, i1 - i0, fut))
            for offset, count, fut in jobs:
                block = np.frombuffer(fut.result(), np.int8).reshape(count, 3, 9, 9)
                grids[offset : offset + count] = block

    manifest = DatasetManifest(
        seed=cfg.seed,
        rules=tuple(r.name for r in rules),
        held_out=tuple(r.name for r in sorted(set(cfg.held_out), key=lambda r: r.index)),
        split=cfg.split,
        samples_per_rule=n,
    )
    return Dataset(grids, labels), manifest


# --- structureless baselines ------------------------------------------------


def random_panel(stream: Stream, occupancy: float = 0.5) -> Panel:
    """A panel with independently occupied slots and uniform attributes."""
    threshold = int(occupancy * (1 << 32))
    slots: list[Optional[ObjectSpec]] = []
    for _ in range(9):
        if stream.randbelow(1 << 32) < threshold:
            slots.append(
                ObjectSpec(stream.randbelow(7), stream.randbelow(10), stream.randbelow(10))
            )
        else:
            slots.append(None)
    return Panel(tuple(slots))


def random_sample(stream: Stream, occupancy: float = 0.5) -> Sample:
    """A fully random unlabeled sample; the no-structure baseline."""
    rows = tuple(
        Row(tuple(random_panel(stream, occupancy) for _ in range(3))) for _ in range(3)
    )
    return Sample(rows)  # type: ignore[arg-type]
