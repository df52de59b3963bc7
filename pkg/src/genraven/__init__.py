"""Procedural generation, rule inference, and memorization metrics for
relational matrix puzzles."""

from .core import (
    Dimension,
    GridShapeError,
    INVENTORY_DIGEST,
    ObjectSpec,
    Panel,
    Relation,
    Row,
    RuleId,
    RuleSet,
    Sample,
    SlotStatus,
    StructureReport,
    decode_sample,
    encode_sample,
    inventory_digest,
    rule_for,
    rule_inventory,
    rule_named,
)
from .gen import (
    DEFAULT_HELD_OUT,
    GenConfig,
    GenerationError,
    generate_dataset,
    generate_row,
    generate_sample,
    random_panel,
    random_sample,
)
from .io import (
    Dataset,
    DatasetManifest,
    FormatError,
    ManifestError,
    read_dataset,
    read_grvn,
    read_jsonl,
    read_manifest,
    write_dataset,
    write_grvn,
    write_jsonl,
    write_manifest,
)
from .mem import MemorizationIndex, MemorizationReport, build_index, memorization_report
from .metrics import (
    CompletionReport,
    CompletionVerdict,
    ConsistencyReport,
    completion_report,
    consistency_report,
    pearson,
    score_completion,
)
from .rng import Stream, unit_stream
from .rules import applicable_rules, rule_applies, shared_rules
from .solver import (
    CompletionContext,
    CompletionResult,
    candidate_rules,
    complete_panel,
    feasible_rules_for_prefix,
    third_panel_for_rule,
)

__version__ = "0.1.0"
