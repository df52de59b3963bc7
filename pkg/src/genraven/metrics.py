"""Scoring: row validity, cross-row consistency, and completion accuracy.

A row is valid when at least one inventory rule applies to it.  A sample is
C2-consistent when some rule is shared by at least two rows, C3-consistent
when some rule is shared by all three.  Per-rule C3 counters are
multi-credit: a sample whose rows share several rules counts toward each of
them, with a separate singleton counter for unambiguous samples.

A completion is correct when the completed third row shares at least one
applicable rule with the first two rows; matching the generating rule is
tracked separately and is not required for credit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Collection, Iterable, Optional, Sequence, Union

from .core import RULE_COUNT, RULES, Panel, RuleId, RuleSet, Sample, rule_named
from .io import PathLike
from .rules import shared_rules
from .solver import CompletionContext

REPORT_SCHEMA_VERSION = 1


class AlignmentError(ValueError):
    """Tests and completions differ in length."""


class InvalidTestCaseError(ValueError):
    """A test case is unusable: unlabeled, or structurally invalid context."""


@dataclass(frozen=True)
class ConsistencyReport:
    n_samples: int
    valid_row_fraction: float
    c2_fraction: float
    c3_fraction: float
    #: per rule, samples whose three rows all share it (multi-credit)
    per_rule_c3_counts: tuple[int, ...]
    #: per rule, samples whose shared set is exactly that one rule
    per_rule_c3_singleton_counts: tuple[int, ...]
    #: per rule, rows (across all samples) on which the rule applies
    per_rule_valid_row_counts: tuple[int, ...]

    @property
    def per_rule_c3_frequency_normalized(self) -> tuple[float, ...]:
        """C3 counts as a fraction of samples, scaled by the inventory size
        (a uniform spread over the 40 rules scores 1.0 per rule)."""
        if self.n_samples == 0:
            return (0.0,) * RULE_COUNT
        return tuple(c / self.n_samples * RULE_COUNT for c in self.per_rule_c3_counts)

    def to_dict(self) -> dict:
        return {
            "schemaVersion": REPORT_SCHEMA_VERSION,
            "kind": "consistency",
            "nSamples": self.n_samples,
            "validRowFraction": self.valid_row_fraction,
            "c2Fraction": self.c2_fraction,
            "c3Fraction": self.c3_fraction,
            "perRule": [
                {
                    "rule": RULES[i].name,
                    "index": i,
                    "c3Count": self.per_rule_c3_counts[i],
                    "c3FrequencyNormalized": self.per_rule_c3_frequency_normalized[i],
                    "c3SingletonCount": self.per_rule_c3_singleton_counts[i],
                    "validRowCount": self.per_rule_valid_row_counts[i],
                }
                for i in range(RULE_COUNT)
            ],
        }

    def to_csv_rows(self) -> list[list]:
        rows = [
            ["rule", "index", "c3_count", "c3_frequency_normalized", "c3_singleton_count", "valid_row_count"]
        ]
        freq = self.per_rule_c3_frequency_normalized
        for i in range(RULE_COUNT):
            rows.append(
                [
                    RULES[i].name,
                    i,
                    self.per_rule_c3_counts[i],
                    repr(freq[i]),
                    self.per_rule_c3_singleton_counts[i],
                    self.per_rule_valid_row_counts[i],
                ]
            )
        return rows


def consistency_report(samples: Iterable[Sample]) -> ConsistencyReport:
    """Score an iterable of samples.  Zero samples yields all-zero fractions."""
    n = 0
    valid_rows = 0
    c2 = 0
    c3 = 0
    rule_c3 = [0] * RULE_COUNT
    rule_single = [0] * RULE_COUNT
    rule_rows = [0] * RULE_COUNT
    for sample in samples:
        n += 1
        sh = shared_rules(sample)
        for rs in sh.per_row:
            if rs:
                valid_rows += 1
                for r in rs:
                    rule_rows[r.index] += 1
        if sh.is_c2:
            c2 += 1
        shared = sh.all_shared
        if shared:
            c3 += 1
            for r in shared:
                rule_c3[r.index] += 1
            if len(shared) == 1:
                rule_single[next(iter(shared)).index] += 1
    if n == 0:
        return ConsistencyReport(0, 0.0, 0.0, 0.0, tuple(rule_c3), tuple(rule_single), tuple(rule_rows))
    return ConsistencyReport(
        n_samples=n,
        valid_row_fraction=valid_rows / (3 * n),
        c2_fraction=c2 / n,
        c3_fraction=c3 / n,
        per_rule_c3_counts=tuple(rule_c3),
        per_rule_c3_singleton_counts=tuple(rule_single),
        per_rule_valid_row_counts=tuple(rule_rows),
    )


@dataclass(frozen=True)
class CompletionVerdict:
    """Judgment of one completion against its context."""

    correct: bool
    shared: RuleSet
    structural_failure: bool
    matched_ground_truth: Optional[bool]


def score_completion(
    ctx: CompletionContext, completion: Panel, label: Optional[RuleId] = None
) -> CompletionVerdict:
    """Judge one completion: correct iff the completed row shares a rule
    with both complete rows.  A malformed or empty completion fails
    structurally (never raises)."""
    ctx.validate()
    if completion.is_empty or not completion.is_structurally_valid:
        return CompletionVerdict(False, RuleSet(), True, False if label else None)
    sh = shared_rules(ctx.with_completion(completion))
    shared = sh.all_shared
    matched = (label in shared) if label is not None else None
    return CompletionVerdict(bool(shared), shared, False, matched)


@dataclass(frozen=True)
class CompletionReport:
    n_tests: int
    accuracy: float
    matched_ground_truth_fraction: float
    trained_accuracy: Optional[float]
    held_out_accuracy: Optional[float]
    held_out: tuple[str, ...]
    per_rule_n: tuple[int, ...]
    per_rule_correct: tuple[int, ...]

    def per_rule_accuracy(self, i: int) -> Optional[float]:
        return self.per_rule_correct[i] / self.per_rule_n[i] if self.per_rule_n[i] else None

    def to_dict(self) -> dict:
        return {
            "schemaVersion": REPORT_SCHEMA_VERSION,
            "kind": "completion",
            "nTests": self.n_tests,
            "accuracy": self.accuracy,
            "matchedGroundTruthFraction": self.matched_ground_truth_fraction,
            "trainedAccuracy": self.trained_accuracy,
            "heldOutAccuracy": self.held_out_accuracy,
            "heldOut": list(self.held_out),
            "perRule": [
                {
                    "rule": RULES[i].name,
                    "index": i,
                    "nTests": self.per_rule_n[i],
                    "nCorrect": self.per_rule_correct[i],
                    "accuracy": self.per_rule_accuracy(i),
                    "heldOut": RULES[i].name in self.held_out,
                }
                for i in range(RULE_COUNT)
            ],
        }

    def to_csv_rows(self) -> list[list]:
        rows = [["rule", "index", "n_tests", "n_correct", "accuracy", "held_out"]]
        for i in range(RULE_COUNT):
            acc = self.per_rule_accuracy(i)
            rows.append(
                [
                    RULES[i].name,
                    i,
                    self.per_rule_n[i],
                    self.per_rule_correct[i],
                    "" if acc is None else repr(acc),
                    int(RULES[i].name in self.held_out),
                ]
            )
        return rows


def completion_report(
    tests: Sequence[Sample],
    completions: Sequence[Panel],
    held_out: Collection[RuleId] = (),
) -> CompletionReport:
    """Score aligned (test, completion) pairs.

    Tests must be labeled - per-rule and trained/held-out splits are
    meaningless otherwise.  Overall accuracy is the plain mean over all
    tests and therefore equals the test-count-weighted mean of the per-rule
    accuracies.
    """
    if len(tests) != len(completions):
        raise AlignmentError(f"{len(tests)} tests but {len(completions)} completions")
    held_names = {r.name for r in held_out}
    n_rule = [0] * RULE_COUNT
    c_rule = [0] * RULE_COUNT
    matched = 0
    for i, (test, completion) in enumerate(zip(tests, completions)):
        if test.label is None:
            raise InvalidTestCaseError(f"test {i} has no rule label")
        try:
            ctx = CompletionContext.from_sample(test)
            verdict = score_completion(ctx, completion, test.label)
        except ValueError as e:
            raise InvalidTestCaseError(f"test {i}: {e}") from None
        n_rule[test.label.index] += 1
        if verdict.correct:
            c_rule[test.label.index] += 1
        if verdict.matched_ground_truth:
            matched += 1
    n = len(tests)

    def _ratio(pred) -> Optional[float]:
        tot = sum(n_rule[i] for i in range(RULE_COUNT) if pred(i))
        cor = sum(c_rule[i] for i in range(RULE_COUNT) if pred(i))
        return cor / tot if tot else None

    return CompletionReport(
        n_tests=n,
        accuracy=sum(c_rule) / n if n else 0.0,
        matched_ground_truth_fraction=matched / n if n else 0.0,
        trained_accuracy=_ratio(lambda i: RULES[i].name not in held_names),
        held_out_accuracy=_ratio(lambda i: RULES[i].name in held_names),
        held_out=tuple(sorted(held_names, key=lambda name: rule_named(name).index)),
        per_rule_n=tuple(n_rule),
        per_rule_correct=tuple(c_rule),
    )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Two-pass Pearson correlation.  Raises on length mismatch, fewer than
    two points, or zero variance."""
    if len(xs) != len(ys):
        raise ValueError("length mismatch")
    n = len(xs)
    if n < 2:
        raise ValueError("need at least two points")
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("zero variance")
    return sxy / math.sqrt(sxx * syy)


Report = Union[ConsistencyReport, CompletionReport]


def dump_report_json(report, path: PathLike) -> None:
    """Write a report as canonical JSON (sorted keys, 2-space indent)."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, sort_keys=True, indent=2)
        f.write("\n")


def dump_report_csv(report, path: PathLike) -> None:
    """Write a report's per-rule table as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        csv.writer(f).writerows(report.to_csv_rows())
