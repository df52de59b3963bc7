import csv
import json

import numpy as np
import pytest

from genraven.core import ObjectSpec, Panel, Sample, rule_named
from genraven.gen import generate_sample, random_sample
from genraven.metrics import (
    AlignmentError,
    CompletionReport,
    ConsistencyReport,
    InvalidTestCaseError,
    completion_report,
    consistency_report,
    dump_report_csv,
    dump_report_json,
    pearson,
    score_completion,
)
from genraven.rng import unit_stream
from genraven.solver import CompletionContext, complete_panel
from conftest import mk_panel


def _samples(names, per_rule, seed):
    out = []
    for name in names:
        rule = rule_named(name)
        for i in range(per_rule):
            out.append(generate_sample(rule, unit_stream(seed, "m", rule.index, i)))
    return out


class TestConsistencyReport:
    def test_generated_samples_score_perfectly(self):
        samples = _samples(
            ("constant-shape", "arith_sum-number", "xor-position", "prog_minus2-color"), 10, 81
        )
        rep = consistency_report(samples)
        assert rep.n_samples == 40
        assert rep.valid_row_fraction == 1.0
        assert rep.c2_fraction == 1.0
        assert rep.c3_fraction == 1.0
        for name in ("constant-shape", "arith_sum-number", "xor-position", "prog_minus2-color"):
            i = rule_named(name).index
            assert rep.per_rule_c3_counts[i] >= 10
            assert rep.per_rule_valid_row_counts[i] >= 30

    def test_mixed_dimension_sample_fails_c_levels(self):
        a = generate_sample(rule_named("constant-shape"), unit_stream(82, "m"))
        b = generate_sample(rule_named("prog_plus1-number"), unit_stream(83, "m"))
        c = generate_sample(rule_named("or-position"), unit_stream(84, "m"))
        frankenstein = Sample((a.rows[0], b.rows[1], c.rows[2]))
        rep = consistency_report([frankenstein])
        assert rep.valid_row_fraction == 1.0  # each row is valid on its own
        assert rep.c2_fraction == 0.0
        assert rep.c3_fraction == 0.0

    def test_empty_input(self):
        rep = consistency_report([])
        assert rep.n_samples == 0
        assert rep.valid_row_fraction == rep.c2_fraction == rep.c3_fraction == 0.0
        assert rep.per_rule_c3_frequency_normalized == (0.0,) * 40

    def test_normalized_frequency_arithmetic(self):
        samples = _samples(("prog_plus1-color",), 8, 85)
        rep = consistency_report(samples)
        i = rule_named("prog_plus1-color").index
        freq = rep.per_rule_c3_frequency_normalized
        assert freq[i] == rep.per_rule_c3_counts[i] / 8 * 40
        assert freq[i] >= 40.0  # every sample credits the target rule

    def test_random_samples_fall_in_range(self):
        samples = [random_sample(unit_stream(86, "m", i)) for i in range(60)]
        rep = consistency_report(samples)
        assert 0.0 <= rep.valid_row_fraction <= 1.0
        assert rep.c3_fraction <= rep.c2_fraction <= 1.0

    def test_serialization(self, tmp_path):
        rep = consistency_report(_samples(("and-size",), 3, 87))
        d = rep.to_dict()
        assert d["kind"] == "consistency"
        assert d["nSamples"] == 3
        assert len(d["perRule"]) == 40
        assert {"rule", "index", "c3Count", "c3FrequencyNormalized"} <= set(d["perRule"][0])
        rows = rep.to_csv_rows()
        assert len(rows) == 41
        assert rows[0][0] == "rule"


class TestScoreCompletion:
    def _ctx_and_label(self, name, seed):
        sample = generate_sample(rule_named(name), unit_stream(seed, "sc"))
        return CompletionContext.from_sample(sample), sample.rows[2].panels[2], sample.label

    def test_true_ninth_panel_is_correct(self):
        ctx, ninth, label = self._ctx_and_label("arith_diff-size", 91)
        v = score_completion(ctx, ninth, label)
        assert v.correct and not v.structural_failure
        assert v.matched_ground_truth is True
        assert label in v.shared

    def test_rule_breaking_panel_is_incorrect(self):
        ctx, _, label = self._ctx_and_label("constant-shape", 92)
        held = ctx.prefix[0].objects[0].shape
        wrong = mk_panel([(0, (held + 1) % 7, 3, 4), (5, (held + 2) % 7, 6, 1)])
        v = score_completion(ctx, wrong, label)
        assert not v.correct
        assert len(v.shared) == 0
        assert v.matched_ground_truth is False
        assert not v.structural_failure

    def test_empty_panel_fails_structurally(self):
        ctx, _, label = self._ctx_and_label("or-color", 93)
        v = score_completion(ctx, Panel((None,) * 9), label)
        assert v.structural_failure and not v.correct
        assert v.matched_ground_truth is False
        v2 = score_completion(ctx, Panel((None,) * 9))
        assert v2.matched_ground_truth is None

    def test_malformed_panel_fails_structurally(self):
        ctx, _, label = self._ctx_and_label("or-color", 94)
        bad = Panel((ObjectSpec(3, 12, 0),) + (None,) * 8)
        v = score_completion(ctx, bad, label)
        assert v.structural_failure and not v.correct

    def test_invalid_context_raises(self):
        ctx, ninth, _ = self._ctx_and_label("or-color", 95)
        broken = CompletionContext(ctx.rows, (Panel((ObjectSpec(8, 0, 0),) + (None,) * 8), ctx.prefix[1]))
        with pytest.raises(ValueError):
            score_completion(broken, ninth)


class TestCompletionReport:
    def _tests_and_completions(self, names, per_rule, seed):
        tests = _samples(names, per_rule, seed)
        completions = [
            complete_panel(CompletionContext.from_sample(t), unit_stream(seed, "cc", i)).panel
            for i, t in enumerate(tests)
        ]
        return tests, completions

    def test_solver_outputs_score_one(self):
        tests, completions = self._tests_and_completions(
            ("constant-size", "xor-shape", "prog_plus2-number"), 4, 101
        )
        rep = completion_report(tests, completions)
        assert rep.n_tests == 12
        assert rep.accuracy == 1.0
        assert 0.0 <= rep.matched_ground_truth_fraction <= 1.0
        for name in ("constant-size", "xor-shape", "prog_plus2-number"):
            i = rule_named(name).index
            assert rep.per_rule_n[i] == 4
            assert rep.per_rule_accuracy(i) == 1.0
        assert rep.per_rule_accuracy(rule_named("and-position").index) is None

    def test_broken_completion_lowers_accuracy(self):
        tests, completions = self._tests_and_completions(("constant-size", "xor-shape"), 3, 102)
        completions[0] = Panel((None,) * 9)
        rep = completion_report(tests, completions)
        assert rep.n_tests == 6
        assert rep.accuracy == pytest.approx(5 / 6)
        i = rule_named("constant-size").index
        assert rep.per_rule_correct[i] == 2
        # overall accuracy is the test-count-weighted mean of per-rule accuracies
        assert rep.accuracy == pytest.approx(sum(rep.per_rule_correct) / sum(rep.per_rule_n))

    def test_held_out_split(self):
        held = (rule_named("xor-shape"),)
        tests, completions = self._tests_and_completions(("constant-size", "xor-shape"), 3, 103)
        completions[-1] = Panel((None,) * 9)  # one held-out miss
        rep = completion_report(tests, completions, held_out=held)
        assert rep.held_out == ("xor-shape",)
        assert rep.trained_accuracy == 1.0
        assert rep.held_out_accuracy == pytest.approx(2 / 3)
        assert rep.accuracy == pytest.approx(5 / 6)

    def test_no_held_out_tests_gives_none(self):
        tests, completions = self._tests_and_completions(("constant-size",), 2, 104)
        rep = completion_report(tests, completions, held_out=(rule_named("and-position"),))
        assert rep.held_out_accuracy is None
        assert rep.trained_accuracy == rep.accuracy

    def test_alignment_and_label_errors(self):
        tests, completions = self._tests_and_completions(("constant-size",), 2, 105)
        with pytest.raises(AlignmentError):
            completion_report(tests, completions[:1])
        unlabeled = Sample(tests[0].rows)
        with pytest.raises(InvalidTestCaseError):
            completion_report([unlabeled], [completions[0]])

    def test_empty_inputs(self):
        rep = completion_report([], [])
        assert rep.n_tests == 0
        assert rep.accuracy == 0.0
        assert rep.trained_accuracy is None

    def test_serialization(self):
        tests, completions = self._tests_and_completions(("constant-size",), 2, 106)
        rep = completion_report(tests, completions, held_out=(rule_named("xor-shape"),))
        d = rep.to_dict()
        assert d["kind"] == "completion"
        assert d["nTests"] == 2
        assert d["heldOut"] == ["xor-shape"]
        entry = d["perRule"][rule_named("xor-shape").index]
        assert entry["heldOut"] is True and entry["nTests"] == 0
        rows = rep.to_csv_rows()
        assert len(rows) == 41
        assert rows[0] == ["rule", "index", "n_tests", "n_correct", "accuracy", "held_out"]


class TestPearson:
    def test_matches_numpy(self):
        rng = np.random.default_rng(7)
        xs = rng.normal(size=200).tolist()
        ys = (rng.normal(size=200) + np.asarray(xs) * 0.3).tolist()
        assert pearson(xs, ys) == pytest.approx(np.corrcoef(xs, ys)[0, 1], abs=1e-12)

    def test_perfect_correlation(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        assert pearson(xs, [2 * x + 1 for x in xs]) == pytest.approx(1.0)
        assert pearson(xs, [-x for x in xs]) == pytest.approx(-1.0)

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            pearson([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            pearson([1.0], [1.0])
        with pytest.raises(ValueError):
            pearson([1.0, 1.0], [1.0, 2.0])


class TestDumps:
    def test_json_round_trip(self, tmp_path):
        rep = consistency_report(_samples(("constant-shape",), 2, 111))
        path = tmp_path / "rep.json"
        dump_report_json(rep, path)
        text = path.read_text()
        assert text.endswith("\n")
        assert json.loads(text) == json.loads(json.dumps(rep.to_dict()))

    def test_csv_round_trip(self, tmp_path):
        tests, completions = (
            _samples(("constant-shape",), 2, 112),
            [],
        )
        completions = [
            complete_panel(CompletionContext.from_sample(t), unit_stream(112, "cc", i)).panel
            for i, t in enumerate(tests)
        ]
        rep = completion_report(tests, completions)
        path = tmp_path / "rep.csv"
        dump_report_csv(rep, path)
        with open(path, newline="") as f:
            got = list(csv.reader(f))
        assert got == [[str(c) for c in row] for row in rep.to_csv_rows()]
