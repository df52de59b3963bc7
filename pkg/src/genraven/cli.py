"""Command-line front door: synthesis, scoring, completion, memorization,
inspection, and export.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 generation or
solver failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import gen, io, mem, metrics
from .core import GridShapeError, RuleId, rule_inventory, rule_named
from .rng import unit_stream
from .solver import (
    AllInfeasibleError,
    CompletionContext,
    InvalidContextError,
    NoSharedRuleError,
    complete_panel,
)
from .rules import applicable_rules


class UsageError(Exception):
    pass


def _parse_rules(text: str) -> tuple[RuleId, ...]:
    if text == "all":
        return rule_inventory()
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise UsageError("empty rule list")
    try:
        return tuple(rule_named(n) for n in names)
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None


def _parse_holdout(text: str) -> tuple[RuleId, ...]:
    if text == "default":
        return gen.DEFAULT_HELD_OUT
    if text == "none":
        return ()
    return _parse_rules(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genraven",
        description="Generate, score, complete, and audit relational matrix samples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled dataset plus manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-per-rule", type=int, default=None,
                   help="samples per rule (default: 4000 for train, 50 for test)")
    p.add_argument("--rules", default="all", help='"all" or comma-separated rule names')
    p.add_argument("--holdout", default="default",
                   help='"default", "none", or comma-separated rule names')
    p.add_argument("--split", choices=gen.SPLITS, default="train")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None, help="default: <out>.manifest.json")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("eval", help="score datasets")
    esub = p.add_subparsers(dest="eval_command", required=True)

    pc = esub.add_parser("consistency", help="row validity and C2/C3 consistency")
    pc.add_argument("--samples", required=True)
    pc.add_argument("--report", required=True, help="JSON report path")
    pc.add_argument("--per-rule-csv", default=None, help="also write the per-rule table as CSV")

    pe = esub.add_parser("completion", help="score completions against test cases")
    pe.add_argument("--tests", required=True)
    pe.add_argument("--completions", required=True)
    pe.add_argument("--holdout", default="default",
                    help='"default", "none", or comma-separated rule names')
    pe.add_argument("--report", required=True, help="JSON report path")
    pe.add_argument("--per-rule-csv", default=None)

    p = sub.add_parser("complete", help="oracle-complete the final panel of each test")
    p.add_argument("--tests", required=True)
    p.add_argument("--strategy", choices=("first", "random"), default="first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mem", help="memorization of generated data against a training set")
    p.add_argument("--generated", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--control", default=None)
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--csv", default=None, help="also write the per-level table as CSV")

    p = sub.add_parser("inspect", help="pretty-print one sample and its applicable rules")
    p.add_argument("--file", required=True)
    p.add_argument("--index", type=int, default=0)

    p = sub.add_parser("export", help="convert a dataset between formats")
    p.add_argument("--file", required=True)
    p.add_argument("--to", choices=("jsonl", "grvn"), required=True)
    p.add_argument("--out", required=True)

    return parser


def _cmd_gen(args) -> int:
    n = args.n_per_rule
    if n is None:
        n = (
            gen.DEFAULT_TRAIN_SAMPLES_PER_RULE
            if args.split == "train"
            else gen.DEFAULT_TEST_SAMPLES_PER_RULE
        )
    try:
        cfg = gen.GenConfig(
            seed=args.seed,
            samples_per_rule=n,
            rules=_parse_rules(args.rules),
            held_out=_parse_holdout(args.holdout),
            split=args.split,
        )
        rules = cfg.generated_rules
    except ValueError as e:
        raise UsageError(str(e)) from None
    ds, manifest = gen.generate_dataset(cfg, workers=max(1, args.workers))
    io.write_grvn(ds, args.out)
    manifest_path = args.manifest or f"{args.out}.manifest.json"
    io.write_manifest(manifest, manifest_path)
    print(
        f"wrote {len(ds)} samples ({len(rules)} rules x {n}) to {args.out}; "
        f"manifest {manifest_path}"
    )
    return 0


def _load_samples(path: str) -> list:
    ds = io.read_dataset(path)
    return [ds[i] for i in range(len(ds))]


def _cmd_eval_consistency(args) -> int:
    ds = io.read_dataset(args.samples)
    report = metrics.consistency_report(ds[i] for i in range(len(ds)))
    metrics.dump_report_json(report, args.report)
    if args.per_rule_csv:
        metrics.dump_report_csv(report, args.per_rule_csv)
    print(
        f"n={report.n_samples} validRowFraction={report.valid_row_fraction:.6f} "
        f"c2={report.c2_fraction:.6f} c3={report.c3_fraction:.6f}"
    )
    return 0


def _cmd_eval_completion(args) -> int:
    try:
        held_out = _parse_holdout(args.holdout)
    except UsageError:
        raise
    tests = _load_samples(args.tests)
    completed = io.read_dataset(args.completions)
    completions = [completed[i].rows[2].panels[2] for i in range(len(completed))]
    report = metrics.completion_report(tests, completions, held_out)
    metrics.dump_report_json(report, args.report)
    if args.per_rule_csv:
        metrics.dump_report_csv(report, args.per_rule_csv)
    trained = "n/a" if report.trained_accuracy is None else f"{report.trained_accuracy:.6f}"
    held = "n/a" if report.held_out_accuracy is None else f"{report.held_out_accuracy:.6f}"
    print(
        f"n={report.n_tests} accuracy={report.accuracy:.6f} "
        f"matchedGroundTruth={report.matched_ground_truth_fraction:.6f} "
        f"trained={trained} heldOut={held}"
    )
    return 0


def _cmd_complete(args) -> int:
    ds = io.read_dataset(args.tests)
    out = []
    for i in range(len(ds)):
        sample = ds[i]
        ctx = CompletionContext.from_sample(sample)
        stream = unit_stream(args.seed, "complete", i)
        result = complete_panel(ctx, stream, strategy=args.strategy)
        out.append(ctx.with_completion(result.panel).with_label(sample.label))
    io.write_grvn(io.Dataset.from_samples(out), args.out)
    print(f"completed {len(out)} samples to {args.out}")
    return 0


def _cmd_mem(args) -> int:
    train = io.read_dataset(args.train)
    generated = io.read_dataset(args.generated)
    control = io.read_dataset(args.control) if args.control else None
    index = mem.build_index(train)
    report = mem.memorization_report(generated, index, control)
    metrics.dump_report_json(report, args.report)
    if args.csv:
        metrics.dump_report_csv(report, args.csv)
    print(
        f"indexed={report.n_indexed} generated={report.n_generated} "
        f"sample={report.sample.fraction:.6f} row={report.row.fraction:.6f} "
        f"panel={report.panel.fraction:.6f}"
    )
    return 0


def _format_slot(slot) -> str:
    if slot is None:
        return "  .  "
    return f"{slot.shape}/{slot.size}/{slot.color}"


def _format_row(row) -> list[str]:
    lines = []
    for q in range(3):
        cells = []
        for panel in row.panels:
            trio = [f"{_format_slot(panel.slots[q * 3 + j]):>5}" for j in range(3)]
            cells.append(" ".join(trio))
        lines.append("    " + "  |  ".join(cells))
    return lines


def _cmd_inspect(args) -> int:
    ds = io.read_dataset(args.file)
    if not 0 <= args.index < len(ds):
        raise UsageError(f"index {args.index} out of range (dataset has {len(ds)} samples)")
    sample = ds[args.index]
    label = sample.label.name if sample.label else "(unlabeled)"
    print(f"sample {args.index} of {len(ds)}  label: {label}")
    for r, row in enumerate(sample.rows):
        names = applicable_rules(row).names()
        print(f"  row {r + 1}  applicable: {', '.join(names) if names else '(none)'}")
        for line in _format_row(row):
            print(line)
    return 0


def _cmd_export(args) -> int:
    ds = io.read_dataset(args.file)
    io.write_dataset(ds, args.out, fmt=args.to)
    print(f"exported {len(ds)} samples to {args.out} ({args.to})")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "complete": _cmd_complete,
    "mem": _cmd_mem,
    "inspect": _cmd_inspect,
    "export": _cmd_export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse uses exit 2 for usage errors; the contract reserves 2 for
        # data errors and 1 for usage.  --help passes through as 0.
        return 1 if e.code == 2 else int(e.code or 0)
    try:
        if args.command == "eval":
            handler = (
                _cmd_eval_consistency
                if args.eval_command == "consistency"
                else _cmd_eval_completion
            )
        else:
            handler = _COMMANDS[args.command]
        return handler(args)
    except UsageError as e:
        print(f"genraven: usage error: {e}", file=sys.stderr)
        return 1
    except (
        io.FormatError,
        io.ManifestError,
        metrics.AlignmentError,
        metrics.InvalidTestCaseError,
        InvalidContextError,
        GridShapeError,
        FileNotFoundError,
        IsADirectoryError,
        PermissionError,
    ) as e:
        print(f"genraven: data error: {e}", file=sys.stderr)
        return 2
    except (gen.GenerationError, NoSharedRuleError, AllInfeasibleError) as e:
        print(f"genraven: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
