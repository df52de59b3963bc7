"""Dataset serialization: GRVN binary files, JSONL, and dataset manifests.

GRVN binary layout (little-endian):

    bytes 0-3   magic "GRVN" (0x47 0x52 0x56 0x4E)
    bytes 4-5   u16 format version (currently 1)
    bytes 6-7   u16 flags; bit0 set when the file is nonempty and every
                record is labeled, all other bits reserved (must be 0)
    bytes 8-15  u64 record count
    then count fixed 244-byte records: 1 label byte (rule index 0..39, or
    255 for unlabeled) followed by the 243 signed int8 grid values in
    (channel, panel, slot) order.

File size is exactly 16 + 244*count; anything else is rejected with the
offending byte offset.  JSONL files hold one object per line:
{"grid": nested 3x9x9 ints in [-128, 127], "rule": name or null}; canonical
lines are json.dumps with sorted keys and compact separators.  Reads are
strict - bad magic, versions, label bytes, rule names, grid shapes, or
out-of-range values raise FormatError rather than repairing.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    RULE_COUNT,
    RULES,
    SAMPLE_SIZE,
    RuleId,
    Sample,
    decode_sample,
    encode_sample,
    inventory_digest,
    rule_named,
)

MAGIC = b"GRVN"
GRVN_VERSION = 1
FLAG_ALL_LABELED = 1
HEADER = struct.Struct("<4sHHQ")
RECORD_BYTES = 1 + SAMPLE_SIZE  # 244

MANIFEST_VERSION = 1
PURITY_POLICY = "all-dimensions"

#: Per-channel normalization statistics recorded in manifests for training
#: consumers.  Informational only; nothing in this package applies them.
NORMALIZATION_MEAN = (1.5, 2.5, 2.5)
NORMALIZATION_STD = (2.5, 3.5, 3.5)

RNG_SCHEME = (
    "splitmix64-counter/v1: each sample draws from a counter stream keyed by "
    "fold(seed, split, ruleIndex, sampleIndex)"
)

PathLike = Union[str, Path]


class FormatError(ValueError):
    """A file does not conform to the format.  ``offset`` is a byte offset
    for binary files, a 1-based line number for JSONL."""

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message if offset is None else f"{message} (at {offset})")
        self.offset = offset


class ManifestError(ValueError):
    pass


class ManifestVersionError(ManifestError):
    """Manifest declares a format version this code does not understand."""


class ManifestIntegrityError(ManifestError):
    """Manifest digest does not match its rule inventory."""


def _as_int8_grids(grids: np.ndarray) -> np.ndarray:
    a = np.asarray(grids)
    if not np.issubdtype(a.dtype, np.integer):
        raise FormatError(f"grids must be integers, got dtype {a.dtype}")
    if a.ndim != 4 or a.shape[1:] != (3, 9, 9):
        raise FormatError(f"grids must have shape (n, 3, 9, 9), got {a.shape}")
    if a.dtype != np.int8:
        if a.size and (a.min() < -128 or a.max() > 127):
            raise FormatError("grid values outside signed-byte range [-128, 127]")
        a = a.astype(np.int8)
    return np.ascontiguousarray(a)


class Dataset(Sequence[Sample]):
    """Samples stored as a stacked (n, 3, 9, 9) int8 array plus labels.

    Behaves as a sequence of Sample (decoded lazily on indexing, with labels
    attached); bulk consumers read ``grids`` and ``label_indices`` directly.
    Label index -1 means unlabeled.
    """

    def __init__(self, grids: np.ndarray, label_indices: Optional[np.ndarray] = None):
        self.grids = _as_int8_grids(grids)
        n = len(self.grids)
        if label_indices is None:
            label_indices = np.full(n, -1, dtype=np.int16)
        lab = np.asarray(label_indices, dtype=np.int16)
        if lab.shape != (n,):
            raise FormatError(f"expected {n} labels, got shape {lab.shape}")
        if lab.size and (lab.min() < -1 or lab.max() >= RULE_COUNT):
            raise FormatError("label index outside -1..39")
        self.label_indices = lab

    @classmethod
    def from_samples(cls, samples: Iterable[Sample]) -> "Dataset":
        grids, labels = [], []
        for s in samples:
            grids.append(encode_sample(s))
            labels.append(s.label.index if s.label is not None else -1)
        if not grids:
            return cls(np.empty((0, 3, 9, 9), np.int8), np.empty(0, np.int16))
        return cls(np.stack(grids), np.asarray(labels, np.int16))

    def __len__(self) -> int:
        return len(self.grids)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Dataset(self.grids[i].copy(), self.label_indices[i].copy())
        i = int(i)
        sample, _ = decode_sample(self.grids[i])
        li = int(self.label_indices[i])
        return sample.with_label(RULES[li] if li >= 0 else None)

    def label_at(self, i: int) -> Optional[RuleId]:
        li = int(self.label_indices[int(i)])
        return RULES[li] if li >= 0 else None

    @property
    def labels(self) -> tuple[Optional[RuleId], ...]:
        return tuple(self.label_at(i) for i in range(len(self)))

    @property
    def all_labeled(self) -> bool:
        return len(self) > 0 and bool((self.label_indices >= 0).all())


def write_grvn(ds: Dataset, path: PathLike) -> None:
    """Write a dataset as a GRVN binary file."""
    n = len(ds)
    flags = FLAG_ALL_LABELED if ds.all_labeled else 0
    rec = np.empty((n, RECORD_BYTES), np.uint8)
    lab = ds.label_indices.astype(np.int64)
    rec[:, 0] = np.where(lab < 0, 255, lab).astype(np.uint8)
    rec[:, 1:] = ds.grids.reshape(n, SAMPLE_SIZE).view(np.uint8)
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, GRVN_VERSION, flags, n))
        f.write(rec.tobytes())


def read_grvn(path: PathLike) -> Dataset:
    """Read a GRVN binary file, validating structure byte for byte."""
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise FormatError("truncated header", offset=len(data))
    magic, version, flags, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != GRVN_VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    if flags & ~FLAG_ALL_LABELED:
        raise FormatError(f"reserved flag bits set: {flags:#06x}", offset=6)
    expected = HEADER.size + RECORD_BYTES * count
    if len(data) != expected:
        kind = "truncated file" if len(data) < expected else "trailing bytes"
        raise FormatError(
            f"{kind}: {count} records need {expected} bytes, file has {len(data)}",
            offset=min(len(data), expected),
        )
    body = np.frombuffer(data, np.uint8, offset=HEADER.size).reshape(count, RECORD_BYTES)
    raw_labels = body[:, 0].astype(np.int16)
    bad = np.nonzero((raw_labels >= RULE_COUNT) & (raw_labels != 255))[0]
    if bad.size:
        i = int(bad[0])
        raise FormatError(
            f"record {i}: label byte {int(raw_labels[i])} is not a rule index or 255",
            offset=HEADER.size + RECORD_BYTES * i,
        )
    labels = np.where(raw_labels == 255, np.int16(-1), raw_labels)
    all_labeled = count > 0 and bool((labels >= 0).all())
    if bool(flags & FLAG_ALL_LABELED) != all_labeled:
        raise FormatError(
            f"flag bit0 is {flags & 1} but all-labeled is {all_labeled}", offset=6
        )
    grids = body[:, 1:].view(np.int8).reshape(count, 3, 9, 9).copy()
    return Dataset(grids, labels)


def _canonical_record(grid_ints: list, rule: Optional[str]) -> str:
    return json.dumps({"grid": grid_ints, "rule": rule}, sort_keys=True, separators=(",", ":"))


def write_jsonl(ds: Dataset, path: PathLike) -> None:
    """Write a dataset as JSONL, one canonical record per line."""
    with open(path, "w", encoding="utf-8") as f:
        for i in range(len(ds)):
            label = ds.label_at(i)
            f.write(_canonical_record(ds.grids[i].tolist(), label.name if label else None))
            f.write("\n")


def _check_grid_json(grid, lineno: int) -> None:
    if not isinstance(grid, list) or len(grid) != 3:
        raise FormatError("grid must be a 3x9x9 nested list", offset=lineno)
    for ch in grid:
        if not isinstance(ch, list) or len(ch) != 9:
            raise FormatError("grid must be a 3x9x9 nested list", offset=lineno)
        for panel in ch:
            if not isinstance(panel, list) or len(panel) != 9:
                raise FormatError("grid must be a 3x9x9 nested list", offset=lineno)
            for v in panel:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise FormatError(f"grid value {v!r} is not an integer", offset=lineno)
                if not -128 <= v <= 127:
                    raise FormatError(f"grid value {v} outside [-128, 127]", offset=lineno)


def read_jsonl(path: PathLike) -> Dataset:
    """Read a JSONL dataset file, validating every record."""
    grids: list[list] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e.msg}", offset=lineno) from None
            if not isinstance(obj, dict) or "grid" not in obj:
                raise FormatError("record must be an object with a 'grid' field", offset=lineno)
            _check_grid_json(obj["grid"], lineno)
            rule = obj.get("rule")
            if rule is None:
                labels.append(-1)
            elif isinstance(rule, str):
                try:
                    labels.append(rule_named(rule).index)
                except KeyError:
                    raise FormatError(f"unknown rule name {rule!r}", offset=lineno) from None
            else:
                raise FormatError("'rule' must be a string or null", offset=lineno)
            grids.append(obj["grid"])
    if not grids:
        return Dataset(np.empty((0, 3, 9, 9), np.int8), np.empty(0, np.int16))
    return Dataset(np.asarray(grids, np.int64), np.asarray(labels, np.int16))


def write_dataset(ds: Dataset, path: PathLike, fmt: str = "grvn") -> None:
    if fmt == "grvn":
        write_grvn(ds, path)
    elif fmt == "jsonl":
        write_jsonl(ds, path)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


def read_dataset(path: PathLike, fmt: Optional[str] = None) -> Dataset:
    """Read a dataset file; sniffs the GRVN magic when fmt is not given."""
    if fmt is None:
        with open(path, "rb") as f:
            fmt = "grvn" if f.read(4) == MAGIC else "jsonl"
    if fmt == "grvn":
        return read_grvn(path)
    if fmt == "jsonl":
        return read_jsonl(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


@dataclass(frozen=True)
class DatasetManifest:
    """Sidecar metadata that pins how a dataset file was produced."""

    seed: int
    rules: tuple[str, ...]
    held_out: tuple[str, ...]
    split: str
    samples_per_rule: int
    rule_inventory: tuple[str, ...] = tuple(r.name for r in RULES)
    format_version: int = MANIFEST_VERSION
    purity_policy: str = PURITY_POLICY
    rng_scheme: str = RNG_SCHEME

    @property
    def inventory_digest(self) -> str:
        return inventory_digest(self.rule_inventory)

    def to_dict(self) -> dict:
        return {
            "formatVersion": self.format_version,
            "seed": self.seed,
            "ruleInventory": list(self.rule_inventory),
            "inventoryDigest": self.inventory_digest,
            "heldOut": list(self.held_out),
            "rules": list(self.rules),
            "split": self.split,
            "samplesPerRule": self.samples_per_rule,
            "purityPolicy": self.purity_policy,
            "normalization": {
                "mean": list(NORMALIZATION_MEAN),
                "std": list(NORMALIZATION_STD),
            },
            "rngScheme": self.rng_scheme,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        try:
            version = d["formatVersion"]
            if version != MANIFEST_VERSION:
                raise ManifestVersionError(f"unsupported manifest version {version!r}")
            inventory = tuple(d["ruleInventory"])
            declared = d["inventoryDigest"]
            actual = inventory_digest(inventory)
            if declared != actual:
                raise ManifestIntegrityError(
                    f"inventory digest mismatch: declared {declared!r}, computed {actual!r}"
                )
            return cls(
                seed=int(d["seed"]),
                rules=tuple(d["rules"]),
                held_out=tuple(d["heldOut"]),
                split=str(d["split"]),
                samples_per_rule=int(d["samplesPerRule"]),
                rule_inventory=inventory,
                format_version=version,
                purity_policy=str(d["purityPolicy"]),
                rng_scheme=str(d["rngScheme"]),
            )
        except KeyError as e:
            raise ManifestError(f"manifest missing field {e.args[0]!r}") from None


def write_manifest(manifest: DatasetManifest, path: PathLike) -> None:
    """Write a manifest as canonical JSON (sorted keys, 2-space indent)."""
    text = json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_manifest(path: PathLike) -> DatasetManifest:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON: {e.msg}") from None
    if not isinstance(d, dict):
        raise ManifestError("manifest must be a JSON object")
    return DatasetManifest.from_dict(d)
