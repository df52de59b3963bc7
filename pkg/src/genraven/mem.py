"""Multi-level memorization measurement.

An index holds exact byte keys for a reference dataset at five granularities:
whole samples, rows, panels, and single-channel projections of rows and
panels.  Querying a generated dataset against the index reports, per level,
the fraction of generated units whose key appears in the reference - exact
match only, no similarity.  Channel projections get per-channel breakdowns
(shape / size / color) alongside the pooled counts.

Keys are contiguous byte slices of the canonical int8 encoding, so indexing
is a handful of array transposes plus one tobytes() per level.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .io import Dataset

CHANNEL_NAMES = ("shape", "size", "color")


class Level(Enum):
    SAMPLE = "sample"
    ROW = "row"
    PANEL = "panel"
    ATTR_ROW = "attr_row"
    ATTR_PANEL = "attr_panel"


GridSource = Union[Dataset, np.ndarray]


def _grids(data: GridSource) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.grids
    a = np.asarray(data)
    if not np.issubdtype(a.dtype, np.integer):
        raise ValueError(f"grids must be integers, got dtype {a.dtype}")
    if a.ndim != 4 or a.shape[1:] != (3, 9, 9):
        raise ValueError(f"grids must have shape (n, 3, 9, 9), got {a.shape}")
    if a.dtype != np.int8:
        if a.size and (a.min() < -128 or a.max() > 127):
            raise ValueError("grid values outside signed-byte range [-128, 127]")
        a = a.astype(np.int8)
    return np.ascontiguousarray(a)


def _slices(a: np.ndarray, unit_bytes: int) -> list[bytes]:
    buf = np.ascontiguousarray(a).tobytes()
    return [buf[i : i + unit_bytes] for i in range(0, len(buf), unit_bytes)]


def sample_keys(grids: np.ndarray) -> list[bytes]:
    """One 243-byte key per sample."""
    return _slices(grids, 243)


def row_keys(grids: np.ndarray) -> list[bytes]:
    """Three 81-byte keys per sample: each row's (channel, panel, slot) block."""
    n = len(grids)
    a = grids.reshape(n, 3, 3, 3, 9).transpose(0, 2, 1, 3, 4)
    return _slices(a, 81)


def panel_keys(grids: np.ndarray) -> list[bytes]:
    """Nine 27-byte keys per sample: each panel's (channel, slot) block."""
    a = grids.transpose(0, 2, 1, 3)
    return _slices(a, 27)


def attr_row_keys(grids: np.ndarray, channel: int) -> list[bytes]:
    """Three 27-byte keys per sample: one channel of each row."""
    n = len(grids)
    a = grids[:, channel].reshape(n, 3, 3, 9)
    return _slices(a, 27)


def attr_panel_keys(grids: np.ndarray, channel: int) -> list[bytes]:
    """Nine 9-byte keys per sample: one channel of each panel."""
    a = grids[:, channel]
    return _slices(a, 9)


@dataclass
class MemorizationIndex:
    """Byte-key sets for one reference dataset."""

    n_samples: int
    sample: set
    row: set
    panel: set
    attr_row: tuple[set, set, set]
    attr_panel: tuple[set, set, set]


def build_index(data: GridSource) -> MemorizationIndex:
    """Index a reference dataset at all five levels."""
    g = _grids(data)
    return MemorizationIndex(
        n_samples=len(g),
        sample=set(sample_keys(g)),
        row=set(row_keys(g)),
        panel=set(panel_keys(g)),
        attr_row=tuple(set(attr_row_keys(g, c)) for c in range(3)),
        attr_panel=tuple(set(attr_panel_keys(g, c)) for c in range(3)),
    )


@dataclass(frozen=True)
class LevelStats:
    matched: int
    total: int

    @property
    def fraction(self) -> float:
        return self.matched / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {"matched": self.matched, "total": self.total, "fraction": self.fraction}


def _stats(keys: list[bytes], index_set: set) -> LevelStats:
    return LevelStats(sum(map(index_set.__contains__, keys)), len(keys))


def _merge(stats: list[LevelStats]) -> LevelStats:
    return LevelStats(sum(s.matched for s in stats), sum(s.total for s in stats))


@dataclass(frozen=True)
class MemorizationReport:
    """Per-level match fractions of a generated set against an index.

    ``control`` optionally carries the same measurement for a reference set
    drawn from the same distribution but never indexed - the coincidental
    match rate to subtract mentally when reading the main numbers.
    """

    n_generated: int
    n_indexed: int
    sample: LevelStats
    row: LevelStats
    panel: LevelStats
    attr_row: dict[str, LevelStats]
    attr_panel: dict[str, LevelStats]
    attr_row_pooled: LevelStats
    attr_panel_pooled: LevelStats
    control: Optional["MemorizationReport"] = None

    def level(self, level: Level) -> LevelStats:
        return {
            Level.SAMPLE: self.sample,
            Level.ROW: self.row,
            Level.PANEL: self.panel,
            Level.ATTR_ROW: self.attr_row_pooled,
            Level.ATTR_PANEL: self.attr_panel_pooled,
        }[level]

    def to_dict(self) -> dict:
        d = {
            "schemaVersion": 1,
            "kind": "memorization",
            "nGenerated": self.n_generated,
            "nIndexed": self.n_indexed,
            "levels": {
                "sample": self.sample.to_dict(),
                "row": self.row.to_dict(),
                "panel": self.panel.to_dict(),
                "attrRow": {
                    "pooled": self.attr_row_pooled.to_dict(),
                    **{ch: self.attr_row[ch].to_dict() for ch in CHANNEL_NAMES},
                },
                "attrPanel": {
                    "pooled": self.attr_panel_pooled.to_dict(),
                    **{ch: self.attr_panel[ch].to_dict() for ch in CHANNEL_NAMES},
                },
            },
            "control": self.control.to_dict() if self.control else None,
        }
        return d

    def to_csv_rows(self) -> list[list]:
        rows = [["level", "channel", "matched", "total", "fraction", "control_fraction"]]

        def ctrl(get) -> str:
            if self.control is None:
                return ""
            return repr(get(self.control).fraction)

        def add(level: str, channel: str, stats: LevelStats, get) -> None:
            rows.append([level, channel, stats.matched, stats.total, repr(stats.fraction), ctrl(get)])

        add("sample", "", self.sample, lambda r: r.sample)
        add("row", "", self.row, lambda r: r.row)
        add("panel", "", self.panel, lambda r: r.panel)
        add("attr_row", "pooled", self.attr_row_pooled, lambda r: r.attr_row_pooled)
        for ch in CHANNEL_NAMES:
            add("attr_row", ch, self.attr_row[ch], lambda r, ch=ch: r.attr_row[ch])
        add("attr_panel", "pooled", self.attr_panel_pooled, lambda r: r.attr_panel_pooled)
        for ch in CHANNEL_NAMES:
            add("attr_panel", ch, self.attr_panel[ch], lambda r, ch=ch: r.attr_panel[ch])
        return rows


def memorization_report(
    generated: GridSource,
    index: MemorizationIndex,
    control: Optional[GridSource] = None,
) -> MemorizationReport:
    """Measure how much of ``generated`` appears verbatim in the index."""
    g = _grids(generated)
    ar = {ch: _stats(attr_row_keys(g, c), index.attr_row[c]) for c, ch in enumerate(CHANNEL_NAMES)}
    ap = {ch: _stats(attr_panel_keys(g, c), index.attr_panel[c]) for c, ch in enumerate(CHANNEL_NAMES)}
    return MemorizationReport(
        n_generated=len(g),
        n_indexed=index.n_samples,
        sample=_stats(sample_keys(g), index.sample),
        row=_stats(row_keys(g), index.row),
        panel=_stats(panel_keys(g), index.panel),
        attr_row=ar,
        attr_panel=ap,
        attr_row_pooled=_merge(list(ar.values())),
        attr_panel_pooled=_merge(list(ap.values())),
        control=memorization_report(control, index) if control is not None else None,
    )
