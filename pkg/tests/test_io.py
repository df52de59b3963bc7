import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from genraven.core import rule_named
from genraven.gen import GenConfig, generate_dataset
from genraven.io import (
    Dataset,
    DatasetManifest,
    FormatError,
    ManifestError,
    ManifestIntegrityError,
    ManifestVersionError,
    read_dataset,
    read_grvn,
    read_jsonl,
    read_manifest,
    write_dataset,
    write_grvn,
    write_jsonl,
    write_manifest,
)

DATA = Path(__file__).parent / "data"

GOLDEN_CONFIG = dict(
    seed=424242,
    samples_per_rule=2,
    rules=tuple(rule_named(n) for n in ("constant-shape", "arith_sum-number", "xor-position")),
    held_out=(),
    split="train",
)

GOLDEN_SHA = {
    "golden.grvn": "35b1ced9a8406934",
    "golden.jsonl": "ee81c28160f1107e",
    "golden.manifest.json": "046e89eea20de96a",
}


def _small_dataset(labeled=True):
    cfg = GenConfig(**GOLDEN_CONFIG)
    ds, manifest = generate_dataset(cfg)
    if not labeled:
        ds = Dataset(ds.grids.copy())
    return ds, manifest


class TestGrvn:
    def test_round_trip_and_size(self, tmp_path):
        ds, _ = _small_dataset()
        path = tmp_path / "d.grvn"
        write_grvn(ds, path)
        assert path.stat().st_size == 16 + 244 * len(ds)
        back = read_grvn(path)
        assert np.array_equal(back.grids, ds.grids)
        assert np.array_equal(back.label_indices, ds.label_indices)

    def test_header_fields(self, tmp_path):
        ds, _ = _small_dataset()
        path = tmp_path / "d.grvn"
        write_grvn(ds, path)
        magic, version, flags, count = struct.unpack_from("<4sHHQ", path.read_bytes())
        assert magic == b"GRVN"
        assert version == 1
        assert flags == 1  # every record labeled
        assert count == len(ds)

    def test_unlabeled_and_mixed(self, tmp_path):
        ds, _ = _small_dataset(labeled=False)
        path = tmp_path / "u.grvn"
        write_grvn(ds, path)
        raw = path.read_bytes()
        assert struct.unpack_from("<H", raw, 6)[0] == 0
        assert raw[16] == 255
        back = read_grvn(path)
        assert (back.label_indices == -1).all()

        labeled, _ = _small_dataset()
        mixed = Dataset(labeled.grids.copy(), np.where(
            np.arange(len(labeled)) == 0, -1, labeled.label_indices
        ).astype(np.int16))
        path2 = tmp_path / "m.grvn"
        write_grvn(mixed, path2)
        back2 = read_grvn(path2)
        assert back2.label_indices[0] == -1
        assert np.array_equal(back2.label_indices[1:], labeled.label_indices[1:])

    def test_empty_dataset(self, tmp_path):
        ds = Dataset(np.empty((0, 3, 9, 9), np.int8))
        path = tmp_path / "e.grvn"
        write_grvn(ds, path)
        assert path.stat().st_size == 16
        assert struct.unpack_from("<H", path.read_bytes(), 6)[0] == 0
        assert len(read_grvn(path)) == 0

    def _valid_bytes(self, tmp_path):
        ds, _ = _small_dataset()
        path = tmp_path / "v.grvn"
        write_grvn(ds, path)
        return bytearray(path.read_bytes()), path

    def test_corrupt_headers_rejected(self, tmp_path):
        raw, path = self._valid_bytes(tmp_path)

        def expect(mutate, offset=None):
            buf = bytearray(raw)
            mutate(buf)
            path.write_bytes(bytes(buf))
            with pytest.raises(FormatError) as ei:
                read_grvn(path)
            if offset is not None:
                assert ei.value.offset == offset

        expect(lambda b: b.__setitem__(slice(0, 4), b"NVRG"), offset=0)
        expect(lambda b: b.__setitem__(4, 9), offset=4)  # bad version
        expect(lambda b: b.__setitem__(6, 4), offset=6)  # reserved flag bit
        expect(lambda b: b.__setitem__(slice(len(b) - 10, len(b)), b""))  # truncated body
        expect(lambda b: b.extend(b"\x00\x00"))  # trailing bytes
        expect(lambda b: b.__setitem__(16, 40))  # label byte out of range
        expect(lambda b: b.__setitem__(6, 0), offset=6)  # flag clear, records labeled
        path.write_bytes(bytes(raw[:10]))
        with pytest.raises(FormatError):
            read_grvn(path)

    def test_flag_set_with_unlabeled_record_rejected(self, tmp_path):
        raw, path = self._valid_bytes(tmp_path)
        raw[16] = 255  # first record loses its label; flag still claims all
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as ei:
            read_grvn(path)
        assert ei.value.offset == 6


class TestJsonl:
    def test_round_trip(self, tmp_path):
        ds, _ = _small_dataset()
        path = tmp_path / "d.jsonl"
        write_jsonl(ds, path)
        back = read_jsonl(path)
        assert np.array_equal(back.grids, ds.grids)
        assert np.array_equal(back.label_indices, ds.label_indices)

    def test_canonical_line_format(self, tmp_path):
        ds, _ = _small_dataset()
        path = tmp_path / "d.jsonl"
        write_jsonl(ds, path)
        first = path.read_text().splitlines()[0]
        expect = json.dumps(
            {"grid": ds.grids[0].tolist(), "rule": ds.label_at(0).name},
            sort_keys=True,
            separators=(",", ":"),
        )
        assert first == expect

    def test_null_rule_and_blank_lines(self, tmp_path):
        ds, _ = _small_dataset(labeled=False)
        path = tmp_path / "u.jsonl"
        write_jsonl(ds, path)
        assert '"rule":null' in path.read_text().splitlines()[0]
        spaced = tmp_path / "s.jsonl"
        spaced.write_text("\n" + path.read_text() + "\n\n")
        back = read_jsonl(spaced)
        assert len(back) == len(ds)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text("")
        assert len(read_jsonl(path)) == 0

    @pytest.mark.parametrize(
        "line,fragment",
        [
            ("{not json", "invalid JSON"),
            ('["grid"]', "must be an object"),
            ('{"rule":null}', "must be an object with a 'grid' field"),
            ('{"grid":[[],[],[]],"rule":null}', "3x9x9"),
            ('{"grid":%s,"rule":null}' % json.dumps([[[0] * 9] * 9] * 2), "3x9x9"),
            ('{"grid":%s,"rule":null}' % json.dumps([[[0.5] * 9] * 9] * 3), "not an integer"),
            ('{"grid":%s,"rule":null}' % json.dumps([[[True] * 9] * 9] * 3), "not an integer"),
            ('{"grid":%s,"rule":null}' % json.dumps([[[400] * 9] * 9] * 3), "outside"),
            ('{"grid":%s,"rule":"no-such"}' % json.dumps([[[0] * 9] * 9] * 3), "unknown rule"),
            ('{"grid":%s,"rule":7}' % json.dumps([[[0] * 9] * 9] * 3), "must be a string or null"),
        ],
    )
    def test_bad_records_rejected(self, tmp_path, line, fragment):
        path = tmp_path / "bad.jsonl"
        good = json.dumps({"grid": [[[-1] * 9] * 9] * 3, "rule": None})
        path.write_text(good + "\n" + line + "\n")
        with pytest.raises(FormatError) as ei:
            read_jsonl(path)
        assert fragment in str(ei.value)
        assert ei.value.offset == 2  # line number, 1-based


class TestDispatchAndSniffing:
    def test_write_read_by_format(self, tmp_path):
        ds, _ = _small_dataset()
        for fmt, name in (("grvn", "a.bin"), ("jsonl", "b.txt")):
            path = tmp_path / name
            write_dataset(ds, path, fmt=fmt)
            back = read_dataset(path, fmt=fmt)
            assert np.array_equal(back.grids, ds.grids)

    def test_sniffing(self, tmp_path):
        ds, _ = _small_dataset()
        g, j = tmp_path / "x.dat", tmp_path / "y.dat"
        write_dataset(ds, g, fmt="grvn")
        write_dataset(ds, j, fmt="jsonl")
        assert np.array_equal(read_dataset(g).grids, ds.grids)
        assert np.array_equal(read_dataset(j).grids, ds.grids)

    def test_unknown_format(self, tmp_path):
        ds, _ = _small_dataset()
        with pytest.raises(ValueError):
            write_dataset(ds, tmp_path / "z", fmt="csv")
        (tmp_path / "z").write_text("")
        with pytest.raises(ValueError):
            read_dataset(tmp_path / "z", fmt="csv")


class TestGoldenFiles:
    def test_stored_bytes_match_pins(self):
        for name, prefix in GOLDEN_SHA.items():
            digest = hashlib.sha256((DATA / name).read_bytes()).hexdigest()
            assert digest.startswith(prefix), name

    def test_regeneration_reproduces_golden_bytes(self, tmp_path):
        ds, manifest = _small_dataset()
        write_grvn(ds, tmp_path / "g.grvn")
        write_jsonl(ds, tmp_path / "g.jsonl")
        write_manifest(manifest, tmp_path / "g.manifest.json")
        assert (tmp_path / "g.grvn").read_bytes() == (DATA / "golden.grvn").read_bytes()
        assert (tmp_path / "g.jsonl").read_bytes() == (DATA / "golden.jsonl").read_bytes()
        assert (tmp_path / "g.manifest.json").read_bytes() == (
            DATA / "golden.manifest.json"
        ).read_bytes()

    def test_golden_files_parse(self):
        ds = read_dataset(DATA / "golden.grvn")
        assert len(ds) == 6
        assert np.array_equal(read_dataset(DATA / "golden.jsonl").grids, ds.grids)
        manifest = read_manifest(DATA / "golden.manifest.json")
        assert manifest.seed == 424242
        assert manifest.split == "train"
        assert manifest.samples_per_rule == 2


class TestManifest:
    def _manifest(self):
        _, manifest = _small_dataset()
        return manifest

    def test_round_trip(self, tmp_path):
        m = self._manifest()
        path = tmp_path / "m.json"
        write_manifest(m, path)
        assert read_manifest(path) == m
        text = path.read_text()
        assert text.endswith("\n")
        assert json.loads(text) == m.to_dict()
        assert list(json.loads(text)) == sorted(json.loads(text))

    def test_dict_contents(self):
        d = self._manifest().to_dict()
        assert d["formatVersion"] == 1
        assert d["purityPolicy"] == "all-dimensions"
        assert d["normalization"] == {"mean": [1.5, 2.5, 2.5], "std": [2.5, 3.5, 3.5]}
        assert len(d["ruleInventory"]) == 40
        assert "counter" in d["rngScheme"] or d["rngScheme"]

    def test_version_rejected(self):
        d = self._manifest().to_dict()
        d["formatVersion"] = 2
        with pytest.raises(ManifestVersionError):
            DatasetManifest.from_dict(d)

    def test_digest_mismatch_rejected(self):
        d = self._manifest().to_dict()
        d["inventoryDigest"] = "0" * 16
        with pytest.raises(ManifestIntegrityError):
            DatasetManifest.from_dict(d)

    def test_tampered_inventory_rejected(self):
        d = self._manifest().to_dict()
        d["ruleInventory"] = list(reversed(d["ruleInventory"]))
        with pytest.raises(ManifestIntegrityError):
            DatasetManifest.from_dict(d)

    def test_missing_field_rejected(self):
        d = self._manifest().to_dict()
        del d["samplesPerRule"]
        with pytest.raises(ManifestError) as ei:
            DatasetManifest.from_dict(d)
        assert "samplesPerRule" in str(ei.value)

    def test_unreadable_files_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ManifestError):
            read_manifest(bad)
        bad.write_text("[1, 2]")
        with pytest.raises(ManifestError):
            read_manifest(bad)


class TestDataset:
    def test_from_samples_round_trip(self):
        ds, _ = _small_dataset()
        samples = list(ds)
        rebuilt = Dataset.from_samples(samples)
        assert np.array_equal(rebuilt.grids, ds.grids)
        assert np.array_equal(rebuilt.label_indices, ds.label_indices)

    def test_indexing_and_labels(self):
        ds, _ = _small_dataset()
        sample = ds[0]
        assert sample.label is ds.label_at(0)
        assert ds.labels[0] is sample.label
        assert ds.all_labeled

    def test_slicing_returns_dataset(self):
        ds, _ = _small_dataset()
        part = ds[2:5]
        assert isinstance(part, Dataset)
        assert len(part) == 3
        assert np.array_equal(part.grids, ds.grids[2:5])
        before = int(ds.grids[2, 0, 0, 0])
        part.grids[0, 0, 0, 0] = before + 1  # copies, not views
        assert int(ds.grids[2, 0, 0, 0]) == before

    def test_empty_not_all_labeled(self):
        ds = Dataset(np.empty((0, 3, 9, 9), np.int8))
        assert not ds.all_labeled
        assert len(ds) == 0

    def test_validation(self):
        with pytest.raises(FormatError):
            Dataset(np.zeros((2, 3, 9, 8), np.int8))
        with pytest.raises(FormatError):
            Dataset(np.zeros((2, 3, 9, 9), np.float64))
        with pytest.raises(FormatError):
            Dataset(np.zeros((2, 3, 9, 9), np.int8), np.array([0], np.int16))
        with pytest.raises(FormatError):
            Dataset(np.zeros((2, 3, 9, 9), np.int8), np.array([0, 40], np.int16))
        big = np.zeros((1, 3, 9, 9), np.int64)
        big[0, 0, 0, 0] = 300
        with pytest.raises(FormatError):
            Dataset(big)

    def test_wide_dtype_narrowed(self):
        ds = Dataset(np.full((1, 3, 9, 9), -1, np.int64))
        assert ds.grids.dtype == np.int8


@settings(max_examples=25, deadline=None)
@given(
    grids=arrays(np.int8, (3, 3, 9, 9)),
    labels=st.lists(st.integers(-1, 39), min_size=3, max_size=3),
)
def test_grvn_round_trips_arbitrary_bytes(tmp_path_factory, grids, labels):
    ds = Dataset(grids, np.asarray(labels, np.int16))
    path = tmp_path_factory.mktemp("h") / "h.grvn"
    write_grvn(ds, path)
    back = read_grvn(path)
    assert np.array_equal(back.grids, ds.grids)
    assert np.array_equal(back.label_indices, ds.label_indices)


@settings(max_examples=25, deadline=None)
@given(
    grids=arrays(np.int8, (2, 3, 9, 9)),
    labels=st.lists(st.integers(-1, 39), min_size=2, max_size=2),
)
def test_jsonl_round_trips_arbitrary_bytes(tmp_path_factory, grids, labels):
    ds = Dataset(grids, np.asarray(labels, np.int16))
    path = tmp_path_factory.mktemp("h") / "h.jsonl"
    write_jsonl(ds, path)
    back = read_jsonl(path)
    assert np.array_equal(back.grids, ds.grids)
    assert np.array_equal(back.label_indices, ds.label_indices)
