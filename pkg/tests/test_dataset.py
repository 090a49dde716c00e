"""Corpus ingest, stratified splitting, and manifest persistence."""
import hashlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxrpipe.dataset import (
    ClassLabel,
    Manifest,
    SampleRecord,
    class_from_name,
    filter_split,
    ingest,
    load_manifest,
    save_manifest,
    split,
)
from cxrpipe.errors import DataError, FormatError


def fake_manifest(counts):
    """Synthetic manifest with the given per-class record counts."""
    records = []
    for label, n in zip(ClassLabel, counts):
        for i in range(n):
            records.append(
                SampleRecord(path=Path(f"/data/{label.name}/{i:04d}.png"),
                             label=label, sha256="0" * 64)
            )
    return Manifest(records=tuple(records))


def split_counts(manifest, label):
    recs = [r for r in manifest.records if r.label == label]
    return {s: sum(1 for r in recs if r.split == s) for s in ("train", "val", "test")}


# -- class names ---------------------------------------------------------------

@pytest.mark.parametrize("name,expected", [
    ("Normal", ClassLabel.Normal),
    ("normal", ClassLabel.Normal),
    ("Lung_Opacity", ClassLabel.LungOpacity),
    ("Lung-Opacity", ClassLabel.LungOpacity),
    ("lungopacity", ClassLabel.LungOpacity),
    ("COVID", ClassLabel.Covid19),
    ("COVID-19", ClassLabel.Covid19),
    ("covid19", ClassLabel.Covid19),
    ("Viral Pneumonia", ClassLabel.ViralPneumonia),
    ("Viral-Pneumonia", ClassLabel.ViralPneumonia),
])
def test_class_aliases(name, expected):
    assert class_from_name(name) == expected


def test_class_from_name_rejects_unknown():
    with pytest.raises(DataError, match="Bacterial"):
        class_from_name("Bacterial")


# -- ingest ----------------------------------------------------------------------

def test_ingest_counts(corpus_dir):
    manifest = ingest(corpus_dir)
    assert len(manifest) == 24
    assert all(n == 6 for n in manifest.class_counts.values())
    for rec in manifest.records:
        assert rec.path.exists()
        assert len(rec.sha256) == 64


def test_ingest_checksums_match_files(corpus_dir):
    manifest = ingest(corpus_dir)
    rec = manifest.records[0]
    assert rec.sha256 == hashlib.sha256(rec.path.read_bytes()).hexdigest()


def test_ingest_rejects_unknown_directory(tmp_path, corpus_dir):
    import shutil

    root = tmp_path / "corpus"
    shutil.copytree(corpus_dir, root)
    (root / "Unknown").mkdir()
    with pytest.raises(DataError, match="Unknown"):
        ingest(root)


def test_ingest_rejects_missing_class(tmp_path):
    root = tmp_path / "corpus"
    (root / "Normal").mkdir(parents=True)
    with pytest.raises(DataError, match="missing class"):
        ingest(root)


def test_ingest_rejects_nonexistent_root(tmp_path):
    with pytest.raises(DataError):
        ingest(tmp_path / "nope")


# -- split -------------------------------------------------------------------------

def test_split_exact_division():
    m = split(fake_manifest([10, 10, 10, 10]), (0.8, 0.1, 0.1), seed=0)
    for label in ClassLabel:
        assert split_counts(m, label) == {"train": 8, "val": 1, "test": 1}


def test_split_thousand_per_class():
    m = split(fake_manifest([1000] * 4), (0.8, 0.1, 0.1), seed=1)
    for label in ClassLabel:
        assert split_counts(m, label) == {"train": 800, "val": 100, "test": 100}


def test_split_remainder_goes_to_train():
    m = split(fake_manifest([11, 11, 11, 11]), (0.8, 0.1, 0.1), seed=2)
    for label in ClassLabel:
        assert split_counts(m, label) == {"train": 9, "val": 1, "test": 1}


def test_split_partitions_records():
    m = split(fake_manifest([13, 7, 9, 21]), (0.6, 0.2, 0.2), seed=3)
    parts = [filter_split(m, s) for s in ("train", "val", "test")]
    all_paths = [r.path for part in parts for r in part]
    assert len(all_paths) == len(set(all_paths)) == len(m)


@settings(max_examples=20, deadline=None)
@given(
    counts=st.lists(st.integers(min_value=10, max_value=60), min_size=4, max_size=4),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_split_stratification_bound(counts, seed):
    m = split(fake_manifest(counts), (0.8, 0.1, 0.1), seed=seed)
    for label, n in zip(ClassLabel, counts):
        got = split_counts(m, label)
        assert sum(got.values()) == n
        assert abs(got["val"] - 0.1 * n) <= 1
        assert abs(got["test"] - 0.1 * n) <= 1


def test_split_deterministic():
    base = fake_manifest([25, 30, 17, 40])
    a = split(base, (0.8, 0.1, 0.1), seed=9)
    b = split(base, (0.8, 0.1, 0.1), seed=9)
    assert [r.split for r in a.records] == [r.split for r in b.records]


def test_split_seeds_differ():
    base = fake_manifest([100, 10, 10, 10])
    reference = [r.split for r in split(base, (0.8, 0.1, 0.1), seed=0).records]
    assert any(
        [r.split for r in split(base, (0.8, 0.1, 0.1), seed=s).records] != reference
        for s in range(1, 6)
    )


def test_split_rejects_bad_ratios():
    with pytest.raises(ValueError):
        split(fake_manifest([10] * 4), (0.5, 0.2, 0.2), seed=0)
    with pytest.raises(ValueError):
        split(fake_manifest([10] * 4), (1.2, -0.1, -0.1), seed=0)


def test_split_rejects_too_small_class():
    with pytest.raises(DataError, match="too few"):
        split(fake_manifest([3, 10, 10, 10]), (0.8, 0.1, 0.1), seed=0)


def test_filter_split_requires_assignment():
    with pytest.raises(DataError, match="unassigned"):
        filter_split(fake_manifest([10] * 4), "train")


def test_filter_split_rejects_unknown_name():
    m = split(fake_manifest([10] * 4), (0.8, 0.1, 0.1), seed=0)
    with pytest.raises(ValueError):
        filter_split(m, "holdout")


# -- manifest persistence ---------------------------------------------------------

def test_manifest_round_trip(tmp_path, corpus_dir):
    m = split(ingest(corpus_dir), (0.5, 0.25, 0.25), seed=4)
    path = tmp_path / "manifest.csv"
    save_manifest(m, path)
    back = load_manifest(path)
    assert back.seed == 4
    assert back.ratios == (0.5, 0.25, 0.25)
    assert len(back) == len(m)
    for orig, rec in zip(m.records, back.records):
        assert rec.path.resolve() == orig.path.resolve()
        assert rec.label == orig.label
        assert rec.split == orig.split
        assert rec.sha256 == orig.sha256


def test_manifest_header_line(tmp_path, corpus_dir):
    m = split(ingest(corpus_dir), (0.5, 0.25, 0.25), seed=7)
    path = tmp_path / "m.csv"
    save_manifest(m, path)
    first = path.read_text().splitlines()[0]
    assert first.startswith("# pipeline-manifest v1")
    assert "seed=7" in first
    assert "pcg64" in first


def test_load_manifest_requires_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("path,label,split,sha256\n")
    with pytest.raises(FormatError, match="pipeline-manifest"):
        load_manifest(path)


def test_load_manifest_rejects_unknown_label(tmp_path, corpus_dir):
    m = split(ingest(corpus_dir), (0.5, 0.25, 0.25), seed=0)
    path = tmp_path / "m.csv"
    save_manifest(m, path)
    text = path.read_text().replace(",Normal,", ",Wizard,", 1)
    path.write_text(text)
    with pytest.raises(FormatError, match="Wizard"):
        load_manifest(path)
