"""Corpus ingestion and seed-reproducible stratified splitting.

A corpus is a directory with one subdirectory per class. Ingestion hashes
every image into a Manifest; splitting shuffles each class with a PCG64
generator and deals floor-based counts per split, remainder to train.

Manifest CSV format: a `# pipeline-manifest v1` header line carrying the
seed, ratios and PRNG name, then `path,label,split,sha256` rows. Relative
paths are interpreted relative to the CSV's own directory.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

MANIFEST_HEADER = "# pipeline-manifest v1"
_PRNG_NAME = "pcg64"

IMAGE_EXTENSIONS = {".png", ".pgm", ".jpg", ".jpeg", ".bmp"}

SPLITS = ("train", "val", "test")
UNASSIGNED = "unassigned"


class ClassLabel(IntEnum):
    """The four diagnostic classes, with a stable 0-3 encoding."""

    Normal = 0
    LungOpacity = 1
    Covid19 = 2
    ViralPneumonia = 3


def _normalize_class_name(name: str) -> str:
    return name.lower().replace("-", "").replace("_", "").replace(" ", "")

# Accepts the directory spellings found in public releases of this corpus.
_CLASS_ALIASES = {
    "normal": ClassLabel.Normal,
    "lungopacity": ClassLabel.LungOpacity,
    "covid": ClassLabel.Covid19,
    "covid19": ClassLabel.Covid19,
    "viralpneumonia": ClassLabel.ViralPneumonia,
}


def class_from_name(name: str) -> ClassLabel:
    """Map a directory or CLI name to its ClassLabel, case-insensitively."""
    key = _normalize_class_name(name)
    if key not in _CLASS_ALIASES:
        raise DataError(f"unknown class name: {name!r}")
    return _CLASS_ALIASES[key]


@dataclass(frozen=True)
class SampleRecord:
    path: Path
    label: ClassLabel
    split: str = UNASSIGNED
    sha256: str = ""


@dataclass(frozen=True)
class Manifest:
    records: tuple[SampleRecord, ...]
    seed: int | None = None
    ratios: tuple[float, float, float] | None = None

    @property
    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {label: 0 for label in ClassLabel}
        for rec in self.records:
            counts[rec.label] += 1
        return counts

    def __len__(self) -> int:
        return len(self.records)


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ingest(root: str | Path) -> Manifest:
    """Catalog a class-per-directory image corpus into an unsplit Manifest.

    Every class must be present and non-empty; an unrecognized
    subdirectory or an unreadable file aborts ingestion.
    """
    root = Path(root).resolve()
    if not root.is_dir():
        raise DataError(f"corpus root is not a directory: {root}")

    by_class: dict[ClassLabel, Path] = {}
    for entry in sorted(root.iterdir()):
        if not entry.is_dir() or entry.name.startswith("."):
            continue
        key = _normalize_class_name(entry.name)
        if key not in _CLASS_ALIASES:
            raise DataError(f"unknown class subdirectory: {entry.name!r}")
        label = _CLASS_ALIASES[key]
        if label in by_class:
            raise DataError(
                f"duplicate directories for class {label.name}: "
                f"{by_class[label].name!r} and {entry.name!r}"
            )
        by_class[label] = entry

    missing = [label.name for label in ClassLabel if label not in by_class]
    if missing:
        raise DataError(f"missing class subdirectories: {', '.join(missing)}")

    records: list[SampleRecord] = []
    for label in ClassLabel:
        files = sorted(
            p
            for p in by_class[label].iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
        )
        if not files:
            raise DataError(f"class {by_class[label].name!r} contains no image files")
        for path in files:
            try:
                digest = sha256_file(path)
            except OSError as exc:
                raise DataError(f"unreadable file: {path} ({exc})") from exc
            records.append(SampleRecord(path=path, label=label, sha256=digest))
    return Manifest(records=tuple(records))


def split(
    manifest: Manifest,
    ratios: tuple[float, float, float],
    seed: int,
) -> Manifest:
    """Assign train/val/test per class: seeded shuffle, floor counts,
    remainder to train. Identical (manifest, ratios, seed) reproduce the
    assignment exactly.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios} (sum {sum(ratios)})")
    if seed < 0:
        raise ValueError(f"seed must be unsigned, got {seed}")

    rng = np.random.Generator(np.random.PCG64(seed))
    assigned: dict[int, str] = {}
    for label in ClassLabel:
        indices = [i for i, rec in enumerate(manifest.records) if rec.label == label]
        n = len(indices)
        counts = [int(np.floor(r * n)) for r in ratios]
        counts[0] += n - sum(counts)
        for r, c in zip(ratios, counts):
            if r > 0 and c < 1:
                raise DataError(
                    f"class {label.name} has {n} samples, too few to land one "
                    f"in every nonzero split at ratios {ratios}"
                )
        order = rng.permutation(n)
        shuffled = [indices[j] for j in order]
        offset = 0
        for which, c in zip(SPLITS, counts):
            for idx in shuffled[offset : offset + c]:
                assigned[idx] = which
            offset += c

    records = tuple(
        replace(rec, split=assigned[i]) for i, rec in enumerate(manifest.records)
    )
    return Manifest(records=records, seed=int(seed), ratios=ratios)


def filter_split(manifest: Manifest, which: str) -> list[SampleRecord]:
    """Records with the given split assignment, manifest order preserved."""
    if which not in SPLITS:
        raise ValueError(f"unknown split {which!r}, expected one of {SPLITS}")
    if any(rec.split == UNASSIGNED for rec in manifest.records):
        raise DataError("manifest has unassigned records; run split first")
    return [rec for rec in manifest.records if rec.split == which]


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write the manifest CSV; paths under the CSV's directory go relative."""
    path = Path(path)
    base = path.resolve().parent
    seed = "none" if manifest.seed is None else str(manifest.seed)
    ratios = (
        "none"
        if manifest.ratios is None
        else ",".join(repr(r) for r in manifest.ratios)
    )
    with open(path, "w", newline="") as fh:
        fh.write(f"{MANIFEST_HEADER} seed={seed} ratios={ratios} prng={_PRNG_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(["path", "label", "split", "sha256"])
        for rec in manifest.records:
            p = rec.path.resolve()
            try:
                rendered = str(p.relative_to(base))
            except ValueError:
                rendered = str(p)
            writer.writerow([rendered, rec.label.name, rec.split, rec.sha256])


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    base = path.resolve().parent
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(MANIFEST_HEADER):
            raise FormatError(f"{path}: missing '{MANIFEST_HEADER}' header")
        fields = dict(
            part.split("=", 1) for part in header[len(MANIFEST_HEADER) :].split() if "=" in part
        )
        seed = None if fields.get("seed", "none") == "none" else int(fields["seed"])
        ratios = None
        if fields.get("ratios", "none") != "none":
            parsed = tuple(float(x) for x in fields["ratios"].split(","))
            if len(parsed) != 3:
                raise FormatError(f"{path}: malformed ratios in header")
            ratios = parsed
        reader = csv.reader(fh)
        columns = next(reader, None)
        if columns != ["path", "label", "split", "sha256"]:
            raise FormatError(f"{path}: unexpected manifest columns {columns}")
        records = []
        seen: set[str] = set()
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}: malformed manifest row {row}")
            raw, label_name, which, digest = row
            if raw in seen:
                raise FormatError(f"{path}: duplicate path {raw!r}")
            seen.add(raw)
            if which not in SPLITS and which != UNASSIGNED:
                raise FormatError(f"{path}: unknown split {which!r}")
            p = Path(raw)
            if not p.is_absolute():
                p = base / p
            try:
                label = ClassLabel[label_name]
            except KeyError:
                raise FormatError(f"{path}: unknown label {label_name!r}") from None
            records.append(
                SampleRecord(path=p, label=label, split=which, sha256=digest)
            )
    return Manifest(records=tuple(records), seed=seed, ratios=ratios)
