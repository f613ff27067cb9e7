"""Manifests, feature tables and the feature CSV format."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .features import FEATURE_SCHEMA_VERSION, extract_features, feature_columns
from .image_core import load_image

__all__ = [
    "LABELS",
    "ManifestEntry",
    "SchemaError",
    "read_manifest",
    "FeatureTable",
    "extract_table",
    "write_feature_csv",
    "read_feature_csv",
]

LABELS = {"good": 1, "bad": 0}
META_COLUMNS = ("id", "subject", "label")
SCHEMA_LINE = f"# fundusqa-features schema={FEATURE_SCHEMA_VERSION}"


class SchemaError(ValueError):
    """A feature CSV does not match the extractor's column layout."""


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # resolved image path
    subject: str
    label: str | None  # "good", "bad" or None when unlabeled
    id: str = ""  # path as written in the manifest


def read_manifest(path) -> list:
    """Read a CSV (``path,subject,label``) or JSON (list of objects) manifest.

    Relative image paths are resolved against the manifest's directory.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        records = json.loads(text)
    else:
        records = list(csv.DictReader(io.StringIO(text)))
    entries = []
    seen = set()
    for i, rec in enumerate(records, 1):
        img = (rec.get("path") or "").strip()
        subject = str(rec.get("subject") or "").strip()
        label = (rec.get("label") or "").strip().lower() or None
        if not img:
            raise ValueError(f"manifest entry {i}: missing path")
        if not subject:
            raise ValueError(f"manifest entry {i}: missing subject id")
        if label in ("unlabeled", "none"):
            label = None
        if label is not None and label not in LABELS:
            raise ValueError(f"manifest entry {i}: label must be good, bad or empty, got {label!r}")
        resolved = Path(img) if Path(img).is_absolute() else path.parent / img
        key = str(resolved)
        if key in seen:
            raise ValueError(f"manifest entry {i}: duplicate path {img}")
        seen.add(key)
        entries.append(ManifestEntry(key, subject, label, img))
    return entries


@dataclass
class FeatureTable:
    ids: list
    subjects: list
    labels: list  # 1, 0 or None
    columns: tuple
    values: np.ndarray  # (n, len(columns)); NaN rows for failures
    errors: list  # "" when the row succeeded

    def ok(self) -> "FeatureTable":
        keep = [i for i, e in enumerate(self.errors) if not e]
        return self.subset(keep)

    def subset(self, idx) -> "FeatureTable":
        idx = list(idx)
        return FeatureTable(
            [self.ids[i] for i in idx],
            [self.subjects[i] for i in idx],
            [self.labels[i] for i in idx],
            self.columns,
            self.values[idx].reshape(len(idx), len(self.columns)),
            [self.errors[i] for i in idx],
        )

    def matrix(self, columns) -> np.ndarray:
        pos = [self.columns.index(c) for c in columns]
        return self.values[:, pos]

    def __len__(self) -> int:
        return len(self.ids)


def _extract_one(args):
    path, config = args
    try:
        feats = extract_features(load_image(path), config)
        return [feats[c] for c in feature_columns(config)], ""
    except Exception as exc:  # recorded per row; the batch continues
        return None, f"{type(exc).__name__}: {exc}"


def extract_table(entries, config: Config = Config()) -> FeatureTable:
    """Extract features for every manifest entry, preserving manifest order."""
    cols = feature_columns(config)
    jobs = [(e.path, config) for e in entries]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]
    values = np.full((len(entries), len(cols)), np.nan)
    errors = []
    for i, (row, err) in enumerate(results):
        if row is not None:
            values[i] = row
        errors.append(err)
    ids = [e.id or e.path for e in entries]
    return FeatureTable(
        ids,
        [e.subject for e in entries],
        [LABELS[e.label] if e.label else None for e in entries],
        cols,
        values,
        errors,
    )


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_feature_csv(table: FeatureTable, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_LINE + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(META_COLUMNS) + list(table.columns) + ["error"])
        for i in range(len(table)):
            label = {1: "good", 0: "bad", None: ""}[table.labels[i]]
            w.writerow(
                [table.ids[i], table.subjects[i], label]
                + [_fmt(v) for v in table.values[i]]
                + [table.errors[i]]
            )


def read_feature_csv(path, config: Config = Config()) -> FeatureTable:
    """Read a feature CSV, insisting on the exact column layout for ``config``."""
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA_LINE:
            raise SchemaError(f"{path}: expected schema line {SCHEMA_LINE!r}, got {first!r}")
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = list(META_COLUMNS) + list(feature_columns(config)) + ["error"]
        if header != expected:
            raise SchemaError(f"{path}: feature columns do not match the extractor layout")
        ids, subjects, labels, rows, errors = [], [], [], [], []
        for rec in reader:
            if len(rec) != len(expected):
                raise SchemaError(f"{path}: row with {len(rec)} fields, expected {len(expected)}")
            ids.append(rec[0])
            subjects.append(rec[1])
            labels.append(LABELS[rec[2]] if rec[2] else None)
            rows.append([float(v) if v else np.nan for v in rec[3:-1]])
            errors.append(rec[-1])
    cols = feature_columns(config)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(cols))
    return FeatureTable(ids, subjects, labels, cols, values, errors)
