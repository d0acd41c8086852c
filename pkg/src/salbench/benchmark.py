"""Dataset index, validation and the dataset-analysis statistics.

An index is a CSV file with header ``id,rgb,thermal,gt,split,tags``.
``tags`` holds semicolon-separated challenge codes and may be empty;
image paths are relative to the directory of the index file. RGB images
are binary PPM, thermal images, masks and saliency maps binary PGM.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import metrics, netpbm
from .errors import ContractError, ImageFormatError, IndexFormatError, MissingInputError

HEADER = ("id", "rgb", "thermal", "gt", "split", "tags")
SPLITS = ("train", "test")
BSO_RATIO = 0.26
SSO_RATIO = 0.05


class ChallengeTag(enum.Enum):
    BSO = "BSO"  # big salient object
    CB = "CB"  # center bias
    CIB = "CIB"  # cross image boundary
    IC = "IC"  # image clutter
    LI = "LI"  # low illumination
    MSO = "MSO"  # multiple salient objects
    OF = "OF"  # out of focus
    SSO = "SSO"  # small salient object
    SA = "SA"  # similar appearance
    TC = "TC"  # thermal crossover
    BW = "BW"  # bad weather
    RGB = "RGB"  # poor RGB image quality
    T = "T"  # poor thermal image quality

    @classmethod
    def parse(cls, code: str) -> "ChallengeTag":
        try:
            return cls(code.strip())
        except ValueError:
            raise ValueError(f"unknown challenge tag {code!r}") from None


TAGS: tuple[ChallengeTag, ...] = tuple(ChallengeTag)
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}


def parse_tags(text: str) -> frozenset[ChallengeTag]:
    return frozenset(ChallengeTag.parse(c) for c in text.split(";") if c.strip())


def emit_tags(tags: Iterable[ChallengeTag]) -> str:
    """Codes in enumeration order, so emission is canonical."""
    return ";".join(t.value for t in sorted(tags, key=TAG_INDEX.__getitem__))


@dataclass(frozen=True)
class Entry:
    id: str
    rgb: str  # paths exactly as written in the index
    thermal: str
    gt: str
    split: str
    tags: frozenset[ChallengeTag] = frozenset()


@dataclass(frozen=True)
class DatasetIndex:
    entries: tuple[Entry, ...]
    root: Path = field(default=Path("."), compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def split(self, name: str) -> list[Entry]:
        return [e for e in self.entries if e.split == name]


# -- index I/O --------------------------------------------------------------------------------


def parse_index(text: str, root: Path = Path("."), check_files: bool = True) -> DatasetIndex:
    """Parses index CSV text; errors name the 1-based line or the entry id."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise IndexFormatError("index is empty (missing header)") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise IndexFormatError(f"line 1: header must be {','.join(HEADER)}, got {','.join(header)}")
    entries, seen = [], {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise IndexFormatError(f"line {lineno}: expected {len(HEADER)} fields, got {len(row)}")
        eid, rgb, thermal, gt, split, tags = (c.strip() for c in row)
        if not eid:
            raise IndexFormatError(f"line {lineno}: empty id")
        if eid in seen:
            raise IndexFormatError(f"line {lineno}: duplicate id {eid!r} (first seen on line {seen[eid]})")
        seen[eid] = lineno
        if split not in SPLITS:
            raise IndexFormatError(f"line {lineno} (id {eid!r}): split must be train or test, got {split!r}")
        try:
            tagset = parse_tags(tags)
        except ValueError as exc:
            raise IndexFormatError(f"line {lineno} (id {eid!r}): {exc}") from None
        if check_files:
            for kind, rel in (("rgb", rgb), ("thermal", thermal), ("gt", gt)):
                if not (root / rel).is_file():
                    raise MissingInputError(f"line {lineno} (id {eid!r}): {kind} file {rel!r} not found")
        entries.append(Entry(eid, rgb, thermal, gt, split, tagset))
    return DatasetIndex(tuple(entries), root)


def load_index(path: str | os.PathLike, check_files: bool = True) -> DatasetIndex:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"index file {str(path)!r} not found")
    return parse_index(path.read_text(encoding="utf-8"), path.parent, check_files)


def emit_index(idx: DatasetIndex) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for e in idx.entries:
        w.writerow([e.id, e.rgb, e.thermal, e.gt, e.split, emit_tags(e.tags)])
    return buf.getvalue()


def save_index(idx: DatasetIndex, path: str | os.PathLike) -> None:
    Path(path).write_text(emit_index(idx), encoding="utf-8")


# -- validation -------------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    id: str
    kind: str  # "decode", "dims", "non_binary"
    severity: str  # "error" or "warning"
    message: str
    pixel_count: int | None = None

    def to_json(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "severity": self.severity, "message": self.message}
        if self.pixel_count is not None:
            d["pixel_count"] = self.pixel_count
        return d


@dataclass(frozen=True)
class ValidationReport:
    entry_count: int
    violations: tuple[Violation, ...]

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == "error"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_json(self) -> str:
        body = {
            "entry_count": self.entry_count,
            "error_count": len(self.errors),
            "warning_count": len(self.violations) - len(self.errors),
            "violations": [v.to_json() for v in self.violations],
        }
        return json.dumps(body, indent=2) + "\n"


def _check_entry(idx: DatasetIndex, e: Entry) -> list[Violation]:
    out: list[Violation] = []
    imgs = {}
    for kind, rel, channels in (("rgb", e.rgb, 3), ("thermal", e.thermal, 1), ("gt", e.gt, 1)):
        try:
            img = netpbm.read(idx.resolve(rel))
        except (OSError, ImageFormatError) as exc:
            out.append(Violation(e.id, "decode", "error", f"{kind} {rel!r}: {exc}"))
            continue
        got = 1 if img.ndim == 2 else 3
        if got != channels:
            out.append(Violation(e.id, "decode", "error", f"{kind} {rel!r}: expected {channels} channel(s), got {got}"))
            continue
        imgs[kind] = img
    dims = {k: v.shape[:2] for k, v in imgs.items()}
    if len(set(dims.values())) > 1:
        desc = ", ".join(f"{k} {h}x{w}" for k, (h, w) in dims.items())
        out.append(Violation(e.id, "dims", "error", f"dimension mismatch: {desc}"))
    if "gt" in imgs:
        gt = imgs["gt"]
        grey = int(np.count_nonzero((gt != 0) & (gt != 255)))
        if grey:
            out.append(
                Violation(e.id, "non_binary", "warning", f"non-binary mask: {grey} pixel(s) not 0/255", pixel_count=grey)
            )
    return out


def validate_dataset(idx: DatasetIndex, workers: int | None = None) -> ValidationReport:
    """Decodes every image of every entry; never raises on bad data."""
    per_entry = metrics.ordered_map(lambda e: _check_entry(idx, e), list(idx.entries), workers)
    return ValidationReport(len(idx), tuple(v for vs in per_entry for v in vs))


# -- statistics -------------------------------------------------------------------------------


def tag_matrix(idx: DatasetIndex) -> np.ndarray:
    """Entry-by-tag 0/1 incidence matrix of shape (entries, 13)."""
    b = np.zeros((len(idx), len(TAGS)), dtype=np.int64)
    for i, e in enumerate(idx.entries):
        for t in e.tags:
            b[i, TAG_INDEX[t]] = 1
    return b


def cooccurrence(idx: DatasetIndex) -> np.ndarray:
    """``M[a, b]`` = entries tagged with both a and b; the diagonal holds per-tag counts."""
    b = tag_matrix(idx)
    return b.T @ b


def cooccurrence_csv(m: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tag"] + [t.value for t in TAGS])
    for t, row in zip(TAGS, m):
        w.writerow([t.value] + [int(v) for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class SizeHistogram:
    edges: np.ndarray  # bins + 1 edges over [0, 1]
    counts: np.ndarray
    ratios: np.ndarray  # per entry, index order
    bso_count: int
    sso_count: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        w.writerow([])
        w.writerow(["bso_count", self.bso_count])
        w.writerow(["sso_count", self.sso_count])
        return buf.getvalue()


def object_ratio(gt_mask) -> float:
    """Fraction of foreground pixels of an 8-bit mask (all objects together)."""
    b = metrics.binarize_gt(gt_mask)
    return float(b.sum()) / b.size


def size_histogram_from_ratios(ratios: Sequence[float], bins: int = 10) -> SizeHistogram:
    if bins < 1:
        raise ContractError(f"bins must be positive, got {bins}")
    r = np.asarray(ratios, dtype=np.float64)
    edges = np.linspace(0.0, 1.0, bins + 1)
    # bin k holds [k/bins, (k+1)/bins); ratio 1.0 goes to the last bin
    which = np.minimum((r * bins).astype(np.int64), bins - 1)
    counts = np.bincount(which, minlength=bins) if r.size else np.zeros(bins, dtype=np.int64)
    return SizeHistogram(edges, counts, r, int(np.sum(r > BSO_RATIO)), int(np.sum(r < SSO_RATIO)))


def size_histogram(idx: DatasetIndex, bins: int = 10, workers: int | None = None) -> SizeHistogram:
    ratios = metrics.ordered_map(lambda e: object_ratio(netpbm.read(idx.resolve(e.gt))), list(idx.entries), workers)
    return size_histogram_from_ratios(ratios, bins)


# -- evaluation -------------------------------------------------------------------------------


@dataclass(frozen=True)
class ChallengeRow:
    tag: ChallengeTag
    max_f: float
    mean_mae: float
    image_count: int


@dataclass(frozen=True)
class ChallengeTable:
    rows: tuple[ChallengeRow, ...]
    absent: tuple[ChallengeTag, ...]  # tags with no test entry; omitted from rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tag", "max_f", "mean_mae", "count"])
        for r in self.rows:
            w.writerow([r.tag.value, repr(r.max_f), repr(r.mean_mae), r.image_count])
        return buf.getvalue()


def saliency_path(saliency_dir: str | os.PathLike, entry_id: str) -> Path:
    return Path(saliency_dir) / f"{entry_id}.pgm"


def _eval_entry(idx: DatasetIndex, saliency_dir, e: Entry) -> metrics.EvalAccumulator:
    sp = saliency_path(saliency_dir, e.id)
    if not sp.is_file():
        raise MissingInputError(f"entry {e.id!r}: saliency map {str(sp)!r} not found")
    sal = netpbm.read(sp)
    gt = netpbm.read(idx.resolve(e.gt))
    if sal.ndim != 2 or gt.ndim != 2:
        raise ImageFormatError(f"entry {e.id!r}: saliency map and mask must be single-channel PGM")
    if sal.shape != gt.shape:
        raise ContractError(f"entry {e.id!r}: saliency map {sal.shape} and mask {gt.shape} differ in size")
    return metrics.eval_image(sal, metrics.binarize_gt(gt))


def evaluate_test_split(
    idx: DatasetIndex, saliency_dir, workers: int | None = None
) -> tuple[list[Entry], list[metrics.EvalAccumulator]]:
    """Accumulators for every test entry in index order."""
    tests = idx.split("test")
    accs = metrics.ordered_map(lambda e: _eval_entry(idx, saliency_dir, e), tests, workers)
    return tests, accs


def challenge_table(entries: Sequence[Entry], accs: Sequence[metrics.EvalAccumulator]) -> ChallengeTable:
    rows, absent = [], []
    for tag in TAGS:
        sel = [a for e, a in zip(entries, accs) if tag in e.tags]
        if not sel:
            absent.append(tag)
            continue
        _, max_f, mae = metrics.dataset_curve(sel)
        rows.append(ChallengeRow(tag, max_f, mae, len(sel)))
    return ChallengeTable(tuple(rows), tuple(absent))


def per_challenge_eval(idx: DatasetIndex, saliency_dir, workers: int | None = None) -> ChallengeTable:
    """One row per tag present in the test split: (tag, max_f, mean_mae, image_count)."""
    entries, accs = evaluate_test_split(idx, saliency_dir, workers)
    return challenge_table(entries, accs)
