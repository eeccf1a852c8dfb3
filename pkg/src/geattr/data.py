"""Domain types and file ingestion for predictions, labels, sequences and lineages.

File formats (UTF-8, comma separated, ``.`` decimal point):

* predictions: ``sequence_id,<cat1>,<cat2>,...`` then one row per sequence
* labels: ``sequence_id,lab_id``
* lineage: ``id_a,id_b``
* FASTA: ``>sequence_id [lab_id]`` headers, sequence on following lines
"""

from __future__ import annotations

import csv
import math
import re
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

import numpy as np

from .vocab import FEATURE_GROUPS

ROW_SUM_TOLERANCE = 1e-4

_DNA_OK = re.compile(r"^[ACGTN]+$")
# IUPAC ambiguity codes other than N are folded to N on load
_AMBIGUITY = str.maketrans({c: "N" for c in "RYKMSWBDHVU"})


class DataError(ValueError):
    """Base class for ingestion errors."""


class ParseError(DataError):
    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DuplicateIdError(DataError):
    pass


class DanglingEdgeError(DataError):
    pass


class EmptySequenceError(ParseError):
    pass


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


def _first_duplicate(items: Iterable[str]) -> str | None:
    seen: set[str] = set()
    for item in items:
        if item in seen:
            return item
        seen.add(item)
    return None


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """J x K matrix of per-sequence category probabilities."""

    sequence_ids: tuple[str, ...]
    category_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        seq = tuple(self.sequence_ids)
        cats = tuple(self.category_ids)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape != (len(seq), len(cats)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(seq)} sequences x {len(cats)} categories"
            )
        if not seq or not cats:
            raise ValueError("prediction matrix needs at least one row and one column")
        if (dup := _first_duplicate(seq)) is not None:
            raise DuplicateIdError(f"duplicate sequence_id {dup!r}")
        if (dup := _first_duplicate(cats)) is not None:
            raise DuplicateIdError(f"duplicate category_id {dup!r}")
        object.__setattr__(self, "sequence_ids", seq)
        object.__setattr__(self, "category_ids", cats)
        object.__setattr__(self, "values", _frozen(values))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, PredictionMatrix):
            return NotImplemented
        return (
            self.sequence_ids == other.sequence_ids
            and self.category_ids == other.category_ids
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def category_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.category_ids)}

    def sequence_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.sequence_ids)}

    def reorder(
        self,
        sequence_ids: Sequence[str] | None = None,
        category_ids: Sequence[str] | None = None,
    ) -> PredictionMatrix:
        """Return the same predictions with rows/columns in the given ID order."""
        seq = tuple(sequence_ids) if sequence_ids is not None else self.sequence_ids
        cats = tuple(category_ids) if category_ids is not None else self.category_ids
        if set(seq) != set(self.sequence_ids) or len(seq) != len(self.sequence_ids):
            raise ValueError("reorder needs a permutation of the existing sequence_ids")
        if set(cats) != set(self.category_ids) or len(cats) != len(self.category_ids):
            raise ValueError("reorder needs a permutation of the existing category_ids")
        si, ci = self.sequence_index(), self.category_index()
        rows = np.fromiter((si[s] for s in seq), dtype=np.intp, count=len(seq))
        cols = np.fromiter((ci[c] for c in cats), dtype=np.intp, count=len(cats))
        return PredictionMatrix(seq, cats, self.values[np.ix_(rows, cols)])


class LabelMap(Mapping):
    """Read-only mapping sequence_id -> true category id."""

    def __init__(self, entries: Mapping[str, str] | Iterable[tuple[str, str]]):
        items = entries.items() if isinstance(entries, Mapping) else entries
        data: dict[str, str] = {}
        for seq_id, cat in items:
            if seq_id in data:
                raise DuplicateIdError(f"duplicate sequence_id {seq_id!r} in labels")
            data[seq_id] = cat
        self._data = MappingProxyType(data)

    def __getitem__(self, key: str) -> str:
        return self._data[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        return f"LabelMap({len(self)} entries)"

    def categories(self) -> set[str]:
        return set(self._data.values())

    def true_indices(self, sequence_ids: Sequence[str], category_ids: Sequence[str]) -> np.ndarray:
        """Column index of the true category for each sequence, in the given order.

        Raises KeyError naming the first sequence without a label, and
        ValueError if a label is not among ``category_ids``.
        """
        col = {c: i for i, c in enumerate(category_ids)}
        out = np.empty(len(sequence_ids), dtype=np.intp)
        for i, seq_id in enumerate(sequence_ids):
            try:
                cat = self._data[seq_id]
            except KeyError:
                raise KeyError(f"no label for sequence {seq_id!r}") from None
            try:
                out[i] = col[cat]
            except KeyError:
                raise ValueError(
                    f"label {cat!r} of sequence {seq_id!r} is not a known category"
                ) from None
        return out


@dataclass(frozen=True)
class SequenceRecord:
    sequence_id: str
    dna: str
    lab_id: str | None = None
    # raw metadata values keyed by feature group (see vocab.FEATURE_GROUPS)
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.dna:
            raise EmptySequenceError(f"sequence {self.sequence_id!r} is empty")
        if not _DNA_OK.match(self.dna):
            raise ValueError(f"sequence {self.sequence_id!r} has characters outside ACGTN")
        unknown = set(self.metadata) - set(FEATURE_GROUPS)
        if unknown:
            raise ValueError(f"unknown metadata fields {sorted(unknown)}")
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))


@dataclass(frozen=True)
class LineageGraph:
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        edges = tuple((str(a), str(b)) for a, b in self.edges)
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r} in lineage graph")
        object.__setattr__(self, "edges", edges)

    def nodes(self) -> set[str]:
        return {x for edge in self.edges for x in edge}

    def check_endpoints(self, known_ids: Iterable[str]) -> None:
        known = set(known_ids)
        for a, b in self.edges:
            for x in (a, b):
                if x not in known:
                    raise DanglingEdgeError(f"lineage edge ({a!r}, {b!r}) references unknown id {x!r}")


@dataclass
class ValidationReport:
    row_sum_violations: list[tuple[str, float]] = field(default_factory=list)
    missing_from_matrix: list[str] = field(default_factory=list)
    missing_from_labels: list[str] = field(default_factory=list)
    unknown_categories: list[str] = field(default_factory=list)
    out_of_range: list[tuple[str, str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (
            self.row_sum_violations
            or self.missing_from_matrix
            or self.missing_from_labels
            or self.unknown_categories
            or self.out_of_range
        )

    def findings(self) -> list[str]:
        lines = []
        lines += [f"row sum {s!r} for sequence {q!r}" for q, s in self.row_sum_violations]
        lines += [f"labelled sequence {q!r} missing from predictions" for q in self.missing_from_matrix]
        lines += [f"predicted sequence {q!r} has no label" for q in self.missing_from_labels]
        lines += [f"label category {c!r} is not a prediction column" for c in self.unknown_categories]
        lines += [f"value {v!r} out of [0, 1] at ({q!r}, {c!r})" for q, c, v in self.out_of_range]
        return lines


def validate(matrix: PredictionMatrix, labels: Mapping[str, str] | None = None) -> ValidationReport:
    """Collect every problem with a submission; never raises."""
    report = ValidationReport()
    values = matrix.values
    sums = values.sum(axis=1)
    for i in np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE):
        report.row_sum_violations.append((matrix.sequence_ids[i], float(sums[i])))
    bad = (values < 0) | (values > 1) | ~np.isfinite(values)
    for i, j in zip(*np.nonzero(bad)):
        report.out_of_range.append(
            (matrix.sequence_ids[i], matrix.category_ids[j], float(values[i, j]))
        )
    if labels is not None:
        in_matrix = set(matrix.sequence_ids)
        report.missing_from_matrix = [s for s in labels if s not in in_matrix]
        report.missing_from_labels = [s for s in matrix.sequence_ids if s not in labels]
        cats = set(matrix.category_ids)
        report.unknown_categories = sorted({c for c in labels.values() if c not in cats})
    return report


def _open_csv(path: str | Path):
    return open(path, newline="", encoding="utf-8")


def _parse_float(cell: str, path, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", path, line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {cell!r}", path, line)
    return value


def load_predictions(path: str | Path) -> PredictionMatrix:
    """Read a prediction CSV, preserving row and column order."""
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise ParseError("missing header `sequence_id,<categories...>`", path, 1)
        category_ids = header[1:]
        width = len(header)
        seq_ids: list[str] = []
        rows: list[np.ndarray] = []
        seen: set[str] = set()
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", path, line)
            seq_id = row[0]
            if seq_id in seen:
                raise DuplicateIdError(f"{path}:{line}: duplicate sequence_id {seq_id!r}")
            seen.add(seq_id)
            try:
                parsed = np.array(row[1:], dtype=np.float64)
            except ValueError:
                parsed = np.array([_parse_float(c, path, line) for c in row[1:]])
            if not np.isfinite(parsed).all():
                bad = row[1 + int(np.flatnonzero(~np.isfinite(parsed))[0])]
                raise ParseError(f"non-finite cell {bad!r}", path, line)
            seq_ids.append(seq_id)
            rows.append(parsed)
    if not rows:
        raise ParseError("no prediction rows", path)
    try:
        return PredictionMatrix(tuple(seq_ids), tuple(category_ids), np.vstack(rows))
    except DuplicateIdError as exc:
        raise DuplicateIdError(f"{path}: {exc}") from None


def write_predictions(matrix: PredictionMatrix, path: str | Path) -> None:
    # repr() gives the shortest string that round-trips to the same double
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence_id", *matrix.category_ids])
        for seq_id, row in zip(matrix.sequence_ids, matrix.values.tolist()):
            writer.writerow([seq_id, *map(repr, row)])


def load_labels(path: str | Path) -> LabelMap:
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["sequence_id", "lab_id"]:
            raise ParseError("expected header `sequence_id,lab_id`", path, 1)
        entries: dict[str, str] = {}
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", path, reader.line_num)
            seq_id, lab = row
            if seq_id in entries:
                raise DuplicateIdError(
                    f"{path}:{reader.line_num}: duplicate sequence_id {seq_id!r}"
                )
            entries[seq_id] = lab
    return LabelMap(entries)


def write_labels(labels: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence_id", "lab_id"])
        writer.writerows(labels.items())


def _parse_header(text: str, path, line: int) -> tuple[str, str | None]:
    parts = text.split()
    if not parts:
        raise ParseError("FASTA header without sequence id", path, line)
    lab = None
    if len(parts) > 1:
        lab = parts[1]
        if lab.startswith("[") and lab.endswith("]"):
            lab = lab[1:-1]
        lab = lab or None
    return parts[0], lab


def load_fasta(path: str | Path) -> list[SequenceRecord]:
    records: list[SequenceRecord] = []
    seen: set[str] = set()
    header: tuple[str, str | None, int] | None = None
    chunks: list[str] = []

    def flush():
        seq_id, lab, line = header
        dna = "".join(chunks).upper().translate(_AMBIGUITY)
        if not dna:
            raise EmptySequenceError(f"empty sequence body for {seq_id!r}", path, line)
        try:
            records.append(SequenceRecord(seq_id, dna, lab))
        except ValueError as exc:
            raise ParseError(str(exc), path, line) from None

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith(";"):
                continue
            if text.startswith(">"):
                if header is not None:
                    flush()
                seq_id, lab = _parse_header(text[1:], path, lineno)
                if seq_id in seen:
                    raise DuplicateIdError(f"{path}:{lineno}: duplicate sequence_id {seq_id!r}")
                seen.add(seq_id)
                header = (seq_id, lab, lineno)
                chunks = []
            else:
                if header is None:
                    raise ParseError("sequence data before first header", path, lineno)
                chunks.append(text)
    if header is not None:
        flush()
    return records


def write_fasta(records: Iterable[SequenceRecord], path: str | Path, width: int = 80) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(f">{rec.sequence_id}" + (f" {rec.lab_id}" if rec.lab_id else "") + "\n")
            for start in range(0, len(rec.dna), width):
                fh.write(rec.dna[start : start + width] + "\n")


def load_lineage(path: str | Path, known_ids: Iterable[str] | None = None) -> LineageGraph:
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["id_a", "id_b"]:
            raise ParseError("expected header `id_a,id_b`", path, 1)
        edges = []
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", path, reader.line_num)
            if row[0] == row[1]:
                raise ParseError(f"self-loop on {row[0]!r}", path, reader.line_num)
            edges.append((row[0], row[1]))
    graph = LineageGraph(tuple(edges))
    if known_ids is not None:
        graph.check_endpoints(known_ids)
    return graph


def write_lineage(graph: LineageGraph, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id_a", "id_b"])
        writer.writerows(graph.edges)
