"""Dataset preparation: small-lab pooling, lineage grouping, constrained splits,
ID obfuscation and one-hot metadata encoding."""

from __future__ import annotations

import csv
import logging
import random
import re
import string
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DanglingEdgeError, LineageGraph, SequenceRecord
from .vocab import COMPOSITE_CATEGORY, FEATURE_COLUMNS, FEATURE_GROUPS, MULTI_VALUED_GROUPS

log = logging.getLogger(__name__)

SPLITS = ("train", "leaderboard", "holdout")
DEFAULT_FRACTIONS = (0.770, 0.091, 0.139)


class InfeasibleSplitError(ValueError):
    pass


class SplitConstraintError(RuntimeError):
    """Raised when a finished split breaks a constraint; indicates a bug."""


@dataclass(frozen=True)
class CategoryPooling:
    threshold: int
    mapping: Mapping[str, str]
    composite_id: str
    lab_sizes: Mapping[str, int]

    @property
    def categories(self) -> list[str]:
        return sorted(set(self.mapping.values()))

    @property
    def n_categories(self) -> int:
        return len(set(self.mapping.values()))

    def category_sizes(self) -> Counter:
        sizes: Counter = Counter()
        for lab, n in self.lab_sizes.items():
            sizes[self.mapping[lab]] += n
        return sizes

    def category_of(self, record: SequenceRecord) -> str:
        return self.mapping[record.lab_id]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["lab_id", "category_id", "lab_size"])
            for lab in sorted(self.mapping):
                writer.writerow([lab, self.mapping[lab], self.lab_sizes[lab]])


def pool_small_labs(
    records: Sequence[SequenceRecord],
    threshold: int = 10,
    composite_id: str = COMPOSITE_CATEGORY,
) -> CategoryPooling:
    """Map every lab with fewer than ``threshold`` records onto one composite category."""
    if not records:
        raise ValueError("no records to pool")
    missing = [r.sequence_id for r in records if r.lab_id is None]
    if missing:
        raise ValueError(f"records without lab_id: {missing[:5]}")
    sizes = Counter(r.lab_id for r in records)
    if composite_id in sizes:
        raise ValueError(f"composite id {composite_id!r} collides with a lab id")
    mapping = {lab: (lab if n >= threshold else composite_id) for lab, n in sizes.items()}
    pooling = CategoryPooling(threshold, mapping, composite_id, dict(sizes))
    log.info("pooled %d labs into %d categories", len(sizes), pooling.n_categories)
    return pooling


def lineage_components(graph: LineageGraph, all_ids: Iterable[str]) -> list[tuple[str, ...]]:
    """Connected components, including singletons, ordered by first member in ``all_ids``."""
    ids = list(all_ids)
    index = {s: i for i, s in enumerate(ids)}
    parent = list(range(len(ids)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in graph.edges:
        for x in (a, b):
            if x not in index:
                raise DanglingEdgeError(f"lineage edge ({a!r}, {b!r}) references unknown id {x!r}")
        ra, rb = find(index[a]), find(index[b])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, list[str]] = defaultdict(list)
    for i, s in enumerate(ids):
        groups[find(i)].append(s)
    return [tuple(members) for members in groups.values()]


@dataclass
class SplitAssignment:
    assignment: dict[str, str]
    fractions_target: tuple[float, float, float]
    seed: int
    dropped: tuple[str, ...] = ()

    def members(self, split: str) -> list[str]:
        return [s for s, v in self.assignment.items() if v == split]

    def realized_fractions(self) -> dict[str, float]:
        counts = Counter(self.assignment.values())
        total = len(self.assignment)
        return {split: counts[split] / total for split in SPLITS}

    def to_csv(self, path: str | Path, rename: Mapping[str, str] | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sequence_id", "split"])
            for seq_id, split in self.assignment.items():
                writer.writerow([rename[seq_id] if rename else seq_id, split])


def split_dataset(
    records: Sequence[SequenceRecord],
    pooling: CategoryPooling,
    components: Sequence[Sequence[str]],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    min_holdout: int = 3,
    seed: int | None = None,
    min_length: int = 2,
) -> SplitAssignment:
    """Assign whole lineage components to train/leaderboard/holdout.

    Components are shuffled by ``seed``; each category first reserves whole
    components into holdout until it has ``min_holdout`` records there, then
    every remaining component goes to the split furthest below its quota
    (ties favour train). Records shorter than ``min_length`` that land outside
    train are dropped.
    """
    if seed is None:
        raise ValueError("split_dataset needs an explicit seed")
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ValueError(f"fractions must be three non-negative values summing to 1, got {fractions}")

    by_id = {r.sequence_id: r for r in records}
    covered = [s for comp in components for s in comp]
    if len(covered) != len(set(covered)) or set(covered) != set(by_id):
        raise ValueError("components must partition the record ids")

    category = {s: pooling.category_of(r) for s, r in by_id.items()}
    eligible = {s for s, r in by_id.items() if len(r.dna) >= min_length}
    available = Counter(category[s] for s in eligible)
    for cat in sorted(set(category.values())):
        if available[cat] < min_holdout:
            raise InfeasibleSplitError(
                f"category {cat!r} has {available[cat]} usable records, "
                f"fewer than min_holdout={min_holdout}"
            )

    order = [tuple(c) for c in components]
    random.Random(seed).shuffle(order)

    comps_of: dict[str, list[int]] = defaultdict(list)
    for ci, comp in enumerate(order):
        for cat in dict.fromkeys(category[s] for s in comp):
            comps_of[cat].append(ci)

    placed: dict[int, str] = {}
    in_holdout: Counter = Counter()

    def place(ci: int, split: str):
        placed[ci] = split
        if split == "holdout":
            in_holdout.update(category[s] for s in order[ci] if s in eligible)

    for cat in sorted(comps_of):
        for ci in comps_of[cat]:
            if in_holdout[cat] >= min_holdout:
                break
            if ci not in placed:
                place(ci, "holdout")

    total = len(by_id)
    filled = Counter()
    for ci, split in placed.items():
        filled[split] += len(order[ci])
    for ci, comp in enumerate(order):
        if ci in placed:
            continue
        remaining = [fractions[i] * total - filled[split] for i, split in enumerate(SPLITS)]
        split = SPLITS[int(np.argmax(remaining))]
        place(ci, split)
        filled[split] += len(comp)

    assignment: dict[str, str] = {}
    dropped = []
    for ci, comp in enumerate(order):
        split = placed[ci]
        for s in comp:
            if split != "train" and s not in eligible:
                dropped.append(s)
                log.info("dropping %s from %s: sequence shorter than %d nt", s, split, min_length)
            else:
                assignment[s] = split
    # keep input record order in the manifest
    assignment = {s: assignment[s] for s in by_id if s in assignment}
    result = SplitAssignment(assignment, fractions, seed, tuple(dropped))
    _check_split(result, order, category, min_holdout)
    return result


def _check_split(result: SplitAssignment, components, category, min_holdout) -> None:
    for comp in components:
        splits = {result.assignment[s] for s in comp if s in result.assignment}
        if len(splits) > 1:
            raise SplitConstraintError(f"lineage component {comp[:3]}... spans {sorted(splits)}")
    holdout = Counter(category[s] for s in result.members("holdout"))
    for cat in set(category.values()):
        if holdout[cat] < min_holdout:
            raise SplitConstraintError(f"category {cat!r} has {holdout[cat]} holdout records")


_TOKEN_ALPHABET = string.ascii_lowercase + string.digits


def obfuscate_ids(ids: Iterable[str], seed: int, length: int = 12) -> dict[str, str]:
    """Seeded 1:1 replacement of IDs with random lowercase alphanumeric tokens."""
    ids = list(ids)
    if len(ids) != len(set(ids)):
        raise ValueError("ids must be unique")
    rng = random.Random(seed)
    used: set[str] = set()
    out: dict[str, str] = {}
    for original in ids:
        token = "".join(rng.choices(_TOKEN_ALPHABET, k=length))
        while token in used:
            token = "".join(rng.choices(_TOKEN_ALPHABET, k=length))
        used.add(token)
        out[original] = token
    return out


def invert(mapping: Mapping[str, str]) -> dict[str, str]:
    return {v: k for k, v in mapping.items()}


def write_obfuscation_map(maps: Mapping[str, Mapping[str, str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "original", "token"])
        for kind, mapping in maps.items():
            for original, token in mapping.items():
                writer.writerow([kind, original, token])


# common spellings of species names mapped onto the published columns
_SPECIES_ALIASES = {
    "homo_sapiens": "human",
    "h_sapiens": "human",
    "mus_musculus": "mouse",
    "m_musculus": "mouse",
    "rattus_norvegicus": "rat",
    "saccharomyces_cerevisiae": "budding_yeast",
    "yeast": "budding_yeast",
    "drosophila_melanogaster": "fly",
    "drosophila": "fly",
    "caenorhabditis_elegans": "nematode",
    "c_elegans": "nematode",
    "arabidopsis_thaliana": "mustard_weed",
    "arabidopsis": "mustard_weed",
    "danio_rerio": "zebrafish",
}


def normalize_value(raw: object) -> str:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        if float(raw).is_integer():
            return str(int(raw))
        return str(raw).replace(".", "_")
    text = str(raw).strip().lower()
    try:
        number = float(text)
    except ValueError:
        pass
    else:
        if number.is_integer():
            return str(int(number))
    return re.sub(r"[^a-z0-9]+", "_", text).strip("_")


def _split_raw(raw: object) -> list[object]:
    if raw is None:
        return []
    if isinstance(raw, str):
        return [v for v in (p.strip() for p in raw.split(";")) if v]
    if isinstance(raw, (list, tuple, set, frozenset)):
        return [v for v in raw if v is not None and str(v).strip()]
    return [raw]


@dataclass(frozen=True, eq=False)
class OneHotTable:
    sequence_ids: tuple[str, ...]
    columns: tuple[str, ...] = field(default=FEATURE_COLUMNS)
    values: np.ndarray = None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sequence_id", *self.columns])
            for seq_id, row in zip(self.sequence_ids, self.values.tolist()):
                writer.writerow([seq_id, *row])


def encode_metadata(records: Sequence[SequenceRecord]) -> OneHotTable:
    """One-hot encode the six categorical metadata groups into the fixed 39 columns."""
    col = {c: i for i, c in enumerate(FEATURE_COLUMNS)}
    values = np.zeros((len(records), len(FEATURE_COLUMNS)), dtype=np.int8)
    for row, rec in enumerate(records):
        for group, suffixes in FEATURE_GROUPS.items():
            raw_values = _split_raw(rec.metadata.get(group))
            if len(raw_values) > 1 and group not in MULTI_VALUED_GROUPS:
                raise ValueError(f"{rec.sequence_id}: {group} takes a single value, got {raw_values}")
            for raw in raw_values:
                value = normalize_value(raw)
                if group == "species":
                    value = _SPECIES_ALIASES.get(value, value)
                if value not in suffixes:
                    if "other" not in suffixes:
                        raise ValueError(
                            f"{rec.sequence_id}: {group} value {raw!r} has no column and no fallback"
                        )
                    value = "other"
                values[row, col[f"{group}_{value}"]] = 1
    return OneHotTable(tuple(r.sequence_id for r in records), FEATURE_COLUMNS, values)


def load_metadata(path: str | Path) -> dict[str, dict[str, str]]:
    """Raw metadata CSV: ``sequence_id`` plus any of the feature group columns.

    Multi-valued cells (selectable markers) separate values with ``;``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if not fields or fields[0] != "sequence_id":
            raise ValueError(f"{path}: first column must be sequence_id")
        unknown = [f for f in fields[1:] if f not in FEATURE_GROUPS]
        if unknown:
            raise ValueError(f"{path}: unknown metadata columns {unknown}")
        out: dict[str, dict[str, str]] = {}
        for row in reader:
            seq_id = row.pop("sequence_id")
            if seq_id in out:
                raise ValueError(f"{path}:{reader.line_num}: duplicate sequence_id {seq_id!r}")
            out[seq_id] = {k: v for k, v in row.items() if v}
    return out
