"""Relational datasets as grids of strings, with cell addressing and labeled splits.

Every value is kept as a raw string: the downstream models (format n-grams,
embeddings, the noisy channel) all operate on character sequences, so no
column typing is inferred. Missing CSV fields map to the empty string and
participate in every model like any other value.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np


class DataError(ValueError):
    """Raised for malformed datasets, files, or cell references."""


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


def seeded_rng(seed: int, stream: int = 0) -> np.random.RandomState:
    """RandomState for (seed, stream); distinct streams stay decorrelated.

    Components that share a user-facing seed but must sample independently
    (e.g. picking cells to corrupt vs picking cells to label) each pass their
    own stream tag, otherwise equal-length permutations from the same seed
    coincide element for element.
    """
    return np.random.RandomState([seed & 0xFFFFFFFF, stream & 0xFFFFFFFF])


class CellRef(NamedTuple):
    """Address of a single cell: 0-based row ordinal and attribute ordinal."""

    tuple_index: int
    attr_index: int


@dataclass(frozen=True)
class Schema:
    """Ordered attribute names. All columns are treated as categorical strings."""

    attributes: tuple[str, ...]

    def __post_init__(self):
        if len(self.attributes) == 0:
            raise DataError("schema needs at least one attribute")
        seen = set()
        for name in self.attributes:
            if not name:
                raise DataError("attribute names must be non-empty")
            if name in seen:
                raise DataError(f"duplicate attribute name: {name!r}")
            seen.add(name)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    def index_of(self, name: str) -> int:
        try:
            return self.attributes.index(name)
        except ValueError:
            raise DataError(f"unknown attribute: {name!r}") from None


@dataclass
class Dataset:
    """An ordered collection of rows. Row order is stable: the row index is an identifier.

    Datasets are treated as immutable after construction; operations that
    change values (error injection, repairs) build a new Dataset.
    """

    schema: Schema
    rows: list[tuple[str, ...]]
    id: str = "dataset"

    def __post_init__(self):
        n = self.schema.n_attributes
        for i, row in enumerate(self.rows):
            if len(row) != n:
                raise DataError(f"row {i} has {len(row)} values, expected {n}")
        self.rows = [tuple(str(v) for v in row) for row in self.rows]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_attributes(self) -> int:
        return self.schema.n_attributes

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_attributes

    def value_at(self, cell: CellRef) -> str:
        if not (0 <= cell.tuple_index < self.n_rows):
            raise DataError(f"tuple index {cell.tuple_index} out of range")
        if not (0 <= cell.attr_index < self.n_attributes):
            raise DataError(f"attribute index {cell.attr_index} out of range")
        return self.rows[cell.tuple_index][cell.attr_index]

    def cells(self) -> Iterator[CellRef]:
        for i in range(self.n_rows):
            for j in range(self.n_attributes):
                yield CellRef(i, j)

    def column(self, attr_index: int) -> list[str]:
        return [row[attr_index] for row in self.rows]

    def replace_values(self, changes: dict[CellRef, str]) -> "Dataset":
        """New Dataset with the given cells overwritten; row order unchanged."""
        rows = [list(row) for row in self.rows]
        for cell, value in changes.items():
            if not (0 <= cell.tuple_index < self.n_rows and 0 <= cell.attr_index < self.n_attributes):
                raise DataError(f"cell {cell} out of range")
            rows[cell.tuple_index][cell.attr_index] = value
        return Dataset(self.schema, [tuple(r) for r in rows], id=self.id)


def load_csv(path, has_header: bool = True, dataset_id: str | None = None) -> Dataset:
    """Read an RFC 4180 CSV (UTF-8, double-quote quoting) into a Dataset.

    Without a header, columns are named col0..colN-1. Rows must be
    rectangular; a ragged row is a parse error naming the offending line.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        raw = list(csv.reader(fh))
    if not raw:
        raise DataError(f"{path}: empty CSV file")
    if has_header:
        header, body, first_line = raw[0], raw[1:], 2
    else:
        header, body, first_line = [f"col{i}" for i in range(len(raw[0]))], raw, 1
    schema = Schema(tuple(header))
    n = schema.n_attributes
    for i, row in enumerate(body):
        if len(row) != n:
            raise DataError(f"{path}: row {first_line + i} has {len(row)} fields, expected {n}")
    return Dataset(schema, [tuple(r) for r in body], id=dataset_id or path.stem)


def save_csv(dataset: Dataset, path) -> None:
    """Write a Dataset back to CSV with a header row. Inverse of load_csv."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.schema.attributes)
        writer.writerows(dataset.rows)


@dataclass(frozen=True)
class LabeledCell:
    """One ground-truth entry: a cell, its observed value, and its true value."""

    cell: CellRef
    observed: str
    truth: str

    @property
    def is_error(self) -> bool:
        return self.observed != self.truth


def label_of(entry: LabeledCell) -> int:
    """+1 when the observed value equals the truth exactly, else -1."""
    return 1 if entry.observed == entry.truth else -1


@dataclass
class TrainingSet:
    """Labeled cells. The label is derived: correct iff observed == truth."""

    entries: list[LabeledCell]

    def __post_init__(self):
        cells = [e.cell for e in self.entries]
        if len(set(cells)) != len(cells):
            raise DataError("duplicate cells in training set")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[LabeledCell]:
        return iter(self.entries)

    @property
    def cells(self) -> list[CellRef]:
        return [e.cell for e in self.entries]

    @property
    def n_correct(self) -> int:
        return sum(1 for e in self.entries if not e.is_error)

    @property
    def n_errors(self) -> int:
        return sum(1 for e in self.entries if e.is_error)

    def errors(self) -> list[LabeledCell]:
        return [e for e in self.entries if e.is_error]

    def correct(self) -> list[LabeledCell]:
        return [e for e in self.entries if not e.is_error]


@dataclass(frozen=True)
class SplitSpec:
    """How labeled cells are partitioned into train / holdout / test."""

    train_fraction: float
    holdout_fraction_of_train: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction <= 1.0):
            raise ConfigError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if not (0.0 <= self.holdout_fraction_of_train < 1.0):
            raise ConfigError(
                f"holdout_fraction_of_train must be in [0, 1), got {self.holdout_fraction_of_train}"
            )


def split(dataset: Dataset, labels: TrainingSet, spec: SplitSpec) -> tuple[TrainingSet, TrainingSet, TrainingSet]:
    """Partition labeled cells into disjoint (train, holdout, test) sets.

    The holdout is carved out of the training portion (used for calibration
    and the augmentation balance knob, never for gradient updates). The
    partition is a deterministic function of (labels, spec.seed); the three
    parts are pairwise disjoint and their union is the labeled set.
    """
    for e in labels:
        if dataset.value_at(e.cell) != e.observed:
            raise DataError(f"label for {e.cell} records observed {e.observed!r}, dataset has {dataset.value_at(e.cell)!r}")
    entries = sorted(labels.entries, key=lambda e: e.cell)
    # Stream 1: keep label selection independent of same-seeded cell pickers.
    rng = seeded_rng(spec.seed, stream=1)
    order = rng.permutation(len(entries))
    n_selected = int(round(spec.train_fraction * len(entries)))
    n_holdout = int(round(spec.holdout_fraction_of_train * n_selected))
    selected = order[:n_selected]
    train = TrainingSet([entries[i] for i in selected[n_holdout:]])
    holdout = TrainingSet([entries[i] for i in selected[:n_holdout]])
    test = TrainingSet([entries[i] for i in order[n_selected:]])
    if len(test) == 0:
        warnings.warn("train_fraction leaves an empty test set", stacklevel=2)
    return train, holdout, test


GROUND_TRUTH_HEADER = ("tuple_index", "attribute", "clean_value")


def save_ground_truth(dataset: Dataset, truth: dict[CellRef, str], path) -> None:
    """Write a ground-truth CSV with columns tuple_index,attribute,clean_value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GROUND_TRUTH_HEADER)
        for cell in sorted(truth):
            writer.writerow([cell.tuple_index, dataset.schema.attributes[cell.attr_index], truth[cell]])


def load_ground_truth(path, dataset: Dataset) -> TrainingSet:
    """Read a ground-truth CSV and pair it with the dataset's observed values."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != GROUND_TRUTH_HEADER:
        raise DataError(f"{path}: expected header {','.join(GROUND_TRUTH_HEADER)}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected 3")
        try:
            tuple_index = int(row[0])
        except ValueError:
            raise DataError(f"{path}: row {lineno} has non-integer tuple_index {row[0]!r}") from None
        cell = CellRef(tuple_index, dataset.schema.index_of(row[1]))
        entries.append(LabeledCell(cell, observed=dataset.value_at(cell), truth=row[2]))
    return TrainingSet(entries)
