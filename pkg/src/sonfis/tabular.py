"""Decision-table data model, borehole domain encodings, CSV ingestion and metrics.

A decision table is the objects-by-attributes view used throughout the
package: every row is one observed object, every column one attribute, and
exactly one attribute is the decision (the quantity being estimated).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LUGEON_CAP",
    "TWR_CODES",
    "SITE_COLUMNS",
    "TableError",
    "AttributeMeta",
    "DecisionTable",
    "site_schema",
    "encode_twr",
    "compute_lugeon",
    "clamp_lugeon",
    "load_table",
    "save_table",
    "split",
    "rmse",
    "save_predictions",
]

#: Largest lugeon value treated as physically meaningful.
LUGEON_CAP = 100.0

#: Ordinal weathering-class codes, 0 = fresh rock up to 4 = highly weathered.
TWR_CODES = {
    "FRESH": 0.0,
    "FRESH-SW": 0.5,
    "SW": 1.0,
    "FRESH-MW": 1.5,
    "SW-MW": 2.0,
    "CW": 2.5,
    "MW": 3.0,
    "HW-MW": 3.5,
    "HW": 4.0,
}

#: Canonical borehole site columns; ``lu`` is the decision attribute.
SITE_COLUMNS = ("x", "y", "z", "l", "rqd", "twr", "lu")


class TableError(ValueError):
    """Malformed table data, schema mismatch, or unparseable table file."""


@dataclass(frozen=True)
class AttributeMeta:
    """Schema entry for one table column.

    ``categories=None`` marks a numeric attribute; an integer ``k`` marks a
    symbolic attribute whose values are the category labels 1..k.
    """

    name: str
    kind: str = "condition"
    categories: int | None = None

    def __post_init__(self):
        if self.kind not in ("condition", "decision"):
            raise TableError(f"unknown attribute kind {self.kind!r}")
        if self.categories is not None and int(self.categories) < 1:
            raise TableError(f"attribute {self.name!r} needs at least one category")

    @property
    def is_symbolic(self) -> bool:
        return self.categories is not None


class DecisionTable:
    """Immutable objects-by-attributes table with exactly one decision attribute.

    Values are stored as a read-only float matrix; symbolic cells hold their
    integer category labels. All cells must be present and finite.
    """

    def __init__(self, attributes, values):
        attributes = tuple(attributes)
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.ndim != 2:
            raise TableError("table values must be a 2-D matrix")
        if values.shape[0] < 1:
            raise TableError("a table needs at least one object")
        if values.shape[1] != len(attributes):
            raise TableError(
                f"row width {values.shape[1]} does not match "
                f"{len(attributes)} schema attributes"
            )
        if sum(1 for a in attributes if a.kind == "decision") != 1:
            raise TableError("a table needs exactly one decision attribute")
        if not np.all(np.isfinite(values)):
            raise TableError("table values must be finite")
        for j, attr in enumerate(attributes):
            if attr.is_symbolic:
                col = values[:, j]
                if np.any(col != np.round(col)):
                    raise TableError(f"symbolic attribute {attr.name!r} has non-integer values")
                if np.any(col < 1) or np.any(col > attr.categories):
                    raise TableError(
                        f"symbolic attribute {attr.name!r} has categories outside "
                        f"1..{attr.categories}"
                    )
        values.setflags(write=False)
        self.attributes = attributes
        self.values = values

    @property
    def n_objects(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def condition_indices(self) -> tuple[int, ...]:
        return tuple(j for j, a in enumerate(self.attributes) if a.kind == "condition")

    @property
    def decision_index(self) -> int:
        return next(j for j, a in enumerate(self.attributes) if a.kind == "decision")

    @property
    def conditions(self) -> np.ndarray:
        return self.values[:, list(self.condition_indices)]

    @property
    def decision(self) -> np.ndarray:
        return self.values[:, self.decision_index]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def take(self, rows) -> "DecisionTable":
        """New table restricted to the given row indices (order preserved)."""
        return DecisionTable(self.attributes, self.values[np.asarray(rows, dtype=int)])

    def __len__(self) -> int:
        return self.n_objects

    def __repr__(self) -> str:
        return f"DecisionTable({self.n_objects} objects, attributes={list(self.names)})"


def site_schema() -> tuple[AttributeMeta, ...]:
    """Schema for the canonical borehole site table ``x,y,z,l,rqd,twr,lu``."""
    return tuple(
        AttributeMeta(name, "decision" if name == "lu" else "condition")
        for name in SITE_COLUMNS
    )


def encode_twr(label: str) -> float:
    """Numeric code for a weathering-class label.

    Lookup is case-insensitive and tolerant of whitespace around the hyphen
    in combined classes such as ``"HW - MW"``.
    """
    key = re.sub(r"\s*-\s*", "-", str(label).strip().upper())
    try:
        return TWR_CODES[key]
    except KeyError:
        valid = ", ".join(sorted(TWR_CODES))
        raise TableError(f"unknown weathering class {label!r}; expected one of: {valid}") from None


def clamp_lugeon(lu: float) -> float:
    """Cap a lugeon value at the physically meaningful maximum of 100."""
    if lu < 0:
        raise ValueError(f"lugeon value must be non-negative, got {lu}")
    return min(float(lu), LUGEON_CAP)


def compute_lugeon(water_take: float, pressure: float) -> float:
    """Lugeon value from water take (l/m/min) normalised to 10 bars, capped at 100."""
    if pressure <= 0:
        raise ValueError(f"test pressure must be positive, got {pressure}")
    if water_take < 0:
        raise ValueError(f"water take must be non-negative, got {water_take}")
    return clamp_lugeon(water_take * (10.0 / pressure))


def load_table(path, schema) -> DecisionTable:
    """Read a CSV file into a decision table.

    The header must match the schema names in order. Numeric cells parse as
    floats; a cell that fails to parse is tried as a weathering-class label
    (site files may carry ``twr`` as text) before being reported as an error.
    """
    schema = tuple(schema)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: file is empty") from None
        expected = [a.name for a in schema]
        if [h.strip() for h in header] != expected:
            raise TableError(
                f"{path}: header {header} does not match schema columns {expected}"
            )
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(schema):
                raise TableError(f"{path}: row {i} has {len(row)} cells, expected {len(schema)}")
            parsed = []
            for attr, cell in zip(schema, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    try:
                        parsed.append(encode_twr(cell))
                    except TableError:
                        raise TableError(
                            f"{path}: row {i}, column {attr.name!r}: "
                            f"cannot parse {cell.strip()!r} as a number"
                        ) from None
            rows.append(parsed)
    if not rows:
        raise TableError(f"{path}: no data rows")
    return DecisionTable(schema, np.array(rows))


def save_table(table: DecisionTable, path) -> None:
    """Write a decision table as CSV with full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.names)
        for row in table.values:
            writer.writerow(
                [
                    int(v) if attr.is_symbolic else repr(float(v))
                    for attr, v in zip(table.attributes, row)
                ]
            )


def split(table: DecisionTable, n_train: int, n_test: int, seed: int):
    """Seeded random train/test split with disjoint rows; leftovers are discarded."""
    if n_train < 1 or n_test < 1:
        raise ValueError("split counts must be at least 1")
    if n_train + n_test > table.n_objects:
        raise ValueError(
            f"cannot split {table.n_objects} objects into {n_train} train + {n_test} test"
        )
    order = np.random.default_rng(seed).permutation(table.n_objects)
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:n_train + n_test])
    return table.take(train_idx), table.take(test_idx)


def rmse(predicted, actual) -> float:
    """Root mean square error over aligned prediction/actual pairs."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual must have identical shape")
    if predicted.size == 0:
        raise ValueError("rmse of an empty prediction list is undefined")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def save_predictions(path, actual, predicted) -> None:
    """Export aligned predictions as CSV ``index,actual,predicted``."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape:
        raise ValueError("predicted and actual must have identical shape")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "actual", "predicted"])
        for i, (a, p) in enumerate(zip(actual, predicted)):
            writer.writerow([i, repr(float(a)), repr(float(p))])
