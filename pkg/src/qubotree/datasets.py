"""Typed tabular datasets: schema, CSV ingestion, and deterministic splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rng import Rng, derive_seed

KINDS = ("numeric", "categorical", "binary")


class DataError(ValueError):
    """Raised for malformed schemas, files, or rows."""


@dataclass(frozen=True)
class ColumnSchema:
    """One feature column: ``kind`` is numeric, categorical, or binary.

    ``categories`` lists the category labels of a categorical column in
    first-appearance order; empty for other kinds.
    """

    name: str
    kind: str
    categories: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind != "categorical" and self.categories:
            raise DataError(f"column {self.name!r}: only categorical columns take categories")
        if len(set(self.categories)) != len(self.categories):
            raise DataError(f"column {self.name!r}: duplicate category labels")


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar dataset with a numeric response.

    Numeric and binary columns hold float64 values; categorical columns hold
    int64 codes indexing into their schema's ``categories``. ``response`` is
    None only for prediction-only frames.
    """

    schema: tuple
    columns: dict = field(repr=False)
    response: Optional[np.ndarray] = field(default=None, repr=False)
    response_name: str = "y"

    def __post_init__(self):
        n = self.n_rows
        for col in self.schema:
            arr = self.columns[col.name]
            if len(arr) != n:
                raise DataError(f"column {col.name!r}: length {len(arr)} != {n}")
            arr.flags.writeable = False
        if self.response is not None:
            if len(self.response) != n:
                raise DataError("response length does not match row count")
            self.response.flags.writeable = False

    @property
    def n_rows(self) -> int:
        first = self.schema[0].name if self.schema else None
        if first is not None:
            return len(self.columns[first])
        return 0 if self.response is None else len(self.response)

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def schema_for(self, name: str) -> ColumnSchema:
        for col in self.schema:
            if col.name == name:
                return col
        raise DataError(f"no column named {name!r}")

    def subset(self, indices: np.ndarray) -> "Dataset":
        cols = {c.name: self.columns[c.name][indices].copy() for c in self.schema}
        resp = None if self.response is None else self.response[indices].copy()
        return Dataset(self.schema, cols, resp, self.response_name)

    def row(self, i: int) -> dict:
        """Row as a label-valued mapping (categorical codes decoded)."""
        out = {}
        for col in self.schema:
            v = self.columns[col.name][i]
            out[col.name] = col.categories[int(v)] if col.kind == "categorical" else float(v)
        return out


@dataclass(frozen=True)
class SplitSpecification:
    """Train/validation/test fractions plus the shuffling seed."""

    fractions: tuple = (0.5, 0.25, 0.25)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise DataError("fractions must be three positive numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-12:
            raise DataError("fractions must sum to 1")


def parse_schema(spec: str) -> list:
    """Parse ``name:kind,name:kind,...`` into ColumnSchema entries."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 2 or not pieces[0] or pieces[1] not in KINDS:
            raise DataError(f"malformed schema entry {part!r} (want name:kind)")
        out.append(ColumnSchema(pieces[0].strip(), pieces[1].strip()))
    if not out:
        raise DataError("empty schema")
    return out


def infer_schema(path: str, response_column: str) -> list:
    """Sniff feature kinds from a CSV: 0/1 -> binary, floats -> numeric, else categorical."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        values = {name: set() for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                if len(values[name]) <= 64:
                    values[name].add(cell)
    out = []
    for name in header:
        if name == response_column:
            continue
        seen = values[name]
        if seen <= {"0", "1"} and seen:
            out.append(ColumnSchema(name, "binary"))
            continue
        try:
            for cell in seen:
                float(cell)
            out.append(ColumnSchema(name, "numeric"))
        except ValueError:
            out.append(ColumnSchema(name, "categorical"))
    return out


def load_csv(path: str, schema: Sequence[ColumnSchema], response_column: Optional[str]) -> Dataset:
    """Load a header-first CSV against ``schema``.

    Categorical category lists are taken in first-appearance order. Missing
    values and unparseable cells are rejected with the offending row index.
    With ``response_column=None`` the result is a prediction-only frame.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        positions = {name: i for i, name in enumerate(header)}
        for col in schema:
            if col.name not in positions:
                raise DataError(f"{path}: header is missing schema column {col.name!r}")
        if response_column is not None and response_column not in positions:
            raise DataError(f"{path}: header is missing response column {response_column!r}")

        raw = {col.name: [] for col in schema}
        codes = {col.name: {} for col in schema if col.kind == "categorical"}
        cat_order = {col.name: [] for col in schema if col.kind == "categorical"}
        response = [] if response_column is not None else None

        for row_idx, row in enumerate(reader):
            if len(row) < len(header):
                raise DataError(f"{path}: row {row_idx}: expected {len(header)} cells")
            for col in schema:
                cell = row[positions[col.name]]
                if cell == "":
                    raise DataError(f"{path}: row {row_idx}: missing value in {col.name!r}")
                if col.kind == "categorical":
                    table = codes[col.name]
                    if cell not in table:
                        table[cell] = len(table)
                        cat_order[col.name].append(cell)
                    raw[col.name].append(table[cell])
                else:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise DataError(
                            f"{path}: row {row_idx}: non-numeric cell {cell!r} in {col.name!r}"
                        ) from None
                    if col.kind == "binary" and value not in (0.0, 1.0):
                        raise DataError(
                            f"{path}: row {row_idx}: binary column {col.name!r} got {cell!r}"
                        )
                    raw[col.name].append(value)
            if response is not None:
                cell = row[positions[response_column]]
                try:
                    response.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_idx}: non-numeric response {cell!r}"
                    ) from None

    n = len(next(iter(raw.values()))) if raw else (len(response) if response else 0)
    if n == 0:
        raise DataError(f"{path}: no data rows")

    final_schema = []
    columns = {}
    for col in schema:
        if col.kind == "categorical":
            final_schema.append(ColumnSchema(col.name, "categorical", tuple(cat_order[col.name])))
            columns[col.name] = np.asarray(raw[col.name], dtype=np.int64)
        else:
            final_schema.append(col)
            columns[col.name] = np.asarray(raw[col.name], dtype=np.float64)
    resp = None if response is None else np.asarray(response, dtype=np.float64)
    return Dataset(tuple(final_schema), columns, resp, response_column or "y")


def write_csv(data: Dataset, path: str) -> None:
    """Write a dataset back out with decoded category labels.

    Floats use shortest round-trip repr so reruns are byte-identical.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        names = [c.name for c in data.schema]
        header = names + ([data.response_name] if data.response is not None else [])
        writer.writerow(header)
        decoded = []
        for col in data.schema:
            arr = data.columns[col.name]
            if col.kind == "categorical":
                decoded.append([col.categories[int(v)] for v in arr])
            elif col.kind == "binary":
                decoded.append([str(int(v)) for v in arr])
            else:
                decoded.append([repr(float(v)) for v in arr])
        if data.response is not None:
            decoded.append([repr(float(v)) for v in data.response])
        for i in range(data.n_rows):
            writer.writerow([column[i] for column in decoded])


def partition(data: Dataset, spec: SplitSpecification):
    """Deterministic disjoint (train, validation, test) split.

    Sizes are floor(fraction * N) for validation and test, remainder to
    train. The permutation depends only on the seed, never on the values.
    """
    n = data.n_rows
    if n < 4:
        raise DataError("partition requires at least 4 rows")
    f_train, f_val, f_test = spec.fractions
    n_val = int(np.floor(f_val * n))
    n_test = int(np.floor(f_test * n))
    n_train = n - n_val - n_test
    keys = Rng(derive_seed(spec.seed, 0x5B17)).shuffle_keys(n)
    order = np.argsort(keys, kind="stable")
    train = np.sort(order[:n_train])
    val = np.sort(order[n_train:n_train + n_val])
    test = np.sort(order[n_train + n_val:])
    return data.subset(train), data.subset(val), data.subset(test)
