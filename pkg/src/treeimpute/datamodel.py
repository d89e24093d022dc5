"""Mixed-type data matrix with a missing mask, plus CSV/schema I/O.

Cells are stored in a dense float64 array: continuous cells hold their
value, categorical cells hold the (integral) index of their level in the
column's level list, and missing cells are NaN. Label strings only exist
at the I/O boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

CONTINUOUS = "continuous"
NOMINAL = "nominal"
ORDINAL = "ordinal"

_KINDS = (CONTINUOUS, NOMINAL, ORDINAL)

DEFAULT_NA_TOKEN = "NA"


class DataError(ValueError):
    """Malformed data, schema, or a schema/data mismatch."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DataError(f"unknown column kind {self.kind!r}")
        if self.kind == CONTINUOUS:
            if self.levels:
                raise DataError(f"continuous column {self.name!r} cannot have levels")
        else:
            if not self.levels:
                raise DataError(f"{self.kind} column {self.name!r} needs levels")
            if len(set(self.levels)) != len(self.levels):
                raise DataError(f"duplicate levels in column {self.name!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class DataMatrix:
    """Immutable n x p table; values[i, j] is NaN when cell (i, j) is missing."""

    schema: tuple[Column, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DataError("values must be 2-dimensional")
        n, p = v.shape
        if n < 1 or p < 1:
            raise DataError("need at least one row and one column")
        if p != len(self.schema):
            raise DataError(f"{p} value columns vs {len(self.schema)} schema columns")
        for j, col in enumerate(self.schema):
            x = v[:, j]
            obs = x[~np.isnan(x)]
            if col.kind == CONTINUOUS:
                if not np.all(np.isfinite(obs)):
                    raise DataError(f"non-finite value in continuous column {col.name!r}")
            else:
                if obs.size and (np.any(obs != np.floor(obs)) or np.any(obs < 0)
                                 or np.any(obs >= len(col.levels))):
                    raise DataError(f"level index out of range in column {col.name!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def observed_mask(self) -> np.ndarray:
        """Boolean (n, p) array, True where the cell is observed."""
        return ~np.isnan(self.values)

    def missing_count(self) -> int:
        return int(np.isnan(self.values).sum())

    def continuous_cols(self) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.schema) if c.kind == CONTINUOUS],
                        dtype=np.intp)

    def categorical_cols(self) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.schema) if c.is_categorical],
                        dtype=np.intp)

    def with_values(self, values: np.ndarray) -> "DataMatrix":
        return DataMatrix(self.schema, np.array(values, dtype=np.float64))


class ObservedSplit(NamedTuple):
    """Blocks of one column-vs-rest partition, original row order preserved."""

    obs_idx: np.ndarray
    mis_idx: np.ndarray
    x_obs: np.ndarray
    cov_obs: np.ndarray
    x_mis: np.ndarray
    cov_mis: np.ndarray


class FullyMissingColumnError(DataError):
    pass


def missing_order(d: DataMatrix) -> np.ndarray:
    """Column permutation sorted by missing count ascending, stable in index."""
    counts = np.isnan(d.values).sum(axis=0)
    return np.argsort(counts, kind="stable")


def split_by_observed(d: DataMatrix, j: int) -> ObservedSplit:
    """Split column j and the remaining columns by column j's missing mask."""
    x = d.values[:, j]
    obs = ~np.isnan(x)
    if not obs.any():
        raise FullyMissingColumnError(f"column {d.schema[j].name!r} has no observed cell")
    obs_idx = np.flatnonzero(obs)
    mis_idx = np.flatnonzero(~obs)
    rest = np.delete(d.values, j, axis=1)
    return ObservedSplit(obs_idx, mis_idx,
                         x[obs_idx], rest[obs_idx],
                         x[mis_idx], rest[mis_idx])


def column_mean_or_mode(d: DataMatrix, j: int) -> float:
    """Observed mean (continuous) or mode with lowest-index tie-break (categorical)."""
    x = d.values[:, j]
    obs = x[~np.isnan(x)]
    if obs.size == 0:
        raise FullyMissingColumnError(f"column {d.schema[j].name!r} has no observed cell")
    col = d.schema[j]
    if col.kind == CONTINUOUS:
        return float(obs.mean())
    counts = np.bincount(obs.astype(np.int64), minlength=len(col.levels))
    return float(np.argmax(counts))  # argmax picks the lowest index on ties


def initial_impute(d: DataMatrix) -> DataMatrix:
    """Mean/mode starting fill; observed cells are untouched."""
    v = np.array(d.values)
    for j in range(d.p):
        miss = np.isnan(v[:, j])
        if miss.any():
            v[miss, j] = column_mean_or_mode(d, j)
    return d.with_values(v)


# ---------------------------------------------------------------------------
# Schema sidecar and CSV I/O
# ---------------------------------------------------------------------------

def parse_schema(text: str) -> tuple[Column, ...]:
    """One line per column: ``name:kind[:level1,level2,...]``."""
    cols = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(":")
        if len(parts) not in (2, 3):
            raise DataError(f"schema line {lineno}: expected name:kind[:levels]")
        name, kind = parts[0].strip(), parts[1].strip()
        if kind == CONTINUOUS:
            if len(parts) == 3:
                raise DataError(f"schema line {lineno}: continuous column with levels")
            cols.append(Column(name, kind))
        elif kind in (NOMINAL, ORDINAL):
            if len(parts) != 3:
                raise DataError(f"schema line {lineno}: {kind} column needs levels")
            levels = tuple(s.strip() for s in parts[2].split(","))
            if any(not s for s in levels):
                raise DataError(f"schema line {lineno}: empty level label")
            cols.append(Column(name, kind, levels))
        else:
            raise DataError(f"schema line {lineno}: unknown kind {kind!r}")
    if not cols:
        raise DataError("schema defines no columns")
    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise DataError("duplicate column names in schema")
    return tuple(cols)


def load_schema(path) -> tuple[Column, ...]:
    with open(path, "r", newline="") as fh:
        return parse_schema(fh.read())


def save_schema(schema: Iterable[Column], path) -> None:
    with open(path, "w", newline="") as fh:
        for c in schema:
            if c.kind == CONTINUOUS:
                fh.write(f"{c.name}:{c.kind}\n")
            else:
                fh.write(f"{c.name}:{c.kind}:{','.join(c.levels)}\n")


def load_csv(path, schema_path, na_token: str = DEFAULT_NA_TOKEN) -> DataMatrix:
    schema = load_schema(schema_path)
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV file") from None
        if [h.strip() for h in header] != [c.name for c in schema]:
            raise DataError("CSV header does not match schema column names")
        rows = []
        level_index = [
            {lab: k for k, lab in enumerate(c.levels)} if c.is_categorical else None
            for c in schema
        ]
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(schema):
                raise DataError(f"line {lineno}: expected {len(schema)} fields, got {len(rec)}")
            row = np.empty(len(schema))
            for j, (tok, col) in enumerate(zip(rec, schema)):
                tok = tok.strip()
                if tok == na_token:
                    row[j] = np.nan
                elif col.kind == CONTINUOUS:
                    try:
                        row[j] = float(tok)
                    except ValueError:
                        raise DataError(
                            f"line {lineno}: non-numeric token {tok!r} in continuous "
                            f"column {col.name!r}") from None
                else:
                    try:
                        row[j] = level_index[j][tok]
                    except KeyError:
                        raise DataError(
                            f"line {lineno}: unknown level {tok!r} in column {col.name!r}"
                        ) from None
            rows.append(row)
    if not rows:
        raise DataError("CSV contains no data rows")
    return DataMatrix(schema, np.array(rows))


def save_csv(d: DataMatrix, path, na_token: str = DEFAULT_NA_TOKEN) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in d.schema])
        for i in range(d.n):
            rec = []
            for j, col in enumerate(d.schema):
                v = d.values[i, j]
                if np.isnan(v):
                    rec.append(na_token)
                elif col.kind == CONTINUOUS:
                    rec.append(repr(float(v)))
                else:
                    rec.append(col.levels[int(v)])
            writer.writerow(rec)
