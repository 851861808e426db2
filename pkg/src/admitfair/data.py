"""Tabular ingestion: CSV parsing, multi-source merging, imputation and anomaly cleaning."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
DEFAULT_MISSING_MARKERS = ("", "NA")


class DataError(ValueError):
    """Raised for malformed or inconsistent tabular input."""


@dataclass
class DataTable:
    """Named, typed columns with stable row ids.

    Numeric columns are stored as float64 with NaN for missing cells,
    categorical columns as object dtype with ``None`` for missing cells.
    The frame index holds the row ids.
    """

    frame: pd.DataFrame
    kinds: dict[str, str]

    def __post_init__(self):
        if list(self.frame.columns) != list(self.kinds):
            raise DataError("column kinds do not match frame columns")
        if not self.frame.index.is_unique:
            raise DataError("row ids must be unique")
        for name, kind in self.kinds.items():
            if kind not in (NUMERIC, CATEGORICAL):
                raise DataError(f"unknown column kind {kind!r} for {name!r}")

    @classmethod
    def from_columns(cls, columns: Mapping[str, Sequence], kinds: Mapping[str, str] | None = None,
                     row_ids: Sequence[int] | None = None) -> "DataTable":
        """Build a table from plain python columns; ``None``/NaN mark missing cells."""
        kinds = dict(kinds or {})
        data = {}
        for name, values in columns.items():
            kind = kinds.get(name) or _infer_kind(values)
            kinds[name] = kind
            data[name] = _coerce(values, kind, name)
        n = len(next(iter(data.values()))) if data else 0
        index = pd.Index(list(row_ids) if row_ids is not None else range(n), name="row_id")
        frame = pd.DataFrame(data, index=index)
        return cls(frame, {name: kinds[name] for name in data})

    @property
    def columns(self) -> list[str]:
        return list(self.kinds)

    @property
    def row_ids(self) -> list[int]:
        return [int(i) for i in self.frame.index]

    def __len__(self) -> int:
        return len(self.frame)

    def column(self, name: str) -> pd.Series:
        if name not in self.kinds:
            raise KeyError(f"no column {name!r}")
        return self.frame[name]

    def missing_mask(self) -> pd.DataFrame:
        return self.frame.isna()

    def select_rows(self, mask) -> "DataTable":
        return DataTable(self.frame.loc[mask].copy(), dict(self.kinds))

    def drop_columns(self, names: Iterable[str]) -> "DataTable":
        names = list(names)
        kinds = {k: v for k, v in self.kinds.items() if k not in names}
        return DataTable(self.frame.drop(columns=names).copy(), kinds)

    def with_column(self, name: str, values, kind: str) -> "DataTable":
        frame = self.frame.copy()
        frame[name] = _coerce(list(values), kind, name)
        kinds = dict(self.kinds)
        kinds[name] = kind
        return DataTable(frame, kinds)

    def rename(self, mapping: Mapping[str, str]) -> "DataTable":
        kinds = {mapping.get(k, k): v for k, v in self.kinds.items()}
        return DataTable(self.frame.rename(columns=dict(mapping)), kinds)

    def equals(self, other: "DataTable") -> bool:
        if self.kinds != other.kinds or self.row_ids != other.row_ids:
            return False
        return self.frame.equals(other.frame)

    def to_csv(self, include_row_ids: bool = False) -> str:
        return serialize_csv(self, include_row_ids=include_row_ids)


def _infer_kind(values) -> str:
    for v in values:
        if v is None or (isinstance(v, float) and np.isnan(v)):
            continue
        if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, float, np.integer, np.floating)):
            return CATEGORICAL
    return NUMERIC


def _coerce(values, kind: str, name: str):
    if kind == NUMERIC:
        out = []
        for v in values:
            if v is None:
                out.append(np.nan)
            elif isinstance(v, str):
                raise DataError(f"column {name!r} is numeric but holds text {v!r}")
            else:
                out.append(float(v))
        return np.asarray(out, dtype=float)
    out = []
    for v in values:
        if v is None or (isinstance(v, float) and np.isnan(v)):
            out.append(None)
        else:
            out.append(str(v))
    return pd.array(out, dtype=object)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_csv(source, declared_schema: Mapping[str, str] | None = None,
              missing_markers: Sequence[str] = DEFAULT_MISSING_MARKERS) -> DataTable:
    """Parse a UTF-8 CSV with a header row into a :class:`DataTable`.

    ``source`` may be bytes, text, a path-like, or a binary/text stream.
    A column is numeric when every non-missing cell parses as a float,
    unless ``declared_schema`` says otherwise.
    """
    text = _read_text(source)
    if not text.strip():
        raise DataError("empty CSV input")
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty CSV input") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise DataError(f"duplicate column names in header: {header}")

    markers = set(missing_markers)
    raw_rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(
                f"ragged row at line {line_no}: expected {len(header)} fields, got {len(row)}")
        raw_rows.append([None if cell in markers else cell for cell in row])

    declared = dict(declared_schema or {})
    unknown = set(declared) - set(header)
    if unknown:
        raise DataError(f"declared schema names unknown columns: {sorted(unknown)}")

    columns, kinds = {}, {}
    for j, name in enumerate(header):
        cells = [r[j] for r in raw_rows]
        kind = declared.get(name)
        if kind is None:
            kind = NUMERIC if all(c is None or _is_number(c) for c in cells) else CATEGORICAL
        if kind == NUMERIC:
            values = []
            for i, c in enumerate(cells):
                if c is None:
                    values.append(None)
                elif _is_number(c):
                    values.append(float(c))
                else:
                    raise DataError(f"row {i} column {name!r}: {c!r} is not numeric")
            columns[name] = values
        else:
            columns[name] = cells
        kinds[name] = kind
    return DataTable.from_columns(columns, kinds)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, str):
        # strings with a line break are CSV text, anything else is a path
        if "\n" in source or not source.strip():
            return source
        if not os.path.exists(source):
            raise DataError(f"no such file: {source}")
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8-sig")
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8-sig") if isinstance(data, bytes) else data
    with open(source, "rb") as fh:
        return fh.read().decode("utf-8-sig")


def _format_cell(value, kind: str) -> str:
    if kind == NUMERIC:
        if value is None or np.isnan(value):
            return "NA"
        return repr(float(value))
    return "NA" if value is None else str(value)


def serialize_csv(table: DataTable, include_row_ids: bool = False) -> str:
    """Render a table as CSV; parse_csv of the result reproduces the table."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = (["row_id"] if include_row_ids else []) + table.columns
    writer.writerow(header)
    kinds = list(table.kinds.values())
    for rid, row in zip(table.row_ids, table.frame.itertuples(index=False)):
        cells = [_format_cell(v, k) for v, k in zip(row, kinds)]
        writer.writerow(([str(rid)] if include_row_ids else []) + cells)
    return buf.getvalue()


def merge_outer(tables: Sequence[tuple[DataTable, str]], context_column: str = "context") -> DataTable:
    """Stack several sources into one table with a per-row context flag.

    Columns are the union of the inputs (in first-seen order) plus the
    categorical context column. Cells a source does not have become missing.
    Sources are disjoint populations, so rows are concatenated rather than
    matched on a key.
    """
    if not tables:
        raise DataError("merge_outer needs at least one table")
    flags = [flag for _, flag in tables]
    if len(set(flags)) != len(flags):
        raise DataError(f"context flags must be distinct, got {flags}")

    kinds: dict[str, str] = {}
    for table, flag in tables:
        for name, kind in table.kinds.items():
            if name == context_column:
                raise DataError(f"source {flag!r} already has a {context_column!r} column")
            if kinds.setdefault(name, kind) != kind:
                raise DataError(
                    f"harmonization error: column {name!r} is {kinds[name]} in one source "
                    f"and {kind} in {flag!r}")

    frames = []
    for table, flag in tables:
        frame = table.frame.reindex(columns=list(kinds))
        for name, kind in kinds.items():
            if kind == CATEGORICAL:
                frame[name] = frame[name].astype(object).where(frame[name].notna(), None)
        frame[context_column] = flag
        frames.append(frame.reset_index(drop=True))
    merged = pd.concat(frames, ignore_index=True)
    merged.index = pd.RangeIndex(len(merged), name="row_id")
    for name, kind in kinds.items():
        merged[name] = merged[name].astype(float) if kind == NUMERIC else merged[name].astype(object)
    kinds[context_column] = CATEGORICAL
    return DataTable(merged, kinds)


def impute(table: DataTable) -> DataTable:
    """Fill numeric gaps with the column mean and categorical gaps with the mode.

    Mode ties go to the lexicographically smallest category.
    """
    frame = table.frame.copy()
    for name, kind in table.kinds.items():
        col = frame[name]
        present = col.dropna()
        if present.empty:
            raise DataError(f"cannot impute column {name!r}: every cell is missing")
        if not col.isna().any():
            continue
        if kind == NUMERIC:
            frame[name] = col.fillna(float(present.mean()))
        else:
            counts = present.value_counts()
            top = counts.max()
            fill = min(str(c) for c, n in counts.items() if n == top)
            frame[name] = col.where(col.notna(), fill).astype(object)
    return DataTable(frame, dict(table.kinds))


def drop_high_missingness(table: DataTable, threshold: float = 0.30,
                          exempt: Iterable[str] = ()) -> tuple[DataTable, list[str]]:
    """Drop columns whose missing fraction is strictly above ``threshold``.

    Columns listed in ``exempt`` (label, sensitive attributes) are never dropped.
    """
    if len(table) == 0:
        raise DataError("drop_high_missingness needs a nonempty table")
    exempt = set(exempt)
    fractions = table.missing_mask().mean(axis=0)
    dropped = [name for name in table.columns
               if name not in exempt and float(fractions[name]) > threshold]
    if dropped:
        logger.info("dropping columns above %.0f%% missing: %s", threshold * 100, dropped)
    return table.drop_columns(dropped), dropped


@dataclass(frozen=True)
class CleaningRule:
    """Label-consistency rule for graduate admission rows.

    A row is anomalous when a strong profile is labelled rejected or a
    weak profile is labelled admitted. ``label`` may hold a probability;
    values ``>= label_threshold`` count as admitted.
    """

    gre_min: float = 320.0
    cgpa_min: float = 9.5
    gre_max: float = 300.0
    cgpa_max: float = 8.0
    gre_column: str = "GRE"
    cgpa_column: str = "CGPA"
    label: str = "admit_prob"
    label_threshold: float = 0.5

    def __post_init__(self):
        if not self.gre_min > self.gre_max:
            raise ValueError("gre_min must exceed gre_max")
        if not self.cgpa_min > self.cgpa_max:
            raise ValueError("cgpa_min must exceed cgpa_max")

    def masks(self, table: DataTable) -> tuple[np.ndarray, np.ndarray]:
        missing = [c for c in (self.gre_column, self.cgpa_column, self.label) if c not in table.kinds]
        if missing:
            raise DataError(f"cleaning rule needs columns {missing}")
        gre = table.column(self.gre_column).to_numpy(dtype=float)
        cgpa = table.column(self.cgpa_column).to_numpy(dtype=float)
        admitted = table.column(self.label).to_numpy(dtype=float) >= self.label_threshold
        strong_rejected = (gre >= self.gre_min) & (cgpa >= self.cgpa_min) & ~admitted
        weak_admitted = (gre <= self.gre_max) & (cgpa <= self.cgpa_max) & admitted
        return strong_rejected, weak_admitted


@dataclass
class CleaningLog:
    rows_before: int
    rows_after: int
    removed_row_ids: list[int]
    rule_hits: dict[str, int]
    removed_by_rule: dict[str, list[int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rows_before": self.rows_before,
            "rows_after": self.rows_after,
            "removed_row_ids": list(self.removed_row_ids),
            "rule_hits": dict(self.rule_hits),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def clean_anomalies(table: DataTable, rule: CleaningRule | None = None) -> tuple[DataTable, CleaningLog]:
    """Remove rows whose label contradicts the academic profile."""
    rule = rule or CleaningRule()
    strong_rejected, weak_admitted = rule.masks(table)
    remove = strong_rejected | weak_admitted
    ids = np.asarray(table.row_ids)
    log = CleaningLog(
        rows_before=len(table),
        rows_after=int(len(table) - remove.sum()),
        removed_row_ids=[int(i) for i in ids[remove]],
        rule_hits={"strong_rejected": int(strong_rejected.sum()),
                   "weak_admitted": int(weak_admitted.sum())},
        removed_by_rule={"strong_rejected": [int(i) for i in ids[strong_rejected]],
                         "weak_admitted": [int(i) for i in ids[weak_admitted]]},
    )
    logger.info("anomaly cleaning removed %d of %d rows (rule %s)",
                len(log.removed_row_ids), log.rows_before, rule)
    return table.select_rows(~remove), log
