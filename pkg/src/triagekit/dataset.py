"""Sparse lab-exam tables: ingestion, first-exam filtering and summaries.

A table is a patients x features matrix where unobserved cells are NaN.
Tables are immutable after construction (the value buffers are marked
read-only) so they can be shared freely across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ParseError, SchemaError

MISSING = float("nan")

#: cell tokens treated as missing, compared case-insensitively after stripping
NA_TOKENS = frozenset({"", "na"})

ID_COLUMN = "patient_id"
LABEL_COLUMN = "special_care"
DAYS_COLUMN = "days"


@dataclass(frozen=True)
class FeatureSpec:
    """One measured variable: display name, unit text and value kind."""

    name: str
    unit: str = ""
    kind: str = "continuous"  # continuous | binary

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "binary"):
            raise SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if self.unit is None:
            raise SchemaError(f"unit may be empty but never absent ({self.name!r})")


@dataclass(frozen=True)
class RecordTable:
    """Immutable patient x feature matrix with optional targets.

    ``values[i, j]`` is the j-th feature of the i-th patient, NaN when
    unobserved. ``special_care`` is a 0/1 array, ``days`` a non-negative
    float array; either may be None when the table carries no targets.
    """

    patient_ids: tuple[str, ...]
    features: tuple[FeatureSpec, ...]
    values: np.ndarray
    special_care: np.ndarray | None = None
    days: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise SchemaError("values must be 2-D (patients x features)")
        if values.shape != (len(self.patient_ids), len(self.features)):
            raise SchemaError(
                f"values shape {values.shape} does not match "
                f"{len(self.patient_ids)} patients x {len(self.features)} features"
            )
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique within a schema")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

        if self.special_care is not None:
            labels = np.ascontiguousarray(self.special_care, dtype=np.int8)
            if labels.shape != (len(self.patient_ids),):
                raise SchemaError("special_care length must equal patient count")
            if not np.isin(labels, (0, 1)).all():
                raise DomainError("special_care must be 0/1")
            labels.flags.writeable = False
            object.__setattr__(self, "special_care", labels)
        if self.days is not None:
            days = np.ascontiguousarray(self.days, dtype=np.float64)
            if days.shape != (len(self.patient_ids),):
                raise SchemaError("days length must equal patient count")
            if np.isnan(days).any() or (days < 0).any():
                raise DomainError("days must be non-negative reals")
            if self.special_care is not None and (days[self.special_care == 0] != 0).any():
                raise DomainError("days must be 0 for patients without special care")
            days.flags.writeable = False
            object.__setattr__(self, "days", days)

    @property
    def n_patients(self) -> int:
        return len(self.patient_ids)

    @property
    def n_features(self) -> int:
        return len(self.features)

    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def select_rows(self, index: np.ndarray) -> "RecordTable":
        """New table containing the given rows (by position), order kept."""
        index = np.asarray(index)
        return RecordTable(
            patient_ids=tuple(self.patient_ids[i] for i in index),
            features=self.features,
            values=self.values[index],
            special_care=None if self.special_care is None else self.special_care[index],
            days=None if self.days is None else self.days[index],
        )

    def with_values(self, values: np.ndarray) -> "RecordTable":
        """Same rows/targets, replaced value matrix (used by imputers)."""
        return RecordTable(
            patient_ids=self.patient_ids,
            features=self.features,
            values=values,
            special_care=self.special_care,
            days=self.days,
        )


@dataclass(frozen=True)
class FeatureSummary:
    name: str
    unit: str
    mean: float
    std: float
    min: float
    iqr: float
    max: float
    coverage: float
    ks: float


@dataclass(frozen=True)
class SummaryStats:
    """Per-feature table statistics in the shape of the exploration report."""

    rows: tuple[FeatureSummary, ...]

    def __iter__(self):
        return iter(self.rows)

    def by_name(self) -> dict[str, FeatureSummary]:
        return {r.name: r for r in self.rows}


def _parse_cell(token: str, row: int, column: str) -> float:
    stripped = token.strip()
    if stripped.lower() in NA_TOKENS:
        return MISSING
    try:
        return float(stripped)
    except ValueError:
        raise ParseError(
            f"unparsable cell {token!r} at row {row}, column {column!r}"
        ) from None


def load_csv(path, schema: Sequence[FeatureSpec]) -> RecordTable:
    """Load a table from CSV.

    The header must contain ``patient_id``, every schema feature name, and
    optionally ``special_care`` / ``days``. Empty cells and the literal
    ``NA`` (case-insensitive) map to missing.
    """
    schema = tuple(schema)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a header row") from None
        rows = list(reader)

    known = {ID_COLUMN, LABEL_COLUMN, DAYS_COLUMN} | {f.name for f in schema}
    for name in header:
        if name not in known:
            raise SchemaError(f"{path}: unknown column {name!r}")
    if ID_COLUMN not in header:
        raise SchemaError(f"{path}: missing required column {ID_COLUMN!r}")
    missing_features = [f.name for f in schema if f.name not in header]
    if missing_features:
        raise SchemaError(f"{path}: columns absent for features {missing_features}")

    col = {name: i for i, name in enumerate(header)}
    n = len(rows)
    values = np.full((n, len(schema)), np.nan)
    ids = []
    has_label = LABEL_COLUMN in col
    has_days = DAYS_COLUMN in col
    labels = np.zeros(n, dtype=np.int8) if has_label else None
    days = np.zeros(n) if has_days else None

    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}")
        ids.append(row[col[ID_COLUMN]])
        for j, spec in enumerate(schema):
            values[i, j] = _parse_cell(row[col[spec.name]], i + 1, spec.name)
        if has_label:
            raw = _parse_cell(row[col[LABEL_COLUMN]], i + 1, LABEL_COLUMN)
            if math.isnan(raw) or raw not in (0.0, 1.0):
                raise ParseError(f"{path}: row {i + 1}: special_care must be 0 or 1")
            labels[i] = int(raw)
        if has_days:
            raw = _parse_cell(row[col[DAYS_COLUMN]], i + 1, DAYS_COLUMN)
            if math.isnan(raw):
                raise ParseError(f"{path}: row {i + 1}: days must be present")
            days[i] = raw

    return RecordTable(tuple(ids), schema, values, labels, days)


def write_csv(path, table: RecordTable) -> None:
    """Write a table as CSV; inverse of :func:`load_csv`.

    Reals are printed with 17 significant digits so a round trip is
    bit-exact; missing cells become empty fields.
    """
    header = [ID_COLUMN]
    if table.special_care is not None:
        header.append(LABEL_COLUMN)
    if table.days is not None:
        header.append(DAYS_COLUMN)
    header.extend(f.name for f in table.features)

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(table.n_patients):
            row = [table.patient_ids[i]]
            if table.special_care is not None:
                row.append(str(int(table.special_care[i])))
            if table.days is not None:
                row.append(f"{table.days[i]:.17g}")
            for v in table.values[i]:
                row.append("" if math.isnan(v) else f"{v:.17g}")
            writer.writerow(row)


@dataclass(frozen=True)
class ExamEvent:
    """One timestamped exam record for a patient, used by the first-exam filter."""

    patient_id: str
    timestamp: float
    values: Sequence[float]
    special_care: int | None = None
    days: float | None = None


def first_exam_filter(events: Iterable[ExamEvent], schema: Sequence[FeatureSpec]) -> RecordTable:
    """Keep exactly one row per patient: the earliest exam on record.

    Timestamp ties are broken by input order (first event wins). Patients
    appear in the output in order of first appearance in the input.
    """
    schema = tuple(schema)
    best: dict[str, tuple[float, int, ExamEvent]] = {}
    order: list[str] = []
    for position, event in enumerate(events):
        key = event.patient_id
        if key not in best:
            order.append(key)
            best[key] = (event.timestamp, position, event)
        else:
            ts, pos, _ = best[key]
            if event.timestamp < ts:
                best[key] = (event.timestamp, position, event)

    n = len(order)
    values = np.full((n, len(schema)), np.nan)
    labels: list[int | None] = []
    days: list[float | None] = []
    for i, pid in enumerate(order):
        event = best[pid][2]
        if len(event.values) != len(schema):
            raise SchemaError(
                f"event for patient {pid!r} has {len(event.values)} values, "
                f"schema has {len(schema)}"
            )
        values[i] = event.values
        labels.append(event.special_care)
        days.append(event.days)

    have_labels = all(v is not None for v in labels) and n > 0
    have_days = all(v is not None for v in days) and n > 0
    return RecordTable(
        tuple(order),
        schema,
        values,
        np.array(labels, dtype=np.int8) if have_labels else None,
        np.array(days, dtype=np.float64) if have_days else None,
    )


def table_to_events(table: RecordTable, timestamps: Sequence[float] | None = None) -> list[ExamEvent]:
    """View a table as one event per row (timestamp 0 unless given)."""
    out = []
    for i in range(table.n_patients):
        out.append(
            ExamEvent(
                patient_id=table.patient_ids[i],
                timestamp=0.0 if timestamps is None else timestamps[i],
                values=table.values[i],
                special_care=None if table.special_care is None else int(table.special_care[i]),
                days=None if table.days is None else float(table.days[i]),
            )
        )
    return out


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic.

    Supremum of the absolute difference between the two empirical CDFs;
    symmetric in its arguments and invariant under any strictly increasing
    transform applied to both samples.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise DomainError("ks_two_sample requires non-empty samples")
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def summarize(table: RecordTable) -> SummaryStats:
    """Per-feature statistics over observed cells only.

    IQR uses linear-interpolation quantiles. The KS column compares the
    feature's distribution between the two special-care classes and is 0
    when labels are absent or either class has no observations. A feature
    with no observed cells gets coverage 0 and NaN for the other stats.
    """
    rows = []
    labels = table.special_care
    n = table.n_patients
    for j, spec in enumerate(table.features):
        column = table.values[:, j]
        observed = ~np.isnan(column)
        count = int(observed.sum())
        coverage = count / n if n else 0.0
        if count == 0:
            rows.append(
                FeatureSummary(spec.name, spec.unit, math.nan, math.nan, math.nan,
                               math.nan, math.nan, coverage, 0.0)
            )
            continue
        sample = column[observed]
        q25, q75 = np.quantile(sample, [0.25, 0.75])
        ks = 0.0
        if labels is not None:
            pos = column[observed & (labels == 1)]
            neg = column[observed & (labels == 0)]
            if pos.size and neg.size:
                ks = ks_two_sample(pos, neg)
        rows.append(
            FeatureSummary(
                name=spec.name,
                unit=spec.unit,
                mean=float(np.mean(sample)),
                std=float(np.std(sample, ddof=1)) if count > 1 else 0.0,
                min=float(np.min(sample)),
                iqr=float(q75 - q25),
                max=float(np.max(sample)),
                coverage=coverage,
                ks=ks,
            )
        )
    return SummaryStats(tuple(rows))


def write_summary_csv(path, stats: SummaryStats) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Feature", "Unit", "Mean", "Std", "Min", "IQR", "Max",
                         "Coverage (%)", "KS Statistic"])
        for r in stats:
            writer.writerow([
                r.name, r.unit,
                _fmt(r.mean), _fmt(r.std), _fmt(r.min), _fmt(r.iqr), _fmt(r.max),
                _fmt(r.coverage * 100.0), _fmt(r.ks),
            ])


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.17g}"
