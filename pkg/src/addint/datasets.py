"""Case-control dataset representation, CSV ingestion and validation.

The file format is comma-separated text with a mandatory header row, ``.``
as the decimal separator and no missing values: an empty cell is a hard
error. Column roles are never inferred; a Schema names the outcome column,
the two exposure columns with their kinds, optional covariate columns and
an optional sampling-weight column. Datasets are immutable after
construction and safe to share across threads.

Row indices in error messages are 0-based over data rows (header excluded).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataError, SchemaError, ValidationError

KINDS = ("binary", "categorical", "count", "continuous")


@dataclass(frozen=True)
class ExposureKind:
    """Exposure type tag. Categorical kinds carry the level count K and use
    0 as the reference level."""

    tag: str
    n_levels: int | None = None

    def __post_init__(self):
        if self.tag not in KINDS:
            raise SchemaError(f"unknown exposure kind {self.tag!r}; choose from {KINDS}")
        if self.tag == "categorical":
            if self.n_levels is None or self.n_levels < 2:
                raise SchemaError("categorical kind needs n_levels >= 2 (e.g. 'categorical:3')")
        elif self.n_levels is not None:
            raise SchemaError(f"kind {self.tag!r} does not take a level count")

    @classmethod
    def parse(cls, text: str) -> "ExposureKind":
        text = text.strip()
        if text.startswith("categorical"):
            _, _, k = text.partition(":")
            if not k:
                raise SchemaError("categorical kind must be written 'categorical:K'")
            try:
                return cls("categorical", int(k))
            except ValueError:
                raise SchemaError(f"bad categorical level count {k!r}") from None
        return cls(text)

    def __str__(self) -> str:
        if self.tag == "categorical":
            return f"categorical:{self.n_levels}"
        return self.tag

    @property
    def is_discrete(self) -> bool:
        return self.tag in ("binary", "categorical", "count")


@dataclass(frozen=True)
class Schema:
    """Column-role mapping for a delimited file."""

    outcome: str
    a1: str
    a2: str
    kind_a1: ExposureKind
    kind_a2: ExposureKind
    covariates: tuple[str, ...] = ()
    weight: str | None = None

    def __post_init__(self):
        names = [self.outcome, self.a1, self.a2, *self.covariates]
        if self.weight is not None:
            names.append(self.weight)
        dupes = {c for c in names if names.count(c) > 1}
        if dupes:
            raise SchemaError(f"column(s) used in more than one role: {sorted(dupes)}")

    def columns(self) -> list[str]:
        cols = [self.outcome, self.a1, self.a2, *self.covariates]
        if self.weight is not None:
            cols.append(self.weight)
        return cols


def parse_schema_file(path) -> Schema:
    """Read a plain-text schema of ``key = value`` lines.

    Recognised keys: outcome, a1, a2, kind.a1, kind.a2, covariates
    (comma-separated), weight. Blank lines and '#' comments are ignored.
    """
    entries: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"schema line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return schema_from_entries(entries)


def schema_from_entries(entries: dict[str, str]) -> Schema:
    for required in ("outcome", "a1", "a2", "kind.a1", "kind.a2"):
        if required not in entries or not entries[required]:
            raise SchemaError(f"schema is missing required key {required!r}")
    covariates = tuple(
        c.strip() for c in entries.get("covariates", "").split(",") if c.strip()
    )
    return Schema(
        outcome=entries["outcome"],
        a1=entries["a1"],
        a2=entries["a2"],
        kind_a1=ExposureKind.parse(entries["kind.a1"]),
        kind_a2=ExposureKind.parse(entries["kind.a2"]),
        covariates=covariates,
        weight=entries.get("weight") or None,
    )


@dataclass(frozen=True)
class Dataset:
    """Validated case-control records.

    d is the 0/1 outcome (1 = case); a1 and a2 are the exposure columns with
    their kinds; x is the n-by-p covariate matrix (p may be 0); w holds
    optional positive sampling weights (absent means the rare-disease,
    controls-only estimation path; present activates the inverse-probability
    weighted full-sample path). All arrays are read-only.
    """

    d: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    kind_a1: ExposureKind
    kind_a2: ExposureKind
    x: np.ndarray
    covariate_names: tuple[str, ...] = ()
    w: np.ndarray | None = None
    schema: Schema | None = field(default=None, compare=False)

    def __post_init__(self):
        for arr in (self.d, self.a1, self.a2, self.x) + (() if self.w is None else (self.w,)):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.d.size

    @property
    def n_cases(self) -> int:
        return int(np.sum(self.d == 1))

    @property
    def n_controls(self) -> int:
        return int(np.sum(self.d == 0))

    @property
    def has_weights(self) -> bool:
        return self.w is not None


def _validate_column(values: np.ndarray, kind: ExposureKind, name: str) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise ValidationError(f"column {name!r} has a non-finite value", row=int(np.argmax(bad)))
    if kind.tag == "binary":
        bad = (values != 0.0) & (values != 1.0)
        if np.any(bad):
            raise ValidationError(
                f"column {name!r} declared binary but contains {values[bad][0]:g}",
                row=int(np.argmax(bad)),
            )
    elif kind.tag == "categorical":
        levels = np.arange(kind.n_levels)
        bad = ~np.isin(values, levels)
        if np.any(bad):
            raise ValidationError(
                f"column {name!r} declared categorical:{kind.n_levels} but contains "
                f"{values[bad][0]:g}",
                row=int(np.argmax(bad)),
            )
    elif kind.tag == "count":
        bad = (values < 0) | (values != np.floor(values))
        if np.any(bad):
            raise ValidationError(
                f"column {name!r} declared count but contains {values[bad][0]:g}",
                row=int(np.argmax(bad)),
            )


def make_dataset(
    d,
    a1,
    a2,
    kind_a1: ExposureKind,
    kind_a2: ExposureKind,
    x=None,
    covariate_names: tuple[str, ...] = (),
    w=None,
    schema: Schema | None = None,
) -> Dataset:
    """Build and validate a Dataset from arrays. Row order is preserved."""
    d = np.asarray(d, dtype=np.float64).copy()
    a1 = np.asarray(a1, dtype=np.float64).copy()
    a2 = np.asarray(a2, dtype=np.float64).copy()
    n = d.size
    if n < 1:
        raise ValidationError("dataset must contain at least one record")
    if x is None:
        x = np.empty((n, 0))
    x = np.asarray(x, dtype=np.float64).reshape(n, -1).copy()
    if len(covariate_names) != x.shape[1]:
        raise SchemaError(
            f"{x.shape[1]} covariate column(s) but {len(covariate_names)} name(s)"
        )
    for arr, name in ((a1, "a1"), (a2, "a2")):
        if arr.shape != (n,):
            raise ValidationError(f"column {name!r} length {arr.size} != {n}")
    bad = (d != 0.0) & (d != 1.0)
    if np.any(bad):
        raise ValidationError(
            f"outcome contains {d[bad][0]:g}, expected 0/1", row=int(np.argmax(bad))
        )
    _validate_column(a1, kind_a1, "a1")
    _validate_column(a2, kind_a2, "a2")
    if not np.all(np.isfinite(x)):
        row = int(np.argmax(~np.isfinite(x).all(axis=1)))
        raise ValidationError("covariate matrix has a non-finite value", row=row)
    if w is not None:
        w = np.asarray(w, dtype=np.float64).copy()
        if w.shape != (n,):
            raise ValidationError(f"weight column length {w.size} != {n}")
        bad = ~(np.isfinite(w) & (w > 0))
        if np.any(bad):
            raise ValidationError(
                f"weights must be positive, got {w[bad][0]:g}", row=int(np.argmax(bad))
            )
    return Dataset(
        d=d,
        a1=a1,
        a2=a2,
        kind_a1=kind_a1,
        kind_a2=kind_a2,
        x=x,
        covariate_names=tuple(covariate_names),
        w=w,
        schema=schema,
    )


def load_dataset(path, schema: Schema) -> Dataset:
    """Read a CSV file under a schema. Missing columns raise SchemaError
    naming the column; a bad cell raises ValidationError with its row index;
    an empty file raises EmptyDataError."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        missing = [c for c in schema.columns() if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        idx = {c: header.index(c) for c in schema.columns()}
        rows = list(reader)
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")

    def column(name: str) -> np.ndarray:
        out = np.empty(len(rows))
        col = idx[name]
        for i, row in enumerate(rows):
            if col >= len(row) or row[col].strip() == "":
                raise ValidationError(f"missing value in column {name!r}", row=i)
            try:
                out[i] = float(row[col])
            except ValueError:
                raise ValidationError(
                    f"non-numeric value {row[col]!r} in column {name!r}", row=i
                ) from None
        return out

    x_cols = [column(c) for c in schema.covariates]
    x = np.column_stack(x_cols) if x_cols else np.empty((len(rows), 0))
    return make_dataset(
        d=column(schema.outcome),
        a1=column(schema.a1),
        a2=column(schema.a2),
        kind_a1=schema.kind_a1,
        kind_a2=schema.kind_a2,
        x=x,
        covariate_names=schema.covariates,
        w=column(schema.weight) if schema.weight else None,
        schema=schema,
    )


def _format_value(v: float, integer: bool) -> str:
    if integer:
        return str(int(v))
    return repr(float(v))


def write_dataset(ds: Dataset, path) -> None:
    """Write a Dataset back to CSV. Integer-valued columns are written as
    integers; continuous columns use shortest round-trip decimal encoding,
    so load(write(ds)) == ds and a second write is byte-identical."""
    schema = ds.schema
    if schema is None:
        schema = Schema(
            outcome="d",
            a1="a1",
            a2="a2",
            kind_a1=ds.kind_a1,
            kind_a2=ds.kind_a2,
            covariates=ds.covariate_names or tuple(f"x{i}" for i in range(ds.x.shape[1])),
            weight="w" if ds.has_weights else None,
        )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema.columns())
    a1_int = ds.kind_a1.is_discrete
    a2_int = ds.kind_a2.is_discrete
    for i in range(ds.n):
        row = [
            _format_value(ds.d[i], True),
            _format_value(ds.a1[i], a1_int),
            _format_value(ds.a2[i], a2_int),
        ]
        row.extend(_format_value(ds.x[i, j], False) for j in range(ds.x.shape[1]))
        if ds.has_weights:
            row.append(_format_value(ds.w[i], False))
        writer.writerow(row)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


@dataclass(frozen=True)
class DatasetSummary:
    n: int
    n_cases: int
    n_controls: int
    usable: bool
    reason: str
    exposures: dict

    def to_text(self) -> str:
        lines = [
            f"records          {self.n}",
            f"cases            {self.n_cases}",
            f"controls         {self.n_controls}",
            f"usable for tests {'yes' if self.usable else 'no (' + self.reason + ')'}",
        ]
        for name, table in self.exposures.items():
            lines.append(f"{name}:")
            for status, stats in table.items():
                parts = ", ".join(f"{k}={v:.6g}" for k, v in stats.items())
                lines.append(f"  {status:9s} {parts}")
        return "\n".join(lines)


def _exposure_stats(values: np.ndarray, kind: ExposureKind) -> dict:
    if values.size == 0:
        return {"n": 0}
    if kind.tag in ("binary", "categorical"):
        levels = range(2 if kind.tag == "binary" else kind.n_levels)
        out = {"n": values.size}
        for lv in levels:
            out[f"freq[{lv}]"] = float(np.mean(values == lv))
        return out
    return {
        "n": values.size,
        "mean": float(values.mean()),
        "sd": float(values.std(ddof=1)) if values.size > 1 else 0.0,
    }


def summarize(ds: Dataset) -> DatasetSummary:
    """Counts of cases/controls plus per-exposure level frequencies or
    moments stratified by case status. Datasets without both cases and
    controls are flagged unusable for testing."""
    cases = ds.d == 1
    usable = ds.n_cases > 0 and ds.n_controls > 0
    if usable:
        reason = ""
    elif ds.n_cases == 0:
        reason = "no cases"
    else:
        reason = "no controls"
    exposures = {}
    for name, col, kind in (("a1", ds.a1, ds.kind_a1), ("a2", ds.a2, ds.kind_a2)):
        exposures[name] = {
            "cases": _exposure_stats(col[cases], kind),
            "controls": _exposure_stats(col[~cases], kind),
        }
    return DatasetSummary(
        n=ds.n,
        n_cases=ds.n_cases,
        n_controls=ds.n_controls,
        usable=usable,
        reason=reason,
        exposures=exposures,
    )
