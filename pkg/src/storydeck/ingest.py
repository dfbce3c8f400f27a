"""Input parsing: CSV datasets and the supported chart-spec subset.

The chart grammar is a small Vega-Lite-flavored subset: marks bar/line/point,
x/y/color encodings, and equality filter transforms. ``resolve_chart`` turns a
spec plus dataset into the aggregated table every downstream module consumes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from typing import Mapping

from .errors import (
    EmptySelection,
    EncodingError,
    MissingEncoding,
    ParseError,
    UnknownColumn,
    UnsupportedMark,
)
from .model import (
    AGGREGATES,
    CellValue,
    Column,
    Dataset,
    Measure,
    Subspace,
    coerce_filter_value,
    evaluate_subspace,
    pairs_from_json,
    pairs_to_json,
    validate_dataset,
)

SUPPORTED_MARKS = ("bar", "line", "point")

_KNOWN_SPEC_KEYS = {"chart_id", "mark", "encoding", "transform"}


# ---------------------------------------------------------------------------
# CSV loading


def _records(text: str):
    """Yield (1-based start line, record text) for each CSV record.

    Records may span physical lines via quoted newlines; a record whose
    quotes never balance by end of input is reported at its starting line.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    buf: list[str] = []
    start = 1
    quotes = 0
    for i, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if not buf:
            start = i
        buf.append(line)
        quotes += line.count('"')
        if quotes % 2 == 0:
            record = "\n".join(buf)
            buf = []
            quotes = 0
            if record.strip() != "":
                yield start, record
    if buf:
        raise ParseError(start, "unbalanced quote in record")


def _split_record(start_line: int, record: str) -> list[str]:
    try:
        rows = list(csv.reader(io.StringIO(record), strict=True))
    except csv.Error as e:
        raise ParseError(start_line, str(e)) from e
    if len(rows) != 1:
        raise ParseError(start_line, "record did not parse to a single row")
    return rows[0]


def load_dataset(data: bytes | str, format_hint: str | None = None, name: str = "dataset") -> Dataset:
    """Parse an RFC-4180 CSV with a header row into a validated Dataset.

    Raises:
        EncodingError: bytes are not UTF-8.
        ParseError: malformed CSV, with the 1-based line number.
    """
    if format_hint not in (None, "csv"):
        raise ParseError(0, f"unsupported format hint {format_hint!r}")
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise EncodingError(f"dataset is not valid UTF-8: {e}") from e
    else:
        text = data

    header: list[str] | None = None
    rows: list[tuple[CellValue, ...]] = []
    for start_line, record in _records(text):
        cells = _split_record(start_line, record)
        if header is None:
            header = [c.strip() for c in cells]
            continue
        rows.append(tuple(c if c != "" else None for c in cells))
    if header is None:
        raise ParseError(0, "no header row")
    raw = Dataset(
        name=name,
        columns=tuple(Column(name=h) for h in header),
        rows=tuple(rows),
    )
    return validate_dataset(raw)


# ---------------------------------------------------------------------------
# Chart specs


@dataclass(frozen=True)
class Encoding:
    field: str
    aggregate: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"field": self.field}
        if self.aggregate:
            out["aggregate"] = self.aggregate
        return out


@dataclass(frozen=True)
class ChartSpec:
    chart_id: str | None
    mark: str
    x: Encoding
    y: Encoding
    color: str | None
    filters: Subspace
    warnings: tuple[str, ...] = ()

    @property
    def x_is_measure(self) -> bool:
        return self.x.aggregate is not None

    def measure(self) -> Measure:
        enc = self.x if self.x_is_measure else self.y
        return (enc.field, enc.aggregate)  # type: ignore[return-value]

    def dimension_column(self) -> str:
        return self.y.field if self.x_is_measure else self.x.field

    def to_dict(self) -> dict:
        out: dict = {
            "chart_id": self.chart_id,
            "mark": self.mark,
            "encoding": {"x": self.x.to_dict(), "y": self.y.to_dict()},
        }
        if self.color:
            out["encoding"]["color"] = {"field": self.color}
        if self.filters:
            out["transform"] = [
                {"filter": {"field": c, "equal": v}} for c, v in pairs_to_json(self.filters)
            ]
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChartSpec":
        return parse_chart_spec(dict(data))


def _parse_encoding(enc: Mapping, axis: str) -> Encoding:
    if not isinstance(enc, Mapping) or "field" not in enc:
        raise MissingEncoding(f"{axis} encoding must carry a field")
    agg = enc.get("aggregate")
    if agg is not None and agg not in AGGREGATES:
        raise ParseError(0, f"unsupported aggregate {agg!r} on {axis}")
    return Encoding(field=str(enc["field"]), aggregate=agg)


def parse_chart_spec(source: str | Mapping, dataset: Dataset | None = None) -> ChartSpec:
    """Parse a chart-spec document, applying defaults (mark=bar, no filters).

    Unknown top-level keys are collected into ``spec.warnings``. When a
    dataset is supplied, referenced columns are checked against it and the
    measure side may be inferred from column kinds.

    Raises:
        MissingEncoding, UnknownColumn, UnsupportedMark, ParseError
    """
    if isinstance(source, str):
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as e:
            raise ParseError(e.lineno, f"invalid chart spec document: {e.msg}") from e
    else:
        obj = dict(source)
    if not isinstance(obj, dict):
        raise ParseError(0, "chart spec must be an object")

    warnings = tuple(
        f"ignored unknown key {k!r}" for k in obj.keys() if k not in _KNOWN_SPEC_KEYS
    )

    mark = obj.get("mark", "bar")
    if mark not in SUPPORTED_MARKS:
        raise UnsupportedMark(f"mark {mark!r} not in supported set {SUPPORTED_MARKS}")

    encoding = obj.get("encoding")
    if not isinstance(encoding, Mapping) or "x" not in encoding or "y" not in encoding:
        raise MissingEncoding("encoding must define both x and y")
    x = _parse_encoding(encoding["x"], "x")
    y = _parse_encoding(encoding["y"], "y")
    color_enc = encoding.get("color")
    color = None
    if color_enc is not None:
        color = str(color_enc["field"]) if isinstance(color_enc, Mapping) and "field" in color_enc else None
        if color is None:
            raise MissingEncoding("color encoding must carry a field")

    filters: dict[str, CellValue] = {}
    for t in obj.get("transform", ()):
        flt = t.get("filter") if isinstance(t, Mapping) else None
        if not isinstance(flt, Mapping) or "field" not in flt or "equal" not in flt:
            raise ParseError(0, "only equality filter transforms are supported")
        col, value = str(flt["field"]), flt["equal"]
        if col in filters and filters[col] != value:
            raise ParseError(0, f"conflicting filters on column {col!r}")
        filters[col] = value

    spec = ChartSpec(
        chart_id=obj.get("chart_id"),
        mark=mark,
        x=x,
        y=y,
        color=color,
        filters=frozenset(filters.items()),
        warnings=warnings,
    )
    return _check_measure(spec, dataset)


def _check_measure(spec: ChartSpec, dataset: Dataset | None) -> ChartSpec:
    if dataset is not None:
        for col in {spec.x.field, spec.y.field, *(c for c, _ in spec.filters), *
                    ([spec.color] if spec.color else [])}:
            dataset.column_index(col)  # raises UnknownColumn

    x_agg, y_agg = spec.x.aggregate, spec.y.aggregate
    if x_agg and y_agg:
        raise MissingEncoding("exactly one of x/y may carry an aggregate measure")
    if not x_agg and not y_agg:
        if dataset is None:
            raise MissingEncoding("no aggregate given and no dataset to infer the measure from")
        x_numeric = dataset.column(spec.x.field).kind == "numeric"
        y_numeric = dataset.column(spec.y.field).kind == "numeric"
        if x_numeric == y_numeric:
            raise MissingEncoding("exactly one of x/y must be a numeric measure")
        if x_numeric:
            spec = replace(spec, x=replace(spec.x, aggregate="sum"))
        else:
            spec = replace(spec, y=replace(spec.y, aggregate="sum"))

    if dataset is not None:
        col, agg = spec.measure()
        if agg != "count" and dataset.column(col).kind != "numeric":
            raise MissingEncoding(
                f"measure column {col!r} must be numeric for aggregate {agg!r}"
            )
    return spec


# ---------------------------------------------------------------------------
# Chart resolution


@dataclass(frozen=True)
class ChartContext:
    """A chart resolved against its dataset: subspace, dimension, and the
    aggregated (dimension value -> measure value) table.

    Rows whose dimension cell is null are excluded from the table; non-count
    aggregates drop groups with no non-null measure cells.
    """

    spec: ChartSpec
    subspace: Subspace
    dimension: str
    dimension_kind: str
    breakdown: str | None
    measures: tuple[Measure, ...]
    table: tuple[tuple[CellValue, int | float], ...]
    color_table: tuple[tuple[CellValue, CellValue, int | float], ...] = ()

    @property
    def chart_id(self) -> str:
        return self.spec.chart_id or ""

    def dimension_values(self) -> list[CellValue]:
        return [v for v, _ in self.table]

    def measure_values(self) -> list[int | float]:
        return [m for _, m in self.table]

    def to_dict(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "spec": self.spec.to_dict(),
            "subspace": pairs_to_json(self.subspace),
            "dimension": self.dimension,
            "dimension_kind": self.dimension_kind,
            "breakdown": self.breakdown,
            "measures": [list(m) for m in self.measures],
            "table": [list(r) for r in self.table],
            "color_table": [list(r) for r in self.color_table],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChartContext":
        return cls(
            spec=parse_chart_spec(data["spec"]),
            subspace=pairs_from_json(data["subspace"]),
            dimension=data["dimension"],
            dimension_kind=data.get("dimension_kind", "categorical"),
            breakdown=data.get("breakdown"),
            measures=tuple((m[0], m[1]) for m in data["measures"]),
            table=tuple((r[0], r[1]) for r in data["table"]),
            color_table=tuple((r[0], r[1], r[2]) for r in data.get("color_table", ())),
        )


def _aggregate(agg: str, group_rows: list, measure_idx: int) -> int | float | None:
    if agg == "count":
        return len(group_rows)
    values = [r[measure_idx] for r in group_rows if r[measure_idx] is not None]
    if not values:
        return None
    if agg == "sum":
        return sum(values)
    if agg == "mean":
        return sum(values) / len(values)
    if agg == "min":
        return min(values)
    if agg == "max":
        return max(values)
    raise ValueError(f"unknown aggregate {agg!r}")


def resolve_chart(dataset: Dataset, spec: ChartSpec) -> ChartContext:
    """Aggregate the filtered dataset along the chart's dimension.

    Dimension values are ordered ascending for temporal dimensions and by
    first appearance otherwise.

    Raises:
        EmptySelection: the filters match no rows.
        UnknownColumn: the spec references a column the dataset lacks.
    """
    spec = _check_measure(spec, dataset)
    subspace: Subspace = frozenset(
        (c, coerce_filter_value(dataset, c, v)) for c, v in spec.filters
    )
    rows = evaluate_subspace(dataset, subspace)
    if not rows:
        raise EmptySelection("chart filters match no rows")

    dim = spec.dimension_column()
    dim_idx = dataset.column_index(dim)
    dim_kind = dataset.column(dim).kind or "categorical"
    measure_col, agg = spec.measure()
    measure_idx = dataset.column_index(measure_col)

    groups: dict[CellValue, list] = {}
    order: list[CellValue] = []
    for row in rows:
        key = row[dim_idx]
        if key is None:
            continue
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    if dim_kind == "temporal":
        order = sorted(order)

    table = []
    for key in order:
        value = _aggregate(agg, groups[key], measure_idx)
        if value is not None:
            table.append((key, value))
    if not table:
        raise EmptySelection("no aggregable rows under the chart filters")

    color_table: list[tuple[CellValue, CellValue, int | float]] = []
    if spec.color:
        color_idx = dataset.column_index(spec.color)
        for key in order:
            sub: dict[CellValue, list] = {}
            sub_order: list[CellValue] = []
            for row in groups[key]:
                ck = row[color_idx]
                if ck is None:
                    continue
                if ck not in sub:
                    sub[ck] = []
                    sub_order.append(ck)
                sub[ck].append(row)
            for ck in sub_order:
                value = _aggregate(agg, sub[ck], measure_idx)
                if value is not None:
                    color_table.append((key, ck, value))

    return ChartContext(
        spec=spec,
        subspace=subspace,
        dimension=dim,
        dimension_kind=dim_kind,
        breakdown=spec.color,
        measures=(spec.measure(),),
        table=tuple(table),
        color_table=tuple(color_table),
    )
