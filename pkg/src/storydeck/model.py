"""Shared domain types: datasets, subspaces, facts, relations, and decks.

All values here are immutable after construction; every mutation elsewhere in
the package builds a new value. Serialization helpers (``to_dict`` /
``from_dict``) produce plain JSON-compatible structures with deterministic
ordering so downstream exports are byte-stable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Optional

from .errors import (
    CapacityExceeded,
    DuplicateColumn,
    DuplicateFact,
    EmptyDataset,
    InvalidCell,
    RaggedRow,
    UnknownColumn,
    UnknownRelation,
)

CellValue = Optional[str | int | float]
FilterPair = tuple[str, CellValue]
Subspace = frozenset[FilterPair]
Focus = frozenset[FilterPair]
Measure = tuple[str, str]  # (column, aggregate)

COLUMN_KINDS = ("categorical", "numeric", "temporal")
AGGREGATES = ("sum", "mean", "min", "max", "count")

# Declared order doubles as the tie-breaking order when ranking facts.
FACT_TYPES = ("value", "difference", "proportion", "trend", "rank", "extreme", "outlier")

# Required parameter keys per fact type; emitted facts carry exactly these.
FACT_PARAM_KEYS: dict[str, frozenset[str]] = {
    "value": frozenset({"value"}),
    "difference": frozenset({"high", "low", "gap"}),
    "proportion": frozenset({"share"}),
    "trend": frozenset({"direction", "slope", "start", "end"}),
    "rank": frozenset({"order"}),
    "extreme": frozenset({"polarity", "value"}),
    "outlier": frozenset({"value", "distance"}),
}

RELATION_KINDS = (
    "subspace_overlap",
    "measure_overlap",
    "dimension_overlap",
    "focus_overlap",
    "facttype_overlap",
    "temporal_subspace",
    "temporal_focus",
    "importance_order",
)
OVERLAP_KINDS = RELATION_KINDS[:5]

META_STATUSES = ("suggested", "accepted", "edited", "rejected", "user_added")

_WS_RE = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


def _value_sort_key(value: CellValue) -> tuple:
    # Stable ordering across mixed cell types (None < numbers < strings).
    if value is None:
        return (0, "")
    if isinstance(value, (int, float)):
        return (1, f"{float(value):.17g}")
    return (2, str(value))


def pairs_sorted(pairs: Iterable[FilterPair]) -> list[FilterPair]:
    """Deterministic ordering for subspace/focus pairs."""
    return sorted(pairs, key=lambda p: (p[0],) + _value_sort_key(p[1]))


def pairs_to_json(pairs: Iterable[FilterPair]) -> list[list]:
    return [[c, v] for c, v in pairs_sorted(pairs)]


def pairs_from_json(items: Iterable) -> frozenset[FilterPair]:
    return frozenset((c, v) for c, v in items)


# ---------------------------------------------------------------------------
# Dataset


@dataclass(frozen=True)
class Column:
    name: str
    kind: str | None = None  # None until validate_dataset infers it

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Column":
        return cls(name=data["name"], kind=data.get("kind"))


@dataclass(frozen=True)
class Dataset:
    name: str
    columns: tuple[Column, ...]
    rows: tuple[tuple[CellValue, ...], ...]

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise UnknownColumn(f"no column named {name!r}", column=name)

    def column(self, name: str) -> Column:
        return self.columns[self.column_index(name)]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "columns": [c.to_dict() for c in self.columns],
            "rows": [list(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Dataset":
        return cls(
            name=data.get("name", ""),
            columns=tuple(Column.from_dict(c) for c in data["columns"]),
            rows=tuple(tuple(r) for r in data["rows"]),
        )


_TIME_NAME_TOKENS = {"year", "yr", "date", "time", "month", "day", "week", "quarter"}
_ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def _name_is_timelike(name: str) -> bool:
    tokens = re.split(r"[^a-z]+", name.lower())
    return any(t in _TIME_NAME_TOKENS for t in tokens)


def _as_number(value: CellValue) -> float | None:
    """Parse a cell as a finite number, or None if it is not one."""
    if value is None or isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        num = float(value)
    else:
        try:
            num = float(str(value).strip())
        except ValueError:
            return None
    if num != num or num in (float("inf"), float("-inf")):
        return None
    return num


def _is_year(value: CellValue) -> bool:
    num = _as_number(value)
    return num is not None and num == int(num) and 1000 <= num <= 2999


def _infer_kind(name: str, cells: list[CellValue]) -> str:
    non_null = [c for c in cells if c is not None]
    if non_null and all(_as_number(c) is not None for c in non_null):
        if all(_is_year(c) for c in non_null) and _name_is_timelike(name):
            return "temporal"
        return "numeric"
    if non_null and all(
        isinstance(c, str) and _ISO_DATE_RE.match(c.strip()) for c in non_null
    ):
        return "temporal"
    return "categorical"


def _coerce_cell(value: CellValue, kind: str, column: str) -> CellValue:
    if value is None or (isinstance(value, str) and value.strip() == ""):
        return None
    if kind == "numeric":
        num = _as_number(value)
        if num is None:
            raise InvalidCell(
                f"cell {value!r} in numeric column {column!r} is not a finite number",
                column=column,
            )
        return int(num) if num == int(num) else num
    if kind == "temporal":
        if _is_year(value):
            return int(_as_number(value))
        text = str(value).strip()
        if _ISO_DATE_RE.match(text):
            return text
        raise InvalidCell(
            f"cell {value!r} in temporal column {column!r} is neither a year nor an ISO date",
            column=column,
        )
    return str(value)


def validate_dataset(raw: Dataset) -> Dataset:
    """Check dataset invariants, infer missing column kinds, coerce cells.

    Idempotent: validating a validated dataset returns an identical value.

    Raises:
        DuplicateColumn, EmptyDataset, RaggedRow, InvalidCell
    """
    if not raw.columns or not raw.rows:
        raise EmptyDataset(f"dataset {raw.name!r} has no columns or no rows")
    seen: set[str] = set()
    for col in raw.columns:
        if not col.name:
            raise DuplicateColumn("column with empty name", column=col.name)
        if col.name in seen:
            raise DuplicateColumn(f"duplicate column {col.name!r}", column=col.name)
        seen.add(col.name)
        if col.kind is not None and col.kind not in COLUMN_KINDS:
            raise InvalidCell(f"unknown column kind {col.kind!r}", column=col.name)
    width = len(raw.columns)
    for i, row in enumerate(raw.rows):
        if len(row) != width:
            raise RaggedRow(
                f"row {i + 1} has {len(row)} cells, expected {width}", row=i + 1
            )

    columns = []
    for j, col in enumerate(raw.columns):
        cells = [row[j] for row in raw.rows]
        kind = col.kind or _infer_kind(col.name, cells)
        columns.append(Column(name=col.name, kind=kind))
    rows = tuple(
        tuple(_coerce_cell(row[j], columns[j].kind, columns[j].name) for j in range(width))
        for row in raw.rows
    )
    return Dataset(name=raw.name, columns=tuple(columns), rows=rows)


def coerce_filter_value(dataset: Dataset, column: str, value: CellValue) -> CellValue:
    """Coerce a filter value to the column's kind so equality is well-typed."""
    kind = dataset.column(column).kind or "categorical"
    try:
        return _coerce_cell(value, kind, column)
    except InvalidCell:
        return value  # uncoercible values simply match nothing


def check_subspace(dataset: Dataset, subspace: Subspace) -> None:
    """Enforce the subspace invariants against a dataset."""
    cols = [c for c, _ in subspace]
    for c in cols:
        dataset.column_index(c)  # raises UnknownColumn
    if len(cols) != len(set(cols)):
        raise DuplicateColumn("subspace has multiple filters on one column")


def evaluate_subspace(dataset: Dataset, subspace: Subspace) -> list[tuple[CellValue, ...]]:
    """Return the rows matching every filter by equality.

    Empty subspace returns all rows. Null cells never match a filter.
    """
    check_subspace(dataset, subspace)
    filters = [(dataset.column_index(c), v) for c, v in subspace]
    out = []
    for row in dataset.rows:
        if all(row[i] is not None and row[i] == v for i, v in filters):
            out.append(row)
    return out


# ---------------------------------------------------------------------------
# Facts


@dataclass(frozen=True)
class FactScores:
    importance: float
    interest_alignment: float

    def to_dict(self) -> dict:
        return {"importance": self.importance, "interest_alignment": self.interest_alignment}

    @classmethod
    def from_dict(cls, data: Mapping) -> "FactScores":
        return cls(data["importance"], data["interest_alignment"])


@dataclass(frozen=True)
class DataFact:
    """One mined finding: the seven-dimension record plus provenance.

    The seven dimensions are subspace, dimension, measures, fact_type,
    parameters, focus, and scores; description and chart_id are provenance.
    """

    id: str
    subspace: Subspace
    dimension: str | None
    measures: tuple[Measure, ...]
    fact_type: str
    parameters: Mapping[str, Any]
    focus: Focus
    scores: FactScores
    description: str = ""
    chart_id: str = ""

    def __post_init__(self):
        if self.fact_type not in FACT_TYPES:
            raise ValueError(f"unknown fact type {self.fact_type!r}")
        expected = FACT_PARAM_KEYS[self.fact_type]
        if frozenset(self.parameters) != expected:
            raise ValueError(
                f"{self.fact_type} fact parameters must be exactly {sorted(expected)}, "
                f"got {sorted(self.parameters)}"
            )
        for col, agg in self.measures:
            if agg not in AGGREGATES:
                raise ValueError(f"unknown aggregate {agg!r} on measure {col!r}")
        for s in (self.scores.importance, self.scores.interest_alignment):
            if not (0.0 <= s <= 1.0):
                raise ValueError(f"fact score {s} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "subspace": pairs_to_json(self.subspace),
            "dimension": self.dimension,
            "measures": [list(m) for m in self.measures],
            "fact_type": self.fact_type,
            "parameters": dict(self.parameters),
            "focus": pairs_to_json(self.focus),
            "scores": self.scores.to_dict(),
            "description": self.description,
            "chart_id": self.chart_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DataFact":
        return cls(
            id=data["id"],
            subspace=pairs_from_json(data["subspace"]),
            dimension=data.get("dimension"),
            measures=tuple((m[0], m[1]) for m in data["measures"]),
            fact_type=data["fact_type"],
            parameters=dict(data["parameters"]),
            focus=pairs_from_json(data["focus"]),
            scores=FactScores.from_dict(data["scores"]),
            description=data.get("description", ""),
            chart_id=data.get("chart_id", ""),
        )


def check_fact_against_dataset(fact: DataFact, dataset: Dataset) -> None:
    """Verify that every focus value exists in the fact's subspace rows."""
    rows = evaluate_subspace(dataset, fact.subspace)
    for col, value in fact.focus:
        i = dataset.column_index(col)
        if not any(row[i] == value for row in rows):
            raise UnknownColumn(
                f"focus value {value!r} not found in column {col!r} within subspace",
                column=col,
            )


# ---------------------------------------------------------------------------
# Relations


@dataclass(frozen=True)
class DataRelation:
    fact_a: str
    fact_b: str
    kind: str
    score: float

    def __post_init__(self):
        if self.kind not in RELATION_KINDS:
            raise ValueError(f"unknown relation kind {self.kind!r}")
        if self.fact_a == self.fact_b:
            raise ValueError("a data relation must connect two distinct facts")
        if not (0.0 < self.score <= 1.0):
            raise ValueError("emitted relations carry scores in (0, 1]")
        if self.kind not in OVERLAP_KINDS and self.score != 1.0:
            raise ValueError(f"{self.kind} relations are binary and carry score 1")

    def to_dict(self) -> dict:
        return {"fact_a": self.fact_a, "fact_b": self.fact_b, "kind": self.kind, "score": self.score}

    @classmethod
    def from_dict(cls, data: Mapping) -> "DataRelation":
        return cls(data["fact_a"], data["fact_b"], data["kind"], data["score"])


@dataclass(frozen=True)
class SubScores:
    strength: int
    fidelity: int
    helpfulness: int
    interestingness: int
    confidence: int

    def weighted(self) -> tuple[int, int, int, int]:
        return (self.strength, self.fidelity, self.helpfulness, self.interestingness)

    def to_dict(self) -> dict:
        return {
            "strength": self.strength,
            "fidelity": self.fidelity,
            "helpfulness": self.helpfulness,
            "interestingness": self.interestingness,
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SubScores":
        return cls(
            data["strength"],
            data["fidelity"],
            data["helpfulness"],
            data["interestingness"],
            data["confidence"],
        )


@dataclass(frozen=True)
class MetaRelation:
    """A knowledge- or intent-derived link between two facts.

    Machine-suggested relations carry the five 1..5 sub-scores and an
    aggregated score in [0, 1]; user-added relations have score pinned to 1.0
    and no sub-scores.
    """

    id: str
    fact_a: str
    fact_b: str
    type_description: str
    summary: str
    score: float
    status: str = "suggested"
    sub_scores: SubScores | None = None
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    entities: tuple[str, ...] = ()
    evidence_quote: str = ""
    evidence_matched: bool = False
    intent_link: str = ""

    def __post_init__(self):
        if self.status not in META_STATUSES:
            raise ValueError(f"unknown meta relation status {self.status!r}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("meta relation score must lie in [0, 1]")
        if self.status == "user_added":
            if self.sub_scores is not None or self.score != 1.0:
                raise ValueError("user-added relations have score 1.0 and no sub-scores")
        else:
            if self.sub_scores is None:
                raise ValueError("machine relations require the five sub-scores")
            for s in self.sub_scores.to_dict().values():
                if not (isinstance(s, int) and 1 <= s <= 5):
                    raise ValueError("sub-scores must be integers in 1..5")
            if not self.entities:
                raise ValueError("machine relations require at least one entity")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "fact_a": self.fact_a,
            "fact_b": self.fact_b,
            "type_description": self.type_description,
            "summary": self.summary,
            "score": self.score,
            "status": self.status,
            "sub_scores": self.sub_scores.to_dict() if self.sub_scores else None,
            "weights": list(self.weights),
            "entities": list(self.entities),
            "evidence_quote": self.evidence_quote,
            "evidence_matched": self.evidence_matched,
            "intent_link": self.intent_link,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetaRelation":
        sub = data.get("sub_scores")
        return cls(
            id=data["id"],
            fact_a=data["fact_a"],
            fact_b=data["fact_b"],
            type_description=data["type_description"],
            summary=data.get("summary", ""),
            score=data["score"],
            status=data.get("status", "suggested"),
            sub_scores=SubScores.from_dict(sub) if sub else None,
            weights=tuple(data.get("weights", (1.0, 1.0, 1.0, 1.0))),
            entities=tuple(data.get("entities", ())),
            evidence_quote=data.get("evidence_quote", ""),
            evidence_matched=data.get("evidence_matched", False),
            intent_link=data.get("intent_link", ""),
        )


def user_meta_relation(
    relation_id: str, fact_a: str, fact_b: str, type_description: str, summary: str = ""
) -> MetaRelation:
    """Build a user-added relation: score pinned to 1.0, no sub-scores."""
    return MetaRelation(
        id=relation_id,
        fact_a=fact_a,
        fact_b=fact_b,
        type_description=type_description,
        summary=summary or type_description.split(".")[0][:40],
        score=1.0,
        status="user_added",
    )


# ---------------------------------------------------------------------------
# Narrative context


@dataclass(frozen=True)
class KnowledgeDoc:
    doc_id: str
    title: str
    body: str

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "title": self.title, "body": self.body}

    @classmethod
    def from_dict(cls, data: Mapping) -> "KnowledgeDoc":
        return cls(data["doc_id"], data.get("title", ""), data["body"])


@dataclass(frozen=True)
class NarrativeContext:
    knowledge_docs: tuple[KnowledgeDoc, ...] = ()
    intent: str = ""

    def with_intent(self, intent: str) -> "NarrativeContext":
        return replace(self, intent=intent)

    def quote_in_knowledge(self, quote: str) -> bool:
        """True when the quote is a contiguous substring of some doc body
        after whitespace normalization (case-insensitive)."""
        needle = normalize_ws(quote).casefold()
        if not needle:
            return False
        return any(needle in normalize_ws(d.body).casefold() for d in self.knowledge_docs)


# ---------------------------------------------------------------------------
# Deck


@dataclass(frozen=True)
class FactEntry:
    fact_id: str
    incoming_meta_relation: str | None = None
    prev_fact_id: str | None = None
    order_locked: bool = False

    def to_dict(self) -> dict:
        return {
            "fact_id": self.fact_id,
            "incoming_meta_relation": self.incoming_meta_relation,
            "prev_fact_id": self.prev_fact_id,
            "order_locked": self.order_locked,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FactEntry":
        return cls(
            fact_id=data["fact_id"],
            incoming_meta_relation=data.get("incoming_meta_relation"),
            prev_fact_id=data.get("prev_fact_id"),
            order_locked=data.get("order_locked", False),
        )


@dataclass(frozen=True)
class Slide:
    title: str
    entries: tuple[FactEntry, ...]
    title_locked: bool = False

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "title_locked": self.title_locked,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Slide":
        return cls(
            title=data.get("title", ""),
            title_locked=data.get("title_locked", False),
            entries=tuple(FactEntry.from_dict(e) for e in data.get("entries", ())),
        )


@dataclass(frozen=True)
class StoryDeck:
    slides: tuple[Slide, ...] = ()
    max_facts_per_slide: int = 3
    intent: str = ""

    def fact_ids(self) -> list[str]:
        """Flattened fact sequence across slides, in presentation order."""
        return [e.fact_id for s in self.slides for e in s.entries]

    def contains_fact(self, fact_id: str) -> bool:
        return any(e.fact_id == fact_id for s in self.slides for e in s.entries)

    def to_dict(self) -> dict:
        return {
            "slides": [s.to_dict() for s in self.slides],
            "max_facts_per_slide": self.max_facts_per_slide,
            "intent": self.intent,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StoryDeck":
        return cls(
            slides=tuple(Slide.from_dict(s) for s in data.get("slides", ())),
            max_facts_per_slide=data.get("max_facts_per_slide", 3),
            intent=data.get("intent", ""),
        )


def validate_deck(
    deck: StoryDeck, relations: Mapping[str, MetaRelation] | None = None
) -> None:
    """Check deck invariants: capacity, per-fact uniqueness, relation refs."""
    if deck.max_facts_per_slide < 1:
        raise CapacityExceeded("max_facts_per_slide must be positive")
    seen: set[str] = set()
    for i, slide in enumerate(deck.slides):
        if not (1 <= len(slide.entries) <= deck.max_facts_per_slide):
            raise CapacityExceeded(
                f"slide {i} holds {len(slide.entries)} facts, allowed 1..{deck.max_facts_per_slide}",
                slide=i,
            )
        for entry in slide.entries:
            if entry.fact_id in seen:
                raise DuplicateFact(f"fact {entry.fact_id} appears twice in deck")
            seen.add(entry.fact_id)
            rid = entry.incoming_meta_relation
            if rid is not None and relations is not None:
                rel = relations.get(rid)
                if rel is None or entry.fact_id not in (rel.fact_a, rel.fact_b):
                    raise UnknownRelation(
                        f"entry {entry.fact_id} references relation {rid} that does not include it",
                        relation=rid,
                    )
