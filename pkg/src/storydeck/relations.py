"""Data-level relations between two facts: attribute overlaps (IoU-scored)
plus binary temporal-order and importance-order links."""

from __future__ import annotations

import re
from typing import Iterable

from .model import CellValue, DataFact, DataRelation

_ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def iou(a: Iterable, b: Iterable) -> float:
    """Intersection-over-union of two finite sets; 0.0 when both are empty."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


def _temporal_key(value: CellValue) -> tuple[int, int, int] | None:
    """Sortable key for a temporal-shaped value (year int or ISO date)."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)) and value == int(value) and 1000 <= value <= 2999:
        return (int(value), 0, 0)
    if isinstance(value, str) and _ISO_DATE_RE.match(value.strip()):
        y, m, d = value.strip().split("-")
        return (int(y), int(m), int(d))
    return None


def _earliest(pairs: Iterable[tuple[str, CellValue]]) -> tuple[int, int, int] | None:
    keys = [k for _, v in pairs if (k := _temporal_key(v)) is not None]
    return min(keys) if keys else None


def compute_data_relations(fa: DataFact, fb: DataFact) -> list[DataRelation]:
    """All data relations from ``fa`` to ``fb``.

    Overlap relations carry the IoU of the paired attribute and are omitted
    at zero. Temporal relations appear only when fa's earliest temporal value
    strictly precedes fb's; importance_order appears when fa is at least as
    important as fb. Binary relations always carry score 1.
    """
    if fa.id == fb.id:
        raise ValueError("cannot relate a fact to itself")
    out: list[DataRelation] = []

    overlaps = (
        ("subspace_overlap", fa.subspace, fb.subspace),
        ("measure_overlap", set(fa.measures), set(fb.measures)),
        (
            "dimension_overlap",
            {fa.dimension} if fa.dimension else set(),
            {fb.dimension} if fb.dimension else set(),
        ),
        ("focus_overlap", fa.focus, fb.focus),
        ("facttype_overlap", {fa.fact_type}, {fb.fact_type}),
    )
    for kind, sa, sb in overlaps:
        score = iou(sa, sb)
        if score > 0.0:
            out.append(DataRelation(fa.id, fb.id, kind, score))

    for kind, attr in (("temporal_subspace", "subspace"), ("temporal_focus", "focus")):
        ka = _earliest(getattr(fa, attr))
        kb = _earliest(getattr(fb, attr))
        if ka is not None and kb is not None and ka < kb:
            out.append(DataRelation(fa.id, fb.id, kind, 1.0))

    if fa.scores.importance >= fb.scores.importance:
        out.append(DataRelation(fa.id, fb.id, "importance_order", 1.0))
    return out


def relation_matrix(facts: list[DataFact]) -> list[DataRelation]:
    """Relations for every ordered pair of distinct facts."""
    out: list[DataRelation] = []
    for fa in facts:
        for fb in facts:
            if fa.id != fb.id:
                out.extend(compute_data_relations(fa, fb))
    return out
