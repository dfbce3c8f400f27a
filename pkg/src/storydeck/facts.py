"""Fact mining: detect, score, rank, and verbalize candidate facts from a
resolved chart.

Seven detectors run over the aggregated table (value, difference, proportion,
trend, rank, extreme, outlier); candidates are ranked by importance with
deterministic tie-breaking and the top k are returned.
"""

from __future__ import annotations

import statistics
import string
from dataclasses import dataclass, replace
from datetime import date
from typing import Any

from .ingest import ChartContext
from .model import (
    FACT_TYPES,
    CellValue,
    DataFact,
    FactScores,
    Focus,
    NarrativeContext,
    pairs_sorted,
)
from .relations import iou

DEFAULT_TOP_K = 4

# Trends weaker than this correlation floor are noise, not facts.
MIN_TREND_CORRELATION = 0.5
OUTLIER_IQR_FACTOR = 1.5


@dataclass(frozen=True)
class FactCandidate:
    fact: DataFact
    rank: int


# ---------------------------------------------------------------------------
# scoring


def _tokens(text: str) -> set[str]:
    return {t.strip(string.punctuation) for t in text.lower().split()} - {""}


def _fact_entity_tokens(subspace, focus) -> set[str]:
    out: set[str] = set()
    for _, v in list(subspace) + list(focus):
        if v is not None:
            out |= _tokens(str(v))
    return out


def _temporal_x(value: CellValue) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    return float(date.fromisoformat(str(value)).toordinal())


def _correlation(ctx: ChartContext) -> float | None:
    if len(ctx.table) < 2:
        return None
    xs = [_temporal_x(v) for v in ctx.dimension_values()]
    ys = [float(v) for v in ctx.measure_values()]
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return None  # constant series: correlation undefined


def _values_desc(ctx: ChartContext) -> list[tuple[CellValue, float]]:
    # Stable sort keeps first-appearance order among ties.
    return sorted(ctx.table, key=lambda kv: -float(kv[1]))


def _iqr_fences(values: list[float]) -> tuple[float, float, float] | None:
    if len(values) < 4:
        return None
    q1, _, q3 = statistics.quantiles(values, n=4, method="inclusive")
    iqr = q3 - q1
    return q1 - OUTLIER_IQR_FACTOR * iqr, q3 + OUTLIER_IQR_FACTOR * iqr, iqr


def _importance(fact_type: str, parameters: dict, focus: Focus, ctx: ChartContext) -> float:
    """Detector-specific evidence statistic, normalized to [0, 1]."""
    values = [float(v) for v in ctx.measure_values()]
    if fact_type in ("value", "rank"):
        score = 0.5
    elif fact_type == "proportion":
        score = float(parameters["share"])
    elif fact_type == "trend":
        r = _correlation(ctx)
        score = abs(r) if r is not None else 0.0
    elif fact_type == "extreme":
        ordered = sorted(values, reverse=True)
        spread = ordered[0] - ordered[-1]
        if spread <= 0:
            score = 0.0
        elif parameters["polarity"] == "max":
            score = (ordered[0] - ordered[1]) / spread
        else:
            score = (ordered[-2] - ordered[-1]) / spread
    elif fact_type == "difference":
        gap = float(parameters["gap"])
        by_key = {k: float(v) for k, v in ctx.table}
        denom = max(abs(by_key[parameters["high"]]), abs(by_key[parameters["low"]]))
        score = gap / denom if denom > 0 else 0.0
    elif fact_type == "outlier":
        fences = _iqr_fences(values)
        distance = float(parameters["distance"])
        if fences is None:
            score = 0.0
        else:
            iqr = fences[2]
            score = min(1.0, distance / (3.0 * iqr)) if iqr > 0 else 1.0
    else:
        raise ValueError(f"unknown fact type {fact_type!r}")
    return min(1.0, max(0.0, score))


def score_fact(fact: DataFact, ctx: ChartContext, nc: NarrativeContext) -> FactScores:
    """Importance from the detector statistic; interest alignment as the
    token IoU between the fact's entity values and the narrative intent."""
    importance = _importance(fact.fact_type, dict(fact.parameters), fact.focus, ctx)
    intent_tokens = _tokens(nc.intent) if nc.intent else set()
    alignment = 0.0
    if intent_tokens:
        alignment = iou(_fact_entity_tokens(fact.subspace, fact.focus), intent_tokens)
    return FactScores(importance=importance, interest_alignment=alignment)


# ---------------------------------------------------------------------------
# description templates


_AGG_LABELS = {"sum": "total", "mean": "average", "min": "minimum", "max": "maximum"}


def _measure_label(measure) -> str:
    col, agg = measure
    if agg == "count":
        return f"count of {col}"
    return f"{_AGG_LABELS[agg]} {col}"


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _subspace_phrase(fact: DataFact) -> str:
    return ", ".join(_fmt(v) for _, v in pairs_sorted(fact.subspace))


def _focus_values(fact: DataFact) -> list[str]:
    return [_fmt(v) for _, v in pairs_sorted(fact.focus)]


def describe_fact(fact: DataFact) -> str:
    """Deterministic per-type template naming subspace, focus, measure, and
    parameters."""
    p = dict(fact.parameters)
    label = _measure_label(fact.measures[0])
    bare = fact.measures[0][0]
    scope = _subspace_phrase(fact)
    if fact.fact_type == "value":
        subject = _focus_values(fact)[0] if fact.focus else scope
        return f"The {label} of {subject} is {_fmt(p['value'])}."
    if fact.fact_type == "difference":
        return (
            f"The {label} of {_fmt(p['high'])} exceeds {_fmt(p['low'])} "
            f"by {_fmt(p['gap'])}."
        )
    if fact.fact_type == "proportion":
        subject = _focus_values(fact)[0]
        return f"{subject} accounts for {p['share']:.0%} of {label}."
    if fact.fact_type == "trend":
        verb = "increased" if p["direction"] == "increasing" else "decreased"
        subject = f"The {bare} of {scope}" if scope else f"The {bare}"
        return f"{subject} {verb} from {_fmt(p['start'])} to {_fmt(p['end'])}."
    if fact.fact_type == "rank":
        order = [_fmt(v) for v in p["order"]]
        return (
            f"In {label}, {order[0]} ranks first, followed by "
            f"{order[1]} and {order[2]}."
        )
    if fact.fact_type == "extreme":
        subject = _focus_values(fact)[0]
        side = "highest" if p["polarity"] == "max" else "lowest"
        among = scope if scope else f"all {fact.dimension} values"
        return f"{subject} has the {side} {label} among {among}."
    if fact.fact_type == "outlier":
        subject = _focus_values(fact)[0]
        return (
            f"The {label} of {subject} ({_fmt(p['value'])}) stands out from "
            f"the other {fact.dimension} values."
        )
    raise ValueError(f"unknown fact type {fact.fact_type!r}")


# ---------------------------------------------------------------------------
# detectors

# Each detector yields (fact_type, parameters, focus) tuples.


def _detect_value(ctx: ChartContext):
    if len(ctx.table) == 1:
        key, value = ctx.table[0]
        yield "value", {"value": value}, frozenset({(ctx.dimension, key)})


def _detect_difference(ctx: ChartContext):
    if len(ctx.table) < 2:
        return
    (k1, v1), (k2, v2) = _values_desc(ctx)[:2]
    gap = float(v1) - float(v2)
    if gap <= 0:
        return
    focus = frozenset({(ctx.dimension, k1), (ctx.dimension, k2)})
    yield "difference", {"high": k1, "low": k2, "gap": gap}, focus


def _detect_proportion(ctx: ChartContext):
    values = [float(v) for v in ctx.measure_values()]
    total = sum(values)
    if len(ctx.table) < 2 or total <= 0 or any(v < 0 for v in values):
        return
    for key, value in ctx.table:
        yield "proportion", {"share": float(value) / total}, frozenset({(ctx.dimension, key)})


def _detect_trend(ctx: ChartContext):
    if ctx.dimension_kind != "temporal" or len(ctx.table) < 2:
        return
    r = _correlation(ctx)
    if r is None or abs(r) < MIN_TREND_CORRELATION:
        return
    xs = [_temporal_x(v) for v in ctx.dimension_values()]
    ys = [float(v) for v in ctx.measure_values()]
    slope = statistics.linear_regression(xs, ys).slope
    direction = "increasing" if slope > 0 else "decreasing"
    params = {
        "direction": direction,
        "slope": slope,
        "start": ctx.dimension_values()[0],
        "end": ctx.dimension_values()[-1],
    }
    yield "trend", params, frozenset()


def _detect_rank(ctx: ChartContext):
    if len(ctx.table) < 3:
        return
    top3 = [k for k, _ in _values_desc(ctx)[:3]]
    focus = frozenset((ctx.dimension, k) for k in top3)
    yield "rank", {"order": top3}, focus


def _detect_extreme(ctx: ChartContext):
    if len(ctx.table) < 2:
        return
    ordered = _values_desc(ctx)
    if float(ordered[0][1]) == float(ordered[-1][1]):
        return  # all values equal: nothing is meaningfully extreme
    for polarity, (key, value) in (("max", ordered[0]), ("min", ordered[-1])):
        yield "extreme", {"polarity": polarity, "value": value}, frozenset(
            {(ctx.dimension, key)}
        )


def _detect_outlier(ctx: ChartContext):
    values = [float(v) for v in ctx.measure_values()]
    fences = _iqr_fences(values)
    if fences is None:
        return
    lo, hi, _ = fences
    for key, value in ctx.table:
        v = float(value)
        if v < lo or v > hi:
            distance = lo - v if v < lo else v - hi
            yield "outlier", {"value": value, "distance": distance}, frozenset(
                {(ctx.dimension, key)}
            )


_DETECTORS = (
    _detect_value,
    _detect_difference,
    _detect_proportion,
    _detect_trend,
    _detect_rank,
    _detect_extreme,
    _detect_outlier,
)


def _focus_key(focus: Focus) -> str:
    return "|".join(f"{c}={v}" for c, v in pairs_sorted(focus))


def mine_facts(
    ctx: ChartContext, nc: NarrativeContext, top_k: int = DEFAULT_TOP_K
) -> list[FactCandidate]:
    """Run every applicable detector, rank by importance, return the top k.

    Ordering is total and deterministic: importance descending, then fact
    type declaration order, then lexicographic focus.
    """
    built = []
    for detect in _DETECTORS:
        for fact_type, params, focus in detect(ctx):
            draft = DataFact(
                id="pending",
                subspace=ctx.subspace,
                dimension=ctx.dimension,
                measures=ctx.measures,
                fact_type=fact_type,
                parameters=params,
                focus=focus,
                scores=FactScores(importance=0.0, interest_alignment=0.0),
                chart_id=ctx.chart_id,
            )
            built.append(replace(draft, scores=score_fact(draft, ctx, nc)))

    built.sort(
        key=lambda f: (
            -f.scores.importance,
            FACT_TYPES.index(f.fact_type),
            _focus_key(f.focus),
        )
    )

    chart = ctx.chart_id or "chart"
    counters: dict[str, int] = {}
    out = []
    for rank, fact in enumerate(built[:top_k]):
        n = counters.get(fact.fact_type, 0)
        counters[fact.fact_type] = n + 1
        fact = replace(fact, id=f"{chart}.{fact.fact_type}.{n}")
        fact = replace(fact, description=describe_fact(fact))
        out.append(FactCandidate(fact=fact, rank=rank))
    return out
