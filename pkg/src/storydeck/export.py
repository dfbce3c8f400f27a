"""Slide generation: render an organized deck into presentable documents.

Three formats: markdown-slides (``---``-separated pages), a self-contained
HTML file with inline SVG charts, and the canonical structured ``.story.json``
serialization. Slides whose facts all come from one chart render in the
same-chart style (one chart, facts as annotations); mixed slides get one
chart panel per fact. Consecutive facts linked by an accepted or edited meta
relation get a text box with the relation between them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .errors import UnknownTheme, UnresolvedFact
from .ingest import ChartContext
from .model import DataFact, MetaRelation, StoryDeck

FORMATS = ("markdown-slides", "html", "structured")

# Pre-defined backgrounds; any http(s) link is accepted as a background image.
THEMES = {
    "plain": "#ffffff",
    "light": "#f5f3ee",
    "dark": "#1e2430",
    "ocean": "#dcebf5",
}

STORY_FORMAT_MARKER = "story.json"
STORY_VERSION = 1


@dataclass(frozen=True)
class SlideDocument:
    format: str
    pages: tuple[str, ...]
    theme: str
    content: str


@dataclass(frozen=True)
class ParsedStory:
    deck: StoryDeck
    facts: dict[str, DataFact]
    relations: dict[str, MetaRelation]
    charts: dict[str, ChartContext]
    theme: str


def _check_theme(theme: str) -> None:
    if theme in THEMES or theme.startswith(("http://", "https://")):
        return
    raise UnknownTheme(f"theme {theme!r} is neither pre-defined {sorted(THEMES)} nor an image link")


def _resolve(deck: StoryDeck, facts: Mapping[str, DataFact], charts: Mapping[str, ChartContext]):
    resolved = []
    for slide in deck.slides:
        items = []
        for entry in slide.entries:
            fact = facts.get(entry.fact_id)
            if fact is None:
                raise UnresolvedFact(f"deck references unknown fact {entry.fact_id}")
            chart = charts.get(fact.chart_id)
            if chart is None:
                raise UnresolvedFact(
                    f"fact {fact.id} references unknown chart {fact.chart_id!r}"
                )
            items.append((entry, fact, chart))
        resolved.append((slide, items))
    return resolved


def _relation_boxes(
    items, relations: Mapping[str, MetaRelation] | None
) -> dict[int, MetaRelation]:
    """Map entry index i to the relation shown between items i and i+1."""
    if not relations:
        return {}
    by_pair: dict[frozenset, MetaRelation] = {}
    for rel in relations.values():
        if rel.status in ("accepted", "edited"):
            by_pair.setdefault(frozenset({rel.fact_a, rel.fact_b}), rel)
    out = {}
    for i in range(len(items) - 1):
        pair = frozenset({items[i][1].id, items[i + 1][1].id})
        if pair in by_pair:
            out[i] = by_pair[pair]
    return out


def _slide_style(items) -> str:
    chart_ids = {fact.chart_id for _, fact, _ in items}
    return "same-chart" if len(chart_ids) == 1 else "different-chart"


# ---------------------------------------------------------------------------
# SVG chart rendering (html format)


def _svg_escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def render_chart_svg(
    ctx: ChartContext, focus_values: set | None = None, width: int = 420, height: int = 240
) -> str:
    """Draw the aggregated table as an inline SVG bar/line/point chart with
    focus values highlighted."""
    focus_values = focus_values or set()
    pad, label_h = 8, 18
    plot_w, plot_h = width - 2 * pad, height - 2 * pad - label_h
    values = [float(v) for v in ctx.measure_values()]
    keys = ctx.dimension_values()
    vmax = max(values + [0.0])
    vmin = min(values + [0.0])
    span = (vmax - vmin) or 1.0

    def y_of(v: float) -> float:
        return pad + plot_h * (1 - (v - vmin) / span)

    n = len(values)
    step = plot_w / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'class="chart chart-{ctx.spec.mark}" role="img">'
    ]
    coords = []
    for i, (key, v) in enumerate(zip(keys, values)):
        cx = pad + step * (i + 0.5)
        coords.append((cx, y_of(v)))
        hot = key in focus_values
        cls = "mark focus" if hot else "mark"
        if ctx.spec.mark == "bar":
            bw = step * 0.7
            y0, y1 = sorted((y_of(0.0), y_of(v)))
            parts.append(
                f'<rect class="{cls}" x="{cx - bw / 2:.1f}" y="{y1:.1f}" '
                f'width="{bw:.1f}" height="{max(y0 - y1, 1):.1f}"/>'
            )
        else:
            parts.append(f'<circle class="{cls}" cx="{cx:.1f}" cy="{y_of(v):.1f}" r="4"/>')
        parts.append(
            f'<text class="xlabel" x="{cx:.1f}" y="{height - pad:.1f}" '
            f'text-anchor="middle">{_svg_escape(key)}</text>'
        )
    if ctx.spec.mark == "line":
        points = " ".join(f"{x:.1f},{y:.1f}" for x, y in coords)
        parts.insert(1, f'<polyline class="series" points="{points}" fill="none"/>')
    parts.append("</svg>")
    return "".join(parts)


# ---------------------------------------------------------------------------
# markdown


def _chart_block(chart: ChartContext) -> str:
    return "```chart\n" + json.dumps(chart.spec.to_dict(), sort_keys=True) + "\n```"


def _md_fact(fact: DataFact) -> str:
    return f"- **{fact.fact_type}**: {fact.description}"


def _md_relation(rel: MetaRelation) -> str:
    label = rel.summary or "meta relation"
    return f"> **{label}**: {rel.type_description}"


def _markdown_page(slide, items, boxes) -> str:
    style = _slide_style(items)
    lines = [f"# {slide.title}", "", f"<!-- style: {style} -->", ""]
    if style == "same-chart":
        lines += [_chart_block(items[0][2]), ""]
        for i, (_, fact, _) in enumerate(items):
            lines.append(_md_fact(fact))
            if i in boxes:
                lines.append(_md_relation(boxes[i]))
    else:
        for i, (_, fact, chart) in enumerate(items):
            lines += [_chart_block(chart), "", _md_fact(fact)]
            if i in boxes:
                lines += ["", _md_relation(boxes[i])]
            if i < len(items) - 1:
                lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def _export_markdown(resolved, relations, theme: str) -> SlideDocument:
    pages = []
    for slide, items in resolved:
        boxes = _relation_boxes(items, relations)
        pages.append(_markdown_page(slide, items, boxes))
    head = f"<!-- theme: {theme} -->\n\n"
    content = head + "\n---\n\n".join(pages)
    return SlideDocument("markdown-slides", tuple(pages), theme, content)


# ---------------------------------------------------------------------------
# html


_HTML_STYLE = """\
body {{ margin: 0; font-family: Georgia, serif; background: {background}; color: {fg}; }}
section.slide {{ min-height: 90vh; padding: 4vh 8vw; border-bottom: 1px solid #8884; }}
h1 {{ font-size: 2em; }}
ul.facts {{ font-size: 1.1em; line-height: 1.6; }}
.fact-type {{ font-variant: small-caps; opacity: 0.7; margin-right: 0.5em; }}
.meta-relation {{ border: 1px solid #8886; border-radius: 8px; padding: 0.6em 1em;
  margin: 0.8em 0; background: #88888818; }}
.meta-relation .summary {{ font-weight: bold; margin-right: 0.5em; }}
svg.chart {{ max-width: 480px; display: block; margin: 1em 0; }}
svg.chart .mark {{ fill: #4878a8; }}
svg.chart .mark.focus {{ fill: #d0642e; }}
svg.chart .series {{ stroke: #4878a8; stroke-width: 2; }}
svg.chart .xlabel {{ font-size: 10px; fill: currentColor; }}
"""


def _html_fact(fact: DataFact) -> str:
    return (
        f'<li class="fact"><span class="fact-type">{_svg_escape(fact.fact_type)}</span>'
        f"{_svg_escape(fact.description)}</li>"
    )


def _html_relation(rel: MetaRelation) -> str:
    return (
        '<div class="meta-relation">'
        f'<span class="summary">{_svg_escape(rel.summary or "meta relation")}</span>'
        f"{_svg_escape(rel.type_description)}</div>"
    )


def _focus_values_for(fact: DataFact) -> set:
    return {v for _, v in fact.focus}


def _html_page(slide, items, boxes) -> str:
    style = _slide_style(items)
    parts = [f'<section class="slide {style}">', f"<h1>{_svg_escape(slide.title)}</h1>"]
    if style == "same-chart":
        focus = set()
        for _, fact, _ in items:
            focus |= _focus_values_for(fact)
        parts.append(render_chart_svg(items[0][2], focus))
        parts.append('<ul class="facts">')
        for i, (_, fact, _) in enumerate(items):
            parts.append(_html_fact(fact))
            if i in boxes:
                parts.append("</ul>" + _html_relation(boxes[i]) + '<ul class="facts">')
        parts.append("</ul>")
    else:
        for i, (_, fact, chart) in enumerate(items):
            parts.append(render_chart_svg(chart, _focus_values_for(fact)))
            parts.append('<ul class="facts">' + _html_fact(fact) + "</ul>")
            if i in boxes:
                parts.append(_html_relation(boxes[i]))
    parts.append("</section>")
    return "\n".join(parts)


def _export_html(resolved, relations, theme: str) -> SlideDocument:
    if theme in THEMES:
        background = THEMES[theme]
    else:
        background = f'url("{theme}") center / cover no-repeat fixed'
    fg = "#e8e8e8" if theme == "dark" else "#222222"
    pages = []
    for slide, items in resolved:
        boxes = _relation_boxes(items, relations)
        pages.append(_html_page(slide, items, boxes))
    content = (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        "<title>Data story</title>\n<style>\n"
        + _HTML_STYLE.format(background=background, fg=fg)
        + "</style>\n</head>\n<body>\n"
        + "\n".join(pages)
        + "\n</body>\n</html>\n"
    )
    return SlideDocument("html", tuple(pages), theme, content)


# ---------------------------------------------------------------------------
# structured (.story.json)


def serialize_story(
    deck: StoryDeck,
    facts: Mapping[str, DataFact],
    relations: Mapping[str, MetaRelation] | None = None,
    charts: Mapping[str, ChartContext] | None = None,
    theme: str = "plain",
) -> str:
    payload = {
        "format": STORY_FORMAT_MARKER,
        "version": STORY_VERSION,
        "theme": theme,
        "deck": deck.to_dict(),
        "facts": {fid: f.to_dict() for fid, f in sorted(facts.items())},
        "meta_relations": {
            rid: r.to_dict() for rid, r in sorted((relations or {}).items())
        },
        "charts": {cid: c.to_dict() for cid, c in sorted((charts or {}).items())},
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_story(text: str) -> ParsedStory:
    """Re-parse a structured export; inverse of serialize_story."""
    data = json.loads(text)
    if data.get("format") != STORY_FORMAT_MARKER:
        raise UnresolvedFact("document is not a structured story export")
    return ParsedStory(
        deck=StoryDeck.from_dict(data["deck"]),
        facts={fid: DataFact.from_dict(f) for fid, f in data.get("facts", {}).items()},
        relations={
            rid: MetaRelation.from_dict(r)
            for rid, r in data.get("meta_relations", {}).items()
        },
        charts={
            cid: ChartContext.from_dict(c) for cid, c in data.get("charts", {}).items()
        },
        theme=data.get("theme", "plain"),
    )


def _export_structured(deck, facts, relations, charts, theme: str) -> SlideDocument:
    content = serialize_story(deck, facts, relations, charts, theme)
    pages = tuple(json.dumps(s.to_dict(), sort_keys=True) for s in deck.slides)
    return SlideDocument("structured", pages, theme, content)


# ---------------------------------------------------------------------------
# entry point


def export_deck(
    deck: StoryDeck,
    facts: Mapping[str, DataFact],
    charts: Mapping[str, ChartContext],
    theme: str = "plain",
    format: str = "markdown-slides",
    relations: Mapping[str, MetaRelation] | None = None,
) -> SlideDocument:
    """Render the deck in the requested format; pure in all its inputs.

    Raises:
        UnresolvedFact: a deck entry's fact or chart cannot be resolved.
        UnknownTheme: theme is neither pre-defined nor an image link.
    """
    _check_theme(theme)
    if format not in FORMATS:
        raise UnresolvedFact(f"unknown export format {format!r}; expected one of {FORMATS}")
    resolved = _resolve(deck, facts, charts)
    if format == "markdown-slides":
        return _export_markdown(resolved, relations, theme)
    if format == "html":
        return _export_html(resolved, relations, theme)
    return _export_structured(deck, facts, relations, charts, theme)
