"""Story organization: find a position for a newly selected fact in the deck.

The placement task goes to the LLM with the deck, the fact's relations, and
the two design constraints (per-slide capacity and minimum alternation of the
existing sequence). Applying a placement is insertion-only: the flattened
order of pre-existing facts is never permuted, locked titles and locked entry
orders are never touched. A deterministic fallback covers gateway failures
and invalid placements.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Mapping

from .errors import (
    CapacityExceeded,
    DuplicateFact,
    GatewayError,
    LockViolation,
    MalformedResponse,
    OutOfRange,
)
from .gateway import Gateway
from .meta import NO_INTENT_MARKER, extract_payload
from .model import (
    DataFact,
    DataRelation,
    FactEntry,
    MetaRelation,
    Slide,
    StoryDeck,
    pairs_sorted,
)

logger = logging.getLogger(__name__)

RATIONALE_KEYS = ("topic_fit", "relation_to_previous", "relation_to_next", "intent_fit")

# The two slide-design constraints, spelled out for the placement prompt.
CAPACITY_CONSTRAINT = "maximum number of facts in each slide"
ALTERNATION_CONSTRAINT = "minimum alternation of the previously arranged sequence"

PLACEMENT_CONTRACT = """\
Respond with a single JSON object and nothing else, in exactly this shape:
{"target": <existing slide index> | {"new_slide": <deck position for the new slide>},
 "position": <position of the fact within the slide>,
 "title": "<title for the slide receiving the fact>",
 "rationale": {"topic_fit": "<how the fact fits the slide topic>",
               "relation_to_previous": "<its relation to the fact before it>",
               "relation_to_next": "<its relation to the fact after it>",
               "intent_fit": "<how the placement serves the narrative intent>"}}"""


@dataclass(frozen=True)
class PlacementRationale:
    topic_fit: str
    relation_to_previous: str
    relation_to_next: str
    intent_fit: str

    def to_dict(self) -> dict:
        return {
            "topic_fit": self.topic_fit,
            "relation_to_previous": self.relation_to_previous,
            "relation_to_next": self.relation_to_next,
            "intent_fit": self.intent_fit,
        }


@dataclass(frozen=True)
class Placement:
    """Where the new fact goes: an existing slide, or a new slide inserted at
    ``slide_index`` in the deck (position is then 0)."""

    new_slide: bool
    slide_index: int
    position: int
    slide_title: str
    rationale: PlacementRationale

    def to_dict(self) -> dict:
        target = {"new_slide": self.slide_index} if self.new_slide else self.slide_index
        return {
            "target": target,
            "position": self.position,
            "title": self.slide_title,
            "rationale": self.rationale.to_dict(),
        }


# ---------------------------------------------------------------------------
# prompt


def _deck_block(deck: StoryDeck, facts: Mapping[str, DataFact]) -> str:
    if not deck.slides:
        return "The slide deck is empty. Create the first slide for this fact."
    lines = []
    for i, slide in enumerate(deck.slides):
        lock = " [title locked: do not change]" if slide.title_locked else ""
        lines.append(f"Slide {i}: {slide.title or '(untitled)'}{lock}")
        for j, entry in enumerate(slide.entries):
            fact = facts.get(entry.fact_id)
            desc = fact.description if fact else entry.fact_id
            lock = " [order locked: keep in place]" if entry.order_locked else ""
            lines.append(f"  {j}. {entry.fact_id}: {desc}{lock}")
    return "\n".join(lines)


def _relations_block(
    new_fact: DataFact,
    data_rels: list[DataRelation],
    meta_rels: list[MetaRelation],
) -> str:
    lines = []
    for r in meta_rels:
        other = r.fact_a if r.fact_b == new_fact.id else r.fact_b
        lines.append(
            f"meta relation to {other} (score {r.score:.2f}): {r.type_description}"
        )
    for r in data_rels:
        other = r.fact_a if r.fact_b == new_fact.id else r.fact_b
        lines.append(f"data relation to {other}: {r.kind} (score {r.score:.2f})")
    return "\n".join(lines) if lines else "(no known relations to existing facts)"


def build_organization_prompt(
    deck: StoryDeck,
    new_fact: DataFact,
    data_rels: list[DataRelation],
    meta_rels: list[MetaRelation],
    intent: str,
    facts: Mapping[str, DataFact] | None = None,
) -> str:
    """Assemble the placement prompt: deck, new fact, relations, intent, the
    two design constraints, and the output contract.

    ``facts`` resolves deck entry ids to descriptions (plumbing).

    Raises:
        DuplicateFact: the fact is already placed in the deck.
    """
    if deck.contains_fact(new_fact.id):
        raise DuplicateFact(f"fact {new_fact.id} is already in the deck")
    facts = facts or {}

    subspace = ", ".join(f"{c}={v}" for c, v in pairs_sorted(new_fact.subspace)) or "(none)"
    sections = [
        "You organize a slide deck that tells a data story. A new fact was just "
        "selected and must be inserted into the deck at a suitable position, "
        "considering how it fits each slide's topic, its relations to the facts "
        "before and after it, and the story's narrative intent.",
        "Current slide deck:\n" + _deck_block(deck, facts),
        f"New fact {new_fact.id}: {new_fact.description}\n"
        f"  type: {new_fact.fact_type}; subspace: {subspace}",
        "Relations of the new fact:\n" + _relations_block(new_fact, data_rels, meta_rels),
        f"Narrative intent: {intent}" if intent.strip() else f"Narrative intent: {NO_INTENT_MARKER}",
        "Design constraints you must respect:\n"
        f"- the {CAPACITY_CONSTRAINT} is {deck.max_facts_per_slide}\n"
        f"- keep the {ALTERNATION_CONSTRAINT}: never reorder or remove already "
        "placed facts, only insert the new one\n"
        "- never change a locked slide title or move an order-locked fact\n"
        "Give the slide receiving the fact a title summarizing its content, and "
        "explain the rationale behind the decision on all four semantic "
        "considerations (topic fit, relation to the previous fact, relation to "
        "the next fact, narrative intent fit).",
        PLACEMENT_CONTRACT,
    ]
    return "\n\n".join(sections)


# ---------------------------------------------------------------------------
# response parsing


def parse_placement(text: str, deck: StoryDeck) -> Placement:
    """Extract and sanity-check a placement payload against the deck.

    Raises:
        MalformedResponse: no payload, missing title, or missing rationale
            entries.
        OutOfRange: slide or position index outside the deck's bounds.
    """
    payload = extract_payload(text)
    if not isinstance(payload, dict):
        raise MalformedResponse("placement payload must be an object")
    for key in ("target", "position", "title", "rationale"):
        if key not in payload:
            raise MalformedResponse(f"placement missing field {key!r}")
    title = payload["title"]
    if not isinstance(title, str) or not title.strip():
        raise MalformedResponse("placement missing slide title")
    rationale_raw = payload["rationale"]
    if not isinstance(rationale_raw, dict) or set(rationale_raw) != set(RATIONALE_KEYS):
        raise MalformedResponse(
            f"rationale must carry exactly the entries {list(RATIONALE_KEYS)}"
        )
    rationale = PlacementRationale(**{k: str(rationale_raw[k]) for k in RATIONALE_KEYS})

    target = payload["target"]
    position = payload["position"]
    if not isinstance(position, int) or isinstance(position, bool):
        raise MalformedResponse("position must be an integer")

    if isinstance(target, dict) and "new_slide" in target:
        slide_index = target["new_slide"]
        if not isinstance(slide_index, int) or not (0 <= slide_index <= len(deck.slides)):
            raise OutOfRange(f"new slide position {slide_index!r} outside 0..{len(deck.slides)}")
        if position != 0:
            raise OutOfRange("position within a new slide must be 0")
        return Placement(True, slide_index, 0, title, rationale)

    if not isinstance(target, int) or isinstance(target, bool):
        raise MalformedResponse("target must be a slide index or {\"new_slide\": n}")
    if not (0 <= target < len(deck.slides)):
        raise OutOfRange(f"slide index {target} outside deck of {len(deck.slides)} slides")
    entries = deck.slides[target].entries
    if not (0 <= position <= len(entries)):
        raise OutOfRange(f"position {position} outside slide of {len(entries)} facts")
    return Placement(False, target, position, title, rationale)


# ---------------------------------------------------------------------------
# applying placements


def apply_placement(deck: StoryDeck, entry: FactEntry, p: Placement) -> StoryDeck:
    """Insert the entry per the placement; insertion-only by construction.

    Locked titles are kept (the fact is still inserted); an unlocked target
    slide adopts the placement's title. Inserting strictly between two
    adjacent entries fails when either separated neighbor is order-locked.

    Raises:
        DuplicateFact, CapacityExceeded, LockViolation, OutOfRange
    """
    if deck.contains_fact(entry.fact_id):
        raise DuplicateFact(f"fact {entry.fact_id} is already in the deck")

    if p.new_slide:
        if not (0 <= p.slide_index <= len(deck.slides)):
            raise OutOfRange(f"new slide position {p.slide_index} outside deck bounds")
        slide = Slide(title=p.slide_title, entries=(entry,))
        slides = deck.slides[: p.slide_index] + (slide,) + deck.slides[p.slide_index:]
        return replace(deck, slides=slides)

    if not (0 <= p.slide_index < len(deck.slides)):
        raise OutOfRange(f"slide index {p.slide_index} outside deck bounds")
    slide = deck.slides[p.slide_index]
    if len(slide.entries) >= deck.max_facts_per_slide:
        raise CapacityExceeded(
            f"slide {p.slide_index} already holds {len(slide.entries)} facts",
            slide=p.slide_index,
        )
    if not (0 <= p.position <= len(slide.entries)):
        raise OutOfRange(f"position {p.position} outside slide bounds")
    if 0 < p.position < len(slide.entries):
        left, right = slide.entries[p.position - 1], slide.entries[p.position]
        if left.order_locked or right.order_locked:
            raise LockViolation(
                f"insertion at {p.position} would separate an order-locked entry"
            )
    entries = slide.entries[: p.position] + (entry,) + slide.entries[p.position:]
    title = slide.title if slide.title_locked else p.slide_title
    slides = (
        deck.slides[: p.slide_index]
        + (replace(slide, title=title, entries=entries),)
        + deck.slides[p.slide_index + 1:]
    )
    return replace(deck, slides=slides)


# ---------------------------------------------------------------------------
# deterministic fallback


def _fallback_title(
    new_fact: DataFact, members: list[DataFact]
) -> str:
    shared = set(new_fact.subspace)
    for m in members:
        shared &= set(m.subspace)
    if shared:
        return ", ".join(str(v) for _, v in pairs_sorted(shared))
    col, agg = new_fact.measures[0]
    return f"{col} by {new_fact.dimension}" if new_fact.dimension else col


def fallback_placement(
    deck: StoryDeck,
    new_fact: DataFact,
    data_rels: list[DataRelation],
    meta_rels: list[MetaRelation],
    facts: Mapping[str, DataFact] | None = None,
) -> Placement:
    """Deterministic degraded-mode placement; total, never errors.

    Chooses the slide whose member facts have the highest maximum relation
    score to the new fact, comparing meta scores first and breaking ties with
    data scores; appends there when capacity allows, otherwise opens a new
    slide immediately after. With no relations at all, a new slide goes to
    the deck end.
    """
    facts = facts or {}

    def best_to(other_id: str) -> tuple[float, float]:
        meta = max(
            (r.score for r in meta_rels if {r.fact_a, r.fact_b} == {other_id, new_fact.id}),
            default=0.0,
        )
        data = max(
            (r.score for r in data_rels if {r.fact_a, r.fact_b} == {other_id, new_fact.id}),
            default=0.0,
        )
        return (meta, data)

    best_idx = None
    best_score = (0.0, 0.0)
    for i, slide in enumerate(deck.slides):
        slide_score = max((best_to(e.fact_id) for e in slide.entries), default=(0.0, 0.0))
        if slide_score > best_score:
            best_score = slide_score
            best_idx = i

    rationale = PlacementRationale(
        topic_fit="fallback rule: slide with highest relation score to the new fact",
        relation_to_previous="fallback rule: appended after the slide's last fact",
        relation_to_next="fallback rule: none, inserted at the end",
        intent_fit="fallback rule: intent not consulted in deterministic mode",
    )

    if best_idx is None:
        title = _fallback_title(new_fact, [])
        return Placement(True, len(deck.slides), 0, title, rationale)

    slide = deck.slides[best_idx]
    members = [facts[e.fact_id] for e in slide.entries if e.fact_id in facts]
    if len(slide.entries) < deck.max_facts_per_slide:
        title = slide.title if slide.title_locked else _fallback_title(new_fact, members)
        return Placement(False, best_idx, len(slide.entries), title, rationale)
    title = _fallback_title(new_fact, [])
    return Placement(True, best_idx + 1, 0, title, rationale)


# ---------------------------------------------------------------------------
# orchestration


def place_fact(
    deck: StoryDeck,
    entry: FactEntry,
    new_fact: DataFact,
    data_rels: list[DataRelation],
    meta_rels: list[MetaRelation],
    intent: str,
    facts: Mapping[str, DataFact],
    gateway: Gateway | None,
) -> tuple[StoryDeck, Placement, str]:
    """Place a fact via the gateway when possible, else via the fallback.

    Invalid model placements (malformed, out of range, capacity or lock
    violations) are never repaired silently: they route to the fallback.
    Returns (new deck, placement, "llm" | "fallback").
    """
    placement = None
    if gateway is not None:
        prompt = build_organization_prompt(deck, new_fact, data_rels, meta_rels, intent, facts)
        try:
            text = gateway.complete(prompt)
            try:
                placement = parse_placement(text, deck)
            except MalformedResponse:
                logger.warning("placement response unparsable; re-prompting once")
                retry = (
                    prompt
                    + "\n\nYour previous response could not be parsed. "
                    + "Respond with only the JSON object in the specified format."
                )
                placement = parse_placement(gateway.complete(retry), deck)
        except (GatewayError, MalformedResponse, OutOfRange) as e:
            logger.warning("placement failed (%s); using fallback", e.code)
            placement = None

    if placement is not None:
        try:
            return apply_placement(deck, entry, placement), placement, "llm"
        except (CapacityExceeded, LockViolation, OutOfRange) as e:
            logger.warning("placement rejected (%s); using fallback", e.code)

    placement = fallback_placement(deck, new_fact, data_rels, meta_rels, facts)
    return apply_placement(deck, entry, placement), placement, "fallback"
