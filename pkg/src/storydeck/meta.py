"""Meta relation identification: prompt construction, response parsing,
entity verification, score aggregation, and ranking.

The model is asked for three things per candidate relation: the completed
quadruple (two facts, free-text type, five 1..5 self-ratings), the entities
the relation rests on (checked here against the facts), and the evidence
quote plus intent explanation shown to the user for eyeball verification.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .errors import EmptyFactSet, InvalidScoreRange, MalformedResponse, ZeroWeights
from .gateway import Gateway
from .model import (
    DataFact,
    KnowledgeDoc,
    MetaRelation,
    NarrativeContext,
    SubScores,
    normalize_ws,
    pairs_sorted,
)

logger = logging.getLogger(__name__)

# At most this many suggestions survive per (previous, new) fact pair.
MAX_PER_PAIR = 2

DEFAULT_WEIGHTS = (1.0, 1.0, 1.0, 1.0)

SCORE_NAMES = ("strength", "fidelity", "helpfulness", "interestingness", "confidence")

NO_INTENT_MARKER = "No narrative intent provided."

RESPONSE_CONTRACT = """\
Respond with a single JSON object and nothing else, in exactly this shape:
{"relations": [
  {"fact_a": "<fact id>",
   "fact_b": "<fact id>",
   "type": "<one- or two-sentence description of the relation>",
   "summary": "<label of at most 3 words>",
   "scores": {"strength": 1-5, "fidelity": 1-5, "helpfulness": 1-5,
              "interestingness": 1-5, "confidence": 1-5},
   "entities": ["<entity present in the facts>", "..."],
   "evidence": "<the original sentence(s) from the domain knowledge>",
   "intent_link": "<how the relation serves the narrative intent>"}
]}
Include every well-supported relation you find; use an empty list when there is none."""


@dataclass(frozen=True)
class IdentificationRequest:
    previous_facts: tuple[DataFact, ...]
    new_facts: tuple[DataFact, ...]
    knowledge_docs: tuple[KnowledgeDoc, ...] = ()
    intent: str = ""

    def __post_init__(self):
        prev_ids = {f.id for f in self.previous_facts}
        new_ids = {f.id for f in self.new_facts}
        if prev_ids & new_ids:
            raise ValueError("previous and new facts must be disjoint by id")


@dataclass(frozen=True)
class CandidateRecord:
    fact_a: str
    fact_b: str
    type_description: str
    summary: str
    sub_scores: SubScores
    entities: tuple[str, ...]
    evidence_quote: str
    intent_link: str


@dataclass(frozen=True)
class IdentificationResponse:
    candidates: tuple[CandidateRecord, ...]
    dropped: tuple[str, ...] = ()


@dataclass(frozen=True)
class Verification:
    accepted: bool
    reason: str = ""


# ---------------------------------------------------------------------------
# prompt


def _fact_block(fact: DataFact, role: str) -> str:
    subspace = ", ".join(f"{c}={v}" for c, v in pairs_sorted(fact.subspace)) or "(none)"
    focus = ", ".join(f"{c}={v}" for c, v in pairs_sorted(fact.focus)) or "(none)"
    measures = ", ".join(f"{agg}({col})" for col, agg in fact.measures)
    return (
        f"Fact {fact.id} ({role}): {fact.description}\n"
        f"  type: {fact.fact_type}; subspace: {subspace}; dimension: {fact.dimension}; "
        f"measures: {measures}; focus: {focus}"
    )


def build_identification_prompt(req: IdentificationRequest) -> str:
    """Assemble the three-task identification prompt in fixed section order:
    definition, tasks, facts, knowledge, intent, output contract.

    Raises:
        EmptyFactSet: no previous or no new facts to pair.
    """
    if not req.previous_facts or not req.new_facts:
        raise EmptyFactSet("identification needs at least one previous and one new fact")

    sections = []
    sections.append(
        "You help compose a data story from data facts. A meta relation connects two "
        "data facts using information beyond the dataset itself, such as domain "
        "knowledge or the story's narrative intent. It is a quadruple "
        "(fact_a, fact_b, type, score): the two connected facts, a free-form natural "
        "language description of the relation, and an importance score."
    )
    sections.append(
        "Task 1: Complete the quadruples of meta relations between the previously "
        "selected facts and the new facts below. For each relation, give the two fact "
        "ids, describe the relation type in free-form natural language grounded in the "
        "domain knowledge, give a summary label of at most 3 words, and self-rate the "
        "relation with integer scores from 1 (lowest) to 5 (highest) on five "
        "perspectives: strength (how strong the relation is), fidelity (how much it "
        "covers the domain knowledge), helpfulness (how much it helps convey the "
        "narrative intent), interestingness (whether it would attract the audience), "
        "and confidence (how reliable your answer is).\n"
        "Task 2: For automatic verification, list the entities the relation is about. "
        "Entities must be parts of the two data facts themselves, such as filter "
        "values, focus values, or attribute names, never items that appear only in "
        "the domain knowledge.\n"
        "Task 3: For the user's verification with eyeballing, quote the original text "
        "of the domain knowledge the relation is derived from, and explain how the "
        "relation is linked to the narrative intent."
    )
    fact_blocks = [_fact_block(f, "previously selected") for f in req.previous_facts]
    fact_blocks += [_fact_block(f, "new") for f in req.new_facts]
    sections.append("Data facts:\n" + "\n".join(fact_blocks))
    if req.knowledge_docs:
        docs = "\n\n".join(f"[{d.doc_id}] {d.title}\n{d.body}" for d in req.knowledge_docs)
    else:
        docs = "(no domain knowledge provided)"
    sections.append("Domain knowledge:\n" + docs)
    sections.append(
        f"Narrative intent: {req.intent}" if req.intent.strip() else f"Narrative intent: {NO_INTENT_MARKER}"
    )
    sections.append(RESPONSE_CONTRACT)
    return "\n\n".join(sections)


# ---------------------------------------------------------------------------
# response parsing


def extract_payload(text: str):
    """Return the first balanced JSON object or array embedded in the text."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch in "{[":
            try:
                obj, _ = decoder.raw_decode(text[i:])
            except json.JSONDecodeError:
                continue
            return obj
    raise MalformedResponse("no JSON payload found in response")


def _candidate_from_raw(raw, index: int, known_ids: set[str] | None) -> CandidateRecord:
    if not isinstance(raw, dict):
        raise ValueError("candidate is not an object")
    for key in ("fact_a", "fact_b", "type", "scores", "entities"):
        if key not in raw:
            raise ValueError(f"missing field {key!r}")
    fact_a, fact_b = str(raw["fact_a"]), str(raw["fact_b"])
    if known_ids is not None and (fact_a not in known_ids or fact_b not in known_ids):
        raise ValueError(f"unknown fact id in pair ({fact_a}, {fact_b})")
    scores = raw["scores"]
    if not isinstance(scores, dict):
        raise ValueError("scores must be an object")
    values = {}
    for name in SCORE_NAMES:
        if name not in scores:
            raise ValueError(f"missing score {name!r}")
        v = scores[name]
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        if not isinstance(v, int) or isinstance(v, bool) or not (1 <= v <= 5):
            raise ValueError(f"score {name!r} outside 1..5")
        values[name] = v
    entities = raw["entities"]
    if not isinstance(entities, list) or not all(isinstance(e, str) for e in entities):
        raise ValueError("entities must be a list of strings")
    return CandidateRecord(
        fact_a=fact_a,
        fact_b=fact_b,
        type_description=str(raw["type"]),
        summary=str(raw.get("summary", "")),
        sub_scores=SubScores(**values),
        entities=tuple(entities),
        evidence_quote=str(raw.get("evidence", "")),
        intent_link=str(raw.get("intent_link", "")),
    )


def parse_identification_response(
    text: str, known_ids: set[str] | None = None
) -> IdentificationResponse:
    """Extract candidates from a model response, dropping invalid ones
    individually.

    A candidate is dropped (and reported in ``dropped``) when it misses a
    required field, references an unknown fact id, or carries a sub-score
    outside 1..5. A response with no parsable payload at all raises
    MalformedResponse.
    """
    payload = extract_payload(text)
    if isinstance(payload, dict) and isinstance(payload.get("relations"), list):
        raw_candidates = payload["relations"]
    elif isinstance(payload, list):
        raw_candidates = payload
    else:
        raise MalformedResponse("payload carries no relations list")

    candidates = []
    dropped = []
    for i, raw in enumerate(raw_candidates):
        try:
            candidates.append(_candidate_from_raw(raw, i, known_ids))
        except ValueError as e:
            dropped.append(f"candidate {i}: {e}")
    return IdentificationResponse(candidates=tuple(candidates), dropped=tuple(dropped))


# ---------------------------------------------------------------------------
# verification


def fact_surface(fact: DataFact) -> str:
    """The fact's textual surface entities are matched against: subspace and
    focus values, dimension and measure names, and the description."""
    parts = [str(v) for _, v in pairs_sorted(fact.subspace)]
    parts += [str(v) for _, v in pairs_sorted(fact.focus)]
    if fact.dimension:
        parts.append(fact.dimension)
    for col, agg in fact.measures:
        parts += [col, agg]
    parts.append(fact.description)
    return normalize_ws(" ".join(parts)).casefold()


def verify_entities(candidate: CandidateRecord, fa: DataFact, fb: DataFact) -> Verification:
    """Accept iff the candidate lists at least one entity and every entity
    occurs (case-insensitive substring, whitespace-normalized) in the union
    of the two facts' textual surface."""
    if not candidate.entities:
        return Verification(False, "no entities listed")
    surface = fact_surface(fa) + " " + fact_surface(fb)
    for entity in candidate.entities:
        needle = normalize_ws(entity).casefold()
        if not needle or needle not in surface:
            return Verification(False, f"entity not found in facts: {entity!r}")
    return Verification(True)


# ---------------------------------------------------------------------------
# scoring


def aggregate_score(sub_scores: SubScores, weights=DEFAULT_WEIGHTS) -> float:
    """Combine the five 1..5 self-ratings into one [0, 1] score.

    The confidence rating scales the weighted sum of the other four; the
    result is normalized by its maximum (5 * 5 * sum of weights) so that
    all-fives with any weights yield exactly 1.0.

    Raises:
        InvalidScoreRange: a sub-score is not an integer in 1..5.
        ZeroWeights: weights are negative or sum to zero.
    """
    values = sub_scores.to_dict()
    for name, v in values.items():
        if not isinstance(v, int) or isinstance(v, bool) or not (1 <= v <= 5):
            raise InvalidScoreRange(f"sub-score {name} = {v!r} outside 1..5")
    if len(weights) != 4:
        raise ZeroWeights("exactly four weights expected")
    if any(w < 0 for w in weights):
        raise ZeroWeights("weights must be non-negative")
    total = sum(weights)
    if total == 0:
        raise ZeroWeights("weights must not all be zero")
    weighted = sum(w * s for w, s in zip(weights, sub_scores.weighted()))
    return (values["confidence"] * weighted) / (5.0 * 5.0 * total)


# ---------------------------------------------------------------------------
# pipeline


def suggest_meta_relations(
    req: IdentificationRequest,
    gateway: Gateway,
    weights=DEFAULT_WEIGHTS,
    id_start: int = 0,
    id_prefix: str = "m",
    stats: dict | None = None,
) -> list[MetaRelation]:
    """Full identification pipeline: prompt, complete, parse, verify each
    candidate, score, and rank.

    Only candidates whose entities verify against their fact pair survive;
    at most MAX_PER_PAIR top-ranked suggestions are kept per (previous, new)
    pair. Gateway failures propagate so callers can degrade to data
    relations only. ``stats``, when given, collects made/verified/returned
    counts for run reports.
    """
    prompt = build_identification_prompt(req)
    facts = {f.id: f for f in list(req.previous_facts) + list(req.new_facts)}
    prev_ids = {f.id for f in req.previous_facts}
    new_ids = {f.id for f in req.new_facts}
    nc = NarrativeContext(knowledge_docs=req.knowledge_docs, intent=req.intent)

    text = gateway.complete(prompt)
    try:
        parsed = parse_identification_response(text, known_ids=set(facts))
    except MalformedResponse:
        logger.warning("identification response unparsable; re-prompting once")
        retry = (
            prompt
            + "\n\nYour previous response could not be parsed. "
            + "Respond with only the JSON object in the specified format."
        )
        parsed = parse_identification_response(gateway.complete(retry), known_ids=set(facts))
    for reason in parsed.dropped:
        logger.info("dropped identification candidate: %s", reason)
    if stats is not None:
        stats["made"] = stats.get("made", 0) + len(parsed.candidates) + len(parsed.dropped)

    accepted = []
    for cand in parsed.candidates:
        ids = {cand.fact_a, cand.fact_b}
        if not (ids & prev_ids and ids & new_ids):
            logger.info("dropped candidate pairing two %s facts: %s",
                        "previous" if ids <= prev_ids else "new", ids)
            continue
        verdict = verify_entities(cand, facts[cand.fact_a], facts[cand.fact_b])
        if not verdict.accepted:
            logger.info("candidate failed entity verification: %s", verdict.reason)
            continue
        accepted.append(cand)

    if stats is not None:
        stats["verified"] = stats.get("verified", 0) + len(accepted)

    scored = [(aggregate_score(c.sub_scores, weights), c) for c in accepted]
    scored.sort(key=lambda sc: (-sc[0], sc[1].fact_a, sc[1].fact_b))

    per_pair: dict[tuple[str, str], int] = {}
    out: list[MetaRelation] = []
    for score, cand in scored:
        prev = cand.fact_a if cand.fact_a in prev_ids else cand.fact_b
        new = cand.fact_b if prev == cand.fact_a else cand.fact_a
        pair = (prev, new)
        if per_pair.get(pair, 0) >= MAX_PER_PAIR:
            continue
        per_pair[pair] = per_pair.get(pair, 0) + 1
        out.append(
            MetaRelation(
                id=f"{id_prefix}{id_start + len(out)}",
                fact_a=cand.fact_a,
                fact_b=cand.fact_b,
                type_description=cand.type_description,
                summary=cand.summary,
                score=score,
                status="suggested",
                sub_scores=cand.sub_scores,
                weights=tuple(weights),
                entities=cand.entities,
                evidence_quote=cand.evidence_quote,
                evidence_matched=nc.quote_in_knowledge(cand.evidence_quote),
                intent_link=cand.intent_link,
            )
        )
    return out
