"""Stateful authoring sessions: the engine behind the HTTP service and CLI.

One session = one dataset plus narrative context, the charts submitted so
far, mined fact candidates, meta relation suggestions by status, and the
evolving deck. Per-session mutations are serialized behind a lock and bump a
revision counter; sessions are fully independent of each other.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import meta, organizer
from .errors import (
    CapacityExceeded,
    DuplicateFact,
    EmptyDeck,
    GatewayError,
    MalformedResponse,
    UnknownFact,
    UnknownRelation,
    UnknownSession,
    UnknownTarget,
)
from .export import SlideDocument, export_deck, serialize_story
from .facts import DEFAULT_TOP_K, mine_facts
from .gateway import Gateway, Transcript
from .ingest import ChartContext, load_dataset, parse_chart_spec, resolve_chart
from .model import (
    DataFact,
    FactEntry,
    KnowledgeDoc,
    MetaRelation,
    NarrativeContext,
    StoryDeck,
    normalize_ws,
    validate_deck,
)
from .relations import compute_data_relations

logger = logging.getLogger(__name__)


@dataclass
class Session:
    session_id: str
    dataset: object
    narrative: NarrativeContext
    deck: StoryDeck
    charts: dict[str, ChartContext] = field(default_factory=dict)
    facts: dict[str, DataFact] = field(default_factory=dict)
    relations: dict[str, MetaRelation] = field(default_factory=dict)
    suggestion_keys: set[tuple[frozenset, str]] = field(default_factory=set)
    transcript: Transcript = field(default_factory=Transcript)
    revision: int = 0
    relation_counter: int = 0
    chart_counter: int = 0
    placements: dict[str, int] = field(default_factory=lambda: {"llm": 0, "fallback": 0})
    suggestion_stats: dict[str, int] = field(
        default_factory=lambda: {"made": 0, "verified": 0, "accepted": 0}
    )
    lock: threading.RLock = field(default_factory=threading.RLock)

    def deck_fact_objects(self) -> list[DataFact]:
        return [self.facts[fid] for fid in self.deck.fact_ids()]


def _suggestion_key(rel: MetaRelation) -> tuple[frozenset, str]:
    return (frozenset({rel.fact_a, rel.fact_b}), normalize_ws(rel.type_description).casefold())


class SessionManager:
    """Holds all live sessions; every public method is one service call."""

    def __init__(
        self,
        gateway: Gateway | None = None,
        top_k: int = DEFAULT_TOP_K,
        max_facts_per_slide: int = 3,
        weights=meta.DEFAULT_WEIGHTS,
        snapshot_dir: str | Path | None = None,
    ):
        self.gateway = gateway
        self.top_k = top_k
        self.max_facts_per_slide = max_facts_per_slide
        self.weights = tuple(weights)
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0

    # -- helpers ------------------------------------------------------------

    def _session(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def _snapshot(self, session: Session) -> None:
        if self.snapshot_dir is None:
            return
        try:
            self.snapshot_dir.mkdir(parents=True, exist_ok=True)
            path = self.snapshot_dir / f"{session.session_id}.story.json"
            path.write_text(
                serialize_story(session.deck, session.facts, session.relations, session.charts),
                encoding="utf-8",
            )
        except OSError as e:
            logger.warning("snapshot of %s failed: %s", session.session_id, e)

    def _bump(self, session: Session) -> int:
        session.revision += 1
        self._snapshot(session)
        return session.revision

    # -- operations ----------------------------------------------------------

    def create_session(
        self,
        dataset_source: str | bytes,
        knowledge_docs: list[KnowledgeDoc] | None = None,
        intent: str = "",
        dataset_name: str = "dataset",
    ) -> dict:
        dataset = load_dataset(dataset_source, name=dataset_name)
        with self._lock:
            self._counter += 1
            session_id = f"s{self._counter}"
            session = Session(
                session_id=session_id,
                dataset=dataset,
                narrative=NarrativeContext(
                    knowledge_docs=tuple(knowledge_docs or ()), intent=intent
                ),
                deck=StoryDeck(max_facts_per_slide=self.max_facts_per_slide, intent=intent),
            )
            self._sessions[session_id] = session
        return {"session_id": session_id, "revision": session.revision}

    def submit_chart(self, session_id: str, spec_source) -> dict:
        """Resolve a chart, mine facts, and suggest meta relations against
        the previously selected facts when a gateway is available."""
        session = self._session(session_id)
        with session.lock:
            spec = parse_chart_spec(spec_source, session.dataset)
            chart_id = spec.chart_id
            session.chart_counter += 1
            if not chart_id or chart_id in session.charts:
                base = chart_id or f"c{session.chart_counter}"
                chart_id = base
                n = 1
                while chart_id in session.charts:
                    n += 1
                    chart_id = f"{base}.{n}"
            spec = replace(spec, chart_id=chart_id)
            ctx = resolve_chart(session.dataset, spec)
            session.charts[chart_id] = ctx

            candidates = mine_facts(ctx, session.narrative, top_k=self.top_k)
            for cand in candidates:
                session.facts[cand.fact.id] = cand.fact

            previous = session.deck_fact_objects()
            suggestions: list[MetaRelation] = []
            warning = None
            if previous and candidates and self.gateway is not None:
                req = meta.IdentificationRequest(
                    previous_facts=tuple(previous),
                    new_facts=tuple(c.fact for c in candidates),
                    knowledge_docs=session.narrative.knowledge_docs,
                    intent=session.narrative.intent,
                )
                try:
                    raw = meta.suggest_meta_relations(
                        req,
                        self._session_gateway(session),
                        weights=self.weights,
                        id_start=session.relation_counter,
                        stats=session.suggestion_stats,
                    )
                    for rel in raw:
                        key = _suggestion_key(rel)
                        if key in session.suggestion_keys:
                            continue
                        session.suggestion_keys.add(key)
                        session.relations[rel.id] = rel
                        suggestions.append(rel)
                    session.relation_counter += len(raw)
                except (GatewayError, MalformedResponse) as e:
                    logger.warning("meta suggestions unavailable: %s", e)
                    warning = "meta suggestions unavailable"

            revision = self._bump(session)
            out = {
                "chart_id": chart_id,
                "chart": ctx.to_dict(),
                "facts": [c.fact.to_dict() for c in candidates],
                "suggestions": [r.to_dict() for r in suggestions],
                "revision": revision,
            }
            if warning:
                out["warning"] = warning
            return out

    def _session_gateway(self, session: Session) -> Gateway | None:
        if self.gateway is None:
            return None
        return Gateway(
            backend=self.gateway.backend,
            params=self.gateway.params,
            transcript=session.transcript,
        )

    def select_fact(self, session_id: str, fact_id: str, meta_relation_id: str | None = None) -> dict:
        """Accept the optional relation, then organize the fact into the deck."""
        session = self._session(session_id)
        with session.lock:
            fact = session.facts.get(fact_id)
            if fact is None:
                raise UnknownFact(f"fact {fact_id!r} was not mined in this session")
            if session.deck.contains_fact(fact_id):
                raise DuplicateFact(f"fact {fact_id} is already in the deck")

            prev_fact_id = None
            if meta_relation_id is not None:
                rel = session.relations.get(meta_relation_id)
                if rel is None:
                    raise UnknownRelation(f"no meta relation {meta_relation_id!r}")
                if fact_id not in (rel.fact_a, rel.fact_b):
                    raise UnknownRelation(
                        f"relation {meta_relation_id} does not involve fact {fact_id}"
                    )
                if rel.status == "suggested":
                    rel = replace(rel, status="accepted")
                    session.relations[meta_relation_id] = rel
                    session.suggestion_stats["accepted"] += 1
                prev_fact_id = rel.fact_a if rel.fact_b == fact_id else rel.fact_b

            deck_ids = set(session.deck.fact_ids())
            data_rels = []
            for other_id in session.deck.fact_ids():
                data_rels.extend(compute_data_relations(session.facts[other_id], fact))
            meta_rels = [
                r
                for r in session.relations.values()
                if r.status in ("accepted", "edited", "user_added")
                and fact_id in (r.fact_a, r.fact_b)
                and ({r.fact_a, r.fact_b} - {fact_id}) <= deck_ids
            ]

            entry = FactEntry(
                fact_id=fact_id,
                incoming_meta_relation=meta_relation_id,
                prev_fact_id=prev_fact_id,
            )
            deck, placement, via = organizer.place_fact(
                session.deck,
                entry,
                fact,
                data_rels,
                meta_rels,
                session.narrative.intent,
                session.facts,
                self._session_gateway(session),
            )
            validate_deck(deck, session.relations)
            session.deck = deck
            session.placements[via] += 1
            revision = self._bump(session)
            return {
                "deck": deck.to_dict(),
                "placement": placement.to_dict(),
                "rationale": placement.rationale.to_dict(),
                "placed_by": via,
                "revision": revision,
            }

    def edit_meta_relation(
        self,
        session_id: str,
        relation_id: str,
        type_description: str | None = None,
        status: str | None = None,
    ) -> dict:
        """Replace the description (status becomes edited) or accept/reject."""
        session = self._session(session_id)
        with session.lock:
            rel = session.relations.get(relation_id)
            if rel is None:
                raise UnknownRelation(f"no meta relation {relation_id!r}")
            if type_description is not None:
                rel = replace(rel, type_description=type_description, status="edited")
            if status is not None:
                if status not in ("accepted", "rejected"):
                    raise UnknownRelation(f"cannot set status {status!r}")
                rel = replace(rel, status=status)
            session.relations[relation_id] = rel
            revision = self._bump(session)
            return {"relation": rel.to_dict(), "revision": revision}

    def mutate_deck(self, session_id: str, op: dict) -> dict:
        """User-driven deck mutations: move, delete, retitle, lock."""
        session = self._session(session_id)
        with session.lock:
            kind = op.get("op")
            if kind == "move":
                deck = self._move(session.deck, op)
            elif kind == "delete":
                deck = self._delete(session.deck, op)
            elif kind == "retitle":
                deck = self._retitle(session.deck, op, lock=True)
            elif kind == "lock":
                deck = self._apply_lock(session.deck, op)
            else:
                raise UnknownTarget(f"unknown deck operation {kind!r}")
            validate_deck(deck, session.relations)
            session.deck = deck
            revision = self._bump(session)
            return {"deck": deck.to_dict(), "revision": revision}

    @staticmethod
    def _find_entry(deck: StoryDeck, fact_id: str) -> tuple[int, int]:
        for i, slide in enumerate(deck.slides):
            for j, entry in enumerate(slide.entries):
                if entry.fact_id == fact_id:
                    return i, j
        raise UnknownTarget(f"fact {fact_id!r} is not in the deck")

    def _move(self, deck: StoryDeck, op: dict) -> StoryDeck:
        fact_id = op.get("fact_id", "")
        target = op.get("slide")
        position = op.get("position", 0)
        si, sj = self._find_entry(deck, fact_id)
        if not isinstance(target, int) or not (0 <= target < len(deck.slides)):
            raise UnknownTarget(f"no slide {target!r}")
        entry = replace(deck.slides[si].entries[sj], order_locked=True)
        if target != si and len(deck.slides[target].entries) >= deck.max_facts_per_slide:
            raise CapacityExceeded(f"slide {target} is full", slide=target)

        slides = list(deck.slides)
        src_entries = list(slides[si].entries)
        src_entries.pop(sj)
        slides[si] = replace(slides[si], entries=tuple(src_entries))
        dst_entries = list(slides[target].entries)
        position = max(0, min(position, len(dst_entries)))
        dst_entries.insert(position, entry)
        slides[target] = replace(slides[target], entries=tuple(dst_entries))
        slides = [s for s in slides if s.entries]
        return replace(deck, slides=tuple(slides))

    def _delete(self, deck: StoryDeck, op: dict) -> StoryDeck:
        fact_id = op.get("fact_id", "")
        si, sj = self._find_entry(deck, fact_id)
        slides = list(deck.slides)
        entries = list(slides[si].entries)
        entries.pop(sj)
        slides[si] = replace(slides[si], entries=tuple(entries))
        slides = [s for s in slides if s.entries]
        return replace(deck, slides=tuple(slides))

    def _retitle(self, deck: StoryDeck, op: dict, lock: bool) -> StoryDeck:
        target = op.get("slide")
        if not isinstance(target, int) or not (0 <= target < len(deck.slides)):
            raise UnknownTarget(f"no slide {target!r}")
        slides = list(deck.slides)
        slides[target] = replace(
            slides[target], title=str(op.get("title", "")), title_locked=lock
        )
        return replace(deck, slides=tuple(slides))

    def _apply_lock(self, deck: StoryDeck, op: dict) -> StoryDeck:
        if "slide" in op:
            target = op["slide"]
            if not isinstance(target, int) or not (0 <= target < len(deck.slides)):
                raise UnknownTarget(f"no slide {target!r}")
            slides = list(deck.slides)
            slides[target] = replace(slides[target], title_locked=True)
            return replace(deck, slides=tuple(slides))
        if "fact_id" in op:
            si, sj = self._find_entry(deck, op["fact_id"])
            slides = list(deck.slides)
            entries = list(slides[si].entries)
            entries[sj] = replace(entries[sj], order_locked=True)
            slides[si] = replace(slides[si], entries=tuple(entries))
            return replace(deck, slides=tuple(slides))
        raise UnknownTarget("lock needs a slide index or fact_id")

    def update_intent(self, session_id: str, intent: str) -> dict:
        """Replace the narrative intent; affects only later calls."""
        session = self._session(session_id)
        with session.lock:
            session.narrative = session.narrative.with_intent(intent)
            session.deck = replace(session.deck, intent=intent)
            revision = self._bump(session)
            return {"intent": intent, "revision": revision}

    def export(self, session_id: str, format: str = "markdown-slides", theme: str = "plain") -> SlideDocument:
        session = self._session(session_id)
        with session.lock:
            if not session.deck.slides:
                raise EmptyDeck("the deck has no slides to export")
            return export_deck(
                session.deck,
                session.facts,
                session.charts,
                theme=theme,
                format=format,
                relations=session.relations,
            )

    def transcript_jsonl(self, session_id: str) -> str:
        return self._session(session_id).transcript.to_jsonl()

    def get_state(self, session_id: str) -> dict:
        session = self._session(session_id)
        with session.lock:
            return {
                "session_id": session.session_id,
                "revision": session.revision,
                "dataset": {
                    "name": session.dataset.name,
                    "columns": [c.to_dict() for c in session.dataset.columns],
                    "row_count": len(session.dataset.rows),
                },
                "intent": session.narrative.intent,
                "knowledge_docs": [d.to_dict() for d in session.narrative.knowledge_docs],
                "charts": {cid: ctx.to_dict() for cid, ctx in session.charts.items()},
                "facts": {fid: f.to_dict() for fid, f in session.facts.items()},
                "meta_relations": {rid: r.to_dict() for rid, r in session.relations.items()},
                "deck": session.deck.to_dict(),
                "placements": dict(session.placements),
                "suggestion_stats": dict(session.suggestion_stats),
            }
