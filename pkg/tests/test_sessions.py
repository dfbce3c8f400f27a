import json

import pytest

from storydeck.errors import (
    CapacityExceeded,
    DuplicateFact,
    EmptyDeck,
    ParseError,
    UnknownFact,
    UnknownRelation,
    UnknownSession,
    UnknownTarget,
)
from storydeck.export import parse_story
from storydeck.gateway import CompletionParams, Gateway, mock_load
from storydeck.model import KnowledgeDoc
from storydeck.sessions import SessionManager

from conftest import load_json


SIMPLE_CSV = (
    "model,category,sales,year\n"
    "Camry,Sedan,400,2007\nCamry,Sedan,380,2008\nCamry,Sedan,390,2009\n"
    "Corolla,Sedan,300,2007\nCorolla,Sedan,310,2008\nCorolla,Sedan,320,2009\n"
    "CR-V,SUV,210,2007\nCR-V,SUV,260,2008\nCR-V,SUV,280,2009\n"
)

MODEL_CHART = {
    "mark": "bar",
    "encoding": {"x": {"field": "model"}, "y": {"field": "sales", "aggregate": "sum"}},
}


def year_chart(model):
    return {
        "mark": "line",
        "encoding": {"x": {"field": "year"}, "y": {"field": "sales", "aggregate": "sum"}},
        "transform": [{"filter": {"field": "model", "equal": model}}],
    }


@pytest.fixture
def offline() -> SessionManager:
    return SessionManager(gateway=None)


@pytest.fixture
def sid(offline) -> str:
    return offline.create_session(SIMPLE_CSV, intent="compare sedans")["session_id"]


def ev_manager(ev_paths, intent="compare hybrid and plug-in electric car sales"):
    gw = Gateway(
        backend=mock_load(load_json(ev_paths["mock"])),
        params=CompletionParams(deadline=1.0),
    )
    manager = SessionManager(gateway=gw)
    doc = KnowledgeDoc("k1", "electric cars", ev_paths["knowledge"].read_text())
    sid = manager.create_session(
        ev_paths["data"].read_bytes(), knowledge_docs=[doc], intent=intent
    )["session_id"]
    return manager, sid


class TestCreateSession:
    def test_initial_state(self, offline):
        out = offline.create_session(SIMPLE_CSV, intent="x")
        state = offline.get_state(out["session_id"])
        assert state["deck"]["slides"] == []
        assert state["revision"] == 0

    def test_malformed_csv(self, offline):
        with pytest.raises(ParseError):
            offline.create_session('a,b\n"broken,1\n')

    def test_no_knowledge_docs_is_fine(self, offline):
        out = offline.create_session(SIMPLE_CSV)
        assert offline.get_state(out["session_id"])["knowledge_docs"] == []

    def test_unknown_session(self, offline):
        with pytest.raises(UnknownSession):
            offline.get_state("nope")


class TestSubmitChart:
    def test_first_chart_has_no_suggestions(self, ev_paths):
        manager, sid = ev_manager(ev_paths)
        result = manager.submit_chart(sid, load_json(ev_paths["chart_prius"]))
        assert result["facts"]
        assert result["suggestions"] == []

    def test_second_chart_suggests_scripted_relation(self, ev_paths):
        manager, sid = ev_manager(ev_paths)
        manager.submit_chart(sid, load_json(ev_paths["chart_prius"]))
        manager.select_fact(sid, "c1.trend.0")
        result = manager.submit_chart(sid, load_json(ev_paths["chart_plugins"]))
        assert len(result["suggestions"]) == 1
        assert "competitors in the electric car market" in result["suggestions"][0]["type_description"]

    def test_gateway_timeout_degrades_with_warning(self, ev_paths):
        script = [
            {"index": 0, "response": json.dumps(load_json(ev_paths["mock"])[1]["response"])},
            {"substring": "quadruples", "response": "slow", "delay": 0.05},
        ]
        gw = Gateway(backend=mock_load(script), params=CompletionParams(deadline=0.02))
        manager = SessionManager(gateway=gw)
        sid = manager.create_session(ev_paths["data"].read_bytes())["session_id"]
        manager.submit_chart(sid, load_json(ev_paths["chart_prius"]))
        manager.select_fact(sid, "c1.trend.0")
        result = manager.submit_chart(sid, load_json(ev_paths["chart_plugins"]))
        assert result["warning"] == "meta suggestions unavailable"
        assert result["facts"]
        assert result["suggestions"] == []

    def test_chart_ids_assigned_when_missing(self, offline, sid):
        r1 = offline.submit_chart(sid, MODEL_CHART)
        r2 = offline.submit_chart(sid, MODEL_CHART)
        assert r1["chart_id"] != r2["chart_id"]

    def test_mined_facts_registered(self, offline, sid):
        result = offline.submit_chart(sid, MODEL_CHART)
        state = offline.get_state(sid)
        for fact in result["facts"]:
            assert fact["id"] in state["facts"]


class TestSelectFact:
    def test_entry_carries_accepted_relation(self, ev_paths):
        manager, sid = ev_manager(ev_paths)
        manager.submit_chart(sid, load_json(ev_paths["chart_prius"]))
        manager.select_fact(sid, "c1.trend.0")
        result = manager.submit_chart(sid, load_json(ev_paths["chart_plugins"]))
        rid = result["suggestions"][0]["id"]
        sel = manager.select_fact(sid, "c2.trend.0", rid)
        entries = sel["deck"]["slides"][0]["entries"]
        assert entries[1]["incoming_meta_relation"] == rid
        assert entries[1]["prev_fact_id"] == "c1.trend.0"
        assert manager.get_state(sid)["meta_relations"][rid]["status"] == "accepted"

    def test_same_fact_twice_rejected(self, offline, sid):
        result = offline.submit_chart(sid, MODEL_CHART)
        fid = result["facts"][0]["id"]
        offline.select_fact(sid, fid)
        with pytest.raises(DuplicateFact):
            offline.select_fact(sid, fid)

    def test_unknown_fact(self, offline, sid):
        with pytest.raises(UnknownFact):
            offline.select_fact(sid, "ghost")

    def test_offline_placement_uses_fallback_rules(self, offline, sid):
        result = offline.submit_chart(sid, MODEL_CHART)
        sel = offline.select_fact(sid, result["facts"][0]["id"])
        assert sel["placed_by"] == "fallback"
        assert all("fallback rule" in v for v in sel["rationale"].values())

    def test_unknown_relation(self, offline, sid):
        result = offline.submit_chart(sid, MODEL_CHART)
        with pytest.raises(UnknownRelation):
            offline.select_fact(sid, result["facts"][0]["id"], "m99")


class TestEditMetaRelation:
    def setup_suggestion(self, ev_paths):
        manager, sid = ev_manager(ev_paths)
        manager.submit_chart(sid, load_json(ev_paths["chart_prius"]))
        manager.select_fact(sid, "c1.trend.0")
        result = manager.submit_chart(sid, load_json(ev_paths["chart_plugins"]))
        return manager, sid, result["suggestions"][0]["id"]

    def test_edit_sets_status_and_keeps_score(self, ev_paths):
        manager, sid, rid = self.setup_suggestion(ev_paths)
        before = manager.get_state(sid)["meta_relations"][rid]["score"]
        out = manager.edit_meta_relation(sid, rid, type_description="rivals on the EV market")
        assert out["relation"]["status"] == "edited"
        assert out["relation"]["type_description"] == "rivals on the EV market"
        assert out["relation"]["score"] == before

    def test_resubmit_does_not_duplicate_or_restore(self, ev_paths):
        manager, sid, rid = self.setup_suggestion(ev_paths)
        manager.edit_meta_relation(sid, rid, type_description="rivals on the EV market")
        result = manager.submit_chart(sid, load_json(ev_paths["chart_plugins"]))
        assert result["suggestions"] == []
        rel = manager.get_state(sid)["meta_relations"][rid]
        assert rel["type_description"] == "rivals on the EV market"
        assert rel["status"] == "edited"

    def test_reject_is_retained_and_not_resuggested(self, ev_paths):
        manager, sid, rid = self.setup_suggestion(ev_paths)
        manager.edit_meta_relation(sid, rid, status="rejected")
        result = manager.submit_chart(sid, load_json(ev_paths["chart_plugins"]))
        assert result["suggestions"] == []
        assert manager.get_state(sid)["meta_relations"][rid]["status"] == "rejected"

    def test_unknown_relation(self, offline, sid):
        with pytest.raises(UnknownRelation):
            offline.edit_meta_relation(sid, "m99", type_description="x")


class TestMutateDeck:
    def seeded(self, offline, sid, n=3):
        result = offline.submit_chart(sid, MODEL_CHART)
        fids = [f["id"] for f in result["facts"][:n]]
        for fid in fids:
            offline.select_fact(sid, fid)
        return fids

    def test_move_locks_entry_order(self, offline, sid):
        fids = self.seeded(offline, sid)
        out = offline.mutate_deck(sid, {"op": "move", "fact_id": fids[2], "slide": 0, "position": 0})
        entries = out["deck"]["slides"][0]["entries"]
        assert entries[0]["fact_id"] == fids[2]
        assert entries[0]["order_locked"] is True

    def test_move_to_full_slide_rejected(self, offline):
        manager = SessionManager(gateway=None, max_facts_per_slide=1)
        sid = manager.create_session(SIMPLE_CSV)["session_id"]
        result = manager.submit_chart(sid, MODEL_CHART)
        fids = [f["id"] for f in result["facts"][:2]]
        for fid in fids:
            manager.select_fact(sid, fid)
        with pytest.raises(CapacityExceeded):
            manager.mutate_deck(sid, {"op": "move", "fact_id": fids[1], "slide": 0, "position": 0})

    def test_delete_keeps_deck_valid(self, offline, sid):
        fids = self.seeded(offline, sid)
        out = offline.mutate_deck(sid, {"op": "delete", "fact_id": fids[1]})
        remaining = [e["fact_id"] for s in out["deck"]["slides"] for e in s["entries"]]
        assert fids[1] not in remaining

    def test_delete_last_fact_drops_slide(self, offline, sid):
        fids = self.seeded(offline, sid, n=1)
        out = offline.mutate_deck(sid, {"op": "delete", "fact_id": fids[0]})
        assert out["deck"]["slides"] == []

    def test_retitle_locks_and_later_placements_keep_it(self, offline, sid):
        result = offline.submit_chart(sid, MODEL_CHART)
        fids = [f["id"] for f in result["facts"][:2]]
        offline.select_fact(sid, fids[0])
        offline.mutate_deck(sid, {"op": "retitle", "slide": 0, "title": "SUV rivals"})
        sel = offline.select_fact(sid, fids[1])
        slide = sel["deck"]["slides"][0]
        assert slide["title"] == "SUV rivals"
        assert slide["title_locked"] is True

    def test_lock_targets(self, offline, sid):
        fids = self.seeded(offline, sid, n=1)
        offline.mutate_deck(sid, {"op": "lock", "slide": 0})
        out = offline.mutate_deck(sid, {"op": "lock", "fact_id": fids[0]})
        slide = out["deck"]["slides"][0]
        assert slide["title_locked"] and slide["entries"][0]["order_locked"]

    def test_unknown_target(self, offline, sid):
        with pytest.raises(UnknownTarget):
            offline.mutate_deck(sid, {"op": "delete", "fact_id": "ghost"})
        with pytest.raises(UnknownTarget):
            offline.mutate_deck(sid, {"op": "explode"})


class TestUpdateIntent:
    def test_next_prompt_contains_new_intent(self, ev_paths):
        manager, sid = ev_manager(ev_paths, intent="old intent")
        manager.submit_chart(sid, load_json(ev_paths["chart_prius"]))
        manager.select_fact(sid, "c1.trend.0")
        manager.update_intent(sid, "brand new intent")
        manager.submit_chart(sid, load_json(ev_paths["chart_plugins"]))
        prompts = [e.prompt for e in manager._session(sid).transcript.entries]
        assert "brand new intent" in prompts[-1]

    def test_empty_intent_clears_alignment(self, offline, sid):
        offline.update_intent(sid, "")
        result = offline.submit_chart(sid, MODEL_CHART)
        assert all(f["scores"]["interest_alignment"] == 0.0 for f in result["facts"])

    def test_unknown_session(self, offline):
        with pytest.raises(UnknownSession):
            offline.update_intent("nope", "x")


class TestExport:
    def test_two_slides_two_pages(self, offline):
        manager = SessionManager(gateway=None, max_facts_per_slide=1)
        sid = manager.create_session(SIMPLE_CSV)["session_id"]
        result = manager.submit_chart(sid, MODEL_CHART)
        for fact in result["facts"][:2]:
            manager.select_fact(sid, fact["id"])
        doc = manager.export(sid, format="markdown-slides")
        assert len(doc.pages) == 2

    def test_empty_deck_rejected(self, offline, sid):
        with pytest.raises(EmptyDeck):
            offline.export(sid)

    def test_structured_round_trips(self, offline, sid):
        result = offline.submit_chart(sid, MODEL_CHART)
        offline.select_fact(sid, result["facts"][0]["id"])
        doc = offline.export(sid, format="structured")
        parsed = parse_story(doc.content)
        assert parsed.deck == offline._session(sid).deck


class TestRevisions:
    def test_strictly_increasing_without_gaps(self, offline, sid):
        revisions = []
        result = offline.submit_chart(sid, MODEL_CHART)
        revisions.append(result["revision"])
        revisions.append(offline.select_fact(sid, result["facts"][0]["id"])["revision"])
        revisions.append(offline.update_intent(sid, "new")["revision"])
        revisions.append(
            offline.mutate_deck(sid, {"op": "retitle", "slide": 0, "title": "t"})["revision"]
        )
        assert revisions == list(range(1, len(revisions) + 1))

    def test_snapshots_written(self, tmp_path):
        manager = SessionManager(gateway=None, snapshot_dir=tmp_path)
        sid = manager.create_session(SIMPLE_CSV)["session_id"]
        result = manager.submit_chart(sid, MODEL_CHART)
        manager.select_fact(sid, result["facts"][0]["id"])
        snap = tmp_path / f"{sid}.story.json"
        assert snap.exists()
        assert parse_story(snap.read_text()).deck == manager._session(sid).deck
