import json
import threading

import pytest
from fastapi.testclient import TestClient

from storydeck.gateway import CompletionParams, Gateway, mock_load
from storydeck.service import create_app
from storydeck.sessions import SessionManager

from conftest import load_json

CSV = (
    "model,category,sales,year\n"
    "Camry,Sedan,400,2007\nCamry,Sedan,380,2008\nCamry,Sedan,390,2009\n"
    "Corolla,Sedan,300,2007\nCorolla,Sedan,310,2008\nCorolla,Sedan,320,2009\n"
    "CR-V,SUV,210,2007\nCR-V,SUV,260,2008\nCR-V,SUV,280,2009\n"
)

MODEL_CHART = {
    "mark": "bar",
    "encoding": {"x": {"field": "model"}, "y": {"field": "sales", "aggregate": "sum"}},
}


@pytest.fixture
def client():
    return TestClient(create_app(SessionManager(gateway=None)))


def create_session(client, **overrides) -> str:
    body = {"dataset_csv": CSV, "intent": "compare sedans"}
    body.update(overrides)
    resp = client.post("/api/sessions", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()["session_id"]


class TestEndpoints:
    def test_create_and_get(self, client):
        sid = create_session(client)
        state = client.get(f"/api/sessions/{sid}").json()
        assert state["session_id"] == sid
        assert state["deck"]["slides"] == []
        assert state["intent"] == "compare sedans"

    def test_chart_selection_deck_flow(self, client):
        sid = create_session(client)
        chart = client.post(f"/api/sessions/{sid}/charts", json=MODEL_CHART).json()
        fid = chart["facts"][0]["id"]
        sel = client.post(
            f"/api/sessions/{sid}/selections", json={"fact_id": fid}
        ).json()
        assert sel["deck"]["slides"][0]["entries"][0]["fact_id"] == fid
        assert set(sel["rationale"]) == {
            "topic_fit", "relation_to_previous", "relation_to_next", "intent_fit",
        }

    def test_deck_patch(self, client):
        sid = create_session(client)
        chart = client.post(f"/api/sessions/{sid}/charts", json=MODEL_CHART).json()
        fid = chart["facts"][0]["id"]
        client.post(f"/api/sessions/{sid}/selections", json={"fact_id": fid})
        out = client.patch(
            f"/api/sessions/{sid}/deck",
            json={"op": "retitle", "slide": 0, "title": "SUV rivals"},
        ).json()
        assert out["deck"]["slides"][0]["title"] == "SUV rivals"
        assert out["deck"]["slides"][0]["title_locked"] is True

    def test_intent_put(self, client):
        sid = create_session(client)
        resp = client.put(f"/api/sessions/{sid}/intent", json={"intent": "new goal"})
        assert resp.json()["intent"] == "new goal"
        assert client.get(f"/api/sessions/{sid}").json()["intent"] == "new goal"

    def test_export_media_types(self, client):
        sid = create_session(client)
        chart = client.post(f"/api/sessions/{sid}/charts", json=MODEL_CHART).json()
        client.post(
            f"/api/sessions/{sid}/selections", json={"fact_id": chart["facts"][0]["id"]}
        )
        md = client.get(f"/api/sessions/{sid}/export?format=markdown-slides")
        assert md.headers["content-type"].startswith("text/markdown")
        html = client.get(f"/api/sessions/{sid}/export?format=html&theme=dark")
        assert html.headers["content-type"].startswith("text/html")
        st = client.get(f"/api/sessions/{sid}/export?format=structured")
        assert st.headers["content-type"].startswith("application/json")
        assert json.loads(st.content)["format"] == "story.json"


class TestErrorContract:
    def test_unknown_session_404(self, client):
        resp = client.get("/api/sessions/ghost")
        assert resp.status_code == 404
        body = resp.json()
        assert set(body) == {"code", "message", "detail"}
        assert body["code"] == "UnknownSession"

    def test_parse_error_400(self, client):
        resp = client.post("/api/sessions", json={"dataset_csv": 'a,b\n"broken,1\n'})
        assert resp.status_code == 400
        assert resp.json()["code"] == "ParseError"

    def test_duplicate_selection_400(self, client):
        sid = create_session(client)
        chart = client.post(f"/api/sessions/{sid}/charts", json=MODEL_CHART).json()
        fid = chart["facts"][0]["id"]
        client.post(f"/api/sessions/{sid}/selections", json={"fact_id": fid})
        resp = client.post(f"/api/sessions/{sid}/selections", json={"fact_id": fid})
        assert resp.status_code == 400
        assert resp.json()["code"] == "DuplicateFact"

    def test_empty_deck_export_400(self, client):
        sid = create_session(client)
        resp = client.get(f"/api/sessions/{sid}/export")
        assert resp.status_code == 400
        assert resp.json()["code"] == "EmptyDeck"

    def test_unknown_relation_404(self, client):
        sid = create_session(client)
        resp = client.patch(
            f"/api/sessions/{sid}/meta-relations/m99", json={"status": "rejected"}
        )
        assert resp.status_code == 404


class TestMockBackedFlow:
    def test_full_flow_with_suggestions(self, ev_paths):
        gw = Gateway(
            backend=mock_load(load_json(ev_paths["mock"])),
            params=CompletionParams(deadline=1.0),
        )
        client = TestClient(create_app(SessionManager(gateway=gw)))
        sid = create_session(
            client,
            dataset_csv=ev_paths["data"].read_text(),
            knowledge_docs=[
                {"doc_id": "k1", "title": "ev", "body": ev_paths["knowledge"].read_text()}
            ],
            intent="compare hybrid and plug-in electric car sales",
        )
        client.post(
            f"/api/sessions/{sid}/charts", json=load_json(ev_paths["chart_prius"])
        )
        client.post(f"/api/sessions/{sid}/selections", json={"fact_id": "c1.trend.0"})
        second = client.post(
            f"/api/sessions/{sid}/charts", json=load_json(ev_paths["chart_plugins"])
        ).json()
        assert len(second["suggestions"]) == 1
        rid = second["suggestions"][0]["id"]

        edited = client.patch(
            f"/api/sessions/{sid}/meta-relations/{rid}",
            json={"type_description": "rival electric drivetrains"},
        ).json()
        assert edited["relation"]["status"] == "edited"

        sel = client.post(
            f"/api/sessions/{sid}/selections",
            json={"fact_id": "c2.trend.0", "meta_relation_id": rid},
        ).json()
        entries = sel["deck"]["slides"][0]["entries"]
        assert [e["fact_id"] for e in entries] == ["c1.trend.0", "c2.trend.0"]

        md = client.get(f"/api/sessions/{sid}/export").text
        assert "rival electric drivetrains" in md


class TestConcurrentSessions:
    def test_interleaved_sessions_stay_independent(self):
        manager = SessionManager(gateway=None)
        app = create_app(manager)
        client = TestClient(app)
        sids = [create_session(client) for _ in range(2)]
        revisions = {sid: [] for sid in sids}
        errors = []

        def drive(sid):
            try:
                for _ in range(10):
                    r = client.post(f"/api/sessions/{sid}/charts", json=MODEL_CHART)
                    revisions[sid].append(r.json()["revision"])
            except Exception as e:  # pragma: no cover
                errors.append(e)

        threads = [threading.Thread(target=drive, args=(sid,)) for sid in sids]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for sid in sids:
            assert revisions[sid] == list(range(1, 11))
