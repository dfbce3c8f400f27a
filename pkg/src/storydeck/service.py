"""HTTP face of the authoring workflow: one endpoint per session operation.

The app is a thin adapter over SessionManager; bodies in and out are plain
JSON. Errors map to structured {code, message, detail} bodies with 4xx for
client mistakes and 503 when the completion gateway is unavailable.
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import (
    GatewayError,
    StorydeckError,
    UnknownFact,
    UnknownRelation,
    UnknownSession,
    UnknownTarget,
)
from .model import KnowledgeDoc
from .sessions import SessionManager

logger = logging.getLogger(__name__)

_NOT_FOUND = (UnknownSession, UnknownFact, UnknownRelation, UnknownTarget)

_MEDIA_TYPES = {
    "markdown-slides": "text/markdown; charset=utf-8",
    "html": "text/html; charset=utf-8",
    "structured": "application/json",
}


class KnowledgeDocBody(BaseModel):
    doc_id: str
    title: str = ""
    body: str


class CreateSessionBody(BaseModel):
    dataset_csv: str
    dataset_name: str = "dataset"
    knowledge_docs: list[KnowledgeDocBody] = Field(default_factory=list)
    intent: str = ""


class SelectionBody(BaseModel):
    fact_id: str
    meta_relation_id: str | None = None


class RelationPatchBody(BaseModel):
    type_description: str | None = None
    status: str | None = None


class IntentBody(BaseModel):
    intent: str


def _status_for(exc: StorydeckError) -> int:
    if isinstance(exc, _NOT_FOUND):
        return 404
    if isinstance(exc, GatewayError):
        return 503
    return 400


def create_app(manager: SessionManager, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="storydeck", docs_url=None, redoc_url=None)

    @app.exception_handler(StorydeckError)
    async def storydeck_error(_: Request, exc: StorydeckError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody):
        docs = [KnowledgeDoc(d.doc_id, d.title, d.body) for d in body.knowledge_docs]
        return manager.create_session(
            body.dataset_csv,
            knowledge_docs=docs,
            intent=body.intent,
            dataset_name=body.dataset_name,
        )

    @app.post("/api/sessions/{session_id}/charts")
    def submit_chart(session_id: str, spec: dict):
        return manager.submit_chart(session_id, spec)

    @app.post("/api/sessions/{session_id}/selections")
    def select_fact(session_id: str, body: SelectionBody):
        return manager.select_fact(session_id, body.fact_id, body.meta_relation_id)

    @app.patch("/api/sessions/{session_id}/meta-relations/{relation_id}")
    def edit_meta_relation(session_id: str, relation_id: str, body: RelationPatchBody):
        return manager.edit_meta_relation(
            session_id, relation_id, body.type_description, body.status
        )

    @app.patch("/api/sessions/{session_id}/deck")
    def mutate_deck(session_id: str, op: dict):
        return manager.mutate_deck(session_id, op)

    @app.put("/api/sessions/{session_id}/intent")
    def update_intent(session_id: str, body: IntentBody):
        return manager.update_intent(session_id, body.intent)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return manager.get_state(session_id)

    @app.get("/api/sessions/{session_id}/export")
    def export(session_id: str, format: str = "markdown-slides", theme: str = "plain"):
        doc = manager.export(session_id, format=format, theme=theme)
        return Response(content=doc.content, media_type=_MEDIA_TYPES[doc.format])

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
