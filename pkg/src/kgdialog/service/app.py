"""HTTP surface for the chat service.

POST /sessions {topic?, pool?: [str]} -> {id, topic, pool}
POST /sessions/{id}/messages {text} -> message result
GET  /sessions/{id} -> transcript
DELETE /sessions/{id} -> 204
Errors are JSON {error, detail} with conventional status codes.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .sessions import SessionError, SessionStore


def make_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="kgdialog")

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, exc: SessionError):
        return JSONResponse(status_code=exc.status,
                            content={"error": "session_error", "detail": str(exc)})

    @app.post("/sessions")
    async def create_session(payload: dict | None = None):
        payload = payload or {}
        session = store.create_session(
            topic=payload.get("topic"),
            pool_texts=payload.get("pool"),
        )
        return {"id": session.id, "topic": session.topic, "pool": session.pool_texts()}

    @app.post("/sessions/{session_id}/messages")
    async def post_message(session_id: str, payload: dict):
        text = payload.get("text", "")
        if not isinstance(text, str):
            raise SessionError("text must be a string", status=400)
        record = store.post_message(session_id, text)
        return record.to_json()

    @app.get("/sessions/{session_id}")
    async def get_transcript(session_id: str):
        session = store.get(session_id)
        return {
            "id": session.id,
            "topic": session.topic,
            "pool": session.pool_texts(),
            "transcript": [r.to_json() for r in store.transcript(session_id)],
        }

    @app.delete("/sessions/{session_id}", status_code=204)
    async def delete_session(session_id: str):
        store.delete(session_id)
        return Response(status_code=204)

    return app
