"""HTTP service for live diagnostic dialogue sessions.

Teacher messages are relayed to a chat backend (scripted fixture or remote
model); the client then asks for attribution of whichever reply it treats as
a recommendation, and for an explanation of the latest attribution. Sessions
are persisted to an append-only JSONL log (with periodic full-state
snapshots) and rebuilt by replay on restart, so a restarted service returns
byte-identical session JSON.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .attribution import Method, attribute
from .chat import ChatBackend, ChatBackendConfig, build_chat_backend
from .dialogue import Dialogue, Sentence, TargetResponse, Turn
from .errors import (
    ChatBackendError,
    NoEvidenceError,
    ScorerBackendError,
    ScorerProtocolError,
    TalktraceError,
)
from .explanation import explain
from .scoring import Scorer, ScorerBackendConfig, build_scorer

SNAPSHOT_EVERY = 100


@dataclass(frozen=True, slots=True)
class ServiceConfig:
    scorer: ScorerBackendConfig = field(default_factory=ScorerBackendConfig)
    chat: ChatBackendConfig | None = None
    store_path: str = "sessions.jsonl"
    cache_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    ui_dir: str | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        with Path(path).open(encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            scorer=ScorerBackendConfig.from_dict(payload.get("scorer", {})),
            chat=(
                ChatBackendConfig.from_dict(payload["chat"]) if payload.get("chat") else None
            ),
            store_path=payload.get("store_path", "sessions.jsonl"),
            cache_path=payload.get("cache_path"),
            host=payload.get("host", "127.0.0.1"),
            port=payload.get("port", 8000),
            ui_dir=payload.get("ui_dir"),
        )


class _SessionState:
    """Mutable in-memory session record; turns are only ever appended."""

    def __init__(self, session_id: str, created_at: str):
        self.id = session_id
        self.created_at = created_at
        self.updated_at = created_at
        self.turns: list[Turn] = []
        self.last_attribution: dict | None = None
        self.last_explanation: dict | None = None

    def dialogue(self) -> Dialogue:
        if not self.turns:
            raise ValueError("session has no turns yet")
        return Dialogue(id=self.id, turns=tuple(self.turns))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "dialogue": {
                "id": self.id,
                "turns": [
                    {"teacher": t.teacher_text, "assistant": t.assistant_text}
                    for t in self.turns
                ],
            },
            "last_attribution": self.last_attribution,
            "last_explanation": self.last_explanation,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "_SessionState":
        state = cls(payload["id"], payload["created_at"])
        state.updated_at = payload["updated_at"]
        state.turns = [
            Turn(index=i, teacher_text=t["teacher"], assistant_text=t["assistant"])
            for i, t in enumerate(payload["dialogue"]["turns"], start=1)
        ]
        state.last_attribution = payload["last_attribution"]
        state.last_explanation = payload["last_explanation"]
        return state


class SessionStore:
    """Append-only JSONL log of session mutations, replayed on open.

    Every ``SNAPSHOT_EVERY`` records a full-state snapshot line is appended;
    replay starts from the last snapshot and applies the records after it.
    """

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._records_since_snapshot = 0
        self.sessions: dict[str, _SessionState] = {}
        if self._path.exists():
            self._replay()

    def _replay(self) -> None:
        with self._path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._apply(record)
                self._records_since_snapshot += 1
                if record["op"] == "snapshot":
                    self._records_since_snapshot = 0

    def _apply(self, record: dict) -> None:
        op = record["op"]
        if op == "snapshot":
            self.sessions = {
                payload["id"]: _SessionState.from_dict(payload)
                for payload in record["sessions"]
            }
            return
        if op == "create":
            self.sessions[record["id"]] = _SessionState(record["id"], record["ts"])
            return
        state = self.sessions[record["id"]]
        state.updated_at = record["ts"]
        if op == "message":
            state.turns.append(
                Turn(
                    index=len(state.turns) + 1,
                    teacher_text=record["teacher"],
                    assistant_text=record["assistant"],
                )
            )
        elif op == "attribution":
            state.last_attribution = record["result"]
        elif op == "explanation":
            state.last_explanation = record["explanation"]
        else:
            raise ValueError(f"unknown store record op: {op!r}")

    def append(self, record: dict) -> None:
        """Apply a mutation and persist it before the caller responds."""
        with self._lock:
            self._apply(record)
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                self._records_since_snapshot += 1
                if self._records_since_snapshot >= SNAPSHOT_EVERY:
                    snapshot = {
                        "op": "snapshot",
                        "sessions": [s.to_dict() for s in self.sessions.values()],
                        "ts": record["ts"],
                    }
                    fh.write(json.dumps(snapshot, ensure_ascii=False) + "\n")
                    self._records_since_snapshot = 0

    def get(self, session_id: str) -> _SessionState | None:
        with self._lock:
            return self.sessions.get(session_id)


class MessageIn(BaseModel):
    text: str


class AttributeIn(BaseModel):
    target: str | None = None
    method: str | None = None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def create_app(
    config: ServiceConfig,
    scorer: Scorer | None = None,
    chat: ChatBackend | None = None,
    store: SessionStore | None = None,
) -> FastAPI:
    """Build the service; backends are injectable for hermetic tests."""
    if scorer is None:
        scorer = build_scorer(config.scorer, cache_path=config.cache_path)
    if chat is None and config.chat is not None:
        chat = build_chat_backend(config.chat)
    if store is None:
        store = SessionStore(config.store_path)

    app = FastAPI(title="talktrace")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.scorer = scorer
    app.state.chat = chat

    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def _lock_for(session_id: str) -> threading.Lock:
        # plain defaultdict would hand two racing threads two different locks
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    def _session_or_404(session_id: str) -> _SessionState:
        state = store.get(session_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return state

    @app.post("/sessions", status_code=201)
    def create_session() -> dict:
        session_id = uuid.uuid4().hex
        store.append({"op": "create", "id": session_id, "ts": _now()})
        return {"id": session_id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return _session_or_404(session_id).to_dict()

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn) -> dict:
        if not body.text.strip():
            raise HTTPException(status_code=422, detail="message text must be non-empty")
        state = _session_or_404(session_id)
        if chat is None:
            raise HTTPException(status_code=502, detail="no chat backend configured")
        with _lock_for(session_id):
            history: list[dict[str, str]] = []
            for turn in state.turns:
                history.append({"role": "user", "content": turn.teacher_text})
                if turn.assistant_text:
                    history.append({"role": "assistant", "content": turn.assistant_text})
            history.append({"role": "user", "content": body.text})
            try:
                reply = chat.reply(history)
            except ChatBackendError as exc:
                # the turn is NOT appended on backend failure
                raise HTTPException(status_code=502, detail=str(exc)) from exc
            store.append(
                {
                    "op": "message",
                    "id": session_id,
                    "teacher": body.text,
                    "assistant": reply,
                    "ts": _now(),
                }
            )
            return {"reply": reply}

    @app.post("/sessions/{session_id}/attribute")
    def attribute_session(session_id: str, body: AttributeIn) -> dict:
        state = _session_or_404(session_id)
        with _lock_for(session_id):
            if not state.turns:
                raise HTTPException(status_code=409, detail="session has no turns yet")
            target_text = body.target
            if target_text is None:
                target_text = next(
                    (t.assistant_text for t in reversed(state.turns) if t.assistant_text), None
                )
                if target_text is None:
                    raise HTTPException(
                        status_code=409,
                        detail="no target given and no assistant reply to default to",
                    )
            try:
                method = Method(body.method) if body.method else Method.HIERARCHICAL
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            try:
                result = attribute(state.dialogue(), TargetResponse(target_text), scorer, method)
            except (ScorerBackendError, ScorerProtocolError) as exc:
                raise HTTPException(status_code=502, detail=str(exc)) from exc
            except (NoEvidenceError, ValueError) as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            payload = {"target": target_text, **result.to_dict()}
            store.append(
                {"op": "attribution", "id": session_id, "result": payload, "ts": _now()}
            )
            return payload

    @app.post("/sessions/{session_id}/explain")
    def explain_session(session_id: str) -> dict:
        state = _session_or_404(session_id)
        with _lock_for(session_id):
            if state.last_attribution is None:
                raise HTTPException(
                    status_code=409, detail="attribute the session before asking to explain"
                )
            evidence_payload = state.last_attribution["evidence"]
            evidence = Sentence(
                turn_index=evidence_payload["turn_index"],
                sentence_index=evidence_payload["sentence_index"],
                text=evidence_payload["text"],
                start=evidence_payload["start_char"],
                end=evidence_payload["end_char"],
            )
            strategy = TargetResponse(state.last_attribution["target"])
            explanation = explain(strategy, evidence, backend=chat)
            payload = explanation.to_dict()
            store.append(
                {"op": "explanation", "id": session_id, "explanation": payload, "ts": _now()}
            )
            return payload

    @app.exception_handler(TalktraceError)
    def _domain_error(_, exc: TalktraceError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
