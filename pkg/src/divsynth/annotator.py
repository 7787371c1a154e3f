"""HTTP service for blinded human judgments: Turing-test sessions
(real vs synthetic) and labeling sessions (present vs absent).

Persistence is event-sourced: every session is an append-only JSONL
event log, and replaying the log reconstructs the session exactly.
"""

from __future__ import annotations

import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import jsonio
from .errors import DataError
from .metrics import TuringReport, binomial_test
from .seeding import rng

KINDS = ("turing", "labeling")
_CHOICES = {"turing": ("real", "synthetic"), "labeling": ("present", "absent")}


@dataclass
class Session:
    session_id: str
    kind: str
    entity: str
    items: list[dict]                 # {item_id, text, hidden_truth}
    judgments: dict[str, dict] = field(default_factory=dict)
    created_at: float = 0.0
    status: str = "open"

    def first_unjudged(self) -> dict | None:
        for item in self.items:
            if item["item_id"] not in self.judgments:
                return item
        return None

    def judged_count(self) -> int:
        return len(self.judgments)


class UnknownSession(DataError):
    pass


class UnknownItem(DataError):
    pass


class ClosedSession(DataError):
    pass


class SessionStore:
    """Event-log backed session registry; safe for concurrent reads with
    writes serialized through one lock."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        for log in sorted(self.sessions_dir.glob("*.events.jsonl")):
            session = self._replay(log)
            self._sessions[session.session_id] = session

    # -- event log ---------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.events.jsonl"

    def _replay(self, log_path: Path) -> Session:
        session: Session | None = None
        for lineno, event in jsonio.read_jsonl(log_path):
            kind = event.get("type")
            if kind == "created":
                session = Session(
                    session_id=event["session_id"],
                    kind=event["kind"],
                    entity=event["entity"],
                    items=list(event["items"]),
                    created_at=float(event["created_at"]),
                )
            elif kind == "judgment":
                if session is None:
                    raise DataError(f"{log_path}:{lineno}: judgment before created")
                session.judgments[event["item_id"]] = {
                    "choice": event["choice"],
                    "timestamp": float(event["timestamp"]),
                }
            else:
                raise DataError(f"{log_path}:{lineno}: unknown event {kind!r}")
        if session is None:
            raise DataError(f"{log_path}: empty event log")
        if session.first_unjudged() is None:
            session.status = "complete"
        return session

    # -- operations ---------------------------------------------------------

    def create_session(self, kind: str, synthetic_notes, real_notes,
                       n_synth: int = 50, n_real: int = 50,
                       seed: int = 0, entity: str = "") -> Session:
        """Blinded session: sample, shuffle, and strip provenance."""
        if kind not in KINDS:
            raise DataError(f"unknown session kind {kind!r}")
        synthetic_notes = list(synthetic_notes)
        real_notes = list(real_notes)
        if len(synthetic_notes) < n_synth:
            raise DataError(
                f"need {n_synth} synthetic notes, have {len(synthetic_notes)}")
        if len(real_notes) < n_real:
            raise DataError(f"need {n_real} real notes, have {len(real_notes)}")
        gen = rng(seed, "session", kind, entity)
        picked = []
        if n_synth:
            for i in gen.choice(len(synthetic_notes), size=n_synth, replace=False):
                picked.append((synthetic_notes[i], "synthetic"))
        if n_real:
            for i in gen.choice(len(real_notes), size=n_real, replace=False):
                picked.append((real_notes[i], "real"))
        order = gen.permutation(len(picked))
        items = []
        for pos, idx in enumerate(order):
            note, truth = picked[idx]
            items.append({
                "item_id": f"item-{pos:04d}",
                "text": note.text,
                "hidden_truth": truth,
            })
        session = Session(
            session_id=uuid.uuid4().hex,
            kind=kind,
            entity=entity,
            items=items,
            created_at=time.time(),
        )
        with self._lock:
            jsonio.append_jsonl(self._log_path(session.session_id), [{
                "type": "created",
                "session_id": session.session_id,
                "kind": session.kind,
                "entity": session.entity,
                "items": session.items,
                "created_at": session.created_at,
            }])
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"unknown session {session_id!r}")
        return session

    def list_sessions(self) -> list[dict]:
        return [
            {
                "session_id": s.session_id,
                "kind": s.kind,
                "entity": s.entity,
                "status": s.status,
                "judged": s.judged_count(),
                "total": len(s.items),
            }
            for s in self._sessions.values()
        ]

    def next_item(self, session_id: str) -> dict:
        """First unjudged item, blinded; flips status when none remain."""
        session = self.get(session_id)
        item = session.first_unjudged()
        if item is None:
            session.status = "complete"
            return {"done": True, "total": len(session.items)}
        return {
            "item_id": item["item_id"],
            "text": item["text"],
            "position": session.judged_count() + 1,
            "total": len(session.items),
        }

    def submit_judgment(self, session_id: str, item_id: str, choice: str) -> dict:
        session = self.get(session_id)
        if session.status == "complete":
            raise ClosedSession(f"session {session_id!r} is complete")
        if not any(i["item_id"] == item_id for i in session.items):
            raise UnknownItem(f"unknown item {item_id!r}")
        if choice not in _CHOICES[session.kind]:
            raise DataError(
                f"choice {choice!r} invalid for a {session.kind} session")
        event = {
            "type": "judgment",
            "session_id": session_id,
            "item_id": item_id,
            "choice": choice,
            "timestamp": time.time(),
        }
        with self._lock:
            # persist before acknowledging; resubmissions append a second
            # event and the latest one wins on replay
            jsonio.append_jsonl(self._log_path(session_id), [event])
            session.judgments[item_id] = {
                "choice": choice, "timestamp": event["timestamp"],
            }
            if session.first_unjudged() is None:
                session.status = "complete"
        remaining = len(session.items) - session.judged_count()
        return {"ok": True, "remaining": remaining, "status": session.status}

    def session_report(self, session_id: str) -> dict:
        session = self.get(session_id)
        partial = session.first_unjudged() is not None
        if session.kind == "turing":
            report = turing_report(session)
            return {
                "kind": "turing",
                "session_id": session_id,
                "entity": session.entity,
                "partial": partial,
                "n_synth": report.n_synth,
                "n_real": report.n_real,
                "correct_synth": report.correct_synth,
                "correct_real": report.correct_real,
                "accuracy_synth": (report.correct_synth / report.n_synth
                                   if report.n_synth else None),
                "accuracy_real": (report.correct_real / report.n_real
                                  if report.n_real else None),
                "p_value_synth": report.p_value_synth,
                "p_value_real": report.p_value_real,
            }
        labels = []
        for item in session.items:
            judgment = session.judgments.get(item["item_id"])
            if judgment is None:
                continue
            labels.append({
                "note_id": item["item_id"],
                "entity": session.entity,
                "label": judgment["choice"],
                "origin": "human",
            })
        return {
            "kind": "labeling",
            "session_id": session_id,
            "entity": session.entity,
            "partial": partial,
            "labels": labels,
        }


def turing_report(session: Session) -> TuringReport:
    """Per-class correct counts with exact one-sided binomial p-values."""
    judged = [(i["hidden_truth"], session.judgments[i["item_id"]]["choice"])
              for i in session.items if i["item_id"] in session.judgments]
    n_synth = sum(1 for truth, _ in judged if truth == "synthetic")
    n_real = sum(1 for truth, _ in judged if truth == "real")
    correct_synth = sum(1 for truth, choice in judged
                        if truth == "synthetic" and choice == "synthetic")
    correct_real = sum(1 for truth, choice in judged
                       if truth == "real" and choice == "real")
    return TuringReport(
        n_synth=n_synth,
        n_real=n_real,
        correct_synth=correct_synth,
        correct_real=correct_real,
        p_value_synth=binomial_test(correct_synth, n_synth) if n_synth else 1.0,
        p_value_real=binomial_test(correct_real, n_real) if n_real else 1.0,
        partial=session.first_unjudged() is not None,
    )


def create_app(store: SessionStore, synthetic_notes=(), real_notes=(),
               webui_dir=None, token: str | None = None):
    """FastAPI app exposing the session API and optional static web UI."""
    app = FastAPI(title="divsynth annotator")
    expected_token = token or os.environ.get("DIVSYNTH_ANNOTATOR_TOKEN")

    def check_auth(request: Request) -> None:
        if expected_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {expected_token}":
            raise HTTPException(status_code=401, detail="bad or missing token")

    def translate(exc: DataError) -> HTTPException:
        if isinstance(exc, (UnknownSession, UnknownItem)):
            return HTTPException(status_code=404, detail=str(exc))
        if isinstance(exc, ClosedSession):
            return HTTPException(status_code=409, detail=str(exc))
        return HTTPException(status_code=400, detail=str(exc))

    @app.post("/api/sessions")
    async def post_session(request: Request):
        check_auth(request)
        body = await request.json()
        try:
            session = store.create_session(
                kind=body.get("kind", "turing"),
                synthetic_notes=synthetic_notes,
                real_notes=real_notes,
                n_synth=int(body.get("n_synth", 50)),
                n_real=int(body.get("n_real", 50)),
                seed=int(body.get("seed", 0)),
                entity=body.get("entity", ""),
            )
        except DataError as exc:
            raise translate(exc) from exc
        return JSONResponse({"session_id": session.session_id})

    @app.get("/api/sessions")
    async def list_sessions(request: Request):
        check_auth(request)
        return JSONResponse({"sessions": store.list_sessions()})

    @app.get("/api/sessions/{session_id}/next")
    async def next_item(session_id: str, request: Request):
        check_auth(request)
        try:
            return JSONResponse(store.next_item(session_id))
        except DataError as exc:
            raise translate(exc) from exc

    @app.post("/api/sessions/{session_id}/judgments")
    async def submit(session_id: str, request: Request):
        check_auth(request)
        body = await request.json()
        try:
            ack = store.submit_judgment(
                session_id, str(body.get("item_id", "")),
                str(body.get("choice", "")),
            )
        except DataError as exc:
            raise translate(exc) from exc
        return JSONResponse(ack)

    @app.get("/api/sessions/{session_id}/report")
    async def report(session_id: str, request: Request):
        check_auth(request)
        try:
            return JSONResponse(store.session_report(session_id))
        except DataError as exc:
            raise translate(exc) from exc

    if webui_dir is not None and Path(webui_dir).exists():
        app.mount("/", StaticFiles(directory=str(webui_dir), html=True),
                  name="webui")
    return app
