"""Append-only event-sourced session persistence.

Each session owns a directory with an ``events.jsonl`` log (one JSON object
per line: seq, ts, kind, payload) and an optional ``snapshot.json`` written
every ``snapshot_every`` events. State is only ever derived by folding
``apply_event`` over the log, so replaying the log from scratch must
reconstruct the cached state exactly; tests hold the store to that.

Event kinds:
    created     {}                                   seq 0, empty session
    image       {image}                              example image uploaded
    node        {node, edge?, outcome?, request?, repair?}
                                                     a new source-node version
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from ..errors import NotFound, StorageError
from ..model import (
    BlendOutcome,
    BlendRequest,
    CanvasSession,
    Edge,
    ScreenImage,
    SourceNode,
)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class SessionState:
    """A session's full materialized state: the node graph plus per-node
    blend outcomes, the requests behind them, and repair reports."""

    session: CanvasSession
    outcomes: dict[str, BlendOutcome] = field(default_factory=dict)
    requests: dict[str, BlendRequest] = field(default_factory=dict)
    repairs: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "session": self.session.to_dict(),
            "outcomes": {k: v.to_dict() for k, v in sorted(self.outcomes.items())},
            "requests": {k: v.to_dict() for k, v in sorted(self.requests.items())},
            "repairs": {k: dict(v) for k, v in sorted(self.repairs.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionState":
        return cls(
            session=CanvasSession.from_dict(d["session"]),
            outcomes={k: BlendOutcome.from_dict(v) for k, v in d["outcomes"].items()},
            requests={k: BlendRequest.from_dict(v) for k, v in d["requests"].items()},
            repairs={k: dict(v) for k, v in d.get("repairs", {}).items()},
        )


def apply_event(state: SessionState | None, event: dict) -> SessionState:
    """Pure fold step. The session revision always equals the event seq."""
    kind = event["kind"]
    payload = event["payload"]
    seq = event["seq"]
    if kind == "created":
        return SessionState(session=CanvasSession(id=payload["session_id"], revision=seq))
    if state is None:
        raise StorageError(f"event {kind} before session creation")
    session = state.session
    if kind == "image":
        image = ScreenImage.from_dict(payload["image"])
        new_session = CanvasSession(
            id=session.id,
            source_nodes=session.source_nodes,
            example_images=session.example_images + (image,),
            edges=session.edges,
            revision=seq,
        )
        return SessionState(new_session, dict(state.outcomes), dict(state.requests), dict(state.repairs))
    if kind == "node":
        node = SourceNode.from_dict(payload["node"])
        edges = session.edges
        if payload.get("edge"):
            edges = edges + (Edge.from_dict(payload["edge"]),)
        new_session = CanvasSession(
            id=session.id,
            source_nodes=session.source_nodes + (node,),
            example_images=session.example_images,
            edges=edges,
            revision=seq,
        )
        outcomes = dict(state.outcomes)
        requests = dict(state.requests)
        repairs = dict(state.repairs)
        if payload.get("outcome"):
            outcomes[node.id] = BlendOutcome.from_dict(payload["outcome"])
        if payload.get("request"):
            request = BlendRequest.from_dict(payload["request"])
            requests[payload["request_id"]] = request
        if payload.get("repair") is not None:
            repairs[node.id] = dict(payload["repair"])
        return SessionState(new_session, outcomes, requests, repairs)
    raise StorageError(f"unknown event kind {kind!r}")


class SessionStore:
    """Disk-backed store with an in-memory cache of materialized state.

    Callers serialize mutations per session (the service holds a per-session
    write lock); the store adds its own lock only around file handles so
    that concurrent sessions never interleave inside one file.
    """

    def __init__(
        self,
        root: str | Path,
        snapshot_every: int = 20,
        clock: Callable[[], str] | None = None,
    ):
        self.root = Path(root)
        self.snapshot_every = max(1, snapshot_every)
        self.clock = clock or _utc_now
        self._states: dict[str, SessionState] = {}
        self._seqs: dict[str, int] = {}
        self._file_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    # -- paths ------------------------------------------------------------

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _log_path(self, session_id: str) -> Path:
        return self._dir(session_id) / "events.jsonl"

    def _snapshot_path(self, session_id: str) -> Path:
        return self._dir(session_id) / "snapshot.json"

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._file_locks.setdefault(session_id, threading.Lock())

    # -- lifecycle ----------------------------------------------------------

    def create(self, session_id: str) -> SessionState:
        if self._log_path(session_id).exists():
            raise StorageError(f"session {session_id} already exists")
        return self._append(session_id, "created", {"session_id": session_id}, expect_new=True)

    def exists(self, session_id: str) -> bool:
        return session_id in self._states or self._log_path(session_id).exists()

    def get(self, session_id: str) -> SessionState:
        with self._guard:
            state = self._states.get(session_id)
        if state is not None:
            return state
        return self._load(session_id)

    def append(self, session_id: str, kind: str, payload: dict) -> SessionState:
        """Append one mutation event; returns the new materialized state."""
        return self._append(session_id, kind, payload, expect_new=False)

    def list_sessions(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "events.jsonl").exists())

    # -- internals ---------------------------------------------------------

    def _append(self, session_id: str, kind: str, payload: dict, expect_new: bool) -> SessionState:
        lock = self._lock_for(session_id)
        with lock:
            if expect_new:
                state, seq = None, -1
            else:
                state = self._states.get(session_id)
                if state is None:
                    state = self._load(session_id)
                seq = self._seqs[session_id]
            event = {"seq": seq + 1, "ts": self.clock(), "kind": kind, "payload": payload}
            new_state = apply_event(state, event)
            try:
                self._dir(session_id).mkdir(parents=True, exist_ok=True)
                with open(self._log_path(session_id), "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            except OSError as exc:
                raise StorageError(f"cannot write event log: {exc}") from exc
            with self._guard:
                self._states[session_id] = new_state
                self._seqs[session_id] = event["seq"]
            if event["seq"] > 0 and event["seq"] % self.snapshot_every == 0:
                self._write_snapshot(session_id, event["seq"], new_state)
            return new_state

    def _write_snapshot(self, session_id: str, seq: int, state: SessionState) -> None:
        try:
            tmp = self._snapshot_path(session_id).with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump({"seq": seq, "state": state.to_dict()}, fh, ensure_ascii=False)
            tmp.replace(self._snapshot_path(session_id))
        except OSError as exc:
            raise StorageError(f"cannot write snapshot: {exc}") from exc

    def _load(self, session_id: str) -> SessionState:
        log_path = self._log_path(session_id)
        if not log_path.exists():
            raise NotFound(f"no session {session_id}")
        state: SessionState | None = None
        seq = -1
        snap_path = self._snapshot_path(session_id)
        if snap_path.exists():
            with open(snap_path, encoding="utf-8") as fh:
                snap = json.load(fh)
            state = SessionState.from_dict(snap["state"])
            seq = snap["seq"]
        with open(log_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["seq"] <= seq:
                    continue
                state = apply_event(state, event)
                seq = event["seq"]
        if state is None:
            raise StorageError(f"session {session_id} has an empty event log")
        with self._guard:
            self._states[session_id] = state
            self._seqs[session_id] = seq
        return state

    def replay(self, session_id: str) -> SessionState:
        """Reconstruct state purely from the event log, ignoring snapshot and
        cache. The crash-consistency tests compare this against get()."""
        log_path = self._log_path(session_id)
        if not log_path.exists():
            raise NotFound(f"no session {session_id}")
        state: SessionState | None = None
        with open(log_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    state = apply_event(state, json.loads(line))
        if state is None:
            raise StorageError(f"session {session_id} has an empty event log")
        return state
