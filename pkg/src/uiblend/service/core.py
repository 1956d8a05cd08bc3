"""Session orchestration: node-graph mutations and blend/toggle/regenerate
jobs wired across prompts, gateway, repair and diffs.

Mutations to one session are serialized by a per-session lock; model calls
run outside that lock on a bounded worker pool, so slow completions never
block other writers. Ids and the clock are injected so scripted Replay runs
are fully deterministic.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Callable

from ..diffs import ToggleStrategy, toggle
from ..errors import (
    BlendError,
    EditNotFound,
    InvalidProvenance,
    NotFound,
)
from ..gateway import Gateway, ModelRequest
from ..images import crop_image, load_screen_image
from ..model import (
    BlendMode,
    BlendOutcome,
    BlendRequest,
    Edge,
    Provenance,
    ProvenanceKind,
    ScreenImage,
    SourceNode,
    validate_request,
)
from ..prompts import (
    AssetManifest,
    default_manifest,
    render_global_prompt,
    render_localized_prompt,
)
from ..repair import repair
from .store import SessionState, SessionStore


class JobState(Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


@dataclass
class JobStatus:
    job_id: str
    state: JobState
    node_id: str | None = None
    error_code: str | None = None
    error_message: str | None = None
    started_at: str | None = None
    finished_at: str | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "state": self.state.value,
            "node_id": self.node_id,
            "error_code": self.error_code,
            "error_message": self.error_message,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }


def _default_id_gen(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionService:
    def __init__(
        self,
        store: SessionStore,
        gateway: Gateway,
        assets: AssetManifest | None = None,
        workers: int = 4,
        id_gen: Callable[[str], str] | None = None,
        clock: Callable[[], str] | None = None,
    ):
        self.store = store
        self.gateway = gateway
        self.assets = assets or default_manifest()
        self.id_gen = id_gen or _default_id_gen
        self.clock = clock or _utc_now
        self.pool = ThreadPoolExecutor(max_workers=max(1, workers))
        self.jobs: dict[str, JobStatus] = {}
        self._futures: dict[str, Future] = {}
        self._jobs_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    # -- infrastructure -----------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._session_locks.setdefault(session_id, threading.Lock())

    def _state(self, session_id: str) -> SessionState:
        return self.store.get(session_id)

    def _submit(self, job_id: str, fn: Callable[[], str]) -> str:
        status = JobStatus(job_id=job_id, state=JobState.PENDING)
        with self._jobs_lock:
            self.jobs[job_id] = status

        def run() -> None:
            with self._jobs_lock:
                status.state = JobState.RUNNING
                status.started_at = self.clock()
            try:
                node_id = fn()
            except BlendError as exc:
                with self._jobs_lock:
                    status.state = JobState.FAILED
                    status.error_code = exc.code
                    status.error_message = exc.message
                    status.finished_at = self.clock()
            except Exception as exc:  # pragma: no cover - defensive
                with self._jobs_lock:
                    status.state = JobState.FAILED
                    status.error_code = "internal"
                    status.error_message = str(exc)
                    status.finished_at = self.clock()
            else:
                with self._jobs_lock:
                    status.state = JobState.DONE
                    status.node_id = node_id
                    status.finished_at = self.clock()

        future = self.pool.submit(run)
        with self._jobs_lock:
            self._futures[job_id] = future
        return job_id

    def get_job(self, job_id: str) -> JobStatus:
        with self._jobs_lock:
            status = self.jobs.get(job_id)
        if status is None:
            raise NotFound(f"no job {job_id}")
        return status

    def wait_for_job(self, job_id: str, timeout: float | None = None) -> JobStatus:
        with self._jobs_lock:
            future = self._futures.get(job_id)
        if future is not None:
            future.result(timeout=timeout)
        return self.get_job(job_id)

    def shutdown(self) -> None:
        self.pool.shutdown(wait=True)

    def _add_node(
        self,
        session_id: str,
        node: SourceNode,
        edge: Edge | None,
        outcome: BlendOutcome | None = None,
        request: BlendRequest | None = None,
        request_id: str | None = None,
        repair_info: dict | None = None,
    ) -> None:
        payload: dict = {"node": node.to_dict()}
        if edge is not None:
            payload["edge"] = edge.to_dict()
        if outcome is not None:
            payload["outcome"] = outcome.to_dict()
        if request is not None:
            payload["request"] = request.to_dict()
            payload["request_id"] = request_id
        if repair_info is not None:
            payload["repair"] = repair_info
        with self._lock_for(session_id):
            self.store.append(session_id, "node", payload)

    # -- synchronous operations ----------------------------------------------

    def create_session(self) -> str:
        session_id = self.id_gen("s")
        with self._lock_for(session_id):
            self.store.create(session_id)
        return session_id

    def upload_example(self, session_id: str, payload: bytes) -> str:
        self._state(session_id)  # NotFound for unknown sessions
        image = load_screen_image(self.id_gen("img"), payload)
        with self._lock_for(session_id):
            self.store.append(session_id, "image", {"image": image.to_dict()})
        return image.id

    def create_source(self, session_id: str, code_text: str) -> str:
        self._state(session_id)
        report = repair(code_text, list(self.assets.stock_photos))
        node = SourceNode(
            id=self.id_gen("n"),
            code=report.repaired,
            parent=None,
            provenance=Provenance(kind=ProvenanceKind.UPLOADED),
            created_at=self.clock(),
        )
        self._add_node(
            session_id,
            node,
            edge=None,
            repair_info={
                "applied_rules": list(report.applied_rules),
                "residual_defects": [d.value for d in report.residual_defects],
            },
        )
        return node.id

    def manual_edit(self, session_id: str, node_id: str, code_text: str) -> str:
        state = self._state(session_id)
        parent = state.session.node(node_id)
        report = repair(code_text, list(self.assets.stock_photos))
        node = SourceNode(
            id=self.id_gen("n"),
            code=report.repaired,
            parent=parent.id,
            provenance=Provenance(kind=ProvenanceKind.MANUAL_EDIT),
            created_at=self.clock(),
        )
        edge = Edge(from_id=parent.id, to_id=node.id, label="manual_edit")
        self._add_node(
            session_id,
            node,
            edge,
            outcome=state.outcomes.get(parent.id),
            repair_info={
                "applied_rules": list(report.applied_rules),
                "residual_defects": [d.value for d in report.residual_defects],
            },
        )
        return node.id

    def get_graph(self, session_id: str) -> SessionState:
        return self._state(session_id)

    # -- asynchronous operations ----------------------------------------------

    def blend(self, session_id: str, req: BlendRequest) -> str:
        state = self._state(session_id)
        validate_request(req, state.session)
        job_id = self.id_gen("job")
        return self._submit(job_id, lambda: self._run_blend(session_id, req))

    def _blend_once(
        self, session_id: str, req: BlendRequest, provenance_kind: ProvenanceKind
    ) -> str:
        state = self._state(session_id)
        validate_request(req, state.session)
        source = state.session.node(req.source_node)
        image: ScreenImage = state.session.image(req.example)
        if req.crop is not None:
            image = crop_image(image, req.crop)
        if req.mode is BlendMode.GLOBAL:
            bundle = render_global_prompt(source.code, self.assets, image)
        else:
            bundle = render_localized_prompt(
                source.code, req.aspects, req.target_fragment, self.assets, image
            )
        request_id = self.id_gen("req")
        model_req = ModelRequest(bundle=bundle, request_id=request_id)
        outcome = self.gateway.blend_outcome(
            model_req,
            stock_photos=list(self.assets.stock_photos),
            id_gen=lambda: self.id_gen("grp"),
        )
        # regeneration re-runs the stored request, whose source_node is the
        # original parent; the result is therefore a sibling of the first blend
        parent_id = source.id
        node = SourceNode(
            id=self.id_gen("n"),
            code=outcome.updated_code,
            parent=parent_id,
            provenance=Provenance(kind=provenance_kind, request_id=request_id),
            created_at=self.clock(),
        )
        edge = Edge(from_id=parent_id, to_id=node.id, label=provenance_kind.value)
        self._add_node(
            session_id, node, edge, outcome=outcome, request=req, request_id=request_id
        )
        return node.id

    def _run_blend(self, session_id: str, req: BlendRequest) -> str:
        return self._blend_once(session_id, req, ProvenanceKind.BLEND)

    def toggle_group(
        self,
        session_id: str,
        node_id: str,
        group_id: str,
        enabled: bool,
        strategy: ToggleStrategy | None = None,
    ) -> str:
        state = self._state(session_id)
        node = state.session.node(node_id)
        outcome = state.outcomes.get(node_id)
        if outcome is None:
            raise NotFound(f"node {node_id} has no change groups")
        outcome.group(group_id)  # NotFound for unknown groups
        job_id = self.id_gen("job")
        return self._submit(
            job_id,
            lambda: self._run_toggle(session_id, node, outcome, group_id, enabled, strategy),
        )

    def _run_toggle(
        self,
        session_id: str,
        node: SourceNode,
        outcome: BlendOutcome,
        group_id: str,
        enabled: bool,
        strategy: ToggleStrategy | None,
    ) -> str:
        stock = list(self.assets.stock_photos)
        if strategy is None:
            # default: deterministic token swap, model fallback when the
            # tokens are no longer present in the code
            try:
                new_code = toggle(
                    outcome, node.code, group_id, enabled,
                    ToggleStrategy.DETERMINISTIC, self.gateway, stock,
                )
            except EditNotFound:
                new_code = toggle(
                    outcome, node.code, group_id, enabled,
                    ToggleStrategy.MODEL, self.gateway, stock,
                )
        else:
            new_code = toggle(
                outcome, node.code, group_id, enabled, strategy, self.gateway, stock
            )
        flipped = outcome.with_group_enabled(group_id, enabled)
        new_outcome = BlendOutcome(
            design_explanation=flipped.design_explanation,
            differences=flipped.differences,
            updated_code=new_code,
            groups=flipped.groups,
        )
        new_node = SourceNode(
            id=self.id_gen("n"),
            code=new_code,
            parent=node.id,
            provenance=Provenance(
                kind=ProvenanceKind.TOGGLE, group_id=group_id, enabled=enabled
            ),
            created_at=self.clock(),
        )
        edge = Edge(from_id=node.id, to_id=new_node.id, label="toggle")
        self._add_node(session_id, new_node, edge, outcome=new_outcome)
        return new_node.id

    def regenerate(self, session_id: str, node_id: str) -> str:
        state = self._state(session_id)
        node = state.session.node(node_id)
        kind = node.provenance.kind
        if kind not in (ProvenanceKind.BLEND, ProvenanceKind.REGENERATE):
            raise InvalidProvenance(
                f"only blend nodes can be regenerated, {node_id} is {kind.value}"
            )
        req = state.requests.get(node.provenance.request_id)
        if req is None:
            raise NotFound(f"no stored request for node {node_id}")
        job_id = self.id_gen("job")
        return self._submit(
            job_id, lambda: self._blend_once(session_id, req, ProvenanceKind.REGENERATE)
        )
