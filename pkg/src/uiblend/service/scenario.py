"""Scripted scenario runner used by the replay-scenario and record-fixtures
CLI commands and by the end-to-end tests.

A script is a JSON file:

    {
      "name": "...",
      "fixtures": "fixture.json",            // relative to the script
      "steps": [
        {"op": "create_source", "code_file": "source.txt", "ref": "base"},
        {"op": "upload_example", "image_file": "example.png", "ref": "img"},
        {"op": "blend", "mode": "global", "source": "base", "example": "img",
         "ref": "blended"},
        {"op": "toggle", "node": "blended", "category_contains": "dark",
         "enabled": false, "ref": "light"},
        {"op": "blend", "mode": "localized", "source": "light", "example": "img",
         "crop": {"x": 0, "y": 0, "w": 10, "h": 10},
         "aspects": [{"kind": "layout"}],
         "fragment_file": "fragment.txt", "ref": "local"},
        {"op": "regenerate", "node": "blended", "ref": "second"},
        {"op": "manual_edit", "node": "light", "code_file": "edit.txt", "ref": "edited"}
      ]
    }

``ref`` names the produced node/image for later steps. Ids and timestamps are
generated from counters, so a Replay-backed run is fully deterministic and
its snapshot can be compared byte-for-byte across runs.
"""

from __future__ import annotations

import json
import tempfile
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from ..diffs import ToggleStrategy
from ..errors import BlendError
from ..gateway import EndpointConfig, Gateway, ProviderKind, make_provider
from ..model import BlendAspect, BlendMode, BlendRequest, CropRegion
from ..prompts import default_manifest
from .core import JobState, JobStatus, SessionService
from .store import SessionState, SessionStore


class ScenarioError(BlendError):
    code = "scenario_error"


@dataclass
class ScenarioResult:
    session_id: str
    state: SessionState
    refs: dict[str, str]
    jobs: list[JobStatus]

    def canonical_snapshot(self) -> str:
        return json.dumps(
            self.state.to_dict(), sort_keys=True, ensure_ascii=False, indent=2
        ) + "\n"


class CountingIds:
    """Deterministic per-prefix id generator: n1, n2, img1, job1, ..."""

    def __init__(self):
        self._counts: defaultdict[str, int] = defaultdict(int)

    def __call__(self, prefix: str) -> str:
        self._counts[prefix] += 1
        return f"{prefix}{self._counts[prefix]}"


class CountingClock:
    """Deterministic timestamps: one simulated second per call."""

    def __init__(self):
        self._n = 0

    def __call__(self) -> str:
        self._n += 1
        minutes, seconds = divmod(self._n, 60)
        return f"2025-01-01T00:{minutes:02d}:{seconds:02d}+00:00"


def _load_aspects(raw: list[dict]) -> frozenset[BlendAspect]:
    return frozenset(BlendAspect.from_dict(a) for a in raw)


def _resolve_group(state: SessionState, node_id: str, step: dict) -> str:
    outcome = state.outcomes.get(node_id)
    if outcome is None:
        raise ScenarioError(f"node {node_id} has no change groups to toggle")
    if "group_index" in step:
        index = step["group_index"]
        if not 0 <= index < len(outcome.groups):
            raise ScenarioError(f"group_index {index} out of range")
        return outcome.groups[index].id
    needle = step.get("category_contains", "")
    for group in outcome.groups:
        if needle.lower() in group.category.lower():
            return group.id
    raise ScenarioError(f"no change group matching {needle!r} on node {node_id}")


def run_scenario(
    script_path: str | Path,
    provider: str = "replay",
    fixture_path: str | Path | None = None,
    store_root: str | Path | None = None,
    endpoint: EndpointConfig | None = None,
    report_dir: str | Path | None = None,
    workers: int = 2,
) -> ScenarioResult:
    script_path = Path(script_path)
    with open(script_path, encoding="utf-8") as fh:
        script = json.load(fh)
    base_dir = script_path.parent

    if fixture_path is None:
        rel = script.get("fixtures")
        if rel is None:
            raise ScenarioError("script names no fixture file and none was given")
        fixture_path = base_dir / rel

    kind = ProviderKind(provider)
    if kind is ProviderKind.LIVE:
        raise ScenarioError("scenarios run against replay or record providers")
    provider_impl = make_provider(kind, endpoint=endpoint, fixture_path=fixture_path)

    tmp = None
    if store_root is None:
        tmp = tempfile.TemporaryDirectory(prefix="uiblend-scenario-")
        store_root = tmp.name

    ids = CountingIds()
    clock = CountingClock()
    store = SessionStore(store_root, clock=clock)
    service = SessionService(
        store=store,
        gateway=Gateway(provider_impl),
        assets=default_manifest(),
        workers=workers,
        id_gen=ids,
        clock=clock,
    )

    refs: dict[str, str] = {}
    jobs: list[JobStatus] = []

    def ref(name: str) -> str:
        if name not in refs:
            raise ScenarioError(f"step references unknown ref {name!r}")
        return refs[name]

    def finish_job(job_id: str) -> str:
        status = service.wait_for_job(job_id, timeout=60)
        jobs.append(status)
        if status.state is not JobState.DONE:
            raise ScenarioError(
                f"job {job_id} failed: {status.error_code}: {status.error_message}"
            )
        return status.node_id

    try:
        session_id = service.create_session()
        for step in script.get("steps", []):
            op = step["op"]
            if op == "create_source":
                code = (base_dir / step["code_file"]).read_text("utf-8")
                produced = service.create_source(session_id, code)
            elif op == "upload_example":
                payload = (base_dir / step["image_file"]).read_bytes()
                produced = service.upload_example(session_id, payload)
            elif op == "blend":
                mode = BlendMode(step["mode"])
                fragment = None
                if step.get("fragment_file"):
                    fragment = (base_dir / step["fragment_file"]).read_text("utf-8").strip()
                req = BlendRequest(
                    mode=mode,
                    source_node=ref(step["source"]),
                    example=ref(step["example"]),
                    crop=CropRegion.from_dict(step["crop"]) if step.get("crop") else None,
                    aspects=_load_aspects(step.get("aspects", [])),
                    target_fragment=fragment,
                )
                produced = finish_job(service.blend(session_id, req))
            elif op == "toggle":
                node_id = ref(step["node"])
                group_id = _resolve_group(service.get_graph(session_id), node_id, step)
                strategy = step.get("strategy")
                produced = finish_job(
                    service.toggle_group(
                        session_id,
                        node_id,
                        group_id,
                        step["enabled"],
                        ToggleStrategy(strategy) if strategy else None,
                    )
                )
            elif op == "regenerate":
                produced = finish_job(service.regenerate(session_id, ref(step["node"])))
            elif op == "manual_edit":
                code = (base_dir / step["code_file"]).read_text("utf-8")
                produced = service.manual_edit(session_id, ref(step["node"]), code)
            else:
                raise ScenarioError(f"unknown step op {op!r}")
            if step.get("ref"):
                refs[step["ref"]] = produced

        state = service.get_graph(session_id)
        if report_dir is not None:
            from .report import write_report

            write_report(state, report_dir)
        return ScenarioResult(session_id=session_id, state=state, refs=refs, jobs=jobs)
    finally:
        service.shutdown()
        if tmp is not None:
            tmp.cleanup()


def describe_result(result: ScenarioResult) -> str:
    """One-line-per-fact summary printed by the CLI."""
    session = result.state.session
    lines = [
        f"session {result.session_id}: revision {session.revision}",
        f"source nodes: {len(session.source_nodes)}",
        f"example images: {len(session.example_images)}",
        f"edges: {len(session.edges)}",
        f"jobs done: {sum(1 for j in result.jobs if j.state is JobState.DONE)}"
        f"/{len(result.jobs)}",
    ]
    for node in session.source_nodes:
        lines.append(
            f"  {node.id} <- {node.parent or 'root'} ({node.provenance.kind.value})"
        )
    return "\n".join(lines)
