"""Session store, orchestration service and HTTP surface."""

from __future__ import annotations

import json
import random
import threading

import pytest
from fastapi.testclient import TestClient

from conftest import CountingIds, StubProvider, completion_payload, make_png
from uiblend.diffs import ToggleStrategy, tokenize_class_attrs
from uiblend.errors import (
    InvalidProvenance,
    MissingImage,
    MissingNode,
    NotFound,
    RepairFailed,
    StorageError,
    UnsupportedImage,
)
from uiblend.gateway import Gateway
from uiblend.model import (
    AspectKind,
    BlendAspect,
    BlendMode,
    BlendRequest,
    CropRegion,
    ProvenanceKind,
)
from uiblend.service.api import create_app
from uiblend.service.core import JobState, SessionService
from uiblend.service.store import SessionState, SessionStore

BASE_CODE = '() => <div className="bg-white text-sm">profile</div>'
BLENDED_CODE = '() => <div className="bg-gray-900 text-sm">profile</div>'
BLEND_GROUPS = [
    {
        "category": "Color",
        "changes": [{"type": "bg", "before": "bg-white", "after": "bg-gray-900"}],
    }
]


def fixed_clock() -> str:
    return "2025-06-01T00:00:00+00:00"


def make_service(tmp_path, *texts: str, workers: int = 2):
    stub = StubProvider(*texts) if texts else StubProvider(completion_payload(BLENDED_CODE, BLEND_GROUPS))
    service = SessionService(
        store=SessionStore(tmp_path / "store", snapshot_every=5, clock=fixed_clock),
        gateway=Gateway(stub),
        workers=workers,
        id_gen=CountingIds(),
        clock=fixed_clock,
    )
    return service, stub


def seeded_session(service: SessionService) -> tuple[str, str, str]:
    sid = service.create_session()
    nid = service.create_source(sid, BASE_CODE)
    img = service.upload_example(sid, make_png())
    return sid, nid, img


def run_blend(service: SessionService, sid: str, nid: str, img: str) -> str:
    job = service.blend(
        sid, BlendRequest(mode=BlendMode.GLOBAL, source_node=nid, example=img)
    )
    status = service.wait_for_job(job, timeout=30)
    assert status.state is JobState.DONE, status.error_message
    return status.node_id


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


def test_store_create_and_duplicate(tmp_path) -> None:
    store = SessionStore(tmp_path)
    state = store.create("s1")
    assert state.session.id == "s1"
    assert state.session.revision == 0
    assert store.exists("s1")
    with pytest.raises(StorageError):
        store.create("s1")


def test_store_revision_tracks_event_seq(tmp_path, screen_image) -> None:
    store = SessionStore(tmp_path)
    store.create("s1")
    state = store.append("s1", "image", {"image": screen_image.to_dict()})
    assert state.session.revision == 1
    node = {
        "id": "n1",
        "code": {"text": BASE_CODE},
        "parent": None,
        "provenance": {"kind": "uploaded"},
        "created_at": fixed_clock(),
    }
    state = store.append("s1", "node", {"node": node})
    assert state.session.revision == 2
    assert [n.id for n in state.session.source_nodes] == ["n1"]


def test_store_replay_equals_materialized(tmp_path, screen_image) -> None:
    store = SessionStore(tmp_path, snapshot_every=3)
    store.create("s1")
    for i in range(7):
        node = {
            "id": f"n{i}",
            "code": {"text": BASE_CODE},
            "parent": None,
            "provenance": {"kind": "uploaded"},
            "created_at": fixed_clock(),
        }
        store.append("s1", "node", {"node": node})
    assert store.replay("s1").to_dict() == store.get("s1").to_dict()
    # A fresh store must load snapshot + tail to the same state.
    fresh = SessionStore(tmp_path, snapshot_every=3)
    assert fresh.get("s1").to_dict() == store.get("s1").to_dict()
    assert (tmp_path / "s1" / "snapshot.json").exists()


def test_store_snapshot_interval(tmp_path, screen_image) -> None:
    store = SessionStore(tmp_path, snapshot_every=4)
    store.create("s1")
    snap = tmp_path / "s1" / "snapshot.json"
    for _ in range(3):
        store.append("s1", "image", {"image": screen_image.to_dict()})
    assert not snap.exists()
    store.append("s1", "image", {"image": screen_image.to_dict()})
    assert snap.exists()
    assert json.loads(snap.read_text())["seq"] == 4


def test_store_unknown_session(tmp_path) -> None:
    store = SessionStore(tmp_path)
    with pytest.raises(NotFound):
        store.get("ghost")
    with pytest.raises(NotFound):
        store.replay("ghost")
    assert store.list_sessions() == []


def test_store_stale_snapshot_is_ignored_by_replay(tmp_path, screen_image) -> None:
    store = SessionStore(tmp_path, snapshot_every=2)
    store.create("s1")
    store.append("s1", "image", {"image": screen_image.to_dict()})
    store.append("s1", "image", {"image": screen_image.to_dict()})  # snapshot at 2
    store.append("s1", "image", {"image": screen_image.to_dict()})
    replayed = store.replay("s1")
    assert len(replayed.session.example_images) == 3
    assert replayed.session.revision == 3


# ---------------------------------------------------------------------------
# Service: synchronous operations
# ---------------------------------------------------------------------------


def test_create_session_and_upload(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid = service.create_session()
    assert sid == "s1"
    img = service.upload_example(sid, make_png())
    assert img == "img1"
    state = service.get_graph(sid)
    assert [i.id for i in state.session.example_images] == ["img1"]


def test_upload_rejects_non_image(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid = service.create_session()
    with pytest.raises(UnsupportedImage):
        service.upload_example(sid, b"definitely not an image")
    with pytest.raises(NotFound):
        service.upload_example("ghost", make_png())


def test_create_source_repairs_input(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid = service.create_session()
    nid = service.create_source(sid, f"```jsx\n{BASE_CODE}\n```")
    state = service.get_graph(sid)
    node = state.session.node(nid)
    assert node.code.text == BASE_CODE
    assert node.parent is None
    assert node.provenance.kind is ProvenanceKind.UPLOADED
    assert state.repairs[nid]["applied_rules"] == ["R1"]


def test_create_source_unrepairable(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid = service.create_session()
    with pytest.raises(RepairFailed):
        service.create_source(sid, "not a component at all")


def test_manual_edit_adds_child(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid = service.create_session()
    nid = service.create_source(sid, BASE_CODE)
    edited = service.manual_edit(sid, nid, BLENDED_CODE)
    state = service.get_graph(sid)
    child = state.session.node(edited)
    assert child.parent == nid
    assert child.provenance.kind is ProvenanceKind.MANUAL_EDIT
    assert any(e.from_id == nid and e.to_id == edited and e.label == "manual_edit"
               for e in state.session.edges)
    with pytest.raises(MissingNode):
        service.manual_edit(sid, "nope", BASE_CODE)


def test_graph_state_round_trips(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid, nid, img = seeded_session(service)
    run_blend(service, sid, nid, img)
    state = service.get_graph(sid)
    assert SessionState.from_dict(state.to_dict()).to_dict() == state.to_dict()
    state.session.validate()


# ---------------------------------------------------------------------------
# Service: blend jobs
# ---------------------------------------------------------------------------


def test_blend_job_lifecycle(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid, nid, img = seeded_session(service)
    blended = run_blend(service, sid, nid, img)
    state = service.get_graph(sid)
    node = state.session.node(blended)
    assert node.parent == nid
    assert node.provenance.kind is ProvenanceKind.BLEND
    assert node.code.text == BLENDED_CODE
    outcome = state.outcomes[blended]
    assert [g.category for g in outcome.groups] == ["Color"]
    assert node.provenance.request_id in state.requests
    assert state.requests[node.provenance.request_id].source_node == nid


def test_blend_validates_before_submitting(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid, nid, img = seeded_session(service)
    with pytest.raises(MissingNode):
        service.blend(sid, BlendRequest(mode=BlendMode.GLOBAL, source_node="nope", example=img))
    with pytest.raises(MissingImage):
        service.blend(sid, BlendRequest(mode=BlendMode.GLOBAL, source_node=nid, example="nope"))


def test_localized_blend_with_crop(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid, nid, _ = seeded_session(service)
    img = service.upload_example(sid, make_png(32, 32))
    req = BlendRequest(
        mode=BlendMode.LOCALIZED,
        source_node=nid,
        example=img,
        crop=CropRegion(x=4, y=4, w=16, h=16),
        aspects=frozenset({BlendAspect(kind=AspectKind.COLOR)}),
        target_fragment='<div className="bg-white text-sm">',
    )
    job = service.blend(sid, req)
    status = service.wait_for_job(job, timeout=30)
    assert status.state is JobState.DONE, status.error_message


def test_failed_job_carries_error_code(tmp_path) -> None:
    service, _ = make_service(tmp_path, "there is no json here")
    sid, nid, img = seeded_session(service)
    job = service.blend(
        sid, BlendRequest(mode=BlendMode.GLOBAL, source_node=nid, example=img)
    )
    status = service.wait_for_job(job, timeout=30)
    assert status.state is JobState.FAILED
    assert status.error_code == "no_json_found"
    assert status.node_id is None
    # the failed blend must not have added a node
    assert len(service.get_graph(sid).session.source_nodes) == 1


def test_get_job_unknown(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    with pytest.raises(NotFound):
        service.get_job("job-missing")


# ---------------------------------------------------------------------------
# Service: toggle jobs
# ---------------------------------------------------------------------------


def test_toggle_round_trip_restores_code(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid, nid, img = seeded_session(service)
    blended = run_blend(service, sid, nid, img)
    state = service.get_graph(sid)
    gid = state.outcomes[blended].groups[0].id

    job = service.toggle_group(sid, blended, gid, enabled=False)
    off = service.wait_for_job(job, timeout=30)
    assert off.state is JobState.DONE, off.error_message
    state = service.get_graph(sid)
    off_node = state.session.node(off.node_id)
    assert off_node.parent == blended
    assert off_node.provenance.kind is ProvenanceKind.TOGGLE
    assert off_node.provenance.group_id == gid
    assert off_node.provenance.enabled is False
    assert "bg-white" in off_node.code.text
    assert state.outcomes[off.node_id].group(gid).enabled is False

    job = service.toggle_group(sid, off.node_id, gid, enabled=True)
    on = service.wait_for_job(job, timeout=30)
    assert on.state is JobState.DONE, on.error_message
    state = service.get_graph(sid)
    assert state.session.node(on.node_id).code.text == BLENDED_CODE
    assert state.outcomes[on.node_id].group(gid).enabled is True


def test_toggle_rejections_are_synchronous(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid, nid, img = seeded_session(service)
    blended = run_blend(service, sid, nid, img)
    with pytest.raises(NotFound):
        service.toggle_group(sid, blended, "no-such-group", enabled=False)
    with pytest.raises(NotFound):
        service.toggle_group(sid, nid, "anything", enabled=False)  # no outcome
    with pytest.raises(MissingNode):
        service.toggle_group(sid, "ghost-node", "g", enabled=False)


def test_toggle_falls_back_to_model_when_tokens_gone(tmp_path) -> None:
    drifted = '() => <div className="something-else">profile</div>'
    model_fix = '() => <div className="bg-white">profile</div>'
    service, stub = make_service(
        tmp_path,
        completion_payload(drifted, BLEND_GROUPS),  # blend: groups do not match code
        completion_payload(model_fix),              # model toggle answer
    )
    sid, nid, img = seeded_session(service)
    blended = run_blend(service, sid, nid, img)
    gid = service.get_graph(sid).outcomes[blended].groups[0].id
    job = service.toggle_group(sid, blended, gid, enabled=False)
    status = service.wait_for_job(job, timeout=30)
    assert status.state is JobState.DONE, status.error_message
    assert stub.calls == 2
    node = service.get_graph(sid).session.node(status.node_id)
    assert node.code.text == model_fix


def test_toggle_explicit_deterministic_strategy_fails_hard(tmp_path) -> None:
    drifted = '() => <div className="something-else">profile</div>'
    service, _ = make_service(tmp_path, completion_payload(drifted, BLEND_GROUPS))
    sid, nid, img = seeded_session(service)
    blended = run_blend(service, sid, nid, img)
    gid = service.get_graph(sid).outcomes[blended].groups[0].id
    job = service.toggle_group(
        sid, blended, gid, enabled=False, strategy=ToggleStrategy.DETERMINISTIC
    )
    status = service.wait_for_job(job, timeout=30)
    assert status.state is JobState.FAILED
    assert status.error_code == "edit_not_found"


# ---------------------------------------------------------------------------
# Service: regenerate
# ---------------------------------------------------------------------------


def test_regenerate_creates_sibling(tmp_path) -> None:
    service, _ = make_service(
        tmp_path,
        completion_payload(BLENDED_CODE, BLEND_GROUPS, explanation="first take"),
        completion_payload(BLENDED_CODE, BLEND_GROUPS, explanation="second take"),
    )
    sid, nid, img = seeded_session(service)
    blended = run_blend(service, sid, nid, img)
    job = service.regenerate(sid, blended)
    status = service.wait_for_job(job, timeout=30)
    assert status.state is JobState.DONE, status.error_message
    state = service.get_graph(sid)
    sibling = state.session.node(status.node_id)
    assert sibling.parent == nid  # sibling of the original blend, not a child
    assert sibling.provenance.kind is ProvenanceKind.REGENERATE
    assert state.outcomes[status.node_id].design_explanation == "second take"
    assert state.outcomes[blended].design_explanation == "first take"


def test_regenerate_requires_blend_provenance(tmp_path) -> None:
    service, _ = make_service(tmp_path)
    sid, nid, img = seeded_session(service)
    with pytest.raises(InvalidProvenance):
        service.regenerate(sid, nid)
    blended = run_blend(service, sid, nid, img)
    edited = service.manual_edit(sid, blended, BLENDED_CODE)
    with pytest.raises(InvalidProvenance):
        service.regenerate(sid, edited)


# ---------------------------------------------------------------------------
# HTTP surface
# ---------------------------------------------------------------------------


@pytest.fixture
def client(tmp_path):
    service, _ = make_service(tmp_path)
    with TestClient(create_app(service)) as c:
        c.service = service
        yield c
    service.shutdown()


def wait_done(client, job_id: str) -> str:
    status = client.service.wait_for_job(job_id, timeout=30)
    body = client.get(f"/jobs/{job_id}").json()
    assert body["state"] == "done", body
    return body["node_id"]


def test_http_happy_path(client) -> None:
    sid = client.post("/sessions").json()["session_id"]
    img = client.post(f"/sessions/{sid}/images", content=make_png()).json()["image_id"]
    created = client.post(f"/sessions/{sid}/nodes", json={"code": BASE_CODE}).json()
    nid = created["node_id"]
    assert created["repair"]["applied_rules"] == []

    res = client.post(
        f"/sessions/{sid}/blend",
        json={"mode": "global", "source_node": nid, "example": img, "aspects": []},
    )
    assert res.status_code == 202
    blended = wait_done(client, res.json()["job_id"])

    graph = client.get(f"/sessions/{sid}/graph").json()
    assert [n["id"] for n in graph["session"]["source_nodes"]] == [nid, blended]
    gid = graph["outcomes"][blended]["groups"][0]["id"]

    res = client.post(
        f"/sessions/{sid}/nodes/{blended}/toggle",
        json={"group_id": gid, "enabled": False},
    )
    assert res.status_code == 202
    toggled = wait_done(client, res.json()["job_id"])

    res = client.put(
        f"/sessions/{sid}/nodes/{toggled}/code", json={"code": BASE_CODE}
    )
    assert res.status_code == 200

    res = client.post(f"/sessions/{sid}/nodes/{blended}/regenerate")
    assert res.status_code == 202
    wait_done(client, res.json()["job_id"])

    graph = client.get(f"/sessions/{sid}/graph").json()
    assert len(graph["session"]["source_nodes"]) == 5
    assert graph["session"]["revision"] == 6  # one event per mutation


def test_http_error_shapes(client) -> None:
    res = client.get("/sessions/ghost/graph")
    assert res.status_code == 404
    assert res.json() == {"code": "not_found", "message": res.json()["message"]}

    sid = client.post("/sessions").json()["session_id"]
    res = client.post(f"/sessions/{sid}/images", content=b"not an image")
    assert res.status_code == 415
    assert res.json()["code"] == "unsupported_image"

    res = client.post(f"/sessions/{sid}/nodes", json={"code": 42})
    assert res.status_code == 400
    assert res.json()["code"] == "bad_request"

    res = client.post(f"/sessions/{sid}/blend", json={"mode": "sideways"})
    assert res.status_code == 400

    res = client.post(f"/sessions/{sid}/nodes/x/toggle", json={"group_id": "g"})
    assert res.status_code == 400

    res = client.post(f"/sessions/{sid}/nodes", json={"code": "no component"})
    assert res.status_code == 422
    assert res.json()["code"] == "repair_failed"

    assert client.get("/jobs/ghost").status_code == 404


def test_http_unsupported_blend_mode_is_400(client) -> None:
    sid = client.post("/sessions").json()["session_id"]
    res = client.post(f"/sessions/{sid}/blend", content=b"{broken json")
    assert res.status_code == 400
    assert res.json()["code"] == "bad_request"


# ---------------------------------------------------------------------------
# Concurrency smoke (the full 8x50 load lives in the acceptance suite)
# ---------------------------------------------------------------------------


def test_concurrent_clients_preserve_invariants(tmp_path) -> None:
    service, _ = make_service(tmp_path, workers=4)
    sid, nid, img = seeded_session(service)
    errors: list[Exception] = []

    def worker(seed: int) -> None:
        rng = random.Random(seed)
        try:
            for _ in range(10):
                op = rng.random()
                if op < 0.3:
                    service.upload_example(sid, make_png())
                elif op < 0.6:
                    nodes = service.get_graph(sid).session.source_nodes
                    service.manual_edit(sid, rng.choice(nodes).id, BASE_CODE)
                else:
                    images = service.get_graph(sid).session.example_images
                    nodes = service.get_graph(sid).session.source_nodes
                    job = service.blend(
                        sid,
                        BlendRequest(
                            mode=BlendMode.GLOBAL,
                            source_node=rng.choice(nodes).id,
                            example=rng.choice(images).id,
                        ),
                    )
                    service.wait_for_job(job, timeout=30)
        except Exception as exc:  # noqa: BLE001 - recorded for the assertion
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []

    state = service.get_graph(sid)
    state.session.validate()
    # Every mutation appended exactly one event: revision matches the count.
    expected_events = len(state.session.source_nodes) + len(state.session.example_images)
    assert state.session.revision == expected_events
    assert service.store.replay(sid).to_dict() == state.to_dict()
    service.shutdown()
