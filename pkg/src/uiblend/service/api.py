"""HTTP+JSON surface over SessionService.

All domain failures surface as ``{"code": ..., "message": ...}`` with the
status carried by the error class; malformed request bodies map to 400.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..diffs import ToggleStrategy
from ..errors import BlendError
from ..model import BlendRequest
from .core import SessionService


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="uiblend", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(BlendError)
    async def _blend_error(_request: Request, exc: BlendError):
        return JSONResponse(status_code=exc.http_status, content=exc.as_dict())

    def bad_request(message: str) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"code": "bad_request", "message": message}
        )

    async def read_json(request: Request) -> dict:
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            raise ValueError(f"body is not JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise ValueError("body must be a JSON object")
        return body

    @app.post("/sessions")
    async def create_session():
        return {"session_id": service.create_session()}

    @app.post("/sessions/{session_id}/images")
    async def upload_image(session_id: str, request: Request):
        payload = await request.body()
        image_id = service.upload_example(session_id, payload)
        return {"image_id": image_id}

    @app.post("/sessions/{session_id}/nodes")
    async def create_source(session_id: str, request: Request):
        try:
            body = await read_json(request)
            code = body["code"]
            if not isinstance(code, str):
                raise ValueError("'code' must be a string")
        except (ValueError, KeyError) as exc:
            return bad_request(str(exc))
        node_id = service.create_source(session_id, code)
        state = service.get_graph(session_id)
        return {"node_id": node_id, "repair": state.repairs.get(node_id)}

    @app.post("/sessions/{session_id}/blend")
    async def blend(session_id: str, request: Request):
        try:
            body = await read_json(request)
            req = BlendRequest.from_dict(body)
        except (ValueError, KeyError, TypeError) as exc:
            return bad_request(f"invalid blend request: {exc}")
        job_id = service.blend(session_id, req)
        return JSONResponse(status_code=202, content={"job_id": job_id})

    @app.post("/sessions/{session_id}/nodes/{node_id}/toggle")
    async def toggle(session_id: str, node_id: str, request: Request):
        try:
            body = await read_json(request)
            group_id = body["group_id"]
            enabled = body["enabled"]
            if not isinstance(group_id, str) or not isinstance(enabled, bool):
                raise ValueError("'group_id' must be a string and 'enabled' a boolean")
            strategy = body.get("strategy")
            if strategy is not None:
                strategy = ToggleStrategy(strategy)
        except (ValueError, KeyError) as exc:
            return bad_request(str(exc))
        job_id = service.toggle_group(session_id, node_id, group_id, enabled, strategy)
        return JSONResponse(status_code=202, content={"job_id": job_id})

    @app.post("/sessions/{session_id}/nodes/{node_id}/regenerate")
    async def regenerate(session_id: str, node_id: str):
        job_id = service.regenerate(session_id, node_id)
        return JSONResponse(status_code=202, content={"job_id": job_id})

    @app.put("/sessions/{session_id}/nodes/{node_id}/code")
    async def put_code(session_id: str, node_id: str, request: Request):
        try:
            body = await read_json(request)
            code = body["code"]
            if not isinstance(code, str):
                raise ValueError("'code' must be a string")
        except (ValueError, KeyError) as exc:
            return bad_request(str(exc))
        new_node = service.manual_edit(session_id, node_id, code)
        state = service.get_graph(session_id)
        return {"node_id": new_node, "repair": state.repairs.get(new_node)}

    @app.get("/sessions/{session_id}/graph")
    async def get_graph(session_id: str):
        return service.get_graph(session_id).to_dict()

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        return service.get_job(job_id).to_dict()

    return app
