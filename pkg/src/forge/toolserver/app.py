"""HTTP surface: POST /search, POST /browse, GET /healthz, GET /stats."""

from __future__ import annotations

import json
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response
from pydantic import BaseModel

from .service import BrowseRequest, SearchRequest, ToolError, ToolServer


class SearchBody(BaseModel):
    query: str
    region_lang: Optional[str] = None


class BrowseBody(BaseModel):
    url: str


def dumps(obj: Any) -> bytes:
    """Canonical wire encoding: UTF-8, compact separators, key order as built."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _json(obj: Any, status: int = 200) -> Response:
    return Response(content=dumps(obj), status_code=status, media_type="application/json")


def create_app(server: ToolServer) -> FastAPI:
    app = FastAPI(title="forge tool server")

    @app.exception_handler(ToolError)
    async def _tool_error(request: Request, exc: ToolError):
        return _json(exc.to_wire(), exc.status)

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return _json({"error": "bad_request", "detail": "malformed request body"}, 400)

    # sync handlers: FastAPI runs them in its threadpool, so requests proceed concurrently
    @app.post("/search")
    def search(body: SearchBody) -> Response:
        results = server.handle_search(SearchRequest(body.query, body.region_lang))
        return _json([r.to_wire() for r in results])

    @app.post("/browse")
    def browse(body: BrowseBody) -> Response:
        return _json(server.handle_browse(BrowseRequest(body.url)).to_wire())

    @app.get("/healthz")
    def healthz() -> Response:
        return _json({"status": "ok"})

    @app.get("/stats")
    def stats() -> Response:
        return _json(server.stats())

    app.state.server = server
    return app
