"""Read-only retrieval HTTP service over a prebuilt graph.

The graph is loaded and validated once at startup and shared across requests;
request handling allocates only per-walk counters, never graph-sized buffers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .model import CsrGraph, deserialize_graph
from .sampling import SamplerConfig
from .walks import ColdStartError, RankedResult, WalkParams, retrieve


@dataclass(frozen=True)
class ServiceConfig:
    graph_path: str | Path
    host: str = "127.0.0.1"
    port: int = 8000
    defaults: WalkParams = field(default_factory=WalkParams)
    request_timeout_ms: int = 30_000

    def __post_init__(self) -> None:
        if self.request_timeout_ms < 1:
            raise ValueError("request_timeout_ms must be positive")


class ListingHit(BaseModel):
    listing: str
    score: float


class RetrieveResponse(BaseModel):
    query: str
    results: list[ListingHit]


class HealthResponse(BaseModel):
    status: str = "ok"


def create_app(graph: CsrGraph, defaults: WalkParams | None = None) -> FastAPI:
    """Build the API around an already-loaded graph (handy for tests)."""
    defaults = defaults or WalkParams()
    app = FastAPI(title="xwalk retrieval service")

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse()

    @app.get("/retrieve", response_model=RetrieveResponse)
    def retrieve_endpoint(
        q: str,
        walks: int | None = None,
        hops: int | None = None,
        topk: int | None = None,
        seed: int = 0,
    ):
        try:
            params = WalkParams(
                num_walks=walks if walks is not None else defaults.num_walks,
                hops=hops if hops is not None else defaults.hops,
                top_k=topk if topk is not None else defaults.top_k,
                sampler=defaults.sampler,
            )
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        rng = np.random.default_rng(seed)
        try:
            result = retrieve(graph, q, params, rng)
        except ColdStartError:
            return JSONResponse(status_code=404, content={"error": "cold_start"})
        return _to_response(result)

    return app


def _to_response(result: RankedResult) -> RetrieveResponse:
    return RetrieveResponse(
        query=result.query,
        results=[ListingHit(listing=key, score=score) for key, score in result.results],
    )


def load_graph(path: str | Path) -> CsrGraph:
    with open(path, "rb") as source:
        return deserialize_graph(source)


def serve(config: ServiceConfig) -> None:
    """Load the graph, then run the service until interrupted."""
    import uvicorn

    graph = load_graph(config.graph_path)
    app = create_app(graph, config.defaults)
    uvicorn.run(
        app,
        host=config.host,
        port=config.port,
        timeout_keep_alive=max(1, config.request_timeout_ms // 1000),
    )
