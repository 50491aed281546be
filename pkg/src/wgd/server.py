"""Read-only JSON API over one immutable snapshot, plus the dashboard's
static assets at ``/``.

Every number in a response comes from the aggregator's own rounding; the
server never re-rounds or re-aggregates outside aggregator code, so API
bodies replay aggregator outputs exactly. Identical queries against the
same snapshot return byte-identical bodies.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from .aggregator import (
    ALL,
    AggregationFilter,
    Cube,
    EmptySelection,
    other_genders_view,
    read_cube_json,
    summarize,
    yearly_series,
)
from .snapshot import DatasetSnapshot, load_snapshot

FALLBACK_INDEX = """<!doctype html>
<html><head><title>wgd</title></head>
<body>
<h1>wgd API</h1>
<p>No dashboard build configured (start with --static-dir). The JSON API
is live: <a href="/api/subclasses">/api/subclasses</a>,
<a href="/api/summary">/api/summary</a>,
<a href="/api/series?gender=female">/api/series?gender=female</a>,
<a href="/api/other">/api/other</a>,
<a href="/healthz">/healthz</a>.</p>
</body></html>
"""


@dataclass(frozen=True)
class ApiQuery:
    subclass: str | None = None
    year_from: int | None = None
    year_to: int | None = None

    def to_filter(self) -> AggregationFilter:
        if (
            self.year_from is not None
            and self.year_to is not None
            and self.year_from > self.year_to
        ):
            raise HTTPException(status_code=400, detail="year_from must be <= year_to")
        return AggregationFilter(
            subclass=self.subclass, year_from=self.year_from, year_to=self.year_to
        )


def create_app(
    snapshot: DatasetSnapshot,
    cube: Cube | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    cube = cube if cube is not None else read_cube_json(snapshot.cube_json)
    subclasses = cube.subclasses()
    app = FastAPI(title="wgd", docs_url=None, redoc_url=None, openapi_url=None)

    def parse_query(
        subclass: str | None, year_from: int | None, year_to: int | None
    ) -> AggregationFilter:
        if subclass is not None and subclass not in subclasses:
            raise HTTPException(status_code=404, detail=f"unknown subclass {subclass!r}")
        return ApiQuery(subclass, year_from, year_to).to_filter()

    @app.get("/api/subclasses")
    def api_subclasses() -> list[str]:
        return subclasses

    @app.get("/api/summary")
    def api_summary(
        subclass: str | None = Query(default=None),
        year_from: int | None = Query(default=None),
        year_to: int | None = Query(default=None),
    ) -> dict:
        flt = parse_query(subclass, year_from, year_to)
        try:
            return summarize(cube, flt)
        except EmptySelection as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

    @app.get("/api/series")
    def api_series(
        gender: str | None = Query(default=None),
        subclass: str | None = Query(default=None),
        year_from: int | None = Query(default=None),
        year_to: int | None = Query(default=None),
    ) -> list[dict]:
        # No gender (or gender=) means the all-genders totals series.
        flt = parse_query(subclass, year_from, year_to)
        return yearly_series(cube, gender or ALL, flt)

    @app.get("/api/other")
    def api_other() -> dict:
        return other_genders_view(cube)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "snapshot_hash": snapshot.content_hash}

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return FALLBACK_INDEX

    return app


def serve(
    snapshot_path: str | Path,
    bind_address: str = "127.0.0.1:8000",
    static_dir: str | Path | None = None,
) -> None:
    """Verify the snapshot and run the API until interrupted."""
    import uvicorn

    snapshot = load_snapshot(snapshot_path)
    app = create_app(snapshot, static_dir=static_dir)
    host, _, port = bind_address.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")
