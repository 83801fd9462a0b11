"""HTTP/JSON API over the studio engine.

All bodies are JSON; pattern and board images are served as PNG.  GET
endpoints are side-effect-free; long jobs run in background threads and are
polled through /api/jobs/{id}.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from colorwai.studio.engine import (BusyError, NotFoundError, StudioEngine,
                                    ValidationError)


class PatternCreate(BaseModel):
    backend: str
    seed: int


class ColorwayCreate(BaseModel):
    color_id: int
    method: str = "shapleyvec"
    alpha: float | str = "optimal"
    backend: str | None = None


class BoardPin(BaseModel):
    pattern_id: str
    request: dict | None = None


class BoardBody(BaseModel):
    id: str | None = None
    name: str = ""
    pinned: list[BoardPin] = Field(default_factory=list)


class FitJobCreate(BaseModel):
    backend: str
    method: str = "shapleyvec"
    params: dict = Field(default_factory=dict)


def create_app(engine: StudioEngine) -> FastAPI:
    app = FastAPI(title="colorwai studio", version="0.1.0")
    # the studio page is typically served from a different port in dev
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def run(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except BusyError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (ValidationError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/api/backends")
    def backends():
        return run(engine.backends_info)

    @app.get("/api/codebook")
    def codebook():
        return run(lambda: engine.codebook().to_document())

    @app.get("/api/directions")
    def directions(backend: str, method: str):
        return run(lambda: engine.directions(backend, method).to_document())

    @app.post("/api/patterns")
    def create_pattern(body: PatternCreate):
        return run(engine.create_pattern, body.backend, body.seed)

    @app.get("/api/patterns/{pattern_id}")
    def get_pattern(pattern_id: str):
        return run(engine.get_pattern, pattern_id)

    @app.get("/api/patterns/{pattern_id}/image.png")
    def pattern_image(pattern_id: str):
        png = run(engine.pattern_png, pattern_id)
        return Response(content=png, media_type="image/png")

    @app.post("/api/patterns/{pattern_id}/colorway")
    def create_colorway(pattern_id: str, body: ColorwayCreate):
        if isinstance(body.alpha, str) and body.alpha != "optimal":
            raise HTTPException(status_code=400, detail='alpha must be a number or "optimal"')
        return run(engine.create_colorway, pattern_id, body.color_id,
                   body.method, body.alpha, body.backend)

    @app.get("/api/boards")
    def list_boards():
        return run(engine.list_boards)

    @app.post("/api/boards")
    def create_board(body: BoardBody):
        doc = body.model_dump(exclude_none=True)
        return run(engine.save_board, doc)

    @app.get("/api/boards/{board_id}")
    def get_board(board_id: str):
        return run(engine.load_board, board_id)

    @app.put("/api/boards/{board_id}")
    def put_board(board_id: str, body: BoardBody):
        doc = body.model_dump(exclude_none=True)
        doc["id"] = board_id
        existing = run(engine.load_board, board_id) if engine.store.exists(
            f"boards/{board_id}.json") else {}
        if existing:
            doc.setdefault("created_at", existing.get("created_at"))
            if not doc.get("name"):
                doc["name"] = existing.get("name", board_id)
        return run(engine.save_board, doc)

    @app.get("/api/boards/{board_id}/export.png")
    def export_board(board_id: str):
        png = run(engine.export_board_png, board_id)
        return Response(content=png, media_type="image/png")

    @app.post("/api/jobs/fit")
    def submit_fit(body: FitJobCreate):
        params = dict(body.params)
        params["backend"] = body.backend
        params["method"] = body.method
        job = run(engine.submit_job, "fit", params)
        return {"job_id": job.id}

    @app.post("/api/jobs/train")
    def submit_train(body: FitJobCreate):
        params = dict(body.params)
        params["backend"] = body.backend
        job = run(engine.submit_job, "train", params)
        return {"job_id": job.id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        return run(lambda: engine.job_status(job_id).to_document())

    return app
