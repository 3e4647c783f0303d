"""HTTP API over the suggestion service.

Endpoints (bodies/fields exactly as listed):
  POST /sessions {image}                      -> {id}
  GET  /sessions/{id}/state                   -> {canvas, history_len}
  POST /sessions/{id}/strokes {strokes}       -> {canvas, history_len}
  POST /sessions/{id}/suggest {n_variants}    -> {variants: [{variant_id, strokes, preview}]}
  POST /sessions/{id}/accept {variant_id, prefix_len} -> {canvas, history_len}
  POST /sessions/{id}/undo {count}            -> {canvas, history_len}
  GET  /sessions/{id}/heatmap                 -> grayscale PNG
  POST /sessions/{id}/interpolate {steps}     -> {sequences: [{alpha, strokes}]}
Images travel as base64-encoded PNG.
"""

import base64
import binascii

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import (
    ModelUnavailable,
    StaleVariant,
    SuggestionService,
    UndecodableImage,
    UnknownSession,
    ValidationFailure,
)


class CreateSessionBody(BaseModel):
    image: str


class StrokesBody(BaseModel):
    strokes: list


class SuggestBody(BaseModel):
    n_variants: int = 4


class AcceptBody(BaseModel):
    variant_id: str
    prefix_len: int


class UndoBody(BaseModel):
    count: int = 1


class InterpolateBody(BaseModel):
    steps: int


def create_app(service: SuggestionService) -> FastAPI:
    app = FastAPI(title="nextstroke suggestion service")
    app.state.service = service

    @app.exception_handler(UnknownSession)
    async def _unknown(request: Request, exc: UnknownSession):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(StaleVariant)
    async def _stale(request: Request, exc: StaleVariant):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ValidationFailure)
    async def _invalid(request: Request, exc: ValidationFailure):
        return JSONResponse(status_code=422, content={"detail": str(exc), "fields": list(exc.fields)})

    @app.exception_handler(ModelUnavailable)
    async def _no_model(request: Request, exc: ModelUnavailable):
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    @app.exception_handler(UndecodableImage)
    async def _bad_image(request: Request, exc: UndecodableImage):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def state_payload(session_id: str):
        canvas_png, history_len = service.get_state(session_id)
        return {"canvas": base64.b64encode(canvas_png).decode("ascii"), "history_len": history_len}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            raw = base64.b64decode(body.image, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise UndecodableImage(f"image is not valid base64: {exc}") from exc
        return {"id": service.create_session(raw)}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        return state_payload(session_id)

    @app.post("/sessions/{session_id}/strokes")
    def commit_strokes(session_id: str, body: StrokesBody):
        service.commit_strokes(session_id, body.strokes)
        return state_payload(session_id)

    @app.post("/sessions/{session_id}/suggest")
    def suggest(session_id: str, body: SuggestBody):
        variants = service.suggest(session_id, body.n_variants)
        return {
            "variants": [
                {
                    "variant_id": v["variant_id"],
                    "strokes": v["strokes"],
                    "preview": base64.b64encode(v["preview"]).decode("ascii"),
                }
                for v in variants
            ]
        }

    @app.post("/sessions/{session_id}/accept")
    def accept(session_id: str, body: AcceptBody):
        service.accept(session_id, body.variant_id, body.prefix_len)
        return state_payload(session_id)

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str, body: UndoBody):
        service.undo(session_id, body.count)
        return state_payload(session_id)

    @app.get("/sessions/{session_id}/heatmap")
    def get_heatmap(session_id: str):
        return Response(content=service.heatmap_png(session_id), media_type="image/png")

    @app.post("/sessions/{session_id}/interpolate")
    def interpolate(session_id: str, body: InterpolateBody):
        return {"sequences": service.interpolate(session_id, body.steps)}

    return app
