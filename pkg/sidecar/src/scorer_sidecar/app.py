"""HTTP surface: POST /embed, /qe, /comet and GET /health.

The wire format is fixed by the consuming pipeline and must not drift:
  /embed  {"text": ..., "lang": ...}            -> {"vector": [...]}
  /qe     {"src": ..., "hyp": ...}              -> {"score": ...}
  /comet  {"src": ..., "hyp": ..., "ref": ...}  -> {"score": ...}
  /health                                        -> {"dim": ..., "models": {...}}

Malformed requests answer 400 with a machine-readable reason. Scores are
returned raw; presentation scaling belongs to the caller. Requests are
handled one by one (any internal batching would be invisible and
order-preserving).
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import SidecarConfig
from .models import build_comet, build_embedder, build_qe


class EmbedRequest(BaseModel):
    text: str = Field(min_length=1)
    lang: str = ""


class QeRequest(BaseModel):
    src: str = Field(min_length=1)
    hyp: str = Field(min_length=1)


class CometRequest(BaseModel):
    src: str = Field(min_length=1)
    hyp: str = Field(min_length=1)
    ref: str = Field(min_length=1)


def create_app(config: SidecarConfig = SidecarConfig()) -> FastAPI:
    """Load the configured models and expose them; raises on load failure
    so a broken configuration never serves."""
    embedder = build_embedder(config.embedder)
    qe_model = build_qe(config.qe, embedder)
    comet_model = build_comet(config.comet)

    app = FastAPI(title="scorer-sidecar")

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "malformed_request", "detail": exc.errors()},
        )

    @app.get("/health")
    def health():
        return {
            "dim": embedder.dim,
            "models": {
                "embedder": embedder.name,
                "qe": qe_model.name,
                "comet": comet_model.name,
            },
        }

    @app.post("/embed")
    def embed(request: EmbedRequest):
        return {"vector": embedder.embed(request.text, request.lang)}

    @app.post("/qe")
    def qe(request: QeRequest):
        return {"score": qe_model.score(request.src, request.hyp)}

    @app.post("/comet")
    def comet(request: CometRequest):
        return {"score": comet_model.score(request.src, request.hyp, request.ref)}

    return app
