"""HTTP API over the session manager.

JSON in/out everywhere except previews (PNG bytes).  Long operations run
as jobs polled via ``GET /jobs/{id}``.  Every JSON response that reflects
session state carries the session revision that produced it.
"""

from __future__ import annotations

import io

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from ..errors import ConflictError, Mask4DError, ResourceLimitError
from ..geometry import RigidPlacement
from ..propagation import PropagationConfig
from ..render import RenderConfig
from .sessions import ServiceConfig, SessionManager


class CreateSessionBody(BaseModel):
    bundle_path: str
    object_path: str


class PlacementBody(BaseModel):
    scale: float = 1.0
    R: list[float] = Field(min_length=9, max_length=9)
    t: list[float] = Field(min_length=3, max_length=3)


class PropagateBody(BaseModel):
    k_neighbors: int | None = None
    radius_cap: float | None = None
    min_valid_fraction: float | None = None
    static_flow_threshold: float | None = None


class RenderBody(BaseModel):
    splat_radius: float | None = None
    depth_epsilon_rel: float | None = None
    closing_radius: int | None = None
    min_mask_area: int | None = None


class ExportBody(BaseModel):
    out_path: str


def _status_code(exc: Mask4DError) -> int:
    if isinstance(exc, ConflictError):
        return 409
    if isinstance(exc, ResourceLimitError):
        return 429
    return 400


def create_app(
    config: ServiceConfig | None = None, manager: SessionManager | None = None
) -> FastAPI:
    manager = manager or SessionManager(config)
    app = FastAPI(title="mask4d session service")
    app.state.manager = manager

    @app.exception_handler(Mask4DError)
    async def domain_error(request: Request, exc: Mask4DError):
        return JSONResponse(
            status_code=_status_code(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(KeyError)
    async def not_found(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = manager.create_session(body.bundle_path, body.object_path)
        return session.info()

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": manager.list_sessions()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return manager.get(session_id).info()

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        manager.delete_session(session_id)
        return {"deleted": session_id}

    @app.put("/sessions/{session_id}/placement")
    def set_placement(session_id: str, body: PlacementBody):
        placement = RigidPlacement.from_json_obj(
            {"scale": body.scale, "R": body.R, "t": body.t}
        )
        revision = manager.set_placement(session_id, placement)
        return {
            "revision": revision,
            "placement": manager.get(session_id).placement.to_json_obj(),
        }

    @app.post("/sessions/{session_id}/propagate", status_code=202)
    def propagate(session_id: str, body: PropagateBody | None = None):
        overrides = {
            k: v for k, v in (body.model_dump() if body else {}).items()
            if v is not None
        }
        cfg = (
            PropagationConfig(**overrides)
            if overrides
            else manager.config.propagation
        )
        job_id = manager.start_propagation(session_id, cfg)
        return {"job_id": job_id, "revision": manager.get(session_id).revision}

    @app.post("/sessions/{session_id}/render", status_code=202)
    def render(session_id: str, body: RenderBody | None = None):
        overrides = {
            k: v for k, v in (body.model_dump() if body else {}).items()
            if v is not None
        }
        cfg = RenderConfig(**overrides) if overrides else manager.config.render
        job_id = manager.start_render(session_id, cfg)
        return {"job_id": job_id, "revision": manager.get(session_id).revision}

    @app.get("/jobs/{job_id}")
    def job_progress(job_id: str):
        return manager.job(job_id).to_obj()

    @app.get("/sessions/{session_id}/preview/{frame}")
    def preview(session_id: str, frame: int, mode: str = "composite"):
        image = manager.preview_image(session_id, frame, mode)
        buf = io.BytesIO()
        Image.fromarray(image).save(buf, format="PNG")
        return Response(
            content=buf.getvalue(),
            media_type="image/png",
            headers={"X-Revision": str(manager.get(session_id).revision)},
        )

    @app.get("/sessions/{session_id}/scene/{frame}")
    def scene(session_id: str, frame: int, stride: int = 1):
        return manager.scene_payload(session_id, frame, stride)

    @app.get("/sessions/{session_id}/object")
    def object_points(session_id: str, stride: int = 1):
        return manager.object_payload(session_id, stride)

    @app.post("/sessions/{session_id}/export")
    def export(session_id: str, body: ExportBody):
        written = manager.export(session_id, body.out_path)
        return {
            "written": written,
            "out_path": body.out_path,
            "revision": manager.get(session_id).revision,
        }

    return app
