"""HTTP JSON surface over the consult service.

All request bodies are loose JSON objects; validation happens in the
service layer so every failure, whatever raised it, comes back in one
error shape: {"code", "message", "details": []}.
"""

from __future__ import annotations

from contextlib import asynccontextmanager

from fastapi import Body, FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .errors import SciConsultError, ServiceError
from .service import ConsultService


def _error_body(code: str, message: str, details: list | None = None) -> dict:
    return {"code": code, "message": message, "details": details or []}


def create_app(service: ConsultService) -> FastAPI:
    """Wrap a ConsultService in a FastAPI app (one service per app)."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.shutdown(wait=False)

    app = FastAPI(title="sciconsult", version=__version__, lifespan=lifespan)
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def service_error(request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.http_status,
            content=_error_body(exc.code, str(exc), getattr(exc, "details", [])),
        )

    @app.exception_handler(SciConsultError)
    async def pipeline_error(request, exc: SciConsultError):
        return JSONResponse(
            status_code=500, content=_error_body("internal", str(exc))
        )

    @app.exception_handler(RequestValidationError)
    async def body_error(request, exc: RequestValidationError):
        details = [
            {
                "field": ".".join(str(part) for part in err["loc"]),
                "message": err["msg"],
            }
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=400,
            content=_error_body("bad_request", "request body failed validation", details),
        )

    @app.get("/api/health")
    def health():
        return service.health()

    @app.get("/api/schema")
    def schema():
        return service.schema_payload()

    @app.get("/api/tools")
    def tools():
        return {"tools": service.tools_payload()}

    @app.post("/api/sessions", status_code=201)
    def create_session():
        return service.create_session()

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return service.get_session(session_id)

    @app.put("/api/sessions/{session_id}/answers")
    def put_answers(session_id: str, payload: dict = Body(default={})):
        return service.save_answers(
            session_id,
            answers=payload.get("answers"),
            project_description=payload.get("project_description"),
            accepted_suggestions=payload.get("accepted_suggestions"),
            edits=payload.get("edits"),
        )

    @app.post("/api/sessions/{session_id}/smartfill", status_code=202)
    def post_smartfill(session_id: str):
        return service.run_smartfill(session_id)

    @app.post("/api/sessions/{session_id}/recommendation", status_code=202)
    def post_recommendation(session_id: str, payload: dict = Body(default={})):
        return service.run_recommendation(
            session_id,
            strategy=payload.get("strategy"),
            k=payload.get("k"),
            n=payload.get("n"),
            full_paper_ids=payload.get("full_paper_ids"),
            full_paper_mode=payload.get("full_paper_mode"),
            force=bool(payload.get("force", False)),
        )

    @app.get("/api/sessions/{session_id}/recommendation")
    def get_recommendation(session_id: str):
        return service.get_recommendation(session_id)

    @app.post("/api/sessions/{session_id}/prototype", status_code=202)
    def post_prototype(session_id: str, payload: dict = Body(default={})):
        return service.run_prototype(session_id, payload)

    @app.get("/api/sessions/{session_id}/jobs/{job_id}")
    def get_job(session_id: str, job_id: str):
        return service.get_job(session_id, job_id)

    @app.get("/api/sessions/{session_id}/jobs/{job_id}/result")
    def get_prototype_result(session_id: str, job_id: str):
        return service.get_prototype_result(session_id, job_id)

    @app.post("/api/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, payload: dict = Body(default={})):
        return service.submit_feedback(
            session_id,
            ratings=payload.get("ratings"),
            text=payload.get("text", ""),
        )

    return app
