import logging
import os
from datetime import datetime

import numpy as np
import pandas as pd
import torch
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.openapi.docs import get_redoc_html, get_swagger_ui_html
from fastapi.responses import JSONResponse

from src.engine.scenario import PRESETS
from src.routers import evaluation, planning, world
from src.utils.error_handlers import PlannerErrorHandler
from src.utils.errors import PlannerError
from src.utils.logging_config import configure_logging, log_banner

configure_logging()

logger = logging.getLogger(__name__)

log_banner(logger, "RPF Planner API Starting Up")

VERSION = "1.0.0"

app = FastAPI(
    docs_url=None,
    redoc_url=None,
    title="RPF Planner API",
    description="Multi-robot reinforced potential field planning: scenarios, force fields and evaluation",
    version=VERSION,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _request_context(request: Request) -> str:
    client = request.client.host if request.client else "unknown"
    return f"Path: {request.url.path} | Method: {request.method} | Client: {client}"


def _error_response(request: Request, exc: Exception) -> JSONResponse:
    operation = request.url.path.strip("/").replace("/", "_") or "root"
    PlannerErrorHandler.log_error(operation, exc, identifier=_request_context(request))
    http = PlannerErrorHandler.to_http_exception(operation, exc)
    return JSONResponse(status_code=http.status_code, content={"detail": http.detail})


@app.middleware("http")
async def log_requests(request: Request, call_next):
    """Log every request with its status and wall time"""
    started = datetime.now()
    logger.info(f"Incoming Request: {_request_context(request)}")
    try:
        response = await call_next(request)
    except Exception as e:
        logger.error(
            f"Request Failed: {type(e).__name__}: {e} | {_request_context(request)} | "
            f"Duration: {(datetime.now() - started).total_seconds():.3f}s"
        )
        raise
    logger.info(
        f"Response: {response.status_code} | Path: {request.url.path} | "
        f"Duration: {(datetime.now() - started).total_seconds():.3f}s"
    )
    return response


@app.exception_handler(HTTPException)
async def http_exception_handler(request: Request, exc: HTTPException):
    level = logging.INFO if exc.status_code < 500 else logging.ERROR
    logger.log(level, f"HTTP Exception: {exc.status_code} - {exc.detail} | {_request_context(request)}")
    return JSONResponse(status_code=exc.status_code, content={"detail": exc.detail})


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    logger.info(f"Validation Error: {exc.errors()} | {_request_context(request)}")
    return JSONResponse(status_code=422, content={"detail": exc.errors(), "body": exc.body})


# planner errors raised outside the router decorators
@app.exception_handler(PlannerError)
async def planner_exception_handler(request: Request, exc: PlannerError):
    return _error_response(request, exc)


@app.exception_handler(Exception)
async def general_exception_handler(request: Request, exc: Exception):
    return _error_response(request, exc)


app.include_router(world.router, prefix="/world", tags=["World"])
app.include_router(planning.router, prefix="/apf", tags=["Force field"])
app.include_router(evaluation.router, prefix="/eval", tags=["Evaluation"])


@app.get("/")
def root():
    return {
        "message": "RPF Planner API is running!",
        "status": "healthy",
        "version": VERSION,
        "features": [
            "Seeded scenario generation",
            "Range-limited robot observations",
            "Force-field resolution with soft wall following",
            "Episode rollouts and paired planner comparison",
        ],
        "presets": sorted(PRESETS),
        "endpoints": ["/world/scenario", "/world/observe", "/apf/resolve", "/eval/episode", "/eval/compare"],
        "health_check": "/health",
        "documentation": "/docs",
    }


@app.get("/health")
async def health():
    """Liveness check with the numeric stack versions"""
    return {
        "status": "healthy",
        "timestamp": datetime.now().isoformat(),
        "versions": {
            "api": VERSION,
            "numpy": np.__version__,
            "torch": torch.__version__,
            "pandas": pd.__version__,
        },
        "torch_threads": torch.get_num_threads(),
    }


@app.get("/docs", include_in_schema=False)
async def swagger_ui():
    return get_swagger_ui_html(
        openapi_url=app.openapi_url,
        title=f"{app.title} - Swagger UI",
        swagger_js_url="https://unpkg.com/swagger-ui-dist@5/swagger-ui-bundle.js",
        swagger_css_url="https://unpkg.com/swagger-ui-dist@5/swagger-ui.css",
    )


@app.get("/redoc", include_in_schema=False)
async def redoc():
    return get_redoc_html(
        openapi_url=app.openapi_url,
        title=f"{app.title} - ReDoc",
        redoc_js_url="https://unpkg.com/redoc@next/bundles/redoc.standalone.js",
    )


@app.on_event("shutdown")
async def shutdown_event():
    log_banner(logger, "RPF Planner API Shutting Down")


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host=os.environ.get("HOST", "0.0.0.0"), port=int(os.environ.get("PORT", "8080")))
