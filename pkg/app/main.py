import logging
from typing import Optional

from fastapi import APIRouter, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .config import Settings, configure_logging, load_settings
from .errors import DrugCombError
from .handlers import handle_evaluate, handle_group_score, handle_score
from .models import (
    EvaluateRequest,
    EvaluateResponse,
    GroupScoreRequest,
    GroupScoreResponse,
    HealthResponse,
    ScoreRequest,
    ScoreResponse,
)

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/v1")


def _settings(request: Request) -> Settings:
    return request.app.state.settings


def _error_body(code: str, message: str) -> dict:
    return {"detail": {"error": code, "message": message}}


@router.get("/health", response_model=HealthResponse)
async def health():
    return HealthResponse(status="ok", version=__version__)


@router.get("/config")
async def get_config(request: Request):
    return _settings(request).public_dict()


@router.post("/score", response_model=ScoreResponse)
def score(payload: ScoreRequest, request: Request):
    logger.debug("score request: mode=%s gold=%d", payload.mode, len(payload.gold))
    return handle_score(payload, _settings(request))


@router.post("/score/group", response_model=GroupScoreResponse)
def score_group(payload: GroupScoreRequest, request: Request):
    logger.debug(
        "group score request: mode=%s responses=%d", payload.mode, len(payload.responses)
    )
    return handle_group_score(payload, _settings(request))


@router.post("/evaluate", response_model=EvaluateResponse)
def evaluate(payload: EvaluateRequest, request: Request):
    logger.debug(
        "evaluate request: predictions=%d gold=%d", len(payload.predictions), len(payload.gold)
    )
    return handle_evaluate(payload, _settings(request))


def create_app(settings: Optional[Settings] = None) -> FastAPI:
    settings = settings or load_settings()
    configure_logging(settings.log_level)

    app = FastAPI(
        title="Drug Combination Extraction",
        description="Parsing, scoring, rewards and evaluation for n-ary drug combination extraction",
        version=__version__,
    )
    app.state.settings = settings

    @app.exception_handler(DrugCombError)
    async def domain_error(request: Request, exc: DrugCombError):
        return JSONResponse(status_code=400, content=_error_body(exc.code, str(exc)))

    @app.exception_handler(RequestValidationError)
    async def schema_error(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        first = errors[0] if errors else {}
        location = ".".join(str(part) for part in first.get("loc", ()))
        message = f"{location}: {first.get('msg', 'invalid request')}" if location else "invalid request"
        return JSONResponse(status_code=400, content=_error_body("SchemaViolation", message))

    app.include_router(router)
    return app


app = create_app()
