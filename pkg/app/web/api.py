import logging
import threading
from typing import Any, Optional

from fastapi import APIRouter
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, ValidationError
from sqlalchemy.exc import SQLAlchemyError

from app.core.dirichlet import CountTable
from app.core.index_core import ProbTable, asymptotic_cov, phi_vector
from app.core.monitor import (
    Decision,
    DesignConfig,
    FinalAnalysis,
    PosteriorCache,
    PredictiveResult,
    final_analysis,
    interim_decision,
    predictive_probability,
)
from app.errors import ConfigError, PhiMonitorError, WrongSampleSize
from app.storage import list_looks, record_look

logger = logging.getLogger("phi_monitor.api")

router = APIRouter(prefix="/monitor", tags=["monitor"])

# Сколько дизайнов держим в памяти с посчитанными B
MAX_CACHED_DESIGNS = 8

_caches: dict[tuple, PosteriorCache] = {}
_caches_lock = threading.Lock()


class IndexRequest(BaseModel):
    p: list[float] = Field(..., min_length=4, max_length=4)


class PPRequest(BaseModel):
    design: dict[str, Any]
    x: list[int] = Field(..., min_length=4, max_length=4)
    detail: bool = False


class LookRequest(BaseModel):
    design: dict[str, Any]
    x: list[int] = Field(..., min_length=4, max_length=4)
    note: Optional[str] = None


def error_response(e: PhiMonitorError) -> JSONResponse:
    return JSONResponse(
        status_code=422,
        content={"status": "error", "reason": e.reason, "detail": str(e)},
    )


def _parse_design(data: dict[str, Any]) -> DesignConfig:
    try:
        return DesignConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Design validation error: {e}") from e


def _posterior_cache(cfg: DesignConfig) -> PosteriorCache:
    key = cfg.posterior_key()
    with _caches_lock:
        cache = _caches.get(key)
        if cache is None:
            if len(_caches) >= MAX_CACHED_DESIGNS:
                _caches.clear()
            cache = _caches[key] = PosteriorCache(cfg)
    return cache


def _evaluate(cfg: DesignConfig, x: CountTable) -> tuple[PredictiveResult, Decision]:
    result = predictive_probability(cfg, x, _posterior_cache(cfg))
    return result, interim_decision(cfg, result.pp)


def _finalize(cfg: DesignConfig, x: CountTable) -> FinalAnalysis:
    return final_analysis(cfg, x, _posterior_cache(cfg))


@router.get("/health")
async def health() -> dict[str, str]:
    return {"status": "ok"}


@router.post("/index")
async def index(req: IndexRequest):
    """
    Φ_eff, Φ_tox и асимптотическая ковариация Σ для таблицы вероятностей.
    Σ возвращается только для таблиц без нулевых ячеек.
    """
    try:
        p = ProbTable.of(req.p)
        v = phi_vector(p)
        cov = asymptotic_cov(p) if p.strictly_positive else None
    except PhiMonitorError as e:
        logger.warning("index: invalid table %s: %s", req.p, e)
        return error_response(e)

    return {
        "status": "ok",
        "phi_eff": v.phi_eff,
        "phi_tox": v.phi_tox,
        "cov": None if cov is None else {"s11": cov.s11, "s12": cov.s12, "s22": cov.s22},
    }


@router.post("/pp")
async def pp(req: PPRequest):
    """
    PP для текущих данных x и решение по порогам дизайна.
    С detail=true возвращаются и строки перебора исходов.
    При n = N_max промежуточного решения нет: возвращается финальный
    анализ (claim и B).
    """
    try:
        cfg = _parse_design(req.design)
        x = CountTable.of(req.x)
        if x.total() == cfg.n_max:
            final = await run_in_threadpool(_finalize, cfg, x)
        else:
            result, decision = await run_in_threadpool(_evaluate, cfg, x)
    except PhiMonitorError as e:
        logger.warning("pp: rejected request x=%s: %s", req.x, e)
        return error_response(e)

    if x.total() == cfg.n_max:
        return {"status": "ok", "final": True, "claim": final.claim.value, "b": final.b}

    body: dict[str, Any] = {
        "status": "ok",
        "final": False,
        "pp": result.pp,
        "decision": decision.kind.value,
    }
    if req.detail:
        body["rows"] = [row.as_dict() for row in result.rows]
    return body


@router.post("/trials/{code}/looks")
async def add_look(code: str, req: LookRequest):
    """
    Промежуточный анализ реального испытания.
    Логика:
    - при n = N_max отказываем: это финальный анализ, а не промежуточный;
    - считаем PP и решение;
    - пишем InterimLook;
    - возвращаем решение.
    """
    try:
        cfg = _parse_design(req.design)
        x = CountTable.of(req.x)
        if x.total() == cfg.n_max:
            raise WrongSampleSize(
                f"n={cfg.n_max} is the final analysis, not an interim look; use POST /monitor/pp"
            )
        _, decision = await run_in_threadpool(_evaluate, cfg, x)
    except PhiMonitorError as e:
        logger.warning("add_look: trial=%s rejected: %s", code, e)
        return error_response(e)

    try:
        look = await record_look(code, x, decision, cfg.method, note=req.note)
    except SQLAlchemyError:
        return {"status": "error", "reason": "db_error"}

    return {
        "status": "ok",
        "id": look.id,
        "n": look.n,
        "pp": look.pp,
        "decision": look.decision,
    }


@router.get("/trials/{code}/looks")
async def get_looks(code: str):
    try:
        looks = await list_looks(code)
    except SQLAlchemyError as e:  # noqa: BLE001
        logger.exception("get_looks DB error: %s", e)
        return {"status": "error", "reason": "db_error"}

    return {
        "status": "ok",
        "trial_code": code,
        "looks": [
            {
                "n": look.n,
                "x": [look.x11, look.x12, look.x21, look.x22],
                "pp": look.pp,
                "decision": look.decision,
                "method": look.method,
                "note": look.note,
            }
            for look in looks
        ],
    }
