"""HTTP reward endpoint for external RL trainers.

Everything goes through the same ``total_reward`` call the CLI uses; the app
only decodes inputs and holds a read-only record index.
"""

from __future__ import annotations

import base64
import binascii

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from tubetopo.config import RunConfig
from tubetopo.datakit import MaskRecord, RecordStore, mask_from_png, parse_anomalies
from tubetopo.errors import DataError
from tubetopo.reward import grpo_advantages, total_reward
from tubetopo.service.schemas import (
    AdvantagesRequest,
    AdvantagesResponse,
    ErrorResponse,
    HealthResponse,
    RewardBatchRequest,
    RewardBatchResponse,
    RewardRequest,
    RewardResponse,
)


class ServiceError(Exception):
    def __init__(self, status: int, reason: str, detail=None):
        super().__init__(reason)
        self.status, self.reason, self.detail = status, reason, detail


def _decode_png(b64: str, field: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError):
        raise ServiceError(400, "invalid_base64", {"field": field}) from None
    try:
        return mask_from_png(raw)
    except DataError as exc:
        raise ServiceError(400, "invalid_mask", {"field": field, "message": str(exc)}) from None


def _inline_record(req: RewardRequest) -> MaskRecord:
    clean = _decode_png(req.clean_png, "clean_png")
    corrupt = _decode_png(req.corrupt_png, "corrupt_png")
    if clean.shape != corrupt.shape:
        raise ServiceError(400, "shape_mismatch", {"clean": clean.shape, "corrupt": corrupt.shape})
    try:
        gt = parse_anomalies([a.model_dump() for a in req.annotations])
    except DataError as exc:
        raise ServiceError(400, "invalid_annotations", {"message": str(exc)}) from None
    return MaskRecord("", clean, corrupt, tuple(gt))


def create_app(records: str | None = None, config: RunConfig | None = None) -> FastAPI:
    """Build the app; ``records`` is a JSONL file whose ids become addressable."""
    config = config or RunConfig()
    store = RecordStore.open(records) if records else RecordStore([], ".")
    app = FastAPI(title="tubetopo reward service", version="0.1.0")
    app.state.store = store
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError):
        detail = [{"loc": list(e["loc"]), "msg": e["msg"], "type": e["type"]} for e in exc.errors()]
        return JSONResponse(status_code=400, content={"error": "invalid_request", "detail": detail})

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"error": exc.reason, "detail": exc.detail})

    def _record(req: RewardRequest) -> MaskRecord:
        if req.id is None:
            return _inline_record(req)
        try:
            return store.get(req.id)
        except KeyError:
            raise ServiceError(404, "unknown_id", {"id": req.id}) from None
        except (DataError, OSError) as exc:
            raise ServiceError(500, "record_unreadable", {"id": req.id, "message": str(exc)}) from None

    def _score(req: RewardRequest) -> dict:
        return total_reward(_record(req), req.response, config.reward).to_dict()

    errors = {400: {"model": ErrorResponse}, 404: {"model": ErrorResponse}}

    @app.get("/health", response_model=HealthResponse)
    def health():
        return {"status": "ok", "records": len(store), "reward_config": config.reward.to_dict()}

    @app.post("/v1/reward", response_model=RewardResponse, responses=errors)
    def reward(req: RewardRequest):
        return _score(req)

    @app.post("/v1/reward/batch", response_model=RewardBatchResponse, responses=errors)
    def reward_batch(req: RewardBatchRequest):
        return {"results": [_score(item) for item in req.items]}

    @app.post("/v1/advantages", response_model=AdvantagesResponse, responses={400: {"model": ErrorResponse}})
    def advantages(req: AdvantagesRequest):
        eps = config.grpo.eps_std if req.eps_std is None else req.eps_std
        r = np.asarray(req.rewards, dtype=float)
        if not np.all(np.isfinite(r)):
            raise ServiceError(400, "non_finite_reward")
        adv = grpo_advantages(r, eps)
        return {"advantages": adv.tolist(), "mean": float(r.mean()), "std": float(r.std())}

    return app
