"""Request and response bodies of the reward service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AnnotationIn(_Strict):
    Position: list[int] = Field(min_length=4, max_length=4)
    ErrorType: str


class RewardRequest(_Strict):
    """Score ``response`` against a preloaded sample (``id``) or inline masks.

    Inline masks are base64 PNG bytes; ``annotations`` then carries the
    ground truth (an empty list for a negative sample).
    """

    response: str
    id: Optional[str] = None
    clean_png: Optional[str] = None
    corrupt_png: Optional[str] = None
    annotations: Optional[list[AnnotationIn]] = None

    @model_validator(mode="after")
    def _one_source(self):
        inline = (self.clean_png, self.corrupt_png, self.annotations)
        if self.id is not None:
            if any(v is not None for v in inline):
                raise ValueError("give either id or inline masks, not both")
        elif any(v is None for v in inline):
            raise ValueError("give id, or all of clean_png, corrupt_png and annotations")
        return self


class RewardBatchRequest(_Strict):
    items: list[RewardRequest] = Field(min_length=1, max_length=1024)


class PairOut(BaseModel):
    gt: int
    pred: int
    iou: float


class MatchOut(BaseModel):
    pairs: list[PairOut]
    false_positives: list[int]
    false_negatives: list[int]


class RewardResponse(BaseModel):
    r_fmt: int
    r_det: float
    r_loc: float
    r_type: float
    r_acc: float
    r_topo: float
    r_total: float
    negative: bool
    n_gt: int
    n_pred: int
    parse_error: Optional[str]
    match: MatchOut


class RewardBatchResponse(BaseModel):
    results: list[RewardResponse]


class AdvantagesRequest(_Strict):
    rewards: list[float] = Field(min_length=2)
    eps_std: Optional[float] = Field(default=None, ge=0)


class AdvantagesResponse(BaseModel):
    advantages: list[float]
    mean: float
    std: float


class HealthResponse(BaseModel):
    status: str
    records: int
    reward_config: dict[str, Any]


class ErrorResponse(BaseModel):
    error: str
    detail: Any = None
