"""Request/response models for the verification service.

The response schema deliberately has no slot for the true count, the
full-data indicator, or any per-partition estimate; only the noised count
and post-processed posterior summaries can leave the server.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SampleRecord(BaseModel):
    id: int
    x: float
    pi: float = Field(gt=0, le=1)
    w: float


class DatasetRegistration(BaseModel):
    records: list[SampleRecord]
    n: int = Field(ge=1)
    N: int = Field(ge=1)
    total_epsilon: float = Field(gt=0)


class RegisterResponse(BaseModel):
    dataset_id: str


class ToleranceBody(BaseModel):
    kind: Literal["sd_multiple", "proportional"]
    alpha: float = Field(gt=0)
    mode: Literal["fixed", "adjusted"]
    gamma: Optional[float] = Field(default=None, ge=1)


class GibbsBody(BaseModel):
    iters: int = Field(gt=0)
    burnin: int = Field(ge=0)


class AnalysisQuery(BaseModel):
    variable: str
    estimand: Literal["total", "mean"]
    estimate0: float
    sd0: float = Field(ge=0)
    tolerance: ToleranceBody
    M: int = Field(ge=2)
    epsilon: float = Field(gt=0)
    gibbs: Optional[GibbsBody] = None
    seed: Optional[int] = Field(default=None, ge=0)
    include_draws: bool = False


class PosteriorSummary(BaseModel):
    median: float
    q05: float
    q25: float
    q75: float
    q95: float
    iters: int
    burnin: int
    draws: Optional[list[float]] = None


class QueryResponse(BaseModel):
    s_noisy: float
    posterior: PosteriorSummary
    epsilon_spent: float
    epsilon_remaining: float


class BudgetLogEntry(BaseModel):
    query_id: str
    epsilon: float
    timestamp: str


class BudgetResponse(BaseModel):
    total: float
    spent: float
    remaining: float
    query_log: list[BudgetLogEntry]


class ErrorBody(BaseModel):
    error_code: str
    message: str
