"""JSON-over-HTTP verification service.

Endpoints:
  POST /datasets                register a confidential sample and budget
  POST /datasets/{id}/verify    run one private verification query
  GET  /datasets/{id}/budget    budget status and query log

Budget is debited before the verification computes, and the response never
carries unprivatized confidential statistics.
"""

from __future__ import annotations

import secrets

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..posterior import gibbs_posterior
from ..survey import EstimandKind, SurveySample
from ..verification import IntervalMode, ToleranceKind, ToleranceSpec, verify
from .config import ServerConfig
from .ledger import BudgetExceededError, DatasetStore, UnknownDatasetError
from .schemas import (
    AnalysisQuery,
    BudgetResponse,
    DatasetRegistration,
    PosteriorSummary,
    QueryResponse,
    RegisterResponse,
)

__all__ = ["create_app"]


class ApiError(Exception):
    def __init__(self, status: int, error_code: str, message: str):
        self.status = status
        self.error_code = error_code
        self.message = message


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    store = DatasetStore(config.journal)
    app = FastAPI(title="simverify verification server")
    app.state.config = config
    app.state.store = store

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error_code": exc.error_code, "message": exc.message},
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error_code": "INVALID_QUERY", "message": str(exc.errors())},
        )

    @app.post("/datasets", status_code=201, response_model=RegisterResponse)
    def register_dataset(body: DatasetRegistration):
        if body.n != len(body.records):
            raise ApiError(422, "INVALID_DATASET", "n does not match record count")
        try:
            sample = SurveySample(
                ids=np.asarray([r.id for r in body.records], dtype=np.int64),
                x=np.asarray([r.x for r in body.records]),
                pi=np.asarray([r.pi for r in body.records]),
                N=body.N,
            )
        except ValueError as exc:
            raise ApiError(422, "INVALID_DATASET", str(exc))
        dataset_id = store.register(sample, body.total_epsilon)
        return RegisterResponse(dataset_id=dataset_id)

    @app.post(
        "/datasets/{dataset_id}/verify",
        response_model=QueryResponse,
        response_model_exclude_none=True,
    )
    def submit_query(dataset_id: str, body: AnalysisQuery):
        try:
            ds = store.get(dataset_id)
        except UnknownDatasetError as exc:
            raise ApiError(404, exc.error_code, str(exc))
        if body.variable not in ds.variables:
            raise ApiError(
                404, "UNKNOWN_VARIABLE", f"dataset has no variable {body.variable!r}"
            )
        if body.M > config.max_m:
            raise ApiError(422, "INVALID_QUERY", f"M exceeds server limit {config.max_m}")
        if body.M > ds.sample.n:
            raise ApiError(422, "INVALID_QUERY", "M exceeds the number of records")

        # Debit first: a failed computation must still count as disclosure.
        try:
            _, spent, remaining = store.debit(dataset_id, body.epsilon)
        except BudgetExceededError as exc:
            raise ApiError(402, exc.error_code, str(exc))

        seed = body.seed if body.seed is not None else secrets.randbits(63)
        verify_ss, gibbs_ss = np.random.SeedSequence(seed).spawn(2)
        spec = ToleranceSpec(
            kind=ToleranceKind(body.tolerance.kind),
            alpha=body.tolerance.alpha,
            mode=IntervalMode(body.tolerance.mode),
            gamma=body.tolerance.gamma,
        )
        result = verify(
            ds.sample,
            body.estimate0,
            body.sd0,
            EstimandKind(body.estimand),
            spec,
            body.M,
            body.epsilon,
            verify_ss,
        )
        iters = body.gibbs.iters if body.gibbs else config.gibbs_iters
        burnin = body.gibbs.burnin if body.gibbs else config.gibbs_burnin
        if iters <= burnin:
            raise ApiError(422, "INVALID_QUERY", "gibbs iters must exceed burnin")
        post = gibbs_posterior(
            result.s_noisy, body.M, body.epsilon, iters, burnin, gibbs_ss
        )
        summary = PosteriorSummary(
            **post.summary(),
            draws=[float(v) for v in post.draws] if body.include_draws else None,
        )
        return QueryResponse(
            s_noisy=result.s_noisy,
            posterior=summary,
            epsilon_spent=spent,
            epsilon_remaining=remaining,
        )

    @app.get("/datasets/{dataset_id}/budget", response_model=BudgetResponse)
    def budget_status(dataset_id: str):
        try:
            return BudgetResponse(**store.status(dataset_id))
        except UnknownDatasetError as exc:
            raise ApiError(404, exc.error_code, str(exc))

    return app
