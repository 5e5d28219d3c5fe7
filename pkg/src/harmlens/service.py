"""HTTP service exposing the filtering engine to search front-ends."""

from __future__ import annotations

import logging

from fastapi import FastAPI, HTTPException

from harmlens import __version__
from harmlens.classifier import DTModel, NBModel, predict
from harmlens.errors import ContractError
from harmlens.intervene import DecisionLog, FilterPolicy, decide
from harmlens.prevalence import corrected_share
from harmlens.schemas import (
    BatchDecideRequest,
    BatchDecideResponse,
    ClassifyRequest,
    ClassifyResponse,
    CorrectedShareRequest,
    CorrectedShareResponse,
    DecideRequest,
    DecideResponse,
    Health,
    Hit,
    MatchRequest,
    MatchResponse,
    PolicyInfo,
)

logger = logging.getLogger(__name__)


def create_app(policy: FilterPolicy, model: NBModel | DTModel | None = None) -> FastAPI:
    app = FastAPI(title="harmlens", version=__version__)
    decisions = DecisionLog()
    app.state.policy = policy
    app.state.decisions = decisions

    def _decide(req: DecideRequest) -> DecideResponse:
        d = decide(req.query, policy)
        decisions.record(d.action.value)
        return DecideResponse(**d.to_wire(req.id))

    @app.get("/healthz", response_model=Health)
    def health():
        return Health(version=__version__)

    @app.get("/v1/policy", response_model=PolicyInfo)
    def policy_info():
        return PolicyInfo(
            mode=policy.mode.value,
            categories={c: m.name for c, m in policy.matchers.items()},
            classifier_loaded=model is not None,
        )

    @app.post("/v1/decide", response_model=DecideResponse, response_model_exclude_none=True)
    def decide_one(req: DecideRequest):
        return _decide(req)

    @app.post("/v1/decide/batch", response_model=BatchDecideResponse, response_model_exclude_none=True)
    def decide_batch(req: BatchDecideRequest):
        return BatchDecideResponse(responses=[_decide(r) for r in req.requests])

    @app.get("/v1/stats")
    def stats():
        return dict(sorted(decisions.counts.items()))

    @app.post("/v1/match", response_model=MatchResponse)
    def match(req: MatchRequest):
        matcher = policy.matchers.get(req.category)
        if matcher is None:
            raise HTTPException(404, f"no lexicon loaded for category {req.category!r}")
        res = matcher.match_text(req.text)
        return MatchResponse(
            category=req.category, matched=res.matched, scanned_length=res.scanned_length,
            hits=[Hit(pattern=p, offset=o) for p, o in res.hits],
        )

    @app.post("/v1/classify", response_model=ClassifyResponse)
    def classify(req: ClassifyRequest):
        if model is None:
            raise HTTPException(404, "no classifier model loaded")
        label, score = predict(model, req.text)
        return ClassifyResponse(label=label, score=score)

    @app.post("/v1/corrected-share", response_model=CorrectedShareResponse)
    def correct(req: CorrectedShareRequest):
        try:
            value = corrected_share(req.matches, req.unique_sites, req.fp_rate, req.fn_rate)
        except ContractError as exc:
            raise HTTPException(422, str(exc)) from exc
        return CorrectedShareResponse(corrected_share=value)

    return app
