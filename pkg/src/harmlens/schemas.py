"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class DecideRequest(BaseModel):
    id: str
    query: str


class DecideResponse(BaseModel):
    id: Optional[str]
    action: Literal["Allow", "Block", "RedirectHelp", "SurveyPrompt", "Error"]
    matched_categories: list[str] = []
    url: Optional[str] = None
    help_url: Optional[str] = None


class BatchDecideRequest(BaseModel):
    requests: list[DecideRequest]


class BatchDecideResponse(BaseModel):
    responses: list[DecideResponse]


class MatchRequest(BaseModel):
    text: str
    category: str


class Hit(BaseModel):
    pattern: str
    offset: int


class MatchResponse(BaseModel):
    category: str
    matched: bool
    hits: list[Hit]
    scanned_length: int


class ClassifyRequest(BaseModel):
    text: str


class ClassifyResponse(BaseModel):
    label: Literal["positive", "negative"]
    score: float


class CorrectedShareRequest(BaseModel):
    matches: int = Field(ge=0)
    unique_sites: int = Field(gt=0)
    fp_rate: float = Field(ge=0.0, le=1.0)
    fn_rate: float = Field(ge=0.0, le=1.0)


class CorrectedShareResponse(BaseModel):
    corrected_share: float


class PolicyInfo(BaseModel):
    mode: Literal["targeted", "strict"]
    categories: dict[str, str]
    classifier_loaded: bool


class Health(BaseModel):
    status: str = "ok"
    version: str
