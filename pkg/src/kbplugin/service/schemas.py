"""Pydantic request/response models for the engine service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class KBRequest(BaseModel):
    kb: str = Field(..., description="Path to a KB file on the service host")


class ValidateResponse(BaseModel):
    ok: bool
    stats: dict
    warnings: list[str] = []


class StatsResponse(BaseModel):
    concepts: int
    relations: int
    relations_with_reserved: int
    entities: int
    instance_of: int
    subclass_of: int
    relational: int


class ExecRequest(KBRequest):
    program: str


class EnumerateRequest(KBRequest):
    prefix: str = ""
    topic_entities: list[str] = []
    topic_concepts: list[str] = []


class EnumerateResponse(BaseModel):
    candidates: list[str]


class InduceRequest(KBRequest):
    question: str = ""
    topic_entities: list[str] = []
    topic_concepts: list[str] = []
    scorer: Optional[str] = Field(None, description="Base URL of a remote scorer")
    mock_oracle: Optional[str] = Field(None, description="Gold program for the oracle scorer")
    beam: int = 5
    max_steps: int = 20


class InduceResult(BaseModel):
    program: str
    denotation: dict
    score: float


class InduceResponse(BaseModel):
    results: list[InduceResult]


class EvalRequest(KBRequest):
    dataset: str
    scorer: str = Field(..., description="Remote scorer URL, or 'oracle' to score from gold programs")
    metric: str = "f1"
    beam: int = 5
    max_steps: int = 20
    parallel: int = 1
    timeout: float = 30.0


class AugmentRequest(KBRequest):
    data: str
    n: int = 16
    seed: int = 0
    out: str


class SchemaDataRequest(KBRequest):
    k: int
    out: str


class ErrorResponse(BaseModel):
    error: str
    message: str
