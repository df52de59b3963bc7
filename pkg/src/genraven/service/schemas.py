"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

Grid = list[list[list[int]]]


def _check_grid(grid: Grid) -> Grid:
    if len(grid) != 3:
        raise ValueError("grid must have 3 channels")
    for ch in grid:
        if len(ch) != 9:
            raise ValueError("each channel must have 9 panels")
        for panel in ch:
            if len(panel) != 9:
                raise ValueError("each panel must have 9 slots")
            for v in panel:
                if not -128 <= v <= 127:
                    raise ValueError(f"grid value {v} outside [-128, 127]")
    return grid


class SampleModel(BaseModel):
    """One sample: a 3x9x9 integer grid plus an optional rule label."""

    grid: Grid
    rule: Optional[str] = None

    @field_validator("grid")
    @classmethod
    def _grid_shape(cls, v: Grid) -> Grid:
        return _check_grid(v)


class RuleInfo(BaseModel):
    name: str
    relation: str
    dimension: str
    index: int


class RulesResponse(BaseModel):
    rules: list[RuleInfo]
    digest: str


class AnalyzeRequest(BaseModel):
    grid: Grid

    @field_validator("grid")
    @classmethod
    def _grid_shape(cls, v: Grid) -> Grid:
        return _check_grid(v)


class StructureInfo(BaseModel):
    fully_valid: bool
    malformed_slots: list[tuple[int, int]]


class AnalyzeResponse(BaseModel):
    per_row_rules: list[list[str]]
    shared_rules: list[str]
    valid_rows: list[bool]
    c2: bool
    c3: bool
    structure: StructureInfo


class GenerateRequest(BaseModel):
    seed: int = 0
    n_per_rule: int = Field(ge=1)
    rules: Optional[list[str]] = None  # None = full inventory
    holdout: Optional[list[str]] = None  # None = default set; [] = none
    split: Literal["train", "test"] = "train"


class GenerateResponse(BaseModel):
    samples: list[SampleModel]
    manifest: dict


class ConsistencyRequest(BaseModel):
    samples: list[SampleModel]


class CompleteRequest(BaseModel):
    """Complete the ninth panel.  The grid's ninth panel is ignored."""

    grid: Grid
    strategy: Literal["first", "random"] = "first"
    seed: int = 0

    @field_validator("grid")
    @classmethod
    def _grid_shape(cls, v: Grid) -> Grid:
        return _check_grid(v)


class CompleteResponse(BaseModel):
    grid: Grid
    rule: str
    candidates: list[str]


class CompletionEvalRequest(BaseModel):
    tests: list[SampleModel]
    completions: list[SampleModel]
    holdout: Optional[list[str]] = None


class MemSource(BaseModel):
    """Inline samples or a server-local dataset path (exactly one)."""

    samples: Optional[list[SampleModel]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self) -> "MemSource":
        if (self.samples is None) == (self.path is None):
            raise ValueError("provide exactly one of samples/path")
        return self


class MemRequest(BaseModel):
    generated: MemSource
    train: MemSource
    control: Optional[MemSource] = None


class HealthResponse(BaseModel):
    status: str
    version: str
