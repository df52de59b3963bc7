"""HTTP service wrapping the core operations.

Request/response-shaped work only: rule inference, small on-demand
generation, consistency and completion scoring, memorization measurement.
Batch synthesis belongs to the CLI; inline generation is capped at
MAX_GENERATE_SAMPLES per request.

Run with: uvicorn genraven.service.app:app
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, gen, io, mem, metrics
from ..core import RuleId, decode_sample, encode_sample, rule_inventory, rule_named
from ..rng import unit_stream
from ..rules import applicable_rules, shared_rules
from ..solver import (
    AllInfeasibleError,
    CompletionContext,
    InvalidContextError,
    NoSharedRuleError,
    complete_panel,
)
from . import schemas

MAX_GENERATE_SAMPLES = 10_000


class RequestTooLargeError(ValueError):
    pass


def _decode_model(m: schemas.SampleModel):
    sample, _ = decode_sample(np.asarray(m.grid, dtype=np.int64))
    if m.rule is not None:
        sample = sample.with_label(rule_named(m.rule))
    return sample


def _samples_of(models: list[schemas.SampleModel]) -> list:
    return [_decode_model(m) for m in models]


def _grid_of(sample) -> list:
    return encode_sample(sample).tolist()


def _holdout_of(names: Optional[list[str]]) -> tuple[RuleId, ...]:
    if names is None:
        return gen.DEFAULT_HELD_OUT
    return tuple(rule_named(n) for n in names)


def _mem_source(src: schemas.MemSource) -> io.Dataset:
    if src.path is not None:
        return io.read_dataset(src.path)
    return io.Dataset.from_samples(_samples_of(src.samples or []))


def create_app() -> FastAPI:
    app = FastAPI(title="genraven", version=__version__)

    @app.exception_handler(KeyError)
    async def _key_error(request: Request, exc: KeyError):
        return JSONResponse(status_code=400, content={"detail": str(exc.args[0])})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        if isinstance(exc, RequestTooLargeError):
            return JSONResponse(status_code=413, content={"detail": str(exc)})
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(NoSharedRuleError)
    async def _no_shared(request: Request, exc: NoSharedRuleError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(AllInfeasibleError)
    async def _all_infeasible(request: Request, exc: AllInfeasibleError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(gen.GenerationError)
    async def _generation(request: Request, exc: gen.GenerationError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _not_found(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/rules", response_model=schemas.RulesResponse)
    def rules():
        return schemas.RulesResponse(
            rules=[
                schemas.RuleInfo(
                    name=r.name,
                    relation=r.relation.value,
                    dimension=r.dimension.value,
                    index=r.index,
                )
                for r in rule_inventory()
            ],
            digest=io.inventory_digest(),
        )

    @app.post("/samples/analyze", response_model=schemas.AnalyzeResponse)
    def analyze(req: schemas.AnalyzeRequest):
        sample, report = decode_sample(np.asarray(req.grid, dtype=np.int64))
        sh = shared_rules(sample)
        return schemas.AnalyzeResponse(
            per_row_rules=[list(applicable_rules(r).names()) for r in sample.rows],
            shared_rules=list(sh.all_shared.names()),
            valid_rows=list(sh.valid_rows),
            c2=sh.is_c2,
            c3=sh.is_c3,
            structure=schemas.StructureInfo(
                fully_valid=report.is_fully_valid,
                malformed_slots=list(report.malformed_slots()),
            ),
        )

    @app.post("/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        rules_ = (
            rule_inventory()
            if req.rules is None
            else tuple(rule_named(n) for n in req.rules)
        )
        cfg = gen.GenConfig(
            seed=req.seed,
            samples_per_rule=req.n_per_rule,
            rules=rules_,
            held_out=_holdout_of(req.holdout),
            split=req.split,
        )
        total = len(cfg.generated_rules) * cfg.samples_per_rule
        if total > MAX_GENERATE_SAMPLES:
            raise RequestTooLargeError(
                f"request would generate {total} samples; the inline cap is "
                f"{MAX_GENERATE_SAMPLES} - use the CLI for batch synthesis"
            )
        ds, manifest = gen.generate_dataset(cfg)
        samples = [
            schemas.SampleModel(grid=ds.grids[i].tolist(), rule=ds.label_at(i).name)
            for i in range(len(ds))
        ]
        return schemas.GenerateResponse(samples=samples, manifest=manifest.to_dict())

    @app.post("/eval/consistency")
    def eval_consistency(req: schemas.ConsistencyRequest):
        return metrics.consistency_report(_samples_of(req.samples)).to_dict()

    @app.post("/complete", response_model=schemas.CompleteResponse)
    def complete(req: schemas.CompleteRequest):
        sample, _ = decode_sample(np.asarray(req.grid, dtype=np.int64))
        ctx = CompletionContext.from_sample(sample)
        result = complete_panel(ctx, unit_stream(req.seed, "complete", 0), strategy=req.strategy)
        return schemas.CompleteResponse(
            grid=_grid_of(ctx.with_completion(result.panel)),
            rule=result.rule.name,
            candidates=list(result.candidates.names()),
        )

    @app.post("/eval/completion")
    def eval_completion(req: schemas.CompletionEvalRequest):
        tests = _samples_of(req.tests)
        completions = [_decode_model(m).rows[2].panels[2] for m in req.completions]
        report = metrics.completion_report(tests, completions, _holdout_of(req.holdout))
        return report.to_dict()

    @app.post("/mem")
    def mem_report(req: schemas.MemRequest):
        train = _mem_source(req.train)
        generated = _mem_source(req.generated)
        control = _mem_source(req.control) if req.control is not None else None
        index = mem.build_index(train)
        return mem.memorization_report(generated, index, control).to_dict()

    return app


app = create_app()
