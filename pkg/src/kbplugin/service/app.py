"""FastAPI service wrapping the engine.

KBs are loaded once per file (cached on path + mtime + size) and shared
across requests; everything downstream of a load is read-only. Batch
endpoints (augment, schema-data) write to paths on the service host.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import augment as aug
from .. import decoder as dec
from .. import evaluate as ev
from .. import kopl
from .. import schema_data as sd
from ..errors import KBPluginError
from ..kb import KnowledgeBase, load_kb, stats
from . import schemas as sch


class KBCache:
    """Thread-safe KB loader keyed on (resolved path, mtime, size)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict = {}

    def get(self, path: str) -> KnowledgeBase:
        resolved = Path(path).resolve()
        stat = resolved.stat()
        key = (str(resolved), stat.st_mtime_ns, stat.st_size)
        with self._lock:
            kb = self._entries.get(key)
        if kb is None:
            kb = load_kb(resolved)
            with self._lock:
                self._entries[key] = kb
        return kb


def _topics(entities, concepts) -> dec.TopicSpec:
    return dec.TopicSpec(topic_entities=tuple(entities), topic_concepts=tuple(concepts))


def _scorer_for(req: sch.InduceRequest) -> dec.Scorer:
    if req.mock_oracle:
        return dec.oracle_scorer(kopl.parse_program(req.mock_oracle))
    if req.scorer:
        return dec.remote_scorer(req.scorer)
    raise KBPluginError("either scorer or mock_oracle is required")


def create_app() -> FastAPI:
    app = FastAPI(title="kbplugin", version="0.1.0")
    cache = KBCache()

    @app.exception_handler(KBPluginError)
    async def engine_error(request: Request, exc: KBPluginError):
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(FileNotFoundError)
    async def missing_file(request: Request, exc: FileNotFoundError):
        return JSONResponse(
            status_code=400,
            content={"error": "FileNotFoundError", "message": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def bad_value(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"error": "ValueError", "message": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": app.version}

    @app.post("/validate", response_model=sch.ValidateResponse)
    def validate(req: sch.KBRequest):
        kb = cache.get(req.kb)
        return sch.ValidateResponse(ok=True, stats=stats(kb), warnings=list(kb.load_warnings))

    @app.post("/stats", response_model=sch.StatsResponse)
    def kb_stats(req: sch.KBRequest):
        return sch.StatsResponse(**stats(cache.get(req.kb)))

    @app.post("/exec")
    def exec_program(req: sch.ExecRequest):
        kb = cache.get(req.kb)
        denotation = kopl.execute(kb, kopl.parse_program(req.program))
        return kopl.denotation_to_json(kb, denotation)

    @app.post("/enumerate", response_model=sch.EnumerateResponse)
    def enumerate_chunks(req: sch.EnumerateRequest):
        kb = cache.get(req.kb)
        program = kopl.parse_program(req.prefix) if req.prefix.strip() else kopl.Program()
        hyp = dec.PartialHypothesis(
            program=program, state=kopl.execute_prefix(kb, program)
        )
        topics = _topics(req.topic_entities, req.topic_concepts)
        candidates = dec.enumerate_candidates(kb, hyp, topics)
        return sch.EnumerateResponse(candidates=[c.text() for c in candidates])

    @app.post("/induce", response_model=sch.InduceResponse)
    def induce(req: sch.InduceRequest):
        kb = cache.get(req.kb)
        results = dec.beam_search(
            kb, req.question, _topics(req.topic_entities, req.topic_concepts),
            _scorer_for(req), beam=req.beam, max_steps=req.max_steps,
        )
        return sch.InduceResponse(results=[
            sch.InduceResult(
                program=r.program.text(),
                denotation=kopl.denotation_to_json(kb, r.denotation),
                score=r.score,
            )
            for r in results
        ])

    @app.post("/eval")
    def eval_dataset(req: sch.EvalRequest):
        kb = cache.get(req.kb)
        records = ev.load_dataset(req.dataset)
        if req.scorer == "oracle":
            def factory(record: ev.EvalRecord) -> dec.Scorer:
                if not record.gold_program:
                    raise KBPluginError(
                        f"record {record.question!r} has no gold_program for the oracle scorer"
                    )
                return dec.oracle_scorer(kopl.parse_program(record.gold_program))
        else:
            url = req.scorer
            def factory(record: ev.EvalRecord) -> dec.Scorer:
                return dec.remote_scorer(url)
        return ev.evaluate(
            kb, records, factory, metric=req.metric, beam=req.beam,
            max_steps=req.max_steps, parallel=req.parallel, timeout=req.timeout,
        )

    @app.post("/augment")
    def augment_data(req: sch.AugmentRequest):
        kb = cache.get(req.kb)
        data = aug.load_pairs(req.data)
        return aug.augment_dataset(kb, data, n=req.n, seed=req.seed, out_dir=req.out)

    @app.post("/schema-data")
    def schema_data(req: sch.SchemaDataRequest):
        kb = cache.get(req.kb)
        cfg = sd.SamplingConfig(k=req.k)
        pairs = sd.build_pairs(kb, cfg)
        return sd.emit_corpus(pairs, req.out, kb=kb)

    return app


app = create_app()
