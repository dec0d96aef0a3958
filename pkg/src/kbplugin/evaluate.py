"""Evaluation harness: run induction over a dataset and score answers.

Answers are compared as sets of rendered name strings (whitespace
collapsed, case preserved). Per-record failures score zero and never
abort a run.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from . import decoder as dec
from . import kopl
from .errors import KBPluginError
from .kb import KnowledgeBase

logger = logging.getLogger(__name__)

METRICS = ("f1", "hit1", "accuracy")


@dataclass(frozen=True)
class EvalRecord:
    question: str
    topic_entities: tuple[str, ...] = ()
    gold_answers: tuple[str, ...] = ()
    gold_program: Optional[str] = None
    topic_concepts: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.gold_answers and not self.gold_program:
            raise KBPluginError(
                f"record {self.question!r} needs gold_answers or a gold_program"
            )


def load_dataset(path) -> list[EvalRecord]:
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        raw = json.loads(line)
        try:
            records.append(EvalRecord(
                question=raw["question"],
                topic_entities=tuple(raw.get("topic_entities", ())),
                gold_answers=tuple(raw.get("gold_answers", ())),
                gold_program=raw.get("gold_program"),
                topic_concepts=tuple(raw.get("topic_concepts", ())),
            ))
        except (KeyError, TypeError) as exc:
            raise KBPluginError(f"dataset line {i} is malformed: {exc}") from exc
    return records


def normalize(text: str) -> str:
    return " ".join(str(text).split())


def f1_score(predicted: set[str], gold: set[str]) -> float:
    """Set F1; zero when either side is empty."""
    if not predicted or not gold:
        return 0.0
    overlap = len(predicted & gold)
    if overlap == 0:
        return 0.0
    precision = overlap / len(predicted)
    recall = overlap / len(gold)
    return 2 * precision * recall / (precision + recall)


def hit_at_1(predicted: set[str], gold: set[str]) -> float:
    return 1.0 if predicted & gold else 0.0


def accuracy(predicted: set[str], gold: set[str]) -> float:
    return 1.0 if predicted and predicted == gold else 0.0


_METRIC_FUNCS: dict[str, Callable[[set, set], float]] = {
    "f1": f1_score,
    "hit1": hit_at_1,
    "accuracy": accuracy,
}


def score_answers(predicted: set[str], gold: set[str]) -> dict[str, float]:
    return {name: fn(predicted, gold) for name, fn in _METRIC_FUNCS.items()}


def _gold_answer_set(kb: KnowledgeBase, record: EvalRecord) -> set[str]:
    if record.gold_answers:
        return {normalize(a) for a in record.gold_answers}
    gold = kopl.parse_program(record.gold_program)
    return {normalize(a) for a in kopl.render_denotation(kb, kopl.execute(kb, gold))}


def evaluate(
    kb: KnowledgeBase,
    records: list[EvalRecord],
    scorer_factory: Callable[[EvalRecord], dec.Scorer],
    metric: str = "f1",
    beam: int = dec.DEFAULT_BEAM,
    max_steps: int = dec.DEFAULT_MAX_STEPS,
    parallel: int = 1,
    timeout: float = 30.0,
) -> dict:
    """Induce a program per record, execute it, and score the answers.

    Returns a report with one entry per record (input order) and
    aggregate means for all three metrics.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")

    def run_one(record: EvalRecord) -> dict:
        started = time.monotonic()
        entry = {
            "question": record.question,
            "program": None,
            "answers": [],
            "error": None,
        }
        try:
            topics = dec.TopicSpec(
                topic_entities=record.topic_entities,
                topic_concepts=record.topic_concepts,
            )
            results = dec.beam_search(
                kb, record.question, topics, scorer_factory(record),
                beam=beam, max_steps=max_steps,
            )
            best = results[0]
            predicted = {
                normalize(a) for a in kopl.render_denotation(kb, best.denotation)
            }
            entry["program"] = best.program.text()
            entry["answers"] = sorted(predicted)
            entry["score"] = best.score
        except KBPluginError as exc:
            logger.warning("record %r failed: %s", record.question, exc)
            entry["error"] = str(exc)
            predicted = set()
        gold = _gold_answer_set(kb, record)
        entry["gold"] = sorted(gold)
        entry.update(score_answers(predicted, gold))
        entry["seconds"] = round(time.monotonic() - started, 6)
        return entry

    started = time.monotonic()
    # one pool either way; per-record timeouts guard against scorer stalls
    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        futures = [pool.submit(run_one, r) for r in records]
        entries = []
        for record, fut in zip(records, futures):
            try:
                entries.append(fut.result(timeout=timeout))
            except Exception as exc:  # timeout or unexpected failure
                logger.warning("record %r timed out/failed: %s", record.question, exc)
                gold = sorted(_gold_answer_set(kb, record))
                entries.append({
                    "question": record.question,
                    "program": None,
                    "answers": [],
                    "gold": gold,
                    "error": str(exc) or "timeout",
                    "f1": 0.0, "hit1": 0.0, "accuracy": 0.0,
                    "seconds": timeout,
                })

    count = max(len(entries), 1)
    aggregate = {
        name: sum(e[name] for e in entries) / count for name in METRICS
    }
    return {
        "metric": metric,
        "records": entries,
        "aggregate": aggregate,
        "headline": aggregate[metric] if entries else 0.0,
        "runtime": {
            "total_seconds": round(time.monotonic() - started, 6),
            "records": len(entries),
        },
    }
