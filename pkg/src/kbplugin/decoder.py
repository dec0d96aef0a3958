"""Constrained decoding: admissible-chunk enumeration and beam search.

At every step the decoder enumerates exactly the function chunks that
execute without error and leave a non-empty denotation on the affected
branch, then lets a pluggable scorer rank them. Search state is a pool of
partial hypotheses, each caching its branch stack so candidate trials
cost a single incremental call.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional, Protocol

import httpx

from . import kopl
from .errors import DecoderError, ExecutionError, ScorerError, SeedError
from .kb import KnowledgeBase
from .kopl import (
    CountValue,
    Denotation,
    EntitySet,
    ExecState,
    FunctionCall,
    Program,
    ValueSet,
    step_call,
)

logger = logging.getLogger(__name__)

DEFAULT_BEAM = 5
DEFAULT_MAX_STEPS = 20
DEFAULT_SCORE_FLOOR = -100.0

END_TEXT = "END"


@dataclass(frozen=True)
class TopicSpec:
    """Starting points for decoding. Topic concepts are consulted only
    when no topic entity is given."""

    topic_entities: tuple[str, ...] = ()
    topic_concepts: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.topic_entities and not self.topic_concepts:
            raise ValueError("a topic entity or topic concept is required")


@dataclass(frozen=True)
class CandidateChunk:
    """One admissible continuation: a chunk (or forced chunk pair for the
    no-topic-entity seed), or the END marker when ``calls`` is empty."""

    calls: tuple[FunctionCall, ...] = ()

    @property
    def is_end(self) -> bool:
        return not self.calls

    def text(self) -> str:
        if self.is_end:
            return END_TEXT
        return " ".join(c.text() for c in self.calls)


END = CandidateChunk()


@dataclass(frozen=True)
class PartialHypothesis:
    program: Program = Program()
    state: ExecState = ExecState()
    score: float = 0.0
    finished: bool = False


@dataclass(frozen=True)
class SearchResult:
    program: Program
    denotation: Denotation
    score: float


class Scorer(Protocol):
    """Assigns a log-probability to each candidate continuation text of a
    question/prefix pair; one call covers one hypothesis expansion."""

    def score_step(self, question: str, prefix: str, candidates: list[str]) -> list[float]:
        ...


def _candidate_sort_key(c: CandidateChunk):
    if c.is_end:
        return (1, "", "", "")
    first = c.calls[0]
    return (0, first.function, first.arg or "", c.text())


def _seed_candidates(kb: KnowledgeBase, topics: TopicSpec, filter_transitive: bool):
    out: list[CandidateChunk] = []
    if topics.topic_entities:
        for name in topics.topic_entities:
            if kb.resolve_entity(name):
                out.append(CandidateChunk((FunctionCall("Find", name),)))
        if not out:
            raise SeedError(
                f"no topic entity resolves: {list(topics.topic_entities)}"
            )
        return out
    # no topic entity: seed from FindAll() narrowed to a topic concept
    for name in topics.topic_concepts:
        calls = (FunctionCall("FindAll"), FunctionCall("FilterConcept", name))
        if _trial(kb, (), calls, filter_transitive):
            out.append(CandidateChunk(calls))
    if not out:
        raise SeedError(f"no topic concept resolves: {list(topics.topic_concepts)}")
    return out


def _trial(kb, stack, calls, filter_transitive) -> bool:
    """True when appending the calls executes cleanly and the affected
    branch ends non-empty."""
    try:
        for call in calls:
            stack = step_call(kb, stack, call, filter_transitive=filter_transitive)
    except ExecutionError:
        return False
    return bool(stack[-1])


def _unused_topic_finds(kb, program: Program, topics: TopicSpec):
    used = {c.arg for c in program.calls if c.function == "Find"}
    out = []
    for name in topics.topic_entities:
        if name not in used and kb.resolve_entity(name):
            out.append(CandidateChunk((FunctionCall("Find", name),)))
    return out


def enumerate_candidates(
    kb: KnowledgeBase,
    hyp: PartialHypothesis,
    topics: TopicSpec,
    filter_transitive: bool = True,
) -> list[CandidateChunk]:
    """All admissible next chunks for a live hypothesis, canonically
    ordered (function name, then argument; END always last)."""
    if hyp.finished:
        return []
    program, stack = hyp.program, hyp.state.stack
    if not program.calls:
        return sorted(_seed_candidates(kb, topics, filter_transitive), key=_candidate_sort_key)

    out: list[CandidateChunk] = []
    top = stack[-1]

    if len(program) < kopl.MAX_PROGRAM_CALLS and not isinstance(top, CountValue):
        # a counted branch is terminal: nothing may follow but END
        if isinstance(top, EntitySet) and top.ids:
            concept_names = set()
            for eid in top.ids:
                for cid in kb.concepts_of(eid):
                    reach = kb.ancestors(cid) if filter_transitive else (cid,)
                    for anc in reach:
                        concept_names.add(kb.concepts[anc].name)
            for name in concept_names:
                out.append(CandidateChunk((FunctionCall("FilterConcept", name),)))

            fwd_names, bwd_names = set(), set()
            for rid, item in kb.relations.items():
                if any(kb.forward_index[rid].get(e) for e in top.ids):
                    fwd_names.add(item.name)
                if any(kb.backward_index[rid].get(e) for e in top.ids):
                    bwd_names.add(item.name)
            for name in fwd_names:
                out.append(CandidateChunk((FunctionCall("Relate", name),)))
                for func in ("Argmax", "Argmin"):
                    out.append(CandidateChunk((FunctionCall(func, name),)))
            for name in bwd_names:
                out.append(CandidateChunk((FunctionCall("ReverseRelate", name),)))

            out.append(CandidateChunk((FunctionCall("Count"),)))

            if len(stack) >= 2 and isinstance(stack[-2], EntitySet) and stack[-2].ids:
                out.append(CandidateChunk((FunctionCall("Or"),)))
                if stack[-2].ids & top.ids:
                    out.append(CandidateChunk((FunctionCall("And"),)))

        elif isinstance(top, ValueSet) and len(top.values) == 1:
            (value,) = top.values
            if value.kind in ("quantity", "date", "year"):
                for item in kb.relations.values():
                    for func in kopl.COMPARISON_FUNCTIONS:
                        out.append(CandidateChunk((FunctionCall(func, item.name),)))

        out.extend(_unused_topic_finds(kb, program, topics))

    # every non-END candidate must survive trial execution
    out = [c for c in out if _trial(kb, stack, c.calls, filter_transitive)]

    unique = {c.text(): c for c in out}
    result = sorted(unique.values(), key=_candidate_sort_key)
    if len(stack) == 1:
        result.append(END)
    return result


def beam_search(
    kb: KnowledgeBase,
    question: str,
    topics: TopicSpec,
    scorer: Scorer,
    beam: int = DEFAULT_BEAM,
    max_steps: int = DEFAULT_MAX_STEPS,
    filter_transitive: bool = True,
) -> list[SearchResult]:
    """Classic beam search over admissible chunks.

    Each step scores every candidate of every live hypothesis, keeps the
    top ``beam`` expansions by cumulative log-probability, and moves
    hypotheses that choose END into the finished pool. Deterministic for
    a deterministic scorer; ties break on canonical program text.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")

    live = [PartialHypothesis()]
    finished: list[SearchResult] = []

    for _ in range(max_steps):
        if not live:
            break
        expansions: list[tuple[float, str, PartialHypothesis, CandidateChunk]] = []
        for hyp in live:
            candidates = enumerate_candidates(kb, hyp, topics, filter_transitive)
            if not candidates:
                continue  # dead end; drop the hypothesis
            texts = [c.text() for c in candidates]
            scores = scorer.score_step(question, hyp.program.text(), texts)
            if len(scores) != len(candidates):
                raise ScorerError(
                    f"scorer returned {len(scores)} scores for {len(candidates)} candidates"
                )
            for cand, s in zip(candidates, scores):
                total = hyp.score + float(s)
                tie_text = hyp.program.text() if cand.is_end else (
                    hyp.program.extended(*cand.calls).text()
                )
                expansions.append((total, tie_text, hyp, cand))
        if not expansions:
            break
        expansions.sort(key=lambda e: (-e[0], e[1]))
        live = []
        for total, _, hyp, cand in expansions[:beam]:
            if cand.is_end:
                finished.append(
                    SearchResult(hyp.program, hyp.state.stack[0], total)
                )
            else:
                state = hyp.state
                stack = state.stack
                for call in cand.calls:
                    stack = step_call(kb, stack, call, filter_transitive=filter_transitive)
                live.append(
                    PartialHypothesis(
                        program=hyp.program.extended(*cand.calls),
                        state=ExecState(stack),
                        score=total,
                    )
                )

    if not finished:
        raise DecoderError(f"no finished hypothesis within {max_steps} steps")
    finished.sort(key=lambda r: (-r.score, r.program.text()))
    return finished


# ----------------------------------------------------------------------
# scorers


class OracleScorer:
    """Test double: log-probability 0 for the chunk that continues the
    gold program (END at its end), a large negative floor otherwise."""

    def __init__(self, gold: Program, floor: float = DEFAULT_SCORE_FLOOR):
        self.gold = gold
        self.floor = floor

    def score_step(self, question: str, prefix: str, candidates: list[str]) -> list[float]:
        prefix_calls = kopl.parse_program(prefix).calls if prefix.strip() else ()
        gold_calls = self.gold.calls
        on_gold = gold_calls[: len(prefix_calls)] == prefix_calls
        scores = []
        for text in candidates:
            if not on_gold:
                scores.append(self.floor)
                continue
            if text == END_TEXT:
                scores.append(0.0 if len(prefix_calls) == len(gold_calls) else self.floor)
                continue
            calls = kopl.parse_program(text).calls
            expected = gold_calls[len(prefix_calls): len(prefix_calls) + len(calls)]
            scores.append(0.0 if calls == expected else self.floor)
        return scores


def oracle_scorer(gold: Program, floor: float = DEFAULT_SCORE_FLOOR) -> OracleScorer:
    return OracleScorer(gold, floor)


class UniformScorer:
    """Scores every candidate equally; useful for smoke tests."""

    def score_step(self, question: str, prefix: str, candidates: list[str]) -> list[float]:
        return [0.0] * len(candidates)


class RemoteScorer:
    """HTTP client for the scorer wire protocol.

    POSTs {"question", "prefix", "candidates"} to ``<endpoint>/score`` and
    expects {"log_probs": [...]} with positional correspondence.
    """

    def __init__(
        self,
        endpoint: str,
        retries: int = 3,
        timeout: float = 30.0,
        client: Optional[httpx.Client] = None,
    ):
        url = endpoint.rstrip("/")
        if not url.endswith("/score"):
            url += "/score"
        self.url = url
        self.retries = retries
        self._client = client or httpx.Client(timeout=timeout)

    def score_step(self, question: str, prefix: str, candidates: list[str]) -> list[float]:
        payload = {"question": question, "prefix": prefix, "candidates": candidates}
        last_exc: Optional[Exception] = None
        for attempt in range(1, self.retries + 1):
            try:
                resp = self._client.post(self.url, json=payload)
            except httpx.HTTPError as exc:
                last_exc = exc
                logger.warning("scorer transport error (attempt %d): %s", attempt, exc)
                continue
            if resp.status_code != 200:
                raise ScorerError(
                    f"scorer returned HTTP {resp.status_code}: {resp.text[:200]}",
                    attempts=attempt,
                )
            try:
                body = resp.json()
                log_probs = body["log_probs"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ScorerError(f"malformed scorer response: {exc}", attempts=attempt)
            if not isinstance(log_probs, list) or len(log_probs) != len(candidates):
                raise ScorerError(
                    f"scorer returned {len(log_probs) if isinstance(log_probs, list) else 'non-list'}"
                    f" log-probs for {len(candidates)} candidates",
                    attempts=attempt,
                )
            return [float(x) for x in log_probs]
        raise ScorerError(
            f"scorer unreachable after {self.retries} attempts: {last_exc}",
            attempts=self.retries,
        )


def remote_scorer(endpoint: str, retries: int = 3, timeout: float = 30.0) -> RemoteScorer:
    return RemoteScorer(endpoint, retries=retries, timeout=timeout)
