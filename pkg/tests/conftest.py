"""Shared fixtures: the three toy KBs and a seeded prefix grower."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from kbplugin import decoder as dec
from kbplugin import kopl
from kbplugin.kb import load_kb

FIXTURES = Path(__file__).parent / "fixtures"

TABLE_CASE_PROGRAM = (
    "Find(Beatles) Relate(member) Find(Paul Mccartney) "
    "ReverseRelate(member) And() Relate(role)"
)


@pytest.fixture(scope="session")
def music_path():
    return FIXTURES / "toy_music.json"


@pytest.fixture(scope="session")
def travel_path():
    return FIXTURES / "toy_travel.json"


@pytest.fixture(scope="session")
def academic_path():
    return FIXTURES / "toy_academic.json"


@pytest.fixture(scope="session")
def music_kb(music_path):
    return load_kb(music_path)


@pytest.fixture(scope="session")
def travel_kb(travel_path):
    return load_kb(travel_path)


@pytest.fixture(scope="session")
def academic_kb(academic_path):
    return load_kb(academic_path)


@pytest.fixture(scope="session")
def all_kbs(music_kb, travel_kb, academic_kb):
    return {"music": music_kb, "travel": travel_kb, "academic": academic_kb}


def default_topics(name: str) -> dec.TopicSpec:
    by_kb = {
        "music": dec.TopicSpec(("Beatles", "Paul Mccartney"), ("person",)),
        "travel": dec.TopicSpec(("London", "Rome"), ("airport",)),
        "academic": dec.TopicSpec(("Alice Smith", "Attention Study"), ("paper",)),
    }
    return by_kb[name]


def grow_random_prefix(kb, topics, rng: random.Random, max_len: int = 6):
    """Random walk through enumerate_candidates; returns the sequence of
    hypotheses visited (all decoder-reachable, never finished)."""
    hyp = dec.PartialHypothesis()
    visited = [hyp]
    for _ in range(max_len):
        candidates = dec.enumerate_candidates(kb, hyp, topics)
        moves = [c for c in candidates if not c.is_end]
        if not moves:
            break
        chunk = moves[rng.randrange(len(moves))]
        stack = hyp.state.stack
        for call in chunk.calls:
            stack = kopl.step_call(kb, stack, call)
        hyp = dec.PartialHypothesis(
            program=hyp.program.extended(*chunk.calls),
            state=kopl.ExecState(stack),
            score=hyp.score,
        )
        visited.append(hyp)
    return visited


def grow_random_program(kb, topics, rng: random.Random, max_len: int = 7):
    """Random decoder walk that ends at an END-admissible hypothesis;
    returns a complete, reachable gold program."""
    for _ in range(40):
        hyp = dec.PartialHypothesis()
        for _ in range(max_len):
            candidates = dec.enumerate_candidates(kb, hyp, topics)
            if not candidates:
                break
            can_end = any(c.is_end for c in candidates)
            moves = [c for c in candidates if not c.is_end]
            # bias toward stopping once stopping is legal
            if can_end and (not moves or rng.random() < 0.45):
                return hyp.program
            chunk = moves[rng.randrange(len(moves))]
            stack = hyp.state.stack
            for call in chunk.calls:
                stack = kopl.step_call(kb, stack, call)
            hyp = dec.PartialHypothesis(
                program=hyp.program.extended(*chunk.calls),
                state=kopl.ExecState(stack),
            )
        else:
            candidates = dec.enumerate_candidates(kb, hyp, topics)
            if any(c.is_end for c in candidates):
                return hyp.program
    raise AssertionError("could not grow a complete program")
