"""KoPL programs: parsing, canonical text, and stack-machine execution.

A program is a flat sequence of function chunks like
``Find(Beatles) Relate(member) Count()``. Execution runs on a branch
stack: Find/FindAll push a new branch, most functions transform the top
branch, And/Or merge the top two, and a complete program leaves exactly
one branch whose denotation is the answer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from . import kb as kbm
from .errors import (
    DenotationTypeError,
    IncompleteProgramError,
    NameResolutionError,
    NonSingletonValueError,
    ProgramSyntaxError,
    StackUnderflowError,
)
from .kb import KnowledgeBase, LiteralValue

MAX_PROGRAM_CALLS = 20

ARG_ENTITY = "entity"
ARG_RELATION = "relation"
ARG_CONCEPT = "concept"
ARG_NONE = "none"

# function name -> kind of argument it takes
SIGNATURES: dict[str, str] = {
    "Find": ARG_ENTITY,
    "FindAll": ARG_NONE,
    "Relate": ARG_RELATION,
    "ReverseRelate": ARG_RELATION,
    "FilterConcept": ARG_CONCEPT,
    "And": ARG_NONE,
    "Or": ARG_NONE,
    "Argmax": ARG_RELATION,
    "Argmin": ARG_RELATION,
    "LT": ARG_RELATION,
    "LE": ARG_RELATION,
    "GT": ARG_RELATION,
    "GE": ARG_RELATION,
    "Count": ARG_NONE,
}

COMPARISON_FUNCTIONS = ("LT", "LE", "GT", "GE")


@dataclass(frozen=True)
class FunctionCall:
    function: str
    arg: Optional[str] = None

    def __post_init__(self):
        sig = SIGNATURES.get(self.function)
        if sig is None:
            raise ProgramSyntaxError(f"unknown function {self.function!r}")
        if sig == ARG_NONE and self.arg is not None:
            raise ProgramSyntaxError(f"{self.function} takes no argument")
        if sig != ARG_NONE and not self.arg:
            raise ProgramSyntaxError(f"{self.function} requires a {sig} argument")

    def text(self) -> str:
        return f"{self.function}({self.arg or ''})"


@dataclass(frozen=True)
class Program:
    calls: tuple[FunctionCall, ...] = ()

    def __post_init__(self):
        if len(self.calls) > MAX_PROGRAM_CALLS:
            raise ProgramSyntaxError(
                f"program has {len(self.calls)} calls; maximum is {MAX_PROGRAM_CALLS}"
            )

    def text(self) -> str:
        return " ".join(c.text() for c in self.calls)

    def extended(self, *calls: FunctionCall) -> "Program":
        return Program(self.calls + tuple(calls))

    def __len__(self):
        return len(self.calls)


@dataclass(frozen=True)
class EntitySet:
    ids: frozenset[str] = frozenset()

    def __bool__(self):
        return bool(self.ids)


@dataclass(frozen=True)
class ValueSet:
    values: frozenset[LiteralValue] = frozenset()

    def __bool__(self):
        return bool(self.values)


@dataclass(frozen=True)
class CountValue:
    count: int = 0

    def __bool__(self):
        return True


Denotation = Union[EntitySet, ValueSet, CountValue]


@dataclass(frozen=True)
class ExecState:
    """Branch stack after executing a program prefix."""

    stack: tuple[Denotation, ...] = ()

    @property
    def top(self) -> Denotation:
        return self.stack[-1]


_CHUNK_RE = re.compile(r"([A-Za-z]+)\(([^()]*)\)")


def parse_program(text: str) -> Program:
    """Parse program text into a Program; tolerant of extra whitespace
    between chunks, strict about everything else."""
    if not text or not text.strip():
        raise ProgramSyntaxError("empty program text")
    calls: list[FunctionCall] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _CHUNK_RE.match(text, pos)
        if m is None:
            raise ProgramSyntaxError(
                f"malformed chunk at position {pos}: {text[pos:pos + 30]!r}"
            )
        func, raw_arg = m.group(1), m.group(2).strip()
        calls.append(FunctionCall(func, raw_arg or None))
        pos = m.end()
    return Program(tuple(calls))


def serialize(program: Program) -> str:
    """Canonical text: single spaces between chunks, none inside parens."""
    return program.text()


# ----------------------------------------------------------------------
# execution


def _resolve(kind: str, resolver, name: str) -> frozenset[str]:
    ids = resolver(name)
    if not ids:
        raise NameResolutionError(f"no {kind} named {name!r}")
    return ids


def _require_entity_set(call: FunctionCall, d: Denotation) -> EntitySet:
    if not isinstance(d, EntitySet):
        raise DenotationTypeError(
            f"{call.function} needs an entity set, got {type(d).__name__}"
        )
    return d


def _hop(kb: KnowledgeBase, sources: frozenset[str], relation_ids, direction: str) -> Denotation:
    targets: set = set()
    for rid in relation_ids:
        targets |= kbm.neighbors(kb, sources, rid, direction)
    entity_ids = {t for t in targets if isinstance(t, str)}
    literals = {t for t in targets if isinstance(t, LiteralValue)}
    if not entity_ids and literals:
        return ValueSet(frozenset(literals))
    return EntitySet(frozenset(entity_ids))


def _quantity_values(kb: KnowledgeBase, entity_ids, relation_ids) -> list[tuple[str, LiteralValue]]:
    pairs = []
    for rid in relation_ids:
        index = kb.forward_index[rid]
        for eid in entity_ids:
            for tail in index.get(eid, ()):
                if isinstance(tail, LiteralValue) and tail.kind == "quantity":
                    pairs.append((eid, tail))
    return pairs


def _argext(kb: KnowledgeBase, entities: EntitySet, relation_ids, minimize: bool) -> EntitySet:
    pairs = _quantity_values(kb, entities.ids, relation_ids)
    if not pairs:
        return EntitySet(frozenset())
    # mixed units: keep only the dominant unit group so values stay comparable
    by_unit: dict[Optional[str], list[tuple[str, LiteralValue]]] = {}
    for eid, lit in pairs:
        by_unit.setdefault(lit.unit, []).append((eid, lit))
    unit = sorted(by_unit, key=lambda u: (-len(by_unit[u]), u or ""))[0]
    group = by_unit[unit]
    best: dict[str, float] = {}
    for eid, lit in group:
        v = lit.value
        if eid not in best or (v < best[eid] if minimize else v > best[eid]):
            best[eid] = v
    extremum = min(best.values()) if minimize else max(best.values())
    return EntitySet(frozenset(e for e, v in best.items() if v == extremum))


_OPS = {
    "LT": lambda a, b: a < b,
    "LE": lambda a, b: a <= b,
    "GT": lambda a, b: a > b,
    "GE": lambda a, b: a >= b,
}


def _compare(kb: KnowledgeBase, call: FunctionCall, top: Denotation, relation_ids) -> EntitySet:
    if not isinstance(top, ValueSet):
        raise DenotationTypeError(f"{call.function} needs a value set on top")
    if len(top.values) != 1:
        raise NonSingletonValueError(
            f"{call.function} needs exactly one value, got {len(top.values)}"
        )
    (pivot,) = top.values
    if pivot.kind not in kbm.ORDERABLE_KINDS:
        raise DenotationTypeError(f"{call.function} cannot order {pivot.kind} values")
    op = _OPS[call.function]
    hits: set[str] = set()
    for rid in relation_ids:
        for head, tails in kb.forward_index[rid].items():
            for tail in tails:
                if isinstance(tail, LiteralValue) and tail.comparable_with(pivot):
                    if op(tail.compare_key(), pivot.compare_key()):
                        hits.add(head)
    return EntitySet(frozenset(hits))


def step_call(
    kb: KnowledgeBase,
    stack: tuple[Denotation, ...],
    call: FunctionCall,
    filter_transitive: bool = True,
) -> tuple[Denotation, ...]:
    """Apply one function call to a branch stack and return the new stack."""
    func = call.function

    if func == "Find":
        ids = _resolve("entity", kb.resolve_entity, call.arg)
        return stack + (EntitySet(ids),)
    if func == "FindAll":
        return stack + (EntitySet(frozenset(kb.entities)),)

    if not stack:
        raise StackUnderflowError(f"{func} needs a branch on the stack")

    if func in ("And", "Or"):
        if len(stack) < 2:
            raise StackUnderflowError(f"{func} needs two branches, have {len(stack)}")
        right = _require_entity_set(call, stack[-1])
        left = _require_entity_set(call, stack[-2])
        merged = left.ids & right.ids if func == "And" else left.ids | right.ids
        return stack[:-2] + (EntitySet(merged),)

    top = stack[-1]

    if func == "Relate" or func == "ReverseRelate":
        entities = _require_entity_set(call, top)
        rids = _resolve("relation", kb.resolve_relation, call.arg)
        direction = "forward" if func == "Relate" else "backward"
        return stack[:-1] + (_hop(kb, entities.ids, sorted(rids), direction),)
    if func == "FilterConcept":
        entities = _require_entity_set(call, top)
        cids = _resolve("concept", kb.resolve_concept, call.arg)
        members: set[str] = set()
        for cid in sorted(cids):
            members |= kbm.concept_instances(kb, cid, transitive=filter_transitive)
        return stack[:-1] + (EntitySet(entities.ids & members),)
    if func in ("Argmax", "Argmin"):
        entities = _require_entity_set(call, top)
        rids = _resolve("relation", kb.resolve_relation, call.arg)
        return stack[:-1] + (_argext(kb, entities, sorted(rids), func == "Argmin"),)
    if func in COMPARISON_FUNCTIONS:
        rids = _resolve("relation", kb.resolve_relation, call.arg)
        return stack[:-1] + (_compare(kb, call, top, sorted(rids)),)
    if func == "Count":
        entities = _require_entity_set(call, top)
        return stack[:-1] + (CountValue(len(entities.ids)),)

    raise ProgramSyntaxError(f"unknown function {func!r}")


def execute_prefix(
    kb: KnowledgeBase, program: Program, filter_transitive: bool = True
) -> ExecState:
    """Execute a program prefix and return the full branch stack."""
    stack: tuple[Denotation, ...] = ()
    for call in program.calls:
        stack = step_call(kb, stack, call, filter_transitive=filter_transitive)
    return ExecState(stack)


def execute(kb: KnowledgeBase, program: Program, filter_transitive: bool = True) -> Denotation:
    """Execute a complete program; the final stack must hold exactly one
    branch, whose denotation is returned. Empty results are legal."""
    state = execute_prefix(kb, program, filter_transitive=filter_transitive)
    if len(state.stack) != 1:
        raise IncompleteProgramError(
            f"program left {len(state.stack)} branches on the stack"
        )
    return state.stack[0]


def denotation_key(d: Denotation):
    """Hashable identity used for answer-equivalence checks."""
    if isinstance(d, EntitySet):
        return ("entities", d.ids)
    if isinstance(d, ValueSet):
        return ("values", frozenset((v.kind, v.unit, v.value) for v in d.values))
    return ("count", d.count)


def render_denotation(kb: KnowledgeBase, d: Denotation) -> list[str]:
    """Answer strings: entity display names, rendered literals, or the count."""
    if isinstance(d, EntitySet):
        return sorted(kb.entities[e].name for e in d.ids)
    if isinstance(d, ValueSet):
        return sorted(v.render() for v in d.values)
    return [str(d.count)]


def denotation_to_json(kb: KnowledgeBase, d: Denotation) -> dict:
    if isinstance(d, EntitySet):
        return {"entities": sorted(kb.entities[e].name for e in d.ids)}
    if isinstance(d, ValueSet):
        return {"values": sorted(v.render() for v in d.values)}
    return {"count": d.count}
