"""In-memory knowledge base: load, validate, index, and traverse.

A KB holds concepts, entities, relations, and three disjoint triple
partitions: instance-of edges (entity -> concept), subclass-of edges
(concept -> concept), and general relational triples whose tail is either
an entity or a literal value. Everything is immutable after load, so a
single KB instance is safe to share across threads and requests.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import KBLoadError, ReservedRelationError, UnknownItemError

logger = logging.getLogger(__name__)

RESERVED_INSTANCE_OF = "instance of"
RESERVED_SUBCLASS_OF = "subclass of"
RESERVED_RELATION_NAMES = (RESERVED_INSTANCE_OF, RESERVED_SUBCLASS_OF)

ORDERABLE_KINDS = ("quantity", "date", "year")
LITERAL_KINDS = ("quantity", "date", "year", "string")


@dataclass(frozen=True)
class SchemaItem:
    """A concept or relation with a display name and surface aliases."""

    id: str
    name: str
    aliases: tuple[str, ...] = ()
    kind: str = "concept"  # "concept" | "relation"


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    aliases: tuple[str, ...] = ()


@dataclass(frozen=True)
class LiteralValue:
    """Typed literal tail of a relational triple.

    quantity values carry an optional unit; two literals are comparable
    only when their kinds match and, for quantities, their units match.
    """

    kind: str
    value: Union[float, int, str]
    unit: Optional[str] = None

    def __post_init__(self):
        if self.kind not in LITERAL_KINDS:
            raise ValueError(f"unknown literal kind {self.kind!r}")
        if self.kind == "quantity":
            if not isinstance(self.value, (int, float)) or not math.isfinite(self.value):
                raise ValueError(f"quantity requires a finite number, got {self.value!r}")
            object.__setattr__(self, "value", float(self.value))
        elif self.kind == "year":
            if isinstance(self.value, bool) or not isinstance(self.value, int):
                raise ValueError(f"year requires an integer, got {self.value!r}")
        elif self.kind == "date":
            try:
                date.fromisoformat(str(self.value))
            except ValueError as exc:
                raise ValueError(f"invalid date {self.value!r}: {exc}") from exc
            object.__setattr__(self, "value", str(self.value))
        else:
            object.__setattr__(self, "value", str(self.value))
        if self.unit is not None and self.kind != "quantity":
            raise ValueError("unit is only allowed on quantity literals")

    def comparable_with(self, other: "LiteralValue") -> bool:
        if self.kind != other.kind:
            return False
        if self.kind == "quantity":
            return self.unit == other.unit
        return True

    def compare_key(self):
        """Orderable key; only meaningful between comparable literals."""
        if self.kind == "date":
            return date.fromisoformat(self.value)
        return self.value

    def render(self) -> str:
        """Human-readable text used in answers and training corpora."""
        if self.kind == "quantity":
            num = int(self.value) if float(self.value).is_integer() else self.value
            return f"{num} {self.unit}" if self.unit else str(num)
        return str(self.value)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "value": self.value}
        if self.unit is not None:
            out["unit"] = self.unit
        return out


Tail = Union[str, LiteralValue]


@dataclass(frozen=True)
class Triple:
    """A general relational triple; tail is an entity id or a literal."""

    head: str
    relation: str
    tail: Tail

    @property
    def has_literal_tail(self) -> bool:
        return isinstance(self.tail, LiteralValue)


def _name_index(items: Iterable) -> dict[str, frozenset[str]]:
    by_name: dict[str, set[str]] = {}
    for item in items:
        by_name.setdefault(item.name, set()).add(item.id)
    return {k: frozenset(v) for k, v in by_name.items()}


def _alias_index(items: Iterable) -> dict[str, frozenset[str]]:
    by_alias: dict[str, set[str]] = {}
    for item in items:
        for alias in item.aliases:
            by_alias.setdefault(alias, set()).add(item.id)
    return {k: frozenset(v) for k, v in by_alias.items()}


@dataclass
class KnowledgeBase:
    """Fully indexed, immutable-after-load knowledge base."""

    concepts: dict[str, SchemaItem]
    relations: dict[str, SchemaItem]
    entities: dict[str, Entity]
    instance_of: tuple[tuple[str, str], ...]
    subclass_of: tuple[tuple[str, str], ...]
    relational: tuple[Triple, ...]
    load_warnings: tuple[str, ...] = ()

    # derived indexes, built once in __post_init__
    forward_index: dict = field(default_factory=dict, repr=False)
    backward_index: dict = field(default_factory=dict, repr=False)
    _popularity: dict = field(default_factory=dict, repr=False)
    _direct_instances: dict = field(default_factory=dict, repr=False)
    _concepts_of: dict = field(default_factory=dict, repr=False)
    _children: dict = field(default_factory=dict, repr=False)
    _descendants: dict = field(default_factory=dict, repr=False)
    _ancestors: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._build_indexes()

    def _build_indexes(self):
        fwd: dict[str, dict[str, set]] = {r: {} for r in self.relations}
        bwd: dict[str, dict[str, set]] = {r: {} for r in self.relations}
        pop: dict[str, int] = {e: 0 for e in self.entities}
        for t in self.relational:
            fwd[t.relation].setdefault(t.head, set()).add(t.tail)
            pop[t.head] += 1
            if not t.has_literal_tail:
                bwd[t.relation].setdefault(t.tail, set()).add(t.head)
                pop[t.tail] += 1
        direct: dict[str, set[str]] = {c: set() for c in self.concepts}
        concepts_of: dict[str, set[str]] = {}
        for eid, cid in self.instance_of:
            direct[cid].add(eid)
            concepts_of.setdefault(eid, set()).add(cid)
            pop[eid] += 1
        children: dict[str, set[str]] = {c: set() for c in self.concepts}
        for child, parent in self.subclass_of:
            children[parent].add(child)
        self.forward_index = fwd
        self.backward_index = bwd
        self._popularity = pop
        self._direct_instances = {c: frozenset(s) for c, s in direct.items()}
        self._concepts_of = {e: frozenset(s) for e, s in concepts_of.items()}
        self._children = children
        self._descendants = {c: self._closure(c, children) for c in self.concepts}
        parents: dict[str, set[str]] = {c: set() for c in self.concepts}
        for child, parent in self.subclass_of:
            parents[child].add(parent)
        self._ancestors = {c: self._closure(c, parents) for c in self.concepts}
        self._entity_names = _name_index(self.entities.values())
        self._entity_aliases = _alias_index(self.entities.values())
        self._relation_names = _name_index(self.relations.values())
        self._relation_aliases = _alias_index(self.relations.values())
        self._concept_names = _name_index(self.concepts.values())
        self._concept_aliases = _alias_index(self.concepts.values())

    @staticmethod
    def _closure(start: str, edges: dict[str, set[str]]) -> frozenset[str]:
        seen = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for nxt in edges.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return frozenset(seen)

    # ------------------------------------------------------------------
    # name resolution (exact name first, aliases as a fallback tier)

    def resolve_entity(self, name: str) -> frozenset[str]:
        hit = self._entity_names.get(name)
        if hit:
            return hit
        return self._entity_aliases.get(name, frozenset())

    def resolve_relation(self, name: str) -> frozenset[str]:
        hit = self._relation_names.get(name)
        if hit:
            return hit
        return self._relation_aliases.get(name, frozenset())

    def resolve_concept(self, name: str) -> frozenset[str]:
        hit = self._concept_names.get(name)
        if hit:
            return hit
        return self._concept_aliases.get(name, frozenset())

    def concepts_of(self, entity_id: str) -> frozenset[str]:
        return self._concepts_of.get(entity_id, frozenset())

    def ancestors(self, concept_id: str) -> frozenset[str]:
        """The concept itself plus all transitive superclasses."""
        return self._ancestors[concept_id]


def popularity(kb: KnowledgeBase, entity_id: str) -> int:
    """Occurrence count of an entity across instance-of and relational
    triples, counting both head and tail positions."""
    if entity_id not in kb.entities:
        raise UnknownItemError(f"unknown entity id {entity_id!r}")
    return kb._popularity[entity_id]


def neighbors(
    kb: KnowledgeBase,
    sources: Iterable[str],
    relation_id: str,
    direction: str = "forward",
) -> set:
    """Single hop along a relation.

    forward: tails of (s, r, *) for s in sources (entities and literals).
    backward: heads of (*, r, t) for t in sources; literal tails never
    match a backward source. Results are duplicate-free sets.
    """
    if relation_id in RESERVED_RELATION_NAMES:
        raise ReservedRelationError(
            f"{relation_id!r} is reserved; use concept_instances or subclass edges"
        )
    if relation_id not in kb.relations:
        raise UnknownItemError(f"unknown relation id {relation_id!r}")
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    index = kb.forward_index if direction == "forward" else kb.backward_index
    out: set = set()
    for src in sources:
        out.update(index[relation_id].get(src, ()))
    return out


def concept_instances(kb: KnowledgeBase, concept_id: str, transitive: bool = False) -> set[str]:
    """Entities directly in a concept; with transitive=True also entities
    in any subclass descendant."""
    if concept_id not in kb.concepts:
        raise UnknownItemError(f"unknown concept id {concept_id!r}")
    if not transitive:
        return set(kb._direct_instances[concept_id])
    out: set[str] = set()
    for cid in kb._descendants[concept_id]:
        out.update(kb._direct_instances[cid])
    return out


def stats(kb: KnowledgeBase) -> dict:
    """Size summary. Relation counts are reported both without and with
    the two reserved relations."""
    return {
        "concepts": len(kb.concepts),
        "relations": len(kb.relations),
        "relations_with_reserved": len(kb.relations) + 2,
        "entities": len(kb.entities),
        "instance_of": len(kb.instance_of),
        "subclass_of": len(kb.subclass_of),
        "relational": len(kb.relational),
    }


# ----------------------------------------------------------------------
# loading

def _parse_error(msg, record=None):
    return KBLoadError("parse", msg, record)


def _require(cond, msg, record=None):
    if not cond:
        raise _parse_error(msg, record)


def _read_items(raw, kind: str, cls):
    items = {}
    _require(isinstance(raw, list), f"{kind} section must be an array", raw)
    for rec in raw:
        _require(isinstance(rec, dict), f"{kind} record must be an object", rec)
        _require("id" in rec and "name" in rec, f"{kind} record needs id and name", rec)
        iid, name = str(rec["id"]), str(rec["name"])
        _require(bool(name), f"{kind} {iid!r} has an empty name", rec)
        _require(iid not in items, f"duplicate {kind} id {iid!r}", rec)
        aliases = rec.get("aliases", [])
        _require(isinstance(aliases, list), f"aliases of {iid!r} must be an array", rec)
        # keep the alias list clean: no repeats, never the name itself
        seen, clean = set(), []
        for a in aliases:
            a = str(a)
            if a and a != name and a not in seen:
                seen.add(a)
                clean.append(a)
        if cls is Entity:
            items[iid] = Entity(id=iid, name=name, aliases=tuple(clean))
        else:
            items[iid] = SchemaItem(id=iid, name=name, aliases=tuple(clean), kind=kind[:-1])
    return items


def _parse_literal(raw, record) -> LiteralValue:
    _require(isinstance(raw, dict), "literal tail must be an object", record)
    _require("kind" in raw and "value" in raw, "literal tail needs kind and value", record)
    try:
        return LiteralValue(kind=raw["kind"], value=raw["value"], unit=raw.get("unit"))
    except ValueError as exc:
        raise _parse_error(f"bad literal: {exc}", record) from exc


def _check_acyclic(edges: list[tuple[str, str]]):
    parents: dict[str, list[str]] = {}
    for child, parent in edges:
        parents.setdefault(child, []).append(parent)
    # colors: 0 unvisited, 1 on stack, 2 done
    color: dict[str, int] = {}

    def visit(node: str, path: list[str]):
        color[node] = 1
        path.append(node)
        for nxt in parents.get(node, ()):
            if color.get(nxt, 0) == 1:
                cycle = path[path.index(nxt):] + [nxt]
                raise KBLoadError(
                    "cycle", f"subclass_of cycle: {' -> '.join(cycle)}", cycle
                )
            if color.get(nxt, 0) == 0:
                visit(nxt, path)
        path.pop()
        color[node] = 2

    for node in list(parents):
        if color.get(node, 0) == 0:
            visit(node, [])


def load_kb(path) -> KnowledgeBase:
    """Load and fully index a KB file.

    Raises KBLoadError with kind parse/referential/cycle; the offending
    record is attached when one exists. Loading is deterministic.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise _parse_error(f"cannot read KB file {path}: {exc}") from exc
    _require(isinstance(doc, dict), "KB document must be a JSON object")
    return build_kb(doc)


def build_kb(doc: dict) -> KnowledgeBase:
    """Build a KB from an already-parsed document (same schema as the file)."""
    concepts = _read_items(doc.get("concepts", []), "concepts", SchemaItem)
    relations = _read_items(doc.get("relations", []), "relations", SchemaItem)
    entities = _read_items(doc.get("entities", []), "entities", Entity)

    for rel in relations.values():
        _require(
            rel.name not in RESERVED_RELATION_NAMES and rel.id not in RESERVED_RELATION_NAMES,
            f"relation {rel.id!r} uses the reserved name {rel.name!r}",
            rel.id,
        )

    warnings: list[str] = []

    def referential(cond, what, record):
        if not cond:
            raise KBLoadError("referential", f"unknown {what}", record)

    instance_of: list[tuple[str, str]] = []
    seen_inst = set()
    for rec in doc.get("instance_of", []):
        _require(isinstance(rec, (list, tuple)) and len(rec) == 2, "instance_of record must be a pair", rec)
        eid, cid = str(rec[0]), str(rec[1])
        referential(eid in entities, f"entity {eid!r} in instance_of", rec)
        referential(cid in concepts, f"concept {cid!r} in instance_of", rec)
        if (eid, cid) in seen_inst:
            warnings.append(f"duplicate instance_of triple dropped: {rec}")
            continue
        seen_inst.add((eid, cid))
        instance_of.append((eid, cid))

    subclass_of: list[tuple[str, str]] = []
    seen_sub = set()
    for rec in doc.get("subclass_of", []):
        _require(isinstance(rec, (list, tuple)) and len(rec) == 2, "subclass_of record must be a pair", rec)
        child, parent = str(rec[0]), str(rec[1])
        referential(child in concepts, f"concept {child!r} in subclass_of", rec)
        referential(parent in concepts, f"concept {parent!r} in subclass_of", rec)
        if (child, parent) in seen_sub:
            warnings.append(f"duplicate subclass_of triple dropped: {rec}")
            continue
        seen_sub.add((child, parent))
        subclass_of.append((child, parent))

    _check_acyclic(subclass_of)

    relational: list[Triple] = []
    seen_rel = set()
    for rec in doc.get("relational", []):
        _require(isinstance(rec, (list, tuple)) and len(rec) == 3, "relational record must be a triple", rec)
        head, rid, raw_tail = str(rec[0]), str(rec[1]), rec[2]
        referential(head in entities, f"entity {head!r} in relational triple", rec)
        referential(rid in relations, f"relation {rid!r} in relational triple", rec)
        if isinstance(raw_tail, str):
            referential(raw_tail in entities, f"entity {raw_tail!r} in relational triple", rec)
            tail: Tail = raw_tail
        else:
            tail = _parse_literal(raw_tail, rec)
        triple = Triple(head=head, relation=rid, tail=tail)
        if triple in seen_rel:
            warnings.append(f"duplicate relational triple dropped: {rec}")
            continue
        seen_rel.add(triple)
        relational.append(triple)

    for w in warnings:
        logger.warning(w)

    return KnowledgeBase(
        concepts=concepts,
        relations=relations,
        entities=entities,
        instance_of=tuple(instance_of),
        subclass_of=tuple(subclass_of),
        relational=tuple(relational),
        load_warnings=tuple(warnings),
    )


def kb_to_document(kb: KnowledgeBase) -> dict:
    """Serialize a KB back to the file-format document, deterministically."""

    def item_rec(item):
        return {"id": item.id, "name": item.name, "aliases": list(item.aliases)}

    return {
        "concepts": [item_rec(kb.concepts[c]) for c in sorted(kb.concepts)],
        "relations": [item_rec(kb.relations[r]) for r in sorted(kb.relations)],
        "entities": [item_rec(kb.entities[e]) for e in sorted(kb.entities)],
        "instance_of": [list(p) for p in kb.instance_of],
        "subclass_of": [list(p) for p in kb.subclass_of],
        "relational": [
            [t.head, t.relation, t.tail.to_json() if t.has_literal_tail else t.tail]
            for t in kb.relational
        ],
    }


def write_kb(kb: KnowledgeBase, path) -> None:
    Path(path).write_text(
        json.dumps(kb_to_document(kb), ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8",
    )
