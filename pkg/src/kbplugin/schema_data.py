"""Self-supervised triple-completion corpus for schema plugin training.

Seven query/answer templates verbalize the KB around each schema item:
instance membership both ways per concept, subclass edges both ways, and
forward/backward/what-relation completions per relation. Triples are
sampled per item by descending popularity so the most connected entities
represent each schema item.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import kb as kbm
from .errors import ReservedRelationError, UnknownItemError
from .kb import KnowledgeBase, LiteralValue, Triple

logger = logging.getLogger(__name__)

TEMPLATES = ("inst_fwd", "inst_bwd", "sub_fwd", "sub_bwd", "rel_fwd", "rel_bwd", "rel_what")


@dataclass(frozen=True)
class QAPair:
    query: str
    answer: str
    item_id: str
    template: str


@dataclass(frozen=True)
class SamplingConfig:
    """Per-item sample cap; the only knob, and deliberately mandatory."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("sample cap k must be >= 1")


def sample_instance_triples(kb: KnowledgeBase, concept_id: str, k: int) -> list[tuple[str, str]]:
    """First ``k`` instance-of triples of a concept, ordered by entity
    popularity descending (ties by entity id)."""
    if concept_id not in kb.concepts:
        raise UnknownItemError(f"unknown concept id {concept_id!r}")
    triples = [(e, c) for e, c in kb.instance_of if c == concept_id]
    triples.sort(key=lambda t: (-kbm.popularity(kb, t[0]), t[0]))
    return triples[:k]


def rank_relational_triples(kb: KnowledgeBase, relation_id: str) -> list[Triple]:
    """All triples of a relation in sampling order: entity-tailed by the
    smaller endpoint popularity descending, literal-tailed by head
    popularity; ties by (head id, tail) ascending."""
    if relation_id in kbm.RESERVED_RELATION_NAMES:
        raise ReservedRelationError(f"{relation_id!r} is reserved")
    if relation_id not in kb.relations:
        raise UnknownItemError(f"unknown relation id {relation_id!r}")

    def key(t: Triple):
        if t.has_literal_tail:
            weight = kbm.popularity(kb, t.head)
            tail_text = t.tail.render()
        else:
            weight = min(kbm.popularity(kb, t.head), kbm.popularity(kb, t.tail))
            tail_text = t.tail
        return (-weight, t.head, tail_text)

    triples = [t for t in kb.relational if t.relation == relation_id]
    triples.sort(key=key)
    return triples


def sample_relational_triples(kb: KnowledgeBase, relation_id: str, k: int) -> list[Triple]:
    return rank_relational_triples(kb, relation_id)[:k]


def pick_concept(kb: KnowledgeBase, entity_id: str) -> str:
    """Most specific concept of an entity: fewest direct instances, ties
    by concept id."""
    if entity_id not in kb.entities:
        raise UnknownItemError(f"unknown entity id {entity_id!r}")
    cids = kb.concepts_of(entity_id)
    if not cids:
        raise UnknownItemError(f"entity {entity_id!r} has no concept")
    return min(cids, key=lambda c: (len(kb._direct_instances[c]), c))


def _concept_eligible(kb: KnowledgeBase, triple: Triple) -> bool:
    if not kb.concepts_of(triple.head):
        return False
    if triple.has_literal_tail:
        return True
    return bool(kb.concepts_of(triple.tail))


def build_pairs(kb: KnowledgeBase, cfg: SamplingConfig) -> list[QAPair]:
    """Emit the full corpus in deterministic order: concepts, then
    subclass triples, then relations, each sorted by id."""
    pairs: list[QAPair] = []

    for cid in sorted(kb.concepts):
        cname = kb.concepts[cid].name
        for eid, _ in sample_instance_triples(kb, cid, cfg.k):
            ename = kb.entities[eid].name
            pairs.append(QAPair(f"{ename} || instance of", cname, cid, "inst_fwd"))
            pairs.append(QAPair(f"{cname} || contains instance", ename, cid, "inst_bwd"))

    # subclass edges are few and informative, so the cap never applies
    for child, parent in sorted(kb.subclass_of):
        child_name = kb.concepts[child].name
        parent_name = kb.concepts[parent].name
        pairs.append(QAPair(f"{child_name} || subclass of", parent_name, child, "sub_fwd"))
        pairs.append(QAPair(f"{parent_name} || contains subclass", child_name, parent, "sub_bwd"))

    for rid in sorted(kb.relations):
        rname = kb.relations[rid].name
        chosen: list[Triple] = []
        for triple in rank_relational_triples(kb, rid):
            if len(chosen) == cfg.k:
                break
            if _concept_eligible(kb, triple):
                chosen.append(triple)
            else:
                logger.warning(
                    "skipping triple with concept-less endpoint: (%s, %s, %s)",
                    triple.head, rid, triple.tail,
                )
        for triple in chosen:
            head_name = kb.entities[triple.head].name
            head_concept = kb.concepts[pick_concept(kb, triple.head)].name
            if triple.has_literal_tail:
                lit: LiteralValue = triple.tail
                pairs.append(QAPair(
                    f"{head_name} | {head_concept} || {rname} | forward",
                    f"{lit.kind} | {lit.render()}",
                    rid, "rel_fwd",
                ))
                continue
            tail_name = kb.entities[triple.tail].name
            tail_concept = kb.concepts[pick_concept(kb, triple.tail)].name
            pairs.append(QAPair(
                f"{head_name} | {head_concept} || {rname} | forward",
                f"{tail_concept} | {tail_name}",
                rid, "rel_fwd",
            ))
            pairs.append(QAPair(
                f"{tail_name} | {tail_concept} || {rname} | backward",
                f"{head_concept} | {head_name}",
                rid, "rel_bwd",
            ))
            pairs.append(QAPair(
                f"{head_name} | {head_concept} || what relation || {tail_concept} | {tail_name}",
                rname,
                rid, "rel_what",
            ))
    return pairs


def emit_corpus(pairs: list[QAPair], out_path, kb: KnowledgeBase = None) -> dict:
    """Write one JSON object per pair and report template counts plus the
    schema items that received no pairs at all."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    per_template = {t: 0 for t in TEMPLATES}
    covered = set()
    with open(out_path, "w", encoding="utf-8") as fh:
        for p in pairs:
            per_template[p.template] += 1
            covered.add(p.item_id)
            fh.write(json.dumps(
                {"query": p.query, "answer": p.answer, "item_id": p.item_id, "template": p.template},
                ensure_ascii=False, sort_keys=True,
            ) + "\n")
    summary = {
        "pairs": len(pairs),
        "per_template": per_template,
        "file": str(out_path),
    }
    if kb is not None:
        all_items = set(kb.concepts) | set(kb.relations)
        summary["zero_coverage"] = sorted(all_items - covered)
    return summary
