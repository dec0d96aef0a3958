"""Alias-replacement augmentation: generate schema variants of a source
KB and rewrite gold programs so each variant keeps the same answers.

Variant 1 is always the source KB itself. For every other variant each
concept and relation independently draws one surface form from its
name-plus-aliases pool, using a random stream keyed by (seed, variant,
item id) so adding one schema item never reshuffles the others.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from . import kopl
from .errors import AugmentError, KBPluginError
from .kb import KnowledgeBase, SchemaItem, write_kb
from .kopl import ARG_CONCEPT, ARG_RELATION, SIGNATURES, FunctionCall, Program

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AliasMap:
    """Surface-name assignment for every schema item of one generated KB."""

    mapping: dict  # schema item id -> chosen surface name
    index: int

    def digest(self) -> str:
        blob = json.dumps(self.mapping, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class AugmentedRecord:
    question: str
    programs: tuple[str, ...]  # canonical text, one per generated KB


def _surface_pool(item: SchemaItem) -> list[str]:
    return [item.name, *item.aliases]


def sample_alias_map(kb: KnowledgeBase, index: int, seed: int) -> AliasMap:
    """Draw one surface name per schema item. Index 1 is the identity map;
    items without aliases always keep their name."""
    if index < 1:
        raise ValueError("index starts at 1")
    mapping: dict[str, str] = {}
    for item in list(kb.concepts.values()) + list(kb.relations.values()):
        if index == 1:
            mapping[item.id] = item.name
            continue
        pool = _surface_pool(item)
        rng = random.Random(f"{seed}:{index}:{item.id}")
        mapping[item.id] = pool[rng.randrange(len(pool))]
    return AliasMap(mapping=mapping, index=index)


def apply_alias_map(kb: KnowledgeBase, alias_map: AliasMap) -> KnowledgeBase:
    """Clone the KB with schema display names replaced by their images.

    Ids, triples, and entity names are untouched, so the result is
    structurally isomorphic to the source. The unchosen surface forms stay
    behind as aliases, keeping the name pool intact.
    """

    def reimage(item: SchemaItem) -> SchemaItem:
        if item.id not in alias_map.mapping:
            raise AugmentError(f"alias map does not cover schema item {item.id!r}")
        image = alias_map.mapping[item.id]
        rest = tuple(s for s in _surface_pool(item) if s != image)
        return SchemaItem(id=item.id, name=image, aliases=rest, kind=item.kind)

    return KnowledgeBase(
        concepts={cid: reimage(item) for cid, item in kb.concepts.items()},
        relations={rid: reimage(item) for rid, item in kb.relations.items()},
        entities=dict(kb.entities),
        instance_of=kb.instance_of,
        subclass_of=kb.subclass_of,
        relational=kb.relational,
    )


def _resolve_schema_arg(kb: KnowledgeBase, call: FunctionCall) -> str:
    """Map a concept/relation argument back to a schema item id."""
    if SIGNATURES[call.function] == ARG_CONCEPT:
        ids = kb.resolve_concept(call.arg)
    else:
        ids = kb.resolve_relation(call.arg)
    if not ids:
        raise AugmentError(
            f"argument {call.arg!r} of {call.function} resolves to no schema item"
        )
    # ambiguous names are rare; the cheapest deterministic pick is fine
    # because answer invariance is verified by execution afterwards
    return sorted(ids)[0]


def rewrite_program(kb: KnowledgeBase, program: Program, alias_map: AliasMap) -> Program:
    """Replace concept/relation arguments with their images; entity
    arguments and the function sequence stay as they are."""
    calls = []
    for call in program.calls:
        if SIGNATURES[call.function] in (ARG_CONCEPT, ARG_RELATION):
            item_id = _resolve_schema_arg(kb, call)
            calls.append(FunctionCall(call.function, alias_map.mapping[item_id]))
        else:
            calls.append(call)
    return Program(tuple(calls))


def _json_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def load_pairs(path) -> list[dict]:
    """Read a question/program dataset (one JSON object per line)."""
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if "question" not in rec or "program" not in rec:
            raise KBPluginError(f"line {i}: record needs question and program fields")
        records.append(rec)
    return records


def augment_dataset(
    kb: KnowledgeBase,
    data: list[dict],
    n: int,
    seed: int,
    out_dir,
) -> dict:
    """Generate ``n`` KB variants plus the aligned multi-program dataset.

    Every rewritten program is executed and checked against the source
    denotation; a mismatch is a hard failure. Gold records that do not
    execute on the source KB are skipped with a warning. Reruns with the
    same inputs produce byte-identical files.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    maps = [sample_alias_map(kb, i, seed) for i in range(1, n + 1)]
    variants = [kb if m.index == 1 else apply_alias_map(kb, m) for m in maps]

    kb_files = []
    for m, variant in zip(maps, variants):
        name = f"kb_{m.index:03d}.json"
        write_kb(variant, out / name)
        kb_files.append(name)

    records: list[AugmentedRecord] = []
    skipped: list[dict] = []
    for rec in data:
        question, program_text = rec["question"], rec["program"]
        try:
            gold = kopl.parse_program(program_text)
            source_key = kopl.denotation_key(kopl.execute(kb, gold))
        except KBPluginError as exc:
            logger.warning("skipping record %r: %s", question, exc)
            skipped.append({"question": question, "error": str(exc)})
            continue
        programs = []
        for m, variant in zip(maps, variants):
            rewritten = rewrite_program(kb, gold, m)
            got = kopl.denotation_key(kopl.execute(variant, rewritten))
            if got != source_key:
                raise AugmentError(
                    f"answer changed for {question!r} on variant {m.index}: "
                    f"{rewritten.text()!r}"
                )
            programs.append(rewritten.text())
        records.append(AugmentedRecord(question=question, programs=tuple(programs)))

    data_file = "augmented.jsonl"
    with open(out / data_file, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_json_line({"question": rec.question, "programs": list(rec.programs)}) + "\n")

    # how many schema names actually differ between each pair of variants
    name_diffs = []
    for i in range(n):
        for j in range(i + 1, n):
            count = sum(
                1
                for item_id in maps[i].mapping
                if maps[i].mapping[item_id] != maps[j].mapping[item_id]
            )
            name_diffs.append([i + 1, j + 1, count])

    manifest = {
        "n": n,
        "seed": seed,
        "kb_files": kb_files,
        "data_file": data_file,
        "alias_digests": [m.digest() for m in maps],
        "records": len(records),
        "skipped": skipped,
        "pairwise_name_differences": name_diffs,
        "verified_programs": len(records) * n,
        "violations": 0,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return manifest
