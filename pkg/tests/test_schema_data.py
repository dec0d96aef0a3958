"""Tests for triple sampling and the triple-completion corpus."""

import json
import re

import pytest

from kbplugin import kb as kbm
from kbplugin.errors import ReservedRelationError, UnknownItemError
from kbplugin.kb import build_kb
from kbplugin.schema_data import (
    QAPair,
    SamplingConfig,
    build_pairs,
    emit_corpus,
    pick_concept,
    rank_relational_triples,
    sample_instance_triples,
    sample_relational_triples,
)

from .kb_gen import random_kb

TEMPLATE_GRAMMARS = {
    "inst_fwd": (r"^(.+) \|\| instance of$", r"^(.+)$"),
    "inst_bwd": (r"^(.+) \|\| contains instance$", r"^(.+)$"),
    "sub_fwd": (r"^(.+) \|\| subclass of$", r"^(.+)$"),
    "sub_bwd": (r"^(.+) \|\| contains subclass$", r"^(.+)$"),
    "rel_fwd": (r"^(.+) \| (.+) \|\| (.+) \| forward$", r"^(.+) \| (.+)$"),
    "rel_bwd": (r"^(.+) \| (.+) \|\| (.+) \| backward$", r"^(.+) \| (.+)$"),
    "rel_what": (r"^(.+) \| (.+) \|\| what relation \|\| (.+) \| (.+)$", r"^(.+)$"),
}


def counting_example_kb():
    """One concept with two instances, one relation with two triples."""
    return build_kb({
        "concepts": [{"id": "c1", "name": "city"}],
        "relations": [{"id": "r1", "name": "twinned with"}],
        "entities": [
            {"id": "e1", "name": "Ghent"},
            {"id": "e2", "name": "Tallinn"},
        ],
        "instance_of": [["e1", "c1"], ["e2", "c1"]],
        "subclass_of": [],
        "relational": [["e1", "r1", "e2"], ["e2", "r1", "e1"]],
    })


class TestSampling:
    def test_cap_exceeds_degree(self, music_kb):
        got = sample_instance_triples(music_kb, "c_person", 500)
        # Paul occurs three times, John twice, so Paul ranks first
        assert got == [("e_paul", "c_person"), ("e_john", "c_person")]

    def test_k_one_takes_most_popular(self, music_kb):
        assert sample_instance_triples(music_kb, "c_person", 1) == [("e_paul", "c_person")]

    def test_no_instances(self, travel_kb):
        assert sample_instance_triples(travel_kb, "c_place", 10) == []

    def test_unknown_concept(self, music_kb):
        with pytest.raises(UnknownItemError):
            sample_instance_triples(music_kb, "c_zzz", 1)

    def test_relational_order_by_min_popularity(self, music_kb):
        ranked = rank_relational_triples(music_kb, "r_member")
        brute = {}
        for t in music_kb.relational:
            if t.relation == "r_member":
                brute[(t.head, t.tail)] = min(
                    kbm.popularity(music_kb, t.head), kbm.popularity(music_kb, t.tail)
                )
        weights = [brute[(t.head, t.tail)] for t in ranked]
        assert weights == sorted(weights, reverse=True)

    def test_relational_k_cap(self, music_kb):
        assert len(sample_relational_triples(music_kb, "r_member", 2)) == 2
        assert len(sample_relational_triples(music_kb, "r_member", 99)) == 4

    def test_reserved_relation(self, music_kb):
        with pytest.raises(ReservedRelationError):
            sample_relational_triples(music_kb, "instance of", 1)

    def test_literal_triples_rank_by_head_popularity(self, travel_kb):
        ranked = rank_relational_triples(travel_kb, "r_population")
        heads = [t.head for t in ranked]
        pops = [kbm.popularity(travel_kb, h) for h in heads]
        assert pops == sorted(pops, reverse=True)


class TestPickConcept:
    def test_single_concept(self, music_kb):
        assert pick_concept(music_kb, "e_bass") == "c_instrument"

    def test_most_specific_wins(self):
        kb = build_kb({
            "concepts": [{"id": "c_person", "name": "person"}, {"id": "c_artist", "name": "artist"}],
            "entities": [{"id": "e1", "name": "Ann"}, {"id": "e2", "name": "Ben"}],
            "instance_of": [["e1", "c_person"], ["e2", "c_person"], ["e1", "c_artist"]],
        })
        assert pick_concept(kb, "e1") == "c_artist"

    def test_conceptless_entity(self):
        kb = build_kb({"entities": [{"id": "e1", "name": "stray"}]})
        with pytest.raises(UnknownItemError):
            pick_concept(kb, "e1")


class TestBuildPairs:
    def test_counting_example(self):
        pairs = build_pairs(counting_example_kb(), SamplingConfig(k=500))
        assert len(pairs) == 10
        by_template = {}
        for p in pairs:
            by_template[p.template] = by_template.get(p.template, 0) + 1
        assert by_template == {
            "inst_fwd": 2, "inst_bwd": 2, "rel_fwd": 2, "rel_bwd": 2, "rel_what": 2,
        }

    def test_paper_style_relational_pair(self, travel_kb):
        pairs = build_pairs(travel_kb, SamplingConfig(k=500))
        assert QAPair(
            query="London | citytown || transport terminus | forward",
            answer="airport | Luton airport",
            item_id="r_terminus",
            template="rel_fwd",
        ) in pairs
        assert QAPair(
            query="Luton airport | airport || transport terminus | backward",
            answer="citytown | London",
            item_id="r_terminus",
            template="rel_bwd",
        ) in pairs
        assert QAPair(
            query="London | citytown || what relation || airport | Luton airport",
            answer="transport terminus",
            item_id="r_terminus",
            template="rel_what",
        ) in pairs

    def test_subclass_pairs_unsampled(self, travel_kb):
        pairs = build_pairs(travel_kb, SamplingConfig(k=1))
        sub = [p for p in pairs if p.template.startswith("sub_")]
        assert QAPair("citytown || subclass of", "place", "c_citytown", "sub_fwd") in sub
        assert QAPair("place || contains subclass", "citytown", "c_place", "sub_bwd") in sub
        assert len(sub) == 2 * len(travel_kb.subclass_of)

    def test_literal_tail_emits_forward_only(self, travel_kb):
        pairs = build_pairs(travel_kb, SamplingConfig(k=500))
        population = [p for p in pairs if p.item_id == "r_population"]
        assert all(p.template == "rel_fwd" for p in population)
        assert QAPair(
            query="London | citytown || population | forward",
            answer="quantity | 8961989",
            item_id="r_population",
            template="rel_fwd",
        ) in population

    def test_conceptless_endpoint_skipped(self):
        kb = build_kb({
            "concepts": [{"id": "c1", "name": "thing"}],
            "relations": [{"id": "r1", "name": "近"}],
            "entities": [{"id": "e1", "name": "a"}, {"id": "e2", "name": "b"}],
            "instance_of": [["e1", "c1"]],
            "relational": [["e1", "r1", "e2"], ["e2", "r1", "e1"]],
        })
        pairs = build_pairs(kb, SamplingConfig(k=10))
        assert not any(p.template.startswith("rel_") for p in pairs)

    def test_k_validation(self):
        with pytest.raises(ValueError):
            SamplingConfig(k=0)

    def test_template_fidelity(self, all_kbs):
        for kb in all_kbs.values():
            for p in build_pairs(kb, SamplingConfig(k=500)):
                q_re, a_re = TEMPLATE_GRAMMARS[p.template]
                assert re.match(q_re, p.query), (p.template, p.query)
                assert re.match(a_re, p.answer), (p.template, p.answer)

    @pytest.mark.parametrize("seed", [41, 42])
    def test_order_law(self, seed):
        kb = random_kb(seed, n_entities=18, n_triples=30)
        k = 2
        for cid in kb.concepts:
            chosen = {e for e, _ in sample_instance_triples(kb, cid, k)}
            everyone = {e for e, c in kb.instance_of if c == cid}
            for kept in chosen:
                for dropped in everyone - chosen:
                    assert kbm.popularity(kb, kept) >= kbm.popularity(kb, dropped)


class TestEmitCorpus:
    def test_lines_and_summary(self, tmp_path):
        pairs = build_pairs(counting_example_kb(), SamplingConfig(k=500))
        out = tmp_path / "corpus.jsonl"
        summary = emit_corpus(pairs, out, kb=counting_example_kb())
        lines = out.read_text().splitlines()
        assert len(lines) == 10
        assert summary["pairs"] == 10
        assert summary["per_template"]["rel_what"] == 2
        assert summary["zero_coverage"] == []
        record = json.loads(lines[0])
        assert set(record) == {"query", "answer", "item_id", "template"}

    def test_empty_corpus(self, tmp_path):
        summary = emit_corpus([], tmp_path / "empty.jsonl", kb=build_kb({}))
        assert summary["pairs"] == 0
        assert (tmp_path / "empty.jsonl").read_text() == ""

    def test_zero_coverage_listed(self, tmp_path):
        kb = build_kb({
            "concepts": [{"id": "c1", "name": "thing"}],
            "relations": [{"id": "r_used", "name": "uses"}, {"id": "r_idle", "name": "ignores"}],
            "entities": [{"id": "e1", "name": "a"}, {"id": "e2", "name": "b"}],
            "instance_of": [["e1", "c1"], ["e2", "c1"]],
            "relational": [["e1", "r_used", "e2"]],
        })
        summary = emit_corpus(build_pairs(kb, SamplingConfig(k=5)), tmp_path / "c.jsonl", kb=kb)
        assert summary["zero_coverage"] == ["r_idle"]

    def test_deterministic_bytes(self, travel_kb, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        emit_corpus(build_pairs(travel_kb, SamplingConfig(k=3)), a)
        emit_corpus(build_pairs(travel_kb, SamplingConfig(k=3)), b)
        assert a.read_bytes() == b.read_bytes()
