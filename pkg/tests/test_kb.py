"""Tests for KB loading, validation, indexing, and traversal."""

import json

import pytest

from kbplugin.errors import KBLoadError, ReservedRelationError, UnknownItemError
from kbplugin.kb import (
    LiteralValue,
    build_kb,
    concept_instances,
    kb_to_document,
    load_kb,
    neighbors,
    popularity,
    stats,
)

from .kb_gen import random_kb


def brute_popularity(doc: dict, entity_id: str) -> int:
    """Oracle: scan the raw document for occurrences."""
    count = sum(1 for e, _ in doc["instance_of"] if e == entity_id)
    for head, _, tail in doc["relational"]:
        count += head == entity_id
        count += isinstance(tail, str) and tail == entity_id
    return count


class TestLoad:
    def test_fixture_counts_match_file(self, music_path, music_kb):
        doc = json.loads(music_path.read_text())
        s = stats(music_kb)
        assert s["entities"] == len(doc["entities"]) == 5
        assert s["concepts"] == len(doc["concepts"]) == 4
        assert s["relations"] == len(doc["relations"]) == 2
        assert s["relational"] == len(doc["relational"]) == 5
        assert s["relations_with_reserved"] == 4

    def test_unknown_entity_reference(self, tmp_path):
        doc = {
            "entities": [{"id": "e1", "name": "a"}],
            "relations": [{"id": "r1", "name": "likes"}],
            "relational": [["e1", "r1", "eX"]],
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(KBLoadError) as err:
            load_kb(path)
        assert err.value.kind == "referential"
        assert "eX" in str(err.value)

    def test_subclass_cycle(self):
        doc = {
            "concepts": [{"id": "c1", "name": "one"}, {"id": "c2", "name": "two"}],
            "subclass_of": [["c1", "c2"], ["c2", "c1"]],
        }
        with pytest.raises(KBLoadError) as err:
            build_kb(doc)
        assert err.value.kind == "cycle"

    def test_reserved_relation_name_rejected(self):
        doc = {"relations": [{"id": "r1", "name": "instance of"}]}
        with pytest.raises(KBLoadError):
            build_kb(doc)

    def test_duplicate_triples_warn_not_fail(self):
        doc = {
            "entities": [{"id": "e1", "name": "a"}, {"id": "e2", "name": "b"}],
            "relations": [{"id": "r1", "name": "likes"}],
            "relational": [["e1", "r1", "e2"], ["e1", "r1", "e2"]],
        }
        kb = build_kb(doc)
        assert len(kb.relational) == 1
        assert len(kb.load_warnings) == 1

    def test_load_is_pure(self, music_path):
        a, b = load_kb(music_path), load_kb(music_path)
        assert kb_to_document(a) == kb_to_document(b)

    def test_empty_name_rejected(self):
        with pytest.raises(KBLoadError):
            build_kb({"entities": [{"id": "e1", "name": ""}]})

    def test_duplicate_id_rejected(self):
        with pytest.raises(KBLoadError):
            build_kb({"entities": [{"id": "e1", "name": "a"}, {"id": "e1", "name": "b"}]})


class TestPopularity:
    def test_beatles(self, music_path, music_kb):
        doc = json.loads(music_path.read_text())
        expected = brute_popularity(doc, "e_beatles")
        assert popularity(music_kb, "e_beatles") == expected == 4

    def test_instance_only_entity(self, music_path, music_kb):
        # bass appears once as a tail and once in instance_of
        assert popularity(music_kb, "e_bass") == 2

    def test_unknown_entity(self, music_kb):
        with pytest.raises(UnknownItemError):
            popularity(music_kb, "e_missing")

    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_full_scan_agreement(self, seed):
        kb = random_kb(seed, literal_share=0.2)
        doc = kb_to_document(kb)
        for eid in kb.entities:
            assert popularity(kb, eid) == brute_popularity(doc, eid)


class TestNeighbors:
    def test_forward(self, music_kb):
        got = neighbors(music_kb, {"e_beatles"}, "r_member", "forward")
        assert got == {"e_paul", "e_john", "e_paul_tenure"}

    def test_backward(self, music_kb):
        got = neighbors(music_kb, {"e_paul"}, "r_member", "backward")
        assert got == {"e_beatles", "e_paul_tenure"}

    def test_empty_sources(self, music_kb):
        assert neighbors(music_kb, set(), "r_member", "forward") == set()

    def test_unknown_relation(self, music_kb):
        with pytest.raises(UnknownItemError):
            neighbors(music_kb, {"e_paul"}, "r_nope", "forward")

    def test_reserved_relation(self, music_kb):
        with pytest.raises(ReservedRelationError):
            neighbors(music_kb, {"e_paul"}, "instance of", "forward")

    def test_literal_tails_never_match_backward(self, travel_kb):
        assert neighbors(travel_kb, {"e_london"}, "r_population", "backward") == set()

    @pytest.mark.parametrize("seed", [21, 22])
    def test_round_trip(self, seed):
        kb = random_kb(seed)
        for rid in kb.relations:
            for eid in kb.entities:
                for tail in neighbors(kb, {eid}, rid, "forward"):
                    if isinstance(tail, str):
                        assert eid in neighbors(kb, {tail}, rid, "backward")
                for head in neighbors(kb, {eid}, rid, "backward"):
                    assert eid in neighbors(kb, {head}, rid, "forward")


class TestConceptInstances:
    def test_transitive_person(self, music_kb):
        assert concept_instances(music_kb, "c_person", transitive=True) == {"e_paul", "e_john"}

    def test_no_instances(self, travel_kb):
        # place has no direct instances, only subclass members
        assert concept_instances(travel_kb, "c_place", transitive=False) == set()

    def test_subclass_rollup(self, travel_kb):
        direct = concept_instances(travel_kb, "c_place", transitive=False)
        rolled = concept_instances(travel_kb, "c_place", transitive=True)
        assert direct == set()
        assert rolled == {"e_london", "e_rome", "e_luton", "e_heathrow", "e_fiumicino"}

    def test_superset_property(self, all_kbs):
        for kb in all_kbs.values():
            for cid in kb.concepts:
                trans = concept_instances(kb, cid, transitive=True)
                assert trans >= concept_instances(kb, cid, transitive=False)

    def test_unknown_concept(self, music_kb):
        with pytest.raises(UnknownItemError):
            concept_instances(music_kb, "c_missing")


class TestStats:
    def test_empty_kb(self):
        s = stats(build_kb({}))
        assert s["entities"] == s["concepts"] == s["relations"] == 0
        assert s["relational"] == s["instance_of"] == s["subclass_of"] == 0
        assert s["relations_with_reserved"] == 2


class TestLiteralValue:
    def test_quantity_requires_finite(self):
        with pytest.raises(ValueError):
            LiteralValue(kind="quantity", value=float("inf"))

    def test_year_requires_int(self):
        with pytest.raises(ValueError):
            LiteralValue(kind="year", value="2020")

    def test_date_validated(self):
        with pytest.raises(ValueError):
            LiteralValue(kind="date", value="2020-13-45")

    def test_unit_only_on_quantity(self):
        with pytest.raises(ValueError):
            LiteralValue(kind="string", value="x", unit="kg")

    def test_comparability(self):
        kg = LiteralValue(kind="quantity", value=70, unit="kg")
        lb = LiteralValue(kind="quantity", value=70, unit="lb")
        kg2 = LiteralValue(kind="quantity", value=80, unit="kg")
        assert kg.comparable_with(kg2)
        assert not kg.comparable_with(lb)
        assert not kg.comparable_with(LiteralValue(kind="year", value=70))

    def test_render(self):
        assert LiteralValue(kind="quantity", value=70.0, unit="kg").render() == "70 kg"
        assert LiteralValue(kind="quantity", value=70.5).render() == "70.5"
        assert LiteralValue(kind="date", value="1961-01-15").render() == "1961-01-15"
        assert LiteralValue(kind="year", value=2020).render() == "2020"
