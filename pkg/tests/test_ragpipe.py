import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semtower.embed import EmbedderConfig, reference_embed
from semtower.errors import ConfigError, TransportError
from semtower.ingest import TermRecord
from semtower.normalize import PrimitiveList
from semtower.ragpipe import (
    LlmConfig,
    PromptTemplate,
    compose_prompt,
    parse_answer,
    query_text,
    retrieve_hint,
    type_term,
)
from semtower.tower import SemanticTower, TowerEntry, build_tower
from tests.oracles import brute_top_k

WN_TYPES = ["noun", "verb", "adjective", "adverb"]
REF = EmbedderConfig(dim=256)
BASE = PromptTemplate.for_mode("baseline")
RAG = PromptTemplate.for_mode("rag")


def test_baseline_prompt_golden():
    assert compose_prompt(BASE, "run", WN_TYPES) == (
        "Give the entity for the term run. Select the answer from this list noun, verb, adjective, adverb"
    )


def test_rag_prompt_golden():
    assert compose_prompt(RAG, "run", WN_TYPES, "adverb") == (
        "Give the entity for the term run. Select the answer from this list noun, verb, adjective, adverb"
        " relying on the search result adverb"
    )


def test_rag_prompt_needs_hint():
    with pytest.raises(ValueError):
        compose_prompt(RAG, "run", WN_TYPES)


def test_placeholders_in_values_are_literal():
    out = compose_prompt(RAG, "{Y}{Z}", ["a"], "{X}")
    assert out == "Give the entity for the term {Y}{Z}. Select the answer from this list a relying on the search result {X}"


def test_template_validation():
    with pytest.raises(ConfigError):
        PromptTemplate("baseline", "term {X} hint {Z}")
    with pytest.raises(ConfigError):
        PromptTemplate("rag", "term {X} list {Y}")


@given(st.text(max_size=20), st.text(max_size=20))
def test_prompt_injective_in_term(a, b):
    if a != b:
        assert compose_prompt(RAG, a, WN_TYPES, "noun") != compose_prompt(RAG, b, WN_TYPES, "noun")


@pytest.mark.parametrize(
    "raw, types, fallback, expected",
    [
        ("Adverb", WN_TYPES, None, "adverb"),
        ("  NOUN \n", WN_TYPES, None, "noun"),
        ("the type is a verb here", ["noun", "verb"], None, "verb"),
        ("gibberish", WN_TYPES, "noun", "noun"),
        ("gibberish", WN_TYPES, None, "noun"),
        ("adverbial", WN_TYPES, "verb", "verb"),
        ("stream or mountains", ["mountains", "stream"], None, "stream"),
        ("section of stream", ["stream", "section of stream"], None, "section of stream"),
        ("peaks", ["peak", "peaks"], None, "peaks"),
        ("brook", ["stream", "streams"], "streams", "streams"),
        ("nothing", ["a"], "not-a-type", "a"),
    ],
)
def test_parse_answer(raw, types, fallback, expected):
    assert parse_answer(raw, types, fallback) == expected


@given(st.text(max_size=40), st.lists(st.text(min_size=1, max_size=10), min_size=1, max_size=6), st.one_of(st.none(), st.text(max_size=10)))
def test_parse_answer_total(raw, types, fallback):
    assert parse_answer(raw, types, fallback) in types


def test_query_text():
    assert query_text("Rhine") == "Rhine"
    assert query_text("run", "he took a run") == "run he took a run"


def tiny_tower():
    return build_tower(
        "wordnet",
        [PrimitiveList("adverb", ["modifies", "verb"]), PrimitiveList("noun", ["entity", "thing"])],
        REF,
    )


def test_retrieve_exact_text():
    m = retrieve_hint(tiny_tower(), "entity, thing", None, REF)
    assert m.type_label == "noun" and m.score == pytest.approx(1.0, abs=1e-12)


def test_retrieve_single_entry():
    t = build_tower("x", [PrimitiveList("only", ["z"])], REF)
    assert retrieve_hint(t, "anything at all", "with a sentence", REF).type_label == "only"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=12), min_size=1, max_size=12, unique=True), st.text(max_size=15))
def test_retrieve_matches_brute_force(labels, term):
    entries = [TowerEntry(lbl, lbl, reference_embed(lbl * 2, 32)) for lbl in labels]
    t = SemanticTower("d", 32, entries)
    cfg = EmbedderConfig(dim=32)
    q = reference_embed(term or " ", 32)
    expected = brute_top_k(labels, [e.vector.tolist() for e in entries], q.tolist(), 1)[0][0]
    assert retrieve_hint(t, term or " ", None, cfg).type_label == expected


def test_type_term_echo_hint():
    rec = TermRecord("1", "entity, thing", None, "noun")
    p = type_term(rec, "rag", tiny_tower(), LlmConfig("echo_hint"), REF, WN_TYPES)
    assert p.predicted_type == p.hint == "noun"
    assert p.raw_answer == "noun"


def test_type_term_scripted_into_the_bargain():
    rec = TermRecord("3", "into the bargain", "she got a free lunch into the bargain", "adverb")
    llm = LlmConfig("scripted", script={"into the bargain": "adverb"})
    assert type_term(rec, "rag", tiny_tower(), llm, REF, WN_TYPES).predicted_type == "adverb"
    assert type_term(rec, "baseline", None, llm, REF, WN_TYPES).predicted_type == "adverb"


def test_type_term_falls_back_to_hint():
    t = build_tower("geonames", [PrimitiveList("streams", ["streams", "water"]), PrimitiveList("mountain", ["mountain"])], REF)
    llm = LlmConfig("scripted", script={"streams, water": "creek system"})
    rec = TermRecord("9", "streams, water", None, "streams")
    p = type_term(rec, "rag", t, llm, REF, ["mountain", "stream", "streams"])
    assert p.hint == "streams"
    assert p.predicted_type == "streams"


def test_type_term_rag_needs_tower():
    with pytest.raises(ConfigError):
        type_term(TermRecord("1", "x"), "rag", None, LlmConfig(), REF, WN_TYPES)


def test_llm_config_validation():
    with pytest.raises(ConfigError):
        LlmConfig("remote")
    with pytest.raises(ConfigError):
        LlmConfig("scripted")
    with pytest.raises(ConfigError):
        LlmConfig("gpt")


def test_remote_llm_contract(http_server):
    http_server.on_post = lambda path, payload: (200, json.dumps({"answer": "It is an Adverb."}))
    llm = LlmConfig("remote", endpoint=http_server.url + "/generate")
    rec = TermRecord("1", "quickly")
    p = type_term(rec, "baseline", None, llm, REF, WN_TYPES)
    assert p.predicted_type == "adverb"
    _, path, payload, _ = http_server.requests[0]
    assert path == "/generate"
    assert payload == {"prompt": "Give the entity for the term quickly. Select the answer from this list noun, verb, adjective, adverb"}


def test_remote_llm_failure(http_server):
    http_server.on_post = lambda path, payload: (200, json.dumps({"text": "noun"}))
    llm = LlmConfig("remote", endpoint=http_server.url)
    with pytest.raises(TransportError):
        type_term(TermRecord("1", "x"), "baseline", None, llm, REF, WN_TYPES)
