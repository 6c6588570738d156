"""Retrieval-augmented term typing: retrieve a hint, prompt a model, parse its answer."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import requests

from .embed import EmbedderConfig, embed
from .errors import ConfigError, TransportError
from .ingest import TermRecord
from .tower import SemanticTower, TowerMatch, search_top_k

BASELINE_TEMPLATE = "Give the entity for the term {X}. Select the answer from this list {Y}"
RAG_TEMPLATE = BASELINE_TEMPLATE + " relying on the search result {Z}"

_PLACEHOLDER = re.compile(r"\{([XYZ])\}")


@dataclass(frozen=True)
class PromptTemplate:
    mode: str
    text: str

    def __post_init__(self):
        if self.mode not in ("baseline", "rag"):
            raise ConfigError(f"unknown prompt mode {self.mode!r}")
        present = set(_PLACEHOLDER.findall(self.text))
        wanted = {"X", "Y", "Z"} if self.mode == "rag" else {"X", "Y"}
        if present != wanted:
            raise ConfigError(
                f"{self.mode} template must use placeholders {sorted(wanted)}, found {sorted(present)}"
            )

    @classmethod
    def for_mode(cls, mode: str) -> "PromptTemplate":
        return cls(mode, RAG_TEMPLATE if mode == "rag" else BASELINE_TEMPLATE)


@dataclass(frozen=True)
class LlmConfig:
    """Which model answers prompts.

    ``echo_hint`` answers with the retrieval hint, ``scripted`` looks the term
    up in ``script``, and ``remote`` POSTs ``{"prompt": ...}`` to ``endpoint``
    and reads ``{"answer": ...}`` back.
    """

    kind: str = "echo_hint"
    endpoint: str | None = None
    script: dict = field(default_factory=dict)
    timeout: float = 120.0

    def __post_init__(self):
        if self.kind not in ("echo_hint", "scripted", "remote"):
            raise ConfigError(f"unknown LLM kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("remote LLM requires an endpoint")
        if self.kind == "scripted" and not self.script:
            raise ConfigError("scripted LLM requires a script")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.endpoint:
            out["endpoint"] = self.endpoint
        if self.script:
            out["script"] = dict(self.script)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LlmConfig":
        known = {"kind", "endpoint", "script", "timeout"}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class Prediction:
    record_id: str
    term: str
    predicted_type: str
    hint: str | None = None
    hint_score: float | None = None
    raw_answer: str = ""
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        return {
            "id": self.record_id,
            "term": self.term,
            "predicted": self.predicted_type,
            "hint": self.hint,
            "hint_score": self.hint_score,
            "raw_answer": self.raw_answer,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Prediction":
        return cls(
            record_id=data["id"],
            term=data["term"],
            predicted_type=data["predicted"],
            hint=data.get("hint"),
            hint_score=data.get("hint_score"),
            raw_answer=data.get("raw_answer", ""),
            error=data.get("error"),
        )


def render_types(types: Sequence[str]) -> str:
    return ", ".join(types)


def compose_prompt(template: PromptTemplate, term: str, types: Sequence[str], hint: str | None = None) -> str:
    if template.mode == "rag" and hint is None:
        raise ValueError("rag prompts need a retrieval hint")
    fills = {"X": term, "Y": render_types(types), "Z": hint if hint is not None else ""}
    # one pass, so a term containing "{Y}" is never substituted twice
    return _PLACEHOLDER.sub(lambda m: fills[m.group(1)], template.text)


def query_text(term: str, sentence: str | None = None) -> str:
    return f"{term} {sentence}" if sentence else term


def retrieve_hint(
    tower: SemanticTower,
    term: str,
    sentence: str | None,
    embedder: EmbedderConfig,
) -> TowerMatch:
    if len(tower) == 0:
        raise ValueError("cannot retrieve from an empty tower")
    return search_top_k(tower, embed(query_text(term, sentence), embedder), 1)[0]


def _word_pattern(label: str) -> re.Pattern:
    return re.compile(r"(?<!\w)" + re.escape(label.casefold()) + r"(?!\w)")


def parse_answer(raw: str, types: Sequence[str], fallback: str | None = None) -> str:
    """Map free model text onto one inventory type; never returns anything outside ``types``.

    Order of preference: exact match after trimming and case folding, then
    the type whose whole-word occurrence starts earliest (inventory order
    breaks ties), then ``fallback`` if it is a known type, then ``types[0]``.
    """
    if not types:
        raise ValueError("type inventory is empty")
    folded = raw.strip().casefold()
    for t in types:
        if t.strip().casefold() == folded:
            return t
    best = None
    for rank, t in enumerate(types):
        m = _word_pattern(t.strip()).search(folded) if t.strip() else None
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), rank, t)
    if best is not None:
        return best[2]
    if fallback is not None and fallback in types:
        return fallback
    return types[0]


def ask_llm(llm: LlmConfig, prompt: str, term: str, hint: str | None) -> str:
    if llm.kind == "echo_hint":
        return hint or ""
    if llm.kind == "scripted":
        return str(llm.script.get(term, ""))
    try:
        resp = requests.post(llm.endpoint, json={"prompt": prompt}, timeout=llm.timeout)
        resp.raise_for_status()
        payload = resp.json()
    except (requests.RequestException, ValueError) as exc:
        raise TransportError(llm.endpoint, exc) from exc
    answer = payload.get("answer") if isinstance(payload, dict) else None
    if not isinstance(answer, str):
        raise TransportError(llm.endpoint, "response lacks a string 'answer'")
    return answer


def type_term(
    record: TermRecord,
    mode: str,
    tower: SemanticTower | None,
    llm: LlmConfig,
    embedder: EmbedderConfig,
    types: Sequence[str],
    template: PromptTemplate | None = None,
) -> Prediction:
    """Type one record. Raises :class:`TransportError` if the model backend fails."""
    template = template or PromptTemplate.for_mode(mode)
    if template.mode != mode:
        raise ConfigError(f"template mode {template.mode!r} does not match {mode!r}")
    match = None
    if mode == "rag":
        if tower is None:
            raise ConfigError("rag mode needs a semantic tower")
        match = retrieve_hint(tower, record.term, record.sentence, embedder)
    hint = match.type_label if match else None
    prompt = compose_prompt(template, record.term, types, hint)
    raw = ask_llm(llm, prompt, record.term, hint)
    return Prediction(
        record_id=record.id,
        term=record.term,
        predicted_type=parse_answer(raw, types, fallback=hint),
        hint=hint,
        hint_score=match.score if match else None,
        raw_answer=raw,
    )
