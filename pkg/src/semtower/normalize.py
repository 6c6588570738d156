"""Turn raw semantic sets into cleaned, deduplicated lists of semantic primitives."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

WORDNET_PROPERTIES = ("subclass", "instance", "part", "represents", "description")
GEONAMES_PROPERTIES = ("subclass", "instance", "part", "category", "description")
ALL_PROPERTIES = frozenset(WORDNET_PROPERTIES + GEONAMES_PROPERTIES)

DOMAIN_PROPERTIES = {
    "wordnet": WORDNET_PROPERTIES,
    "geonames": GEONAMES_PROPERTIES,
}

# Letters and digits only; underscore is a separator.
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass
class SemanticSet:
    """Raw property values fetched for one term type, keyed by property name in domain order."""

    type_label: str
    values: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.values:
            if not name:
                raise ValueError(f"empty property name in semantic set {self.type_label!r}")

    def to_dict(self) -> dict:
        return {"type_label": self.type_label, "values": {k: list(v) for k, v in self.values.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "SemanticSet":
        label = data.get("type_label", data.get("type"))
        if not isinstance(label, str) or not label:
            raise ValueError(f"semantic set without a type label: {data!r}")
        values = data.get("values", {})
        if not isinstance(values, dict):
            raise ValueError(f"semantic set {label!r}: 'values' must be an object")
        out = {}
        for name, vals in values.items():
            if isinstance(vals, str):
                vals = [vals]
            out[name] = [str(v) for v in vals]
        return cls(label, out)


@dataclass
class PrimitiveList:
    type_label: str
    primitives: list[str] = field(default_factory=list)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one word per line, ``#`` comments). ``None`` loads the bundled English list."""
    if path is None:
        text = resources.files("semtower").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(line.lower())
    return frozenset(words)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def clean_tokens(tokens: Iterable[str], stopwords: Iterable[str] = ()) -> list[str]:
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    out = []
    for tok in tokens:
        low = tok.lower()
        if low not in stop:
            out.append(low)
    return out


def build_primitives(semantic_set: SemanticSet, stopwords: Iterable[str] = ()) -> PrimitiveList:
    """Tokenize, clean, and prune every property value of ``semantic_set``.

    Values are visited in property order; within the result the first
    occurrence of each token wins. A case mapping that yields a combining
    mark (``"İ"`` lowercases to ``"i"`` plus U+0307) has the mark dropped, so
    every primitive stays alphanumeric and one token never becomes two.
    """
    stop = frozenset(stopwords)
    seen = set()
    primitives = []
    for values in semantic_set.values.values():
        for value in values:
            for tok in clean_tokens(tokenize(value), stop):
                if not tok.isalnum():
                    tok = "".join(ch for ch in tok if ch.isalnum())
                    if tok in stop:
                        continue
                if tok and tok not in seen:
                    seen.add(tok)
                    primitives.append(tok)
    return PrimitiveList(semantic_set.type_label, primitives)


def primitives_to_text(p: PrimitiveList) -> str:
    return ", ".join(p.primitives)
