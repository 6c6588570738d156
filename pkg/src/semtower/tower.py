"""Semantic tower: one embedded entry per term type, with exact cosine top-k search.

Towers persist as JSON Lines. The first line is a header
``{"domain": ..., "dim": ..., "version": 1}``; each following line is
``{"label": ..., "primitives": ..., "vector": [...]}``. Floats are written
with Python's shortest round-trip repr, so vectors reload bit-for-bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embed import EmbedderConfig, cosine, embed_many
from .errors import DimensionMismatchError, DuplicateLabelError, FormatError
from .normalize import PrimitiveList, primitives_to_text

FORMAT_VERSION = 1

# Slack between the vectorised prefilter and the scalar rescore; far larger
# than float64 rounding for unit-scale cosines.
_CANDIDATE_SLACK = 1e-9


@dataclass(frozen=True)
class TowerEntry:
    type_label: str
    primitives_text: str
    vector: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, TowerEntry):
            return NotImplemented
        return (
            self.type_label == other.type_label
            and self.primitives_text == other.primitives_text
            and self.vector.shape == other.vector.shape
            and self.vector.tobytes() == other.vector.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True)
class TowerMatch:
    type_label: str
    score: float


class SemanticTower:
    """An immutable vector store over term-type entries.

    The index is a contiguous ``(n, dim)`` matrix plus precomputed row norms.
    It only narrows the candidate set; final scores always come from
    :func:`semtower.embed.cosine`, so indexed and unindexed search agree
    exactly.
    """

    def __init__(self, domain: str, dim: int, entries: Iterable[TowerEntry]):
        if not isinstance(dim, int) or dim < 1:
            raise ValueError(f"tower dim must be a positive integer, got {dim!r}")
        entries = tuple(entries)
        seen = set()
        for e in entries:
            if not e.type_label:
                raise ValueError("tower entry with empty type label")
            if e.type_label in seen:
                raise DuplicateLabelError(e.type_label)
            seen.add(e.type_label)
            if e.vector.ndim != 1 or e.vector.shape[0] != dim:
                raise DimensionMismatchError(dim, e.vector.shape[0], f"entry {e.type_label!r}")
            if not np.all(np.isfinite(e.vector)):
                raise ValueError(f"entry {e.type_label!r} has non-finite components")
        self.domain = domain
        self.dim = dim
        self.entries = entries
        self._labels = [e.type_label for e in entries]
        if entries:
            self._matrix = np.ascontiguousarray(np.stack([e.vector for e in entries]), dtype=np.float64)
        else:
            self._matrix = np.zeros((0, dim), dtype=np.float64)
        self._matrix.flags.writeable = False
        self._norms = np.sqrt(np.einsum("ij,ij->i", self._matrix, self._matrix))

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self) -> list[str]:
        return list(self._labels)

    def entry(self, label: str) -> TowerEntry:
        for e in self.entries:
            if e.type_label == label:
                return e
        raise KeyError(label)

    def __eq__(self, other):
        if not isinstance(other, SemanticTower):
            return NotImplemented
        return self.domain == other.domain and self.dim == other.dim and self.entries == other.entries

    __hash__ = None

    def __repr__(self):
        return f"SemanticTower(domain={self.domain!r}, dim={self.dim}, entries={len(self.entries)})"

    def _prefilter(self, query: np.ndarray, k: int) -> np.ndarray:
        qn = float(np.linalg.norm(query))
        if qn == 0.0:
            return np.arange(len(self.entries))
        denom = self._norms * qn
        dots = self._matrix @ query
        scores = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
        if k >= len(scores):
            return np.arange(len(scores))
        kth = np.partition(scores, len(scores) - k)[len(scores) - k]
        return np.flatnonzero(scores >= kth - _CANDIDATE_SLACK)


def _rank(matches: list[TowerMatch], k: int) -> list[TowerMatch]:
    matches.sort(key=lambda m: (-m.score, m.type_label))
    return matches[:k]


def search_top_k(tower: SemanticTower, query, k: int = 1, use_index: bool = True) -> list[TowerMatch]:
    """Exact top-``k`` by cosine, descending; ties go to the smaller label."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != tower.dim:
        raise DimensionMismatchError(tower.dim, query.shape[0] if query.ndim else 0, "query")
    if use_index:
        candidates = tower._prefilter(query, k)
    else:
        candidates = range(len(tower.entries))
    matches = [
        TowerMatch(tower.entries[i].type_label, cosine(tower.entries[i].vector, query))
        for i in candidates
    ]
    return _rank(matches, k)


def build_tower(
    domain: str,
    primitive_lists: Sequence[PrimitiveList],
    embedder: EmbedderConfig,
) -> SemanticTower:
    if not primitive_lists:
        raise ValueError("cannot build a tower from zero primitive lists")
    seen = set()
    for p in primitive_lists:
        if p.type_label in seen:
            raise DuplicateLabelError(p.type_label)
        seen.add(p.type_label)
    texts = [primitives_to_text(p) for p in primitive_lists]
    vectors = embed_many(texts, embedder)
    entries = [
        TowerEntry(p.type_label, text, vec)
        for p, text, vec in zip(primitive_lists, texts, vectors)
    ]
    return SemanticTower(domain, embedder.dim, entries)


def save_tower(tower: SemanticTower, path: str | Path) -> None:
    path = Path(path)
    header = {"domain": tower.domain, "dim": tower.dim, "version": FORMAT_VERSION}
    lines = [json.dumps(header, ensure_ascii=False)]
    for e in tower.entries:
        row = {
            "label": e.type_label,
            "primitives": e.primitives_text,
            "vector": [float(x) for x in e.vector],
        }
        lines.append(json.dumps(row, ensure_ascii=False, allow_nan=False))
    data = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write tower file: {exc.strerror}", str(path)) from exc


def _parse_line(path: Path, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(path, f"invalid JSON ({exc.msg})", lineno) from exc
    if not isinstance(obj, dict):
        raise FormatError(path, "expected a JSON object", lineno)
    return obj


def load_tower(path: str | Path) -> SemanticTower:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"tower file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        raw_lines = fh.read().split("\n")

    header = None
    entries = []
    seen = set()
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        obj = _parse_line(path, lineno, line)
        if header is None:
            dim = obj.get("dim")
            if not isinstance(obj.get("domain"), str) or not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
                raise FormatError(path, "header must carry a string 'domain' and a positive integer 'dim'", lineno)
            if obj.get("version", FORMAT_VERSION) != FORMAT_VERSION:
                raise FormatError(path, f"unsupported tower version {obj.get('version')!r}", lineno)
            header = obj
            continue
        label = obj.get("label")
        prims = obj.get("primitives", "")
        vec = obj.get("vector")
        if not isinstance(label, str) or not label:
            raise FormatError(path, "entry needs a non-empty string 'label'", lineno)
        if not isinstance(prims, str):
            raise FormatError(path, "'primitives' must be a string", lineno)
        if not isinstance(vec, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in vec
        ):
            raise FormatError(path, "'vector' must be a list of numbers", lineno)
        if len(vec) != header["dim"]:
            raise FormatError(path, f"vector has {len(vec)} components, header dim is {header['dim']}", lineno)
        if not all(math.isfinite(x) for x in vec):
            raise FormatError(path, "vector has non-finite components", lineno)
        if label in seen:
            raise DuplicateLabelError(label)
        seen.add(label)
        entries.append(TowerEntry(label, prims, np.asarray(vec, dtype=np.float64)))

    if header is None:
        raise FormatError(path, "missing header line")
    if not entries:
        raise FormatError(path, "tower has no entries")
    return SemanticTower(header["domain"], header["dim"], entries)
