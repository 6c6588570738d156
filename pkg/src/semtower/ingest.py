"""Wikidata semantic-set fetching and term-typing dataset loading."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import re
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import requests

from .errors import FormatError, SparqlParseError, TransportError
from .normalize import ALL_PROPERTIES, SemanticSet

log = logging.getLogger(__name__)

WIKIDATA_ENDPOINT = "https://query.wikidata.org/sparql"
SPARQL_ACCEPT = "application/sparql-results+json"
USER_AGENT = "semtower/0.1 (semantic tower builder; https://query.wikidata.org/)"


@dataclass
class TermRecord:
    id: str
    term: str
    sentence: str | None = None
    gold_type: str | None = None

    def __post_init__(self):
        if not self.term:
            raise ValueError(f"record {self.id!r} has an empty term")

    def to_dict(self) -> dict:
        out = {"id": self.id, "term": self.term}
        if self.sentence is not None:
            out["sentence"] = self.sentence
        if self.gold_type is not None:
            out["type"] = self.gold_type
        return out


@dataclass
class Dataset:
    name: str
    records: list[TermRecord]
    type_inventory: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.type_inventory:
            self.type_inventory = inventory_of(self.records)
        if len(set(self.type_inventory)) != len(self.type_inventory):
            raise ValueError(f"dataset {self.name!r}: duplicate labels in type inventory")
        known = set(self.type_inventory)
        for r in self.records:
            if r.gold_type is not None and r.gold_type not in known:
                raise ValueError(f"record {r.id!r}: type {r.gold_type!r} not in inventory")

    def __len__(self):
        return len(self.records)

    @property
    def labeled(self) -> bool:
        return all(r.gold_type is not None for r in self.records)

    def with_records(self, records: list[TermRecord], name: str | None = None) -> "Dataset":
        """A new dataset over ``records`` with the inventory recomputed in first-appearance order."""
        return Dataset(name or self.name, list(records))


@dataclass(frozen=True)
class DatasetStats:
    n_records: int
    n_types: int
    per_type: dict
    n_unlabeled: int = 0

    def to_dict(self) -> dict:
        return {
            "records": self.n_records,
            "types": self.n_types,
            "unlabeled": self.n_unlabeled,
            "per_type": dict(self.per_type),
        }


@dataclass(frozen=True)
class SparqlQuerySpec:
    endpoint: str
    term_type: str
    properties: tuple[str, ...]
    qid: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "properties", tuple(self.properties))
        unknown = [p for p in self.properties if p not in ALL_PROPERTIES]
        if unknown:
            raise ValueError(f"unknown semantic properties: {unknown}")
        if self.qid is not None and not re.fullmatch(r"Q\d+", self.qid):
            raise ValueError(f"not a Wikidata item id: {self.qid!r}")


def inventory_of(records: Sequence[TermRecord]) -> list[str]:
    seen = {}
    for r in records:
        if r.gold_type is not None and r.gold_type not in seen:
            seen[r.gold_type] = None
    return list(seen)


# -- SPARQL -----------------------------------------------------------------


def load_template(prop: str, templates_dir: str | Path | None = None) -> str:
    if templates_dir is not None:
        return (Path(templates_dir) / f"{prop}.rq").read_text(encoding="utf-8")
    return resources.files("semtower").joinpath(f"data/sparql/{prop}.rq").read_text(encoding="utf-8")


def load_qid_map(path: str | Path | None = None) -> dict[str, str]:
    """Term type -> Wikidata QID. ``None`` loads the bundled WordNet mapping."""
    if path is None:
        text = resources.files("semtower").joinpath("data/qids_wordnet.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
        raise FormatError(path or "qids_wordnet.json", "QID map must be an object of strings")
    return data


def _sparql_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def render_query(spec: SparqlQuerySpec, prop: str, templates_dir: str | Path | None = None) -> str:
    if spec.qid:
        clause = f"VALUES ?item {{ wd:{spec.qid} }}"
    else:
        clause = f"?item rdfs:label {_sparql_string(spec.term_type)}@en ."
    return load_template(prop, templates_dir).replace("{item_clause}", clause)


def cache_path(cache_dir: str | Path, term_type: str, prop: str) -> Path:
    slug = re.sub(r"[^a-z0-9]+", "-", term_type.lower()).strip("-")[:40] or "type"
    digest = hashlib.sha1(term_type.encode("utf-8")).hexdigest()[:10]
    return Path(cache_dir) / f"{slug}-{digest}.{prop}.json"


def _write_atomic(path: Path, body: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_sparql_values(body: str) -> list[str]:
    """Extract the first projected variable's values from a SPARQL JSON result body."""
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise SparqlParseError("response is not JSON", body) from exc
    try:
        variables = doc["head"]["vars"]
        bindings = doc["results"]["bindings"]
    except (KeyError, TypeError) as exc:
        raise SparqlParseError("response lacks head.vars / results.bindings", body) from exc
    if not isinstance(variables, list) or not isinstance(bindings, list):
        raise SparqlParseError("head.vars and results.bindings must be lists", body)
    if not variables:
        return []
    var = variables[0]
    values = []
    for b in bindings:
        if not isinstance(b, dict):
            raise SparqlParseError("binding is not an object", json.dumps(b))
        cell = b.get(var)
        if cell is None:
            continue
        if not isinstance(cell, dict) or not isinstance(cell.get("value"), str):
            raise SparqlParseError(f"binding for ?{var} has no string value", json.dumps(b))
        values.append(cell["value"])
    return values


def _http_get(endpoint: str, query: str, session=None, timeout: float = 60.0) -> str:
    getter = session.get if session is not None else requests.get
    try:
        resp = getter(
            endpoint,
            params={"query": query},
            headers={"Accept": SPARQL_ACCEPT, "User-Agent": USER_AGENT},
            timeout=timeout,
        )
        resp.raise_for_status()
    except requests.RequestException as exc:
        raise TransportError(endpoint, exc) from exc
    return resp.text


def fetch_semantic_set(
    spec: SparqlQuerySpec,
    cache_dir: str | Path | None = None,
    *,
    offline: bool = False,
    templates_dir: str | Path | None = None,
    session=None,
) -> SemanticSet:
    """Run one query per property and collect English value labels.

    Response bodies are cached verbatim under ``cache_dir`` keyed by
    (term type, property). With ``offline=True`` only the cache is read and
    a miss raises ``FileNotFoundError``.
    """
    values = {}
    for prop in spec.properties:
        cached = cache_path(cache_dir, spec.term_type, prop) if cache_dir is not None else None
        if cached is not None and cached.is_file():
            body = cached.read_text(encoding="utf-8")
        elif offline:
            raise FileNotFoundError(f"no cached response for ({spec.term_type!r}, {prop!r}) in {cache_dir}")
        else:
            query = render_query(spec, prop, templates_dir)
            log.debug("querying %s for %s/%s", spec.endpoint, spec.term_type, prop)
            body = _http_get(spec.endpoint, query, session=session)
            # validate before caching so a bad body is never persisted
            parse_sparql_values(body)
            if cached is not None:
                _write_atomic(cached, body)
        values[prop] = parse_sparql_values(body)
    return SemanticSet(spec.term_type, values)


def save_semantic_sets(domain: str, sets: Sequence[SemanticSet], path: str | Path) -> None:
    doc = {"domain": domain, "sets": [s.to_dict() for s in sets]}
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_semantic_sets(path: str | Path) -> tuple[str | None, list[SemanticSet]]:
    """Read a semantic-sets file: ``{"domain": ..., "sets": [...]}`` or a bare list of sets."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(path, f"invalid JSON ({exc.msg})", exc.lineno) from exc
    domain = None
    if isinstance(doc, dict):
        domain = doc.get("domain")
        doc = doc.get("sets")
    if not isinstance(doc, list):
        raise FormatError(path, "expected a list of semantic sets")
    try:
        return domain, [SemanticSet.from_dict(d) for d in doc]
    except (ValueError, AttributeError) as exc:
        raise FormatError(path, str(exc)) from exc


# -- datasets ---------------------------------------------------------------


def _gold_from(value, path, lineno):
    if value is None or value == "":
        return None
    if isinstance(value, list):
        if len(value) != 1:
            raise FormatError(path, f"expected exactly one type, got {len(value)}", lineno)
        value = value[0]
    if not isinstance(value, str):
        raise FormatError(path, "'type' must be a string", lineno)
    return value


def _record_from(obj: dict, path, lineno: int) -> TermRecord:
    term = obj.get("term")
    if not isinstance(term, str) or not term.strip():
        raise FormatError(path, "row is missing a non-empty 'term'", lineno)
    rid = obj.get("id", obj.get("ID"))
    rid = str(lineno) if rid is None or rid == "" else str(rid)
    sentence = obj.get("sentence")
    if sentence is not None and not isinstance(sentence, str):
        raise FormatError(path, "'sentence' must be a string", lineno)
    return TermRecord(rid, term, sentence or None, _gold_from(obj.get("type"), path, lineno))


def _iter_jsonl(path: Path, fh) -> Iterator[TermRecord]:
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(path, f"invalid JSON ({exc.msg})", lineno) from exc
        if not isinstance(obj, dict):
            raise FormatError(path, "expected a JSON object", lineno)
        yield _record_from(obj, path, lineno)


def _iter_tsv(path: Path, fh) -> Iterator[TermRecord]:
    reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
    header = None
    for row in reader:
        lineno = reader.line_num
        if not any(cell.strip() for cell in row):
            continue
        if header is None:
            header = [h.strip().lower() for h in row]
            if "term" not in header:
                raise FormatError(path, "TSV header must name a 'term' column", lineno)
            continue
        if len(row) > len(header):
            raise FormatError(path, f"row has {len(row)} fields, header has {len(header)}", lineno)
        yield _record_from(dict(zip(header, row)), path, lineno)


def _iter_json_array(path: Path, fh) -> Iterator[TermRecord]:
    try:
        doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(path, f"invalid JSON ({exc.msg})", exc.lineno) from exc
    if not isinstance(doc, list):
        raise FormatError(path, "expected a JSON array of records")
    for pos, obj in enumerate(doc, start=1):
        if not isinstance(obj, dict):
            raise FormatError(path, f"array element {pos} is not an object")
        # "line" is the 1-based array position for this format
        yield _record_from(obj, path, pos)


_SUFFIX_FORMATS = {".tsv": "tsv", ".json": "json"}


def _resolve_format(path: Path, format: str | None) -> str:
    if format is None:
        format = _SUFFIX_FORMATS.get(path.suffix.lower(), "jsonl")
    if format not in ("jsonl", "tsv", "json"):
        raise ValueError(f"unknown dataset format {format!r}")
    return format


def iter_records(path: str | Path, format: str | None = None) -> Iterator[TermRecord]:
    """Stream records from a dataset file without holding them all in memory."""
    path = Path(path)
    format = _resolve_format(path, format)
    with open(path, encoding="utf-8", newline="") as fh:
        if format == "tsv":
            yield from _iter_tsv(path, fh)
        elif format == "json":
            yield from _iter_json_array(path, fh)
        else:
            yield from _iter_jsonl(path, fh)


def load_dataset(path: str | Path, format: str | None = None, name: str | None = None) -> Dataset:
    """Load a term-typing dataset.

    ``format`` is ``"jsonl"``, ``"tsv"`` or ``"json"`` (one array of row
    objects, as in the challenge exports); when omitted it is taken from the
    file suffix, defaulting to JSON Lines.
    """
    path = Path(path)
    records = list(iter_records(path, format))
    if not records:
        raise FormatError(path, "dataset is empty")
    return Dataset(name or path.stem, records)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in dataset.records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def dataset_stats(d: Dataset | Iterable[TermRecord]) -> DatasetStats:
    """Exact record and per-type counts. Accepts a ``Dataset`` or any record stream."""
    records = d.records if isinstance(d, Dataset) else d
    counts = Counter()
    n = unlabeled = 0
    for r in records:
        n += 1
        if r.gold_type is None:
            unlabeled += 1
        else:
            counts[r.gold_type] += 1
    order = d.type_inventory if isinstance(d, Dataset) else list(counts)
    per_type = {t: counts[t] for t in order if counts[t]}
    return DatasetStats(n_records=n, n_types=len(per_type), per_type=per_type, n_unlabeled=unlabeled)
