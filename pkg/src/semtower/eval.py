"""Micro-averaged scoring and the experiment runner."""
from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .embed import EmbedderConfig
from .errors import ConfigError, TransportError
from .ingest import Dataset, TermRecord, load_dataset
from .ragpipe import LlmConfig, Prediction, type_term
from .tower import SemanticTower, load_tower

log = logging.getLogger(__name__)

FAILED = "<failed>"


@dataclass
class ExperimentConfig:
    name: str
    dataset_path: Path
    mode: str = "baseline"
    tower_path: Path | None = None
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    output_path: Path | None = None
    types: list[str] | None = None
    dataset_format: str | None = None
    jobs: int = 1

    def __post_init__(self):
        self.dataset_path = Path(self.dataset_path)
        if self.tower_path is not None:
            self.tower_path = Path(self.tower_path)
        if self.output_path is not None:
            self.output_path = Path(self.output_path)
        if self.mode not in ("baseline", "rag"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "rag" and self.tower_path is None:
            raise ConfigError(f"experiment {self.name!r}: rag mode requires tower_path")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        """Build a config from parsed JSON; relative paths resolve against ``base_dir``."""
        base = Path(base_dir)

        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            return p if p.is_absolute() else base / p

        try:
            return cls(
                name=data["name"],
                dataset_path=resolve(data["dataset_path"]),
                mode=data.get("mode", "baseline"),
                tower_path=resolve(data.get("tower_path")),
                embedder=EmbedderConfig.from_dict(data.get("embedder", {})),
                llm=LlmConfig.from_dict(data.get("llm", {})),
                output_path=resolve(data.get("output_path")),
                types=data.get("types"),
                dataset_format=data.get("dataset_format"),
                jobs=data.get("jobs", 1),
            )
        except KeyError as exc:
            raise ConfigError(f"experiment config is missing {exc.args[0]!r}") from exc
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(data, base_dir=path.parent)


@dataclass
class ExperimentReport:
    name: str
    n_records: int
    precision: float
    recall: float
    f1: float
    per_type_counts: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    dataset: str = ""
    dataset_fingerprint: str = ""
    mode: str = "baseline"
    confusion: dict = field(default_factory=dict)
    predictions: list = field(default_factory=list)
    golds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "dataset": self.dataset,
            "dataset_fingerprint": self.dataset_fingerprint,
            "n_records": self.n_records,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_type_counts": self.per_type_counts,
            "confusion": self.confusion,
            "failures": list(self.failures),
            "predictions": [dict(p.to_dict(), gold=self.golds.get(p.record_id)) for p in self.predictions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        return cls(
            name=data["name"],
            n_records=data["n_records"],
            precision=data["precision"],
            recall=data["recall"],
            f1=data["f1"],
            per_type_counts=data.get("per_type_counts", {}),
            failures=list(data.get("failures", [])),
            dataset=data.get("dataset", ""),
            dataset_fingerprint=data.get("dataset_fingerprint", ""),
            mode=data.get("mode", "baseline"),
            confusion=data.get("confusion", {}),
            predictions=[Prediction.from_dict(p) for p in data.get("predictions", [])],
            golds={p["id"]: p["gold"] for p in data.get("predictions", []) if p.get("gold") is not None},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ReportDelta:
    a: str
    b: str
    delta_f1: float
    delta_precision: float
    delta_recall: float
    confusion_delta: dict
    gained: list
    lost: list

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "delta_f1": self.delta_f1,
            "delta_precision": self.delta_precision,
            "delta_recall": self.delta_recall,
            "confusion_delta": self.confusion_delta,
            "gained": list(self.gained),
            "lost": list(self.lost),
        }


def micro_metrics(predictions: Sequence[Prediction], golds: Sequence[TermRecord]) -> tuple[float, float, float]:
    """Single-label micro precision, recall and F1; all three equal accuracy.

    Failed predictions count as wrong.
    """
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions for {len(golds)} gold records")
    if not golds:
        raise ValueError("no records to score")
    correct = 0
    for p, g in zip(predictions, golds):
        if p.record_id != g.id:
            raise ValueError(f"prediction {p.record_id!r} is aligned with gold record {g.id!r}")
        if g.gold_type is None:
            raise ValueError(f"gold record {g.id!r} has no type")
        if not p.failed and p.predicted_type == g.gold_type:
            correct += 1
    score = correct / len(golds)
    return score, score, score


def dataset_fingerprint(d: Dataset) -> str:
    h = hashlib.sha256()
    for r in d.records:
        h.update(json.dumps([r.id, r.term, r.gold_type], ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _tally(predictions, golds, types):
    per_type = {t: {"gold": 0, "predicted": 0, "correct": 0} for t in types}
    confusion = defaultdict(Counter)
    for p, g in zip(predictions, golds):
        pred = FAILED if p.failed else p.predicted_type
        per_type.setdefault(g.gold_type, {"gold": 0, "predicted": 0, "correct": 0})["gold"] += 1
        if not p.failed:
            per_type.setdefault(pred, {"gold": 0, "predicted": 0, "correct": 0})["predicted"] += 1
            if pred == g.gold_type:
                per_type[pred]["correct"] += 1
        confusion[g.gold_type][pred] += 1
    return per_type, {gold: dict(row) for gold, row in confusion.items()}


def predict_dataset(
    dataset: Dataset,
    mode: str,
    tower: SemanticTower | None,
    llm: LlmConfig,
    embedder: EmbedderConfig,
    types: Sequence[str],
    jobs: int = 1,
) -> list[Prediction]:
    """Type every record, keeping input order. Backend failures become failed predictions."""

    def one(record: TermRecord) -> Prediction:
        try:
            return type_term(record, mode, tower, llm, embedder, types)
        except TransportError as exc:
            log.warning("record %s failed: %s", record.id, exc)
            return Prediction(record.id, record.term, "", error=str(exc))

    if jobs <= 1:
        return [one(r) for r in dataset.records]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, dataset.records))


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    if not cfg.dataset_path.is_file():
        raise ConfigError(f"dataset not found: {cfg.dataset_path}")
    tower = None
    if cfg.mode == "rag":
        if not cfg.tower_path.is_file():
            raise ConfigError(f"tower not found: {cfg.tower_path}")
        tower = load_tower(cfg.tower_path)
        if tower.dim != cfg.embedder.dim:
            raise ConfigError(f"tower dim {tower.dim} differs from embedder dim {cfg.embedder.dim}")
    dataset = load_dataset(cfg.dataset_path, cfg.dataset_format)
    if not dataset.labeled:
        raise ConfigError(f"{cfg.dataset_path}: every record needs a gold type to be evaluated")
    types = list(cfg.types) if cfg.types else list(dataset.type_inventory)
    if not types:
        raise ConfigError("empty type inventory")

    predictions = predict_dataset(dataset, cfg.mode, tower, cfg.llm, cfg.embedder, types, cfg.jobs)
    precision, recall, f1 = micro_metrics(predictions, dataset.records)
    per_type, confusion = _tally(predictions, dataset.records, types)
    report = ExperimentReport(
        name=cfg.name,
        n_records=len(dataset.records),
        precision=precision,
        recall=recall,
        f1=f1,
        per_type_counts=per_type,
        failures=[p.record_id for p in predictions if p.failed],
        dataset=dataset.name,
        dataset_fingerprint=dataset_fingerprint(dataset),
        mode=cfg.mode,
        confusion=confusion,
        predictions=predictions,
        golds={r.id: r.gold_type for r in dataset.records},
    )
    if cfg.output_path is not None:
        cfg.output_path.parent.mkdir(parents=True, exist_ok=True)
        report.save(cfg.output_path)
    return report


def compare_reports(a: ExperimentReport, b: ExperimentReport) -> ReportDelta:
    """Differences ``a - b``. Both reports must come from the same dataset."""
    if a.dataset_fingerprint != b.dataset_fingerprint or a.n_records != b.n_records:
        raise ValueError(f"reports {a.name!r} and {b.name!r} were computed on different datasets")
    delta = {}
    for gold in sorted(set(a.confusion) | set(b.confusion)):
        ra, rb = a.confusion.get(gold, {}), b.confusion.get(gold, {})
        cells = {pred: ra.get(pred, 0) - rb.get(pred, 0) for pred in sorted(set(ra) | set(rb))}
        cells = {k: v for k, v in cells.items() if v}
        if cells:
            delta[gold] = cells

    gained, lost = [], []
    if a.predictions and b.predictions:
        ok_b = {p.record_id: p for p in b.predictions}
        golds = a.golds
        for p in a.predictions:
            q = ok_b.get(p.record_id)
            gold = golds.get(p.record_id)
            if q is None or gold is None:
                continue
            right_a = not p.failed and p.predicted_type == gold
            right_b = not q.failed and q.predicted_type == gold
            if right_a and not right_b:
                gained.append(p.record_id)
            elif right_b and not right_a:
                lost.append(p.record_id)

    return ReportDelta(
        a=a.name,
        b=b.name,
        delta_f1=a.f1 - b.f1,
        delta_precision=a.precision - b.precision,
        delta_recall=a.recall - b.recall,
        confusion_delta=delta,
        gained=gained,
        lost=lost,
    )


def render_table(reports: Sequence[ExperimentReport]) -> str:
    rows = [("Experiment", "F1", "Precision", "Recall")]
    rows += [(r.name, f"{r.f1:.4f}", f"{r.precision:.4f}", f"{r.recall:.4f}") for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    out = [sep]
    for i, row in enumerate(rows):
        out.append("| " + " | ".join(cell.ljust(w) for cell, w in zip(row, widths)) + " |")
        if i == 0:
            out.append(sep)
    out.append(sep)
    return "\n".join(out)
