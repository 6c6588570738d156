"""Command-line entry point: ``semtower <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 runtime error. Diagnostics go to
stderr; machine-readable output goes to stdout or the ``--out`` file.

Remote endpoints default to the ``SEMTOWER_EMBEDDER_URL``,
``SEMTOWER_LLM_URL`` and ``SEMTOWER_SPARQL_URL`` environment variables.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .curate import CurationPolicy, curate_subset, split
from .embed import DEFAULT_DIM, EmbedderConfig
from .errors import SemtowerError
from .eval import ExperimentConfig, ExperimentReport, compare_reports, predict_dataset, render_table, run_experiment
from .ingest import (
    WIKIDATA_ENDPOINT,
    SparqlQuerySpec,
    dataset_stats,
    fetch_semantic_set,
    iter_records,
    load_dataset,
    load_qid_map,
    load_semantic_sets,
    save_semantic_sets,
    write_dataset,
)
from .normalize import DOMAIN_PROPERTIES, build_primitives, load_stopwords
from .ragpipe import LlmConfig
from .tower import build_tower, load_tower, save_tower

log = logging.getLogger("semtower")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

SHIPPED_CONFIGS = ("WN1", "WN2", "GN1", "GN2")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _embedder_from_args(args) -> EmbedderConfig:
    endpoint = args.embedder_endpoint or os.environ.get("SEMTOWER_EMBEDDER_URL")
    return EmbedderConfig(kind=args.embedder, dim=args.dim, endpoint=endpoint)


def _llm_from_args(args) -> LlmConfig:
    script = {}
    if args.script:
        script = json.loads(Path(args.script).read_text(encoding="utf-8"))
    endpoint = args.llm_endpoint or os.environ.get("SEMTOWER_LLM_URL")
    return LlmConfig(kind=args.llm, endpoint=endpoint, script=script)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _add_embedder_flags(p):
    p.add_argument("--embedder", choices=["reference", "remote"], default="reference")
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    p.add_argument("--embedder-endpoint", help="defaults to $SEMTOWER_EMBEDDER_URL")


def cmd_fetch(args) -> int:
    properties = DOMAIN_PROPERTIES[args.domain]
    qids = load_qid_map(args.qids) if args.qids or args.domain == "wordnet" else {}
    types = args.types or list(qids)
    if not types:
        raise UsageError("fetch: give --types or a --qids mapping")
    endpoint = args.endpoint or os.environ.get("SEMTOWER_SPARQL_URL") or WIKIDATA_ENDPOINT
    sets = []
    for t in types:
        spec = SparqlQuerySpec(endpoint, t, properties, qids.get(t))
        sets.append(
            fetch_semantic_set(spec, args.cache_dir, offline=args.offline, templates_dir=args.templates)
        )
        log.info("fetched %s", t)
    if args.out:
        save_semantic_sets(args.domain, sets, args.out)
    else:
        sys.stdout.write(json.dumps({"domain": args.domain, "sets": [s.to_dict() for s in sets]}, indent=2) + "\n")
    return EXIT_OK


def cmd_build_tower(args) -> int:
    domain, sets = load_semantic_sets(args.sets)
    domain = args.domain or domain
    if not domain:
        raise UsageError("build-tower: --domain is required when the sets file has none")
    stop = load_stopwords(args.stopwords)
    prims = [build_primitives(s, stop) for s in sets]
    tower = build_tower(domain, prims, _embedder_from_args(args))
    save_tower(tower, args.out)
    log.info("wrote %d entries to %s", len(tower), args.out)
    return EXIT_OK


def cmd_curate(args) -> int:
    d = load_dataset(args.input, args.format)
    curated = curate_subset(d, CurationPolicy(args.rare_threshold, args.cap))
    if args.out:
        write_dataset(curated, args.out)
    else:
        for r in curated.records:
            sys.stdout.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    log.info("kept %d of %d records", len(curated), len(d))
    return EXIT_OK


def cmd_split(args) -> int:
    d = load_dataset(args.input, args.format)
    train, val = split(d, args.train_fraction, args.seed)
    write_dataset(train, args.train_out)
    write_dataset(val, args.val_out)
    sys.stdout.write(json.dumps({"train": len(train), "val": len(val)}) + "\n")
    return EXIT_OK


def cmd_type(args) -> int:
    d = load_dataset(args.input, args.format)
    types = args.types or d.type_inventory
    if not types:
        raise UsageError("type: unlabeled input needs --types")
    if args.mode == "rag" and not args.tower:
        raise UsageError("type: --mode rag requires --tower")
    tower = load_tower(args.tower) if args.tower else None
    preds = predict_dataset(d, args.mode, tower, _llm_from_args(args), _embedder_from_args(args), types, args.jobs)
    lines = "".join(json.dumps(p.to_dict(), ensure_ascii=False) + "\n" for p in preds)
    _emit(lines, args.out)
    return EXIT_OK


def _load_config_dict(ref: str) -> tuple[dict, Path]:
    if ref in SHIPPED_CONFIGS and not Path(ref).exists():
        text = resources.files("semtower").joinpath(f"configs/{ref}.json").read_text(encoding="utf-8")
        return json.loads(text), Path.cwd()
    path = Path(ref)
    return json.loads(path.read_text(encoding="utf-8")), path.parent


def cmd_evaluate(args) -> int:
    data, base = _load_config_dict(args.config)
    overrides = {
        "dataset_path": args.dataset and str(Path(args.dataset).resolve()),
        "tower_path": args.tower and str(Path(args.tower).resolve()),
        "output_path": args.out and str(Path(args.out).resolve()),
        "jobs": args.jobs,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.llm:
        data["llm"] = {"kind": args.llm}
    llm = data.setdefault("llm", {})
    if llm.get("kind") == "remote" and not llm.get("endpoint"):
        llm["endpoint"] = os.environ.get("SEMTOWER_LLM_URL")
    emb = data.setdefault("embedder", {})
    if args.embedder:
        emb["kind"] = args.embedder
    if emb.get("kind") == "remote" and not emb.get("endpoint"):
        emb["endpoint"] = os.environ.get("SEMTOWER_EMBEDDER_URL")

    cfg = ExperimentConfig.from_dict(data, base_dir=base)
    report = run_experiment(cfg)
    if cfg.output_path is not None:
        sys.stdout.write(render_table([report]) + "\n")
    else:
        sys.stdout.write(json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n")
        sys.stderr.write(render_table([report]) + "\n")
    if args.compare:
        other = ExperimentReport.load(args.compare)
        delta = compare_reports(report, other)
        sys.stderr.write(render_table([report, other]) + "\n")
        sys.stderr.write(f"delta F1 ({report.name} - {other.name}): {delta.delta_f1:+.4f}\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = dataset_stats(iter_records(args.input, args.format))
    sys.stdout.write(json.dumps(stats.to_dict(), indent=2, ensure_ascii=False) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semtower", description="Semantic towers for ontology term typing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fetch", help="fetch semantic sets from a SPARQL endpoint")
    p.add_argument("--domain", choices=sorted(DOMAIN_PROPERTIES), required=True)
    p.add_argument("--types", nargs="+")
    p.add_argument("--qids", help="JSON map of term type to Wikidata QID")
    p.add_argument("--endpoint", help="defaults to $SEMTOWER_SPARQL_URL or the Wikidata Query Service")
    p.add_argument("--cache-dir", default=".semtower-cache")
    p.add_argument("--offline", action="store_true", help="read cached responses only")
    p.add_argument("--templates", help="directory of <property>.rq query templates")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("build-tower", help="build a semantic tower from semantic sets")
    p.add_argument("--domain")
    p.add_argument("--sets", required=True)
    p.add_argument("--stopwords", help="stopword file replacing the bundled list")
    _add_embedder_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_tower)

    p = sub.add_parser("curate", help="cap frequent categories")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["jsonl", "tsv", "json"])
    p.add_argument("--rare-threshold", type=int, default=100)
    p.add_argument("--cap", type=int, default=25)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", help="seeded train/validation split")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["jsonl", "tsv", "json"])
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--train-out", required=True)
    p.add_argument("--val-out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("type", help="predict term types")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["jsonl", "tsv", "json"])
    p.add_argument("--mode", choices=["baseline", "rag"], default="rag")
    p.add_argument("--tower")
    p.add_argument("--types", nargs="+")
    p.add_argument("--llm", choices=["echo_hint", "scripted", "remote"], default="echo_hint")
    p.add_argument("--llm-endpoint", help="defaults to $SEMTOWER_LLM_URL")
    p.add_argument("--script", help="JSON map of term to answer for --llm scripted")
    _add_embedder_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_type)

    p = sub.add_parser("evaluate", help="run an experiment config and report micro P/R/F1")
    p.add_argument("--config", required=True, help="config file, or one of " + "/".join(SHIPPED_CONFIGS))
    p.add_argument("--dataset")
    p.add_argument("--tower")
    p.add_argument("--llm", choices=["echo_hint", "scripted", "remote"])
    p.add_argument("--embedder", choices=["reference", "remote"])
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--compare", help="earlier report JSON to diff against")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="record and per-type counts of a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["jsonl", "tsv", "json"])
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (SemtowerError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"semtower: error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
