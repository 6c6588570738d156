"""Semantic towers: retrieval-augmented ontology term typing."""

__version__ = "0.1.0"

from .curate import CurationPolicy, curate_subset, split
from .embed import EmbedderConfig, cosine, embed, reference_embed
from .eval import ExperimentConfig, ExperimentReport, compare_reports, micro_metrics, run_experiment
from .ingest import Dataset, SparqlQuerySpec, TermRecord, dataset_stats, fetch_semantic_set, load_dataset
from .normalize import PrimitiveList, SemanticSet, build_primitives, clean_tokens, primitives_to_text, tokenize
from .ragpipe import LlmConfig, Prediction, PromptTemplate, compose_prompt, parse_answer, retrieve_hint, type_term
from .tower import SemanticTower, TowerEntry, TowerMatch, build_tower, load_tower, save_tower, search_top_k
