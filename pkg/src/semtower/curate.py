"""Category-capped dataset curation and seeded train/validation splitting."""
from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .ingest import Dataset


@dataclass(frozen=True)
class CurationPolicy:
    """Categories with fewer than ``rare_threshold`` records are kept whole;
    larger ones are cut to their first ``cap`` records."""

    rare_threshold: int = 100
    cap: int = 25

    def __post_init__(self):
        if self.rare_threshold < 1 or self.cap < 1:
            raise ValueError("rare_threshold and cap must be positive")
        if self.cap > self.rare_threshold:
            raise ValueError(f"cap ({self.cap}) must not exceed rare_threshold ({self.rare_threshold})")


def curate_subset(d: Dataset, policy: CurationPolicy = CurationPolicy()) -> Dataset:
    for r in d.records:
        if r.gold_type is None:
            raise ValueError(f"cannot curate unlabeled record {r.id!r}")
    cat_len = Counter(r.gold_type for r in d.records)
    taken = Counter()
    kept = []
    for r in d.records:
        c = r.gold_type
        if cat_len[c] >= policy.rare_threshold and taken[c] >= policy.cap:
            continue
        taken[c] += 1
        kept.append(r)
    return Dataset(f"{d.name}.curated", kept, list(d.type_inventory))


def train_size(n: int, train_fraction: float) -> int:
    # decimal reading of the fraction, so 0.29 * 100 is 29 and not 28
    return math.floor(Fraction(repr(float(train_fraction))) * n)


def split(d: Dataset, train_fraction: float = 0.7, seed: int = 42) -> tuple[Dataset, Dataset]:
    """Seeded uniform random partition; each side keeps the original record order."""
    n = len(d.records)
    if n < 2:
        raise ValueError(f"need at least 2 records to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = train_size(n, train_fraction)
    if n_train == 0 or n_train == n:
        raise ValueError(f"fraction {train_fraction} of {n} records leaves an empty side")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    train_idx = sorted(order[:n_train])
    val_idx = sorted(order[n_train:])
    train = Dataset(f"{d.name}.train", [d.records[i] for i in train_idx], list(d.type_inventory))
    val = Dataset(f"{d.name}.val", [d.records[i] for i in val_idx], list(d.type_inventory))
    return train, val
