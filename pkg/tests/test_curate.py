import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semtower.curate import CurationPolicy, curate_subset, split, train_size
from semtower.ingest import Dataset, TermRecord
from tests.oracles import curated_count, curated_indices


def make(golds):
    return Dataset("d", [TermRecord(str(i), f"term{i}", None, g) for i, g in enumerate(golds)])


def test_small_and_large_category():
    golds = ["B"] * 70 + ["A"] * 3 + ["B"] * 80
    out = curate_subset(make(golds))
    assert len(out) == 28 == curated_count(golds, 100, 25)
    b_ids = [r.id for r in out.records if r.gold_type == "B"]
    assert b_ids == [str(i) for i in range(25)]
    assert [r.gold_type for r in out.records].count("A") == 3


def test_boundary_at_threshold():
    assert len(curate_subset(make(["A"] * 99))) == 99
    assert len(curate_subset(make(["A"] * 100))) == 25


def test_all_rare_is_identity():
    d = make(["x", "y", "x", "z"] * 5)
    assert curate_subset(d).records == d.records


def test_unlabeled_rejected():
    d = Dataset("d", [TermRecord("r1", "a", None, "n"), TermRecord("r7", "b")])
    with pytest.raises(ValueError, match="r7"):
        curate_subset(d)


def test_policy_validation():
    with pytest.raises(ValueError):
        CurationPolicy(rare_threshold=10, cap=20)
    assert CurationPolicy() == CurationPolicy(100, 25)


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.integers(0, 49), max_size=500),
    st.integers(1, 30),
    st.integers(1, 30),
)
def test_matches_enumeration_oracle(cats, thr, cap):
    cap = min(cap, thr)
    golds = [f"c{c}" for c in cats]
    if not golds:
        return
    out = curate_subset(make(golds), CurationPolicy(thr, cap))
    assert len(out) == curated_count(golds, thr, cap)
    assert [int(r.id) for r in out.records] == curated_indices(golds, thr, cap)
    assert set(r.gold_type for r in out.records) == set(golds)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=200))
def test_idempotent_once_all_rare(cats):
    once = curate_subset(make([f"c{c}" for c in cats]), CurationPolicy(30, 25))
    twice = curate_subset(once, CurationPolicy(30, 25))
    assert twice.records == once.records


def test_split_sizes():
    train, val = split(make(["a"] * 10), 0.7, 42)
    assert (len(train), len(val)) == (7, 3)
    assert train_size(2041, 0.7) == 1428
    train, val = split(make(["a"] * 2041), 0.7, 1)
    assert (len(train), len(val)) == (1428, 613)


def test_split_fraction_read_as_decimal():
    assert train_size(100, 0.29) == 29
    assert train_size(10, 0.3) == 3


def test_split_deterministic():
    d = make(["a", "b"] * 20)
    assert split(d, 0.7, 5) == split(d, 0.7, 5)
    assert split(d, 0.7, 5)[0].records != split(d, 0.7, 6)[0].records


@pytest.mark.parametrize("n, frac", [(1, 0.5), (2, 0.4), (3, 0.2), (5, 0.0), (5, 1.0)])
def test_split_degenerate(n, frac):
    with pytest.raises(ValueError):
        split(make(["a"] * n), frac, 0)


@given(st.integers(2, 300), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_partitions(n, frac, seed):
    d = make([f"c{i % 7}" for i in range(n)])
    if train_size(n, frac) in (0, n):
        return
    train, val = split(d, frac, seed)
    ids = [r.id for r in train.records] + [r.id for r in val.records]
    assert sorted(ids, key=int) == [r.id for r in d.records]
    assert len(set(ids)) == n
    assert [int(r.id) for r in train.records] == sorted(int(r.id) for r in train.records)
