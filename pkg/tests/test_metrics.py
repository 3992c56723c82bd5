from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iser.metrics import (
    EvalReport,
    MethodStats,
    aggregate_repeats,
    aupr,
    auroc,
    friedman_mean_ranks,
    mean_ranks_by_name,
)


def pair_count_auroc(scores, labels):
    scores, labels = [Fraction(float(s)) for s in scores], [int(y) for y in labels]
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = Fraction(0)
    for p in pos:
        for n in neg:
            total += 1 if p > n else Fraction(1, 2) if p == n else 0
    return total / (len(pos) * len(neg))


def ap_oracle(scores, labels):
    """Average precision by enumerating distinct thresholds, highest first."""
    scores, labels = [float(s) for s in scores], [int(y) for y in labels]
    n_pos = sum(labels)
    total, prev_recall = Fraction(0), Fraction(0)
    for thr in sorted(set(scores), reverse=True):
        picked = [y for s, y in zip(scores, labels) if s >= thr]
        tp = sum(picked)
        recall = Fraction(tp, n_pos)
        total += Fraction(tp, len(picked)) * (recall - prev_recall)
        prev_recall = recall
    return total


def random_instance(r, n):
    scores = r.integers(0, max(2, n // 3), size=n).astype(float) / 7  # heavy ties
    labels = r.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    return scores, labels


def test_auroc_examples():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auroc_single_class_error():
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [1, 1])


def test_aupr_examples():
    assert aupr([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert aupr([0.5] * 8, [1, 0, 0, 1, 0, 0, 0, 0]) == 0.25
    assert aupr([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx(5 / 6, abs=1e-15)
    with pytest.raises(ValueError):
        aupr([0.1, 0.2], [0, 0])


@pytest.mark.parametrize("seed", range(30))
def test_against_oracles(seed):
    r = np.random.default_rng(seed)
    scores, labels = random_instance(r, int(r.integers(2, 500)))
    assert auroc(scores, labels) == float(pair_count_auroc(scores, labels))
    assert aupr(scores, labels) == float(ap_oracle(scores, labels))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 60))
def test_auroc_monotone_invariance_and_symmetry(seed, n):
    r = np.random.default_rng(seed)
    scores = r.permutation(n).astype(float)  # no ties
    labels = r.integers(0, 2, size=n)
    labels[:2] = [0, 1]
    a = auroc(scores, labels)
    assert auroc(np.exp(scores / n), labels) == a
    assert a + auroc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 40))
def test_aupr_one_iff_perfect(seed, n):
    r = np.random.default_rng(seed)
    scores = r.integers(0, 5, size=n).astype(float)
    labels = r.integers(0, 2, size=n)
    labels[:2] = [0, 1]
    perfect = scores[labels == 1].min() > scores[labels == 0].max()
    assert (aupr(scores, labels) == 1.0) == perfect


def test_aggregate_repeats():
    assert aggregate_repeats([(1, 1)]) == ((1, 1), (0, 0))
    means, _ = aggregate_repeats([(0.8, 0.4), (0.9, 0.5)])
    assert means == pytest.approx((0.85, 0.45))
    assert aggregate_repeats([(0.7, 0.3)] * 5)[1] == (0.0, 0.0)
    _, stds = aggregate_repeats([(0.8, 0.4), (0.9, 0.5)])
    assert stds[0] == pytest.approx(np.std([0.8, 0.9], ddof=1))


def test_friedman_ranks():
    np.testing.assert_array_equal(friedman_mean_ranks([[0.9, 0.8, 0.7]]), [1, 2, 3])
    np.testing.assert_array_equal(friedman_mean_ranks([[0.9, 0.9]]), [1.5, 1.5])
    ranks = friedman_mean_ranks([[0.9, 0.5, 0.6], [0.8, 0.7, 0.1], [0.99, 0.2, 0.3]])
    assert ranks[0] == 1.0
    with pytest.raises(ValueError):
        friedman_mean_ranks([[0.5]])


def test_mean_ranks_by_name():
    table = {"d1": {"a": 0.9, "b": 0.8}, "d2": {"a": 0.7, "b": 0.8}}
    assert mean_ranks_by_name(table) == {"a": 1.5, "b": 1.5}
    with pytest.raises(ValueError):
        mean_ranks_by_name({"d1": {"a": 0.9, "b": 0.8}, "d2": {"a": 0.7}})


def test_eval_report_validation_and_json():
    stats = MethodStats.from_runs([(0.9, 0.5), (0.8, 0.4)])
    report = EvalReport({"b": stats, "a": stats}, {"a": 1.5, "b": 1.5})
    doc = report.to_dict()
    assert list(doc) == ["a", "b", "mean_ranks"]
    assert doc["a"]["n_repeats"] == 2
    with pytest.raises(ValueError):
        EvalReport({"a": stats, "b": MethodStats.from_runs([(0.9, 0.5)])})
    with pytest.raises(ValueError):
        EvalReport({"a": MethodStats(1.2, 0, 0.5, 0, 1)})
