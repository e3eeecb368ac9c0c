import itertools
import math

import numpy as np
import pytest
import scipy.stats
from sklearn.cluster import DBSCAN as SkDBSCAN

from kgcurate.adaptation import (DegenerateVarianceError, StopTokenSet,
                                 apply_stop_tokens, dbscan, distance_variance,
                                 knn_eps, naive_filter, task_oriented_stopwords,
                                 top_frequent_tokens, welch_t_test)
from kgcurate.tokenizer import count_tokens
from planted_corpus import CONTROL, EPS, PLANTED, planted_corpus


def test_naive_filter_drops_short_tokens():
    assert naive_filter(["2s", "acid", "de", "ester"]) == ["acid", "ester"]


def test_naive_filter_keeps_all_when_everything_short():
    assert naive_filter(["2s", "de"]) == ["2s", "de"]


def test_apply_stop_tokens_with_fallback():
    stop = StopTokenSet(frozenset({"acid"}), "Naive")
    assert apply_stop_tokens(["acetic", "acid"], stop) == ["acetic"]
    assert apply_stop_tokens(["acid"], stop) == ["acid"]  # never empty
    assert apply_stop_tokens(["x"], None) == ["x"]


def test_stop_token_set_json_roundtrip():
    stop = StopTokenSet(frozenset({"b", "a"}), "TaskOriented", {"eps": 0.5})
    back = StopTokenSet.from_json(stop.to_json())
    assert back == stop


def test_dbscan_matches_reference_euclidean():
    rng = np.random.default_rng(1)
    for trial in range(10):
        pts = rng.normal(size=(60, 4))
        eps, min_pts = 1.2, 4
        ours = dbscan(pts, eps, min_pts, metric="euclidean")
        ref = SkDBSCAN(eps=eps, min_samples=min_pts).fit(pts)
        ref_clusters = {}
        for i, lab in enumerate(ref.labels_):
            ref_clusters.setdefault(lab, set()).add(i)
        ours_sets = {frozenset(c) for c in ours.clusters}
        ref_sets = {frozenset(m) for lab, m in ref_clusters.items() if lab != -1}
        assert ours_sets == ref_sets
        assert set(ours.noise) == ref_clusters.get(-1, set())


def test_dbscan_matches_reference_cosine():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(80, 6))
    eps, min_pts = 0.15, 3
    ours = dbscan(pts, eps, min_pts, metric="cosine")
    ref = SkDBSCAN(eps=eps, min_samples=min_pts, metric="cosine").fit(pts)
    ref_clusters = {}
    for i, lab in enumerate(ref.labels_):
        ref_clusters.setdefault(lab, set()).add(i)
    assert {frozenset(c) for c in ours.clusters} == \
        {frozenset(m) for lab, m in ref_clusters.items() if lab != -1}
    assert set(ours.noise) == ref_clusters.get(-1, set())


def test_dbscan_label_substitution_and_edges():
    pts = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0]]
    cs = dbscan(pts, eps=0.2, min_pts=3, metric="euclidean",
                labels=["a", "b", "c", "d"])
    assert cs.clusters == [["a", "b", "c"]]
    assert cs.noise == ["d"]
    assert dbscan([], 1.0, 2).clusters == []
    with pytest.raises(ValueError):
        dbscan(pts, eps=0.0, min_pts=3)


def test_knn_eps_positive_and_monotone_in_percentile():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 4))
    lo = knn_eps(pts, k=3, percentile=10, metric="euclidean")
    hi = knn_eps(pts, k=3, percentile=90, metric="euclidean")
    assert 0 < lo <= hi


def test_distance_variance_exhaustive_matches_direct_oracle():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(25, 3))
    dists = [math.dist(pts[i], pts[j])
             for i, j in itertools.combinations(range(25), 2)]
    assert distance_variance(pts) == pytest.approx(np.var(dists), rel=1e-12)


def test_distance_variance_sampled_close_to_exhaustive():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(200, 3))
    exact = distance_variance(pts)  # 19,900 pairs, exhaustive
    approx = distance_variance(pts, pair_budget=5000, seed=1)
    assert approx == pytest.approx(exact, rel=0.1)
    # deterministic given seed
    assert approx == distance_variance(pts, pair_budget=5000, seed=1)


def test_welch_matches_scipy_two_sided():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a = rng.normal(0, 1, int(rng.integers(3, 40)))
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 2),
                       int(rng.integers(3, 40)))
        expected = scipy.stats.ttest_ind(a, b, equal_var=False).pvalue
        assert welch_t_test(a, b) == pytest.approx(expected, abs=1e-6)


def test_welch_one_sided_matches_scipy():
    rng = np.random.default_rng(7)
    a = rng.normal(1, 1, 20)
    b = rng.normal(0, 2, 25)
    for alt in ("greater", "less"):
        expected = scipy.stats.ttest_ind(a, b, equal_var=False,
                                         alternative=alt).pvalue
        assert welch_t_test(a, b, alternative=alt) == \
            pytest.approx(expected, abs=1e-6)


def test_welch_degenerate_and_validation():
    with pytest.raises(DegenerateVarianceError):
        welch_t_test([1.0, 1.0, 1.0], [2.0, 2.0])
    with pytest.raises(ValueError):
        welch_t_test([1.0], [2.0, 3.0])
    with pytest.raises(ValueError):
        welch_t_test([1.0, 2.0], [3.0, 4.0], alternative="sideways")


def test_top_frequent_tokens():
    freq = {"a": 5, "b": 5, "c": 1, "d": 9}
    assert top_frequent_tokens(freq, 0.25) == ["d"]
    assert top_frequent_tokens(freq, 0.5) == ["d", "a"]
    assert top_frequent_tokens(freq, 1.0) == ["d", "a", "b", "c"]


def test_task_oriented_selects_planted_not_control():
    names, emb, freq = planted_corpus(seed=0)
    stop = task_oriented_stopwords(
        names, emb, freq, seed=0, top_fraction=1.0, sample_size=80,
        iterations=10, eps=EPS, metric="euclidean",
        tokenizer=lambda s: s.split())
    assert set(PLANTED) <= stop.tokens
    assert not (set(CONTROL) & stop.tokens)
    assert stop.method == "TaskOriented"
    assert stop.provenance["eps"] == EPS


def test_task_oriented_alpha_zero_selects_nothing():
    names, emb, freq = planted_corpus(seed=0)
    stop = task_oriented_stopwords(
        names, emb, freq, seed=0, top_fraction=1.0, sample_size=80,
        iterations=10, alpha=0.0, eps=EPS, metric="euclidean",
        tokenizer=lambda s: s.split())
    assert stop.tokens == frozenset()


def test_task_oriented_noise_tokens_never_selected():
    names, emb, freq = planted_corpus(seed=0)
    stop = task_oriented_stopwords(
        names, emb, freq, seed=0, top_fraction=1.0, sample_size=80,
        iterations=10, eps=EPS, metric="euclidean",
        tokenizer=lambda s: s.split())
    assert not any(tok.startswith("filler") for tok in stop.tokens)


def test_task_oriented_deterministic():
    names, emb, freq = planted_corpus(seed=0)
    kwargs = dict(seed=3, top_fraction=1.0, sample_size=60, iterations=5,
                  eps=EPS, metric="euclidean", tokenizer=lambda s: s.split())
    assert task_oriented_stopwords(names, emb, freq, **kwargs).tokens == \
        task_oriented_stopwords(names, emb, freq, **kwargs).tokens
