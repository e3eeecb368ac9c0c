"""Token-selection adaptations and their statistical primitives.

Two strategies for filtering tokens before embedding averaging: a naive
length filter, and a task-oriented one that clusters frequent tokens by
embedding, then flags clusters whose removal significantly shifts the
pairwise-distance variance of entity centroids across seeded resamples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set

import numpy as np

from .embedding import EmbeddingModel
from .seeding import rng_for
from .tokenizer import tokenize

METHOD_NAIVE = "Naive"
METHOD_TASK_ORIENTED = "TaskOriented"


class DegenerateVarianceError(ValueError):
    """Welch test is inconclusive: both samples have zero variance."""


@dataclass(frozen=True)
class StopTokenSet:
    tokens: frozenset
    method: str
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"method": self.method, "provenance": self.provenance,
                           "tokens": sorted(self.tokens)}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StopTokenSet":
        data = json.loads(text)
        return cls(frozenset(data["tokens"]), data["method"], data["provenance"])


@dataclass
class ClusterSet:
    clusters: List[List]
    noise: List


def naive_filter(tokens: Sequence[str]) -> List[str]:
    """Keep tokens of 3+ characters; keep everything if none qualify."""
    kept = [t for t in tokens if len(t) >= 3]
    return kept if kept else list(tokens)


def apply_stop_tokens(tokens: Sequence[str], stop: Optional[StopTokenSet]) -> List[str]:
    """Drop stop tokens, falling back to the full list rather than emptying it."""
    if stop is None:
        return list(tokens)
    kept = [t for t in tokens if t not in stop.tokens]
    return kept if kept else list(tokens)


def _distance_rows(points: np.ndarray, idx: np.ndarray, metric: str) -> np.ndarray:
    """Distances from points[idx] to all points, one row per index."""
    if metric == "euclidean":
        diff = points[idx][:, None, :] - points[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2))
    if metric == "cosine":
        norms = np.linalg.norm(points, axis=1)
        safe = np.where(norms == 0, 1.0, norms)
        unit = points / safe[:, None]
        unit[norms == 0] = 0.0
        return 1.0 - unit[idx] @ unit.T
    raise ValueError(f"unknown metric {metric!r}")


def dbscan(points: Sequence[Sequence[float]], eps: float, min_pts: int,
           metric: str = "cosine", labels: Optional[Sequence] = None) -> ClusterSet:
    """Density-based clustering, deterministic for a fixed input order.

    Core points have >= min_pts neighbours (self included) within eps;
    clusters are maximal density-connected sets, the rest is noise.
    ``labels`` substitutes point indices in the output when given.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if labels is None:
        labels = list(range(n))
    if n == 0:
        return ClusterSet([], [])
    if eps <= 0 or min_pts < 1:
        raise ValueError("eps must be > 0 and min_pts >= 1")

    neighbors: List[np.ndarray] = []
    block = 512
    for start in range(0, n, block):
        idx = np.arange(start, min(start + block, n))
        dist = _distance_rows(pts, idx, metric)
        for row in dist:
            neighbors.append(np.nonzero(row <= eps)[0])

    UNVISITED, NOISE = -2, -1
    assignment = [UNVISITED] * n
    cluster_id = -1
    for i in range(n):
        if assignment[i] != UNVISITED:
            continue
        if len(neighbors[i]) < min_pts:
            assignment[i] = NOISE
            continue
        cluster_id += 1
        assignment[i] = cluster_id
        frontier = list(neighbors[i])
        pos = 0
        while pos < len(frontier):
            j = int(frontier[pos])
            pos += 1
            if assignment[j] == NOISE:
                assignment[j] = cluster_id  # border point
            if assignment[j] != UNVISITED:
                continue
            assignment[j] = cluster_id
            if len(neighbors[j]) >= min_pts:
                frontier.extend(neighbors[j])

    clusters: List[List] = [[] for _ in range(cluster_id + 1)]
    noise: List = []
    for i, a in enumerate(assignment):
        if a == NOISE:
            noise.append(labels[i])
        else:
            clusters[a].append(labels[i])
    return ClusterSet(clusters, noise)


def knn_eps(points: Sequence[Sequence[float]], k: int = 3,
            percentile: float = 10.0, metric: str = "cosine") -> float:
    """Default eps: a low percentile of the k-th nearest-neighbour distance."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n <= k:
        raise ValueError(f"need more than {k} points")
    kth = np.empty(n)
    block = 512
    for start in range(0, n, block):
        idx = np.arange(start, min(start + block, n))
        dist = _distance_rows(pts, idx, metric)
        part = np.partition(dist, k, axis=1)
        kth[idx] = part[:, k]  # k-th neighbour, self at rank 0
    eps = float(np.percentile(kth, percentile))
    return eps if eps > 0 else float(kth[kth > 0].min(initial=1e-9))


def distance_variance(vectors: Sequence[Sequence[float]],
                      pair_budget: int = 500_000, seed: int = 0) -> float:
    """Population variance of pairwise Euclidean distances.

    Exhaustive below ``pair_budget`` pairs, otherwise a seeded uniform
    sample of that many distinct pairs.
    """
    pts = np.asarray(vectors, dtype=float)
    n = len(pts)
    if n < 2:
        raise ValueError("need at least 2 vectors")
    n_pairs = n * (n - 1) // 2
    if n_pairs <= pair_budget:
        dists = np.empty(n_pairs)
        pos = 0
        for i in range(n - 1):
            diff = pts[i + 1:] - pts[i]
            m = len(diff)
            dists[pos:pos + m] = np.sqrt((diff * diff).sum(axis=1))
            pos += m
    else:
        rng = rng_for(seed, "distance_variance")
        codes: Set[int] = set()
        while len(codes) < pair_budget:
            draw = rng.integers(0, n_pairs, size=pair_budget - len(codes))
            codes.update(int(c) for c in draw)
        codes_arr = np.fromiter(codes, dtype=np.int64, count=len(codes))
        # Decode linear pair index (row-major upper triangle).
        i = (n - 2 - np.floor(
            np.sqrt(-8.0 * codes_arr + 4 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
        j = codes_arr + i + 1 - (i * (2 * n - i - 1)) // 2
        diff = pts[i] - pts[j]
        dists = np.sqrt((diff * diff).sum(axis=1))
    return float(np.var(dists))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log(1.0 - x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def _t_sf(t: float, df: float) -> float:
    """Survival function P(T > t) of Student's t."""
    p_two_tail = _betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return p_two_tail / 2.0 if t >= 0 else 1.0 - p_two_tail / 2.0


def welch_t_test(a: Sequence[float], b: Sequence[float],
                 alternative: str = "two-sided") -> float:
    """Welch's unequal-variance t-test p-value.

    alternative: "two-sided", or "less"/"greater" for one-sided tests of
    mean(a) against mean(b). Raises DegenerateVarianceError when both
    samples are constant.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if len(xa) < 2 or len(xb) < 2:
        raise ValueError("each sample needs at least 2 values")
    va = xa.var(ddof=1)
    vb = xb.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise DegenerateVarianceError("zero variance in both samples")
    sa, sb = va / len(xa), vb / len(xb)
    t = (xa.mean() - xb.mean()) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa ** 2 / (len(xa) - 1) + sb ** 2 / (len(xb) - 1))
    if alternative == "two-sided":
        return min(1.0, 2.0 * _t_sf(abs(t), df))
    if alternative == "greater":
        return _t_sf(t, df)
    if alternative == "less":
        return 1.0 - _t_sf(t, df)
    raise ValueError(f"unknown alternative {alternative!r}")


def top_frequent_tokens(token_freq: Dict[str, int], fraction: float) -> List[str]:
    """The top share of tokens by count, ties broken lexicographically."""
    ranked = sorted(token_freq, key=lambda t: (-token_freq[t], t))
    return ranked[: math.ceil(fraction * len(ranked))]


def task_oriented_stopwords(
        entity_names: Iterable[str],
        emb: EmbeddingModel,
        token_freq: Dict[str, int],
        seed: int,
        top_fraction: float = 0.25,
        sample_size: int = 5000,
        iterations: int = 10,
        alpha: float = 0.05,
        eps: Optional[float] = None,
        min_pts: int = 3,
        metric: str = "cosine",
        pair_budget: int = 500_000,
        alternative: str = "two-sided",
        tokenizer: Callable[[str], List[str]] = tokenize) -> StopTokenSet:
    """Cluster frequent tokens and flag clusters whose removal matters.

    For each iteration a fresh entity sample is drawn; per cluster, entity
    centroids are recomputed with the cluster's tokens excluded (entities
    that would lose every token keep their full centroid) and the
    pairwise-distance variances of both centroid sets are recorded. A
    cluster is selected when the Welch test over the per-iteration
    variance series gives p <= alpha. DBSCAN noise tokens never qualify.
    """
    names = sorted(set(entity_names))
    if len(names) < 2:
        raise ValueError("need at least 2 entities")
    candidates = top_frequent_tokens(token_freq, top_fraction)
    provenance = {"seed": seed, "top_fraction": top_fraction,
                  "sample_size": sample_size, "iterations": iterations,
                  "alpha": alpha, "min_pts": min_pts, "metric": metric,
                  "pair_budget": pair_budget, "alternative": alternative}
    if len(candidates) <= min_pts:
        return StopTokenSet(frozenset(), METHOD_TASK_ORIENTED, provenance)

    token_vecs = np.array([emb.lookup(t) for t in candidates])
    if eps is None:
        eps = knn_eps(token_vecs, k=min(3, len(candidates) - 1), metric=metric)
    provenance["eps"] = eps
    clusters = dbscan(token_vecs, eps, min_pts, metric, labels=candidates)
    if not clusters.clusters:
        return StopTokenSet(frozenset(), METHOD_TASK_ORIENTED, provenance)

    token_cluster = {tok: ci for ci, cl in enumerate(clusters.clusters) for tok in cl}
    n_clusters = len(clusters.clusters)
    n_sample = min(sample_size, len(names))

    # Per-entity token sums, total and per intersecting cluster.
    dim = emb.dimension
    ent_cache: Dict[str, tuple] = {}

    def entity_terms(name: str):
        cached = ent_cache.get(name)
        if cached is not None:
            return cached
        toks = tokenizer(name)
        total = np.zeros(dim)
        removed_sum: Dict[int, np.ndarray] = {}
        removed_cnt: Dict[int, int] = {}
        for tok in toks:
            vec = emb.lookup(tok)
            total += vec
            ci = token_cluster.get(tok)
            if ci is not None:
                removed_sum[ci] = removed_sum.get(ci, np.zeros(dim)) + vec
                removed_cnt[ci] = removed_cnt.get(ci, 0) + 1
        cached = (total, len(toks), removed_sum, removed_cnt)
        ent_cache[name] = cached
        return cached

    d1 = np.empty(iterations)
    d2 = np.empty((n_clusters, iterations))
    for it in range(iterations):
        rng = rng_for(seed, "stopword_iter", it)
        picked = rng.choice(len(names), size=n_sample, replace=False)
        m1 = np.empty((n_sample, dim))
        removed = {ci: [] for ci in range(n_clusters)}  # (row, sum, cnt)
        for row, ni in enumerate(picked):
            total, cnt, rsum, rcnt = entity_terms(names[int(ni)])
            if cnt == 0:
                m1[row] = 0.0
                continue
            m1[row] = total / cnt
            for ci, c_removed in rcnt.items():
                removed[ci].append((row, rsum[ci], cnt - c_removed))
        d1[it] = distance_variance(m1, pair_budget, seed=_dv_seed(seed, it, -1))
        for ci in range(n_clusters):
            m2 = m1.copy()
            for row, rsum, left in removed[ci]:
                if left > 0:
                    m2[row] = (ent_cache[names[int(picked[row])]][0] - rsum) / left
                # else: entity loses all tokens; centroid falls back to m1
            d2[ci, it] = distance_variance(m2, pair_budget,
                                           seed=_dv_seed(seed, it, ci))
    selected: Set[str] = set()
    for ci, cluster in enumerate(clusters.clusters):
        try:
            p = welch_t_test(d1, d2[ci], alternative=alternative)
        except DegenerateVarianceError:
            continue  # inconclusive, cluster not selected
        if p <= alpha:
            selected.update(cluster)
    return StopTokenSet(frozenset(selected), METHOD_TASK_ORIENTED, provenance)


def _dv_seed(seed: int, iteration: int, cluster: int) -> int:
    from .seeding import derive_seed
    return derive_seed(seed, "dv", iteration, cluster)
