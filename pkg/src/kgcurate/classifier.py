"""Triple vectorization and a bagged decision-tree ensemble.

Trees are CART with the Gini criterion and per-node feature subsampling,
implemented in-repo so determinism, importances and the prediction tie
rule are fully under our control. Each tree votes a class; the ensemble
score is the fraction of positive votes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .adaptation import StopTokenSet, apply_stop_tokens, naive_filter
from .embedding import EmbeddingModel
from .metrics import classification_report
from .seeding import derive_seed, rng_for
from .tokenizer import tokenize

SEP_TOKEN = "sep"


@dataclass(frozen=True)
class Hyperparams:
    tree_count: int = 100
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    feature_subsample: Union[str, float] = "sqrt"  # "sqrt" or a fraction
    seed: int = 0

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if isinstance(self.feature_subsample, float) and not (
                0.0 < self.feature_subsample <= 1.0):
            raise ValueError("feature_subsample fraction must be in (0, 1]")


def default_grid(seed: int = 0) -> List[Hyperparams]:
    grid = []
    for tree_count in (100, 300):
        for max_depth in (None, 16):
            for msl in (1, 5):
                for fs in ("sqrt", 1.0):
                    grid.append(Hyperparams(tree_count, max_depth, msl, fs, seed))
    return grid


def _component_tokens(text: str, stop, adaptation: Optional[str],
                      tokenizer) -> List[str]:
    toks = tokenizer(text)
    if not toks:
        return toks
    if adaptation == "naive":
        toks = naive_filter(toks)
    elif isinstance(stop, StopTokenSet):
        toks = apply_stop_tokens(toks, stop)
    return toks


def _mean_vector(tokens: Sequence[str], emb: EmbeddingModel) -> np.ndarray:
    if not tokens:
        return np.zeros(emb.dimension)
    acc = np.zeros(emb.dimension)
    for tok in tokens:
        acc += emb.lookup(tok)
    return acc / len(tokens)


def _resolve_filter(stop) -> Tuple[Optional[StopTokenSet], Optional[str]]:
    # `stop` may be None, a StopTokenSet, or the string "naive".
    if stop == "naive":
        return None, "naive"
    return stop, None


def vectorize_flat(triple_text: Sequence[str], emb: EmbeddingModel,
                   stop=None,
                   tokenizer: Callable[[str], List[str]] = tokenize) -> np.ndarray:
    """Mean token vector of subject, relation and object, concatenated.

    ``triple_text`` is the (subject, relation, object) display text.
    ``stop`` is None, "naive", or a StopTokenSet; filtering never empties
    a non-empty token list.
    """
    s, l, o = triple_text
    stop_set, adaptation = _resolve_filter(stop)
    blocks = [_mean_vector(_component_tokens(part, stop_set, adaptation, tokenizer),
                           emb) for part in (s, l, o)]
    return np.concatenate(blocks)


def vectorize_sequence(triple_text: Sequence[str], emb: EmbeddingModel,
                       stop=None,
                       tokenizer: Callable[[str], List[str]] = tokenize) -> np.ndarray:
    """Token vectors of subject, relation and object with separator vectors
    between the components; consumable by a plug-in sequence learner."""
    s, l, o = triple_text
    stop_set, adaptation = _resolve_filter(stop)
    sep = emb.lookup(SEP_TOKEN)
    steps: List[np.ndarray] = []
    for i, part in enumerate((s, l, o)):
        if i:
            steps.append(sep)
        for tok in _component_tokens(part, stop_set, adaptation, tokenizer):
            steps.append(emb.lookup(tok))
    return np.array(steps)


def vectorize_dataset(triples_text: Sequence[Sequence[str]], emb: EmbeddingModel,
                      stop=None,
                      tokenizer: Callable[[str], List[str]] = tokenize) -> np.ndarray:
    return np.array([vectorize_flat(t, emb, stop, tokenizer) for t in triples_text])


# ---------------------------------------------------------------- trees

class _Tree:
    """Single CART tree stored as parallel arrays."""

    __slots__ = ("feature", "threshold", "left", "right", "value",
                 "importances")

    def __init__(self, n_features: int):
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[int] = []
        self.importances = np.zeros(n_features)

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0)
        return len(self.feature) - 1

    def fit(self, X: np.ndarray, y: np.ndarray, hp: Hyperparams,
            rng: np.random.Generator) -> None:
        n_features = X.shape[1]
        if hp.feature_subsample == "sqrt":
            k = max(1, int(math.sqrt(n_features)))
        else:
            k = max(1, int(round(hp.feature_subsample * n_features)))
        total = len(y)
        stack = [(self._new_node(), np.arange(total), 0)]
        while stack:
            node, idx, depth = stack.pop()
            sub_y = y[idx]
            n = len(idx)
            n_pos = int(sub_y.sum())
            self.value[node] = 1 if 2 * n_pos >= n else 0
            if (n_pos == 0 or n_pos == n or n < 2 * hp.min_samples_leaf
                    or (hp.max_depth is not None and depth >= hp.max_depth)):
                continue
            feats = rng.choice(n_features, size=min(k, n_features), replace=False)
            best = self._best_split(X, idx, sub_y, feats, hp.min_samples_leaf)
            if best is None:
                continue
            f, thr, gain, left_mask = best
            self.feature[node] = int(f)
            self.threshold[node] = float(thr)
            self.importances[f] += gain * n / total
            left = self._new_node()
            right = self._new_node()
            self.left[node], self.right[node] = left, right
            stack.append((left, idx[left_mask], depth + 1))
            stack.append((right, idx[~left_mask], depth + 1))

    @staticmethod
    def _best_split(X, idx, sub_y, feats, min_leaf):
        n = len(idx)
        total_pos = sub_y.sum()
        parent_gini = 2.0 * (total_pos / n) * (1.0 - total_pos / n)
        best = None
        best_score = parent_gini - 1e-12
        for f in feats:
            x = X[idx, f]
            order = np.argsort(x, kind="stable")
            xs = x[order]
            ys = sub_y[order]
            cum_pos = np.cumsum(ys)
            left_n = np.arange(1, n)
            right_n = n - left_n
            valid = xs[1:] != xs[:-1]
            if min_leaf > 1:
                valid &= (left_n >= min_leaf) & (right_n >= min_leaf)
            if not valid.any():
                continue
            lp = cum_pos[:-1] / left_n
            rp = (total_pos - cum_pos[:-1]) / right_n
            weighted = (left_n * 2 * lp * (1 - lp) + right_n * 2 * rp * (1 - rp)) / n
            weighted[~valid] = np.inf
            pos = int(np.argmin(weighted))
            if weighted[pos] < best_score:
                best_score = weighted[pos]
                thr = (xs[pos] + xs[pos + 1]) / 2.0
                best = (f, thr, parent_gini - weighted[pos], x <= thr)
        return best

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = len(X)
        out = np.empty(n, dtype=np.int8)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        value = np.asarray(self.value)
        node = np.zeros(n, dtype=np.int64)
        active = np.arange(n)
        while len(active):
            cur = node[active]
            is_leaf = feature[cur] < 0
            leaf_rows = active[is_leaf]
            out[leaf_rows] = value[node[leaf_rows]]
            active = active[~is_leaf]
            if not len(active):
                break
            cur = node[active]
            go_left = X[active, feature[cur]] <= threshold[cur]
            node[active] = np.where(go_left, left[cur], right[cur])
        return out

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right, "value": self.value,
                "importances": self.importances.tolist()}

    @classmethod
    def from_dict(cls, data: dict, n_features: int) -> "_Tree":
        tree = cls(n_features)
        tree.feature = list(data["feature"])
        tree.threshold = list(data["threshold"])
        tree.left = list(data["left"])
        tree.right = list(data["right"])
        tree.value = list(data["value"])
        tree.importances = np.asarray(data["importances"])
        return tree


class TrainedEnsemble:
    def __init__(self, trees: List[_Tree], hyperparams: Hyperparams,
                 n_features: int, dataset_hash: str = ""):
        self.trees = trees
        self.hyperparams = hyperparams
        self.n_features = n_features
        self.dataset_hash = dataset_hash
        raw = np.sum([t.importances for t in trees], axis=0)
        total = raw.sum()
        if total > 0:
            self.feature_importances = raw / total
        else:
            self.feature_importances = np.full(n_features, 1.0 / n_features)

    def predict_score(self, X) -> np.ndarray:
        """Fraction of trees voting positive, in [0, 1]."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        votes = np.zeros(len(X))
        for tree in self.trees:
            votes += tree.predict(X)
        return votes / len(self.trees)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        """Score >= threshold counts as positive (ties go positive)."""
        return self.predict_score(X) >= threshold

    def to_json(self) -> str:
        return json.dumps({
            "hyperparams": asdict(self.hyperparams),
            "n_features": self.n_features,
            "dataset_hash": self.dataset_hash,
            "trees": [t.to_dict() for t in self.trees],
        })

    @classmethod
    def from_json(cls, text: str) -> "TrainedEnsemble":
        data = json.loads(text)
        hp = Hyperparams(**data["hyperparams"])
        trees = [_Tree.from_dict(td, data["n_features"]) for td in data["trees"]]
        return cls(trees, hp, data["n_features"], data.get("dataset_hash", ""))


def fit_forest(X, y, hp: Hyperparams, dataset_hash: str = "") -> TrainedEnsemble:
    """Bagged Gini CART trees; per-tree seeds derive from (hp.seed, index)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int8)
    if len(X) != len(y) or len(y) < 2:
        raise ValueError("need matching X/y with at least 2 rows")
    if y.min() == y.max():
        raise ValueError("training labels contain a single class")
    n, n_features = X.shape
    trees = []
    for ti in range(hp.tree_count):
        rng = rng_for(hp.seed, "tree", ti)
        boot = rng.integers(0, n, size=n)
        tree = _Tree(n_features)
        tree.fit(X[boot], y[boot], hp, rng)
        trees.append(tree)
    return TrainedEnsemble(trees, hp, n_features, dataset_hash)


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> List[np.ndarray]:
    assignment = np.empty(len(y), dtype=np.int64)
    for label in (0, 1):
        idx = np.nonzero(y == label)[0]
        rng = rng_for(seed, "cv_fold", label)
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % folds
    return [np.nonzero(assignment == f)[0] for f in range(folds)]


def grid_search_cv(X, y, grid: Sequence[Hyperparams], folds: int = 5,
                   seed: int = 0) -> Tuple[Hyperparams, Dict[int, float]]:
    """Exhaustive grid evaluation by stratified k-fold mean F1.

    Returns the winning cell and per-cell mean F1 (keyed by grid index).
    Ties break toward smaller tree_count, then smaller max_depth.
    """
    if not grid:
        raise ValueError("empty grid")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int8)
    fold_idx = _stratified_folds(y, folds, seed)
    for fi, idx in enumerate(fold_idx):
        if len(set(y[idx])) < 2:
            raise ValueError(f"fold {fi} lacks one class; reduce folds")
    scores: Dict[int, float] = {}
    for gi, hp in enumerate(grid):
        f1s = []
        for fi, val_idx in enumerate(fold_idx):
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[val_idx] = False
            fold_hp = Hyperparams(hp.tree_count, hp.max_depth, hp.min_samples_leaf,
                                  hp.feature_subsample,
                                  derive_seed(hp.seed, "cv", fi))
            model = fit_forest(X[train_mask], y[train_mask], fold_hp)
            preds = model.predict(X[val_idx])
            f1s.append(classification_report(list(preds),
                                             list(y[val_idx] == 1)).f1)
        scores[gi] = float(np.mean(f1s))

    def tie_key(gi):
        hp = grid[gi]
        depth = hp.max_depth if hp.max_depth is not None else float("inf")
        return (-scores[gi], hp.tree_count, depth, gi)

    winner = min(scores, key=tie_key)
    assert all(scores[winner] >= s for s in scores.values())
    return grid[winner], scores


def feature_importance_report(model: TrainedEnsemble, embedding_dim: int) -> dict:
    """Importance mass per (subject, relation, object) block plus raw values."""
    imp = model.feature_importances
    if len(imp) != 3 * embedding_dim:
        raise ValueError("feature count does not match 3 x embedding_dim")
    blocks = {
        "subject": float(imp[:embedding_dim].sum()),
        "relation": float(imp[embedding_dim:2 * embedding_dim].sum()),
        "object": float(imp[2 * embedding_dim:].sum()),
    }
    return {"blocks": blocks, "per_dimension": imp.tolist()}


def importances_to_tsv(model: TrainedEnsemble) -> str:
    return "".join(f"{i}\t{v:.8f}\n" for i, v in enumerate(model.feature_importances))
