import numpy as np
import pytest
from sklearn.tree import DecisionTreeClassifier

from kgcurate.adaptation import StopTokenSet
from kgcurate.classifier import (Hyperparams, TrainedEnsemble, default_grid,
                                 feature_importance_report, fit_forest,
                                 grid_search_cv, importances_to_tsv,
                                 vectorize_dataset, vectorize_flat,
                                 vectorize_sequence)
from kgcurate.embedding import random_model


def _xor_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(np.int8)
    return X, y


def test_vectorize_flat_is_blockwise_token_mean():
    emb = random_model(4, seed=1)
    vec = vectorize_flat(("acetic acid", "is a", "carboxylic acid"), emb)
    assert vec.shape == (12,)
    subj = (emb.lookup("acetic") + emb.lookup("acid")) / 2
    assert np.allclose(vec[:4], subj)
    rel = (emb.lookup("is") + emb.lookup("a")) / 2
    assert np.allclose(vec[4:8], rel)


def test_vectorize_flat_naive_adaptation_filters_short_tokens():
    emb = random_model(4, seed=1)
    vec = vectorize_flat(("2s acid", "is a", "base"), emb, stop="naive")
    assert np.allclose(vec[:4], emb.lookup("acid"))
    # relation tokens are all short: fallback keeps them
    rel = (emb.lookup("is") + emb.lookup("a")) / 2
    assert np.allclose(vec[4:8], rel)


def test_vectorize_flat_stop_token_set():
    emb = random_model(4, seed=1)
    stop = StopTokenSet(frozenset({"acid"}), "TaskOriented")
    vec = vectorize_flat(("acetic acid", "is a", "x"), emb, stop=stop)
    assert np.allclose(vec[:4], emb.lookup("acetic"))


def test_vectorize_empty_component_gives_zeros():
    emb = random_model(3, seed=0)
    vec = vectorize_flat(("", "is a", "x"), emb)
    assert np.allclose(vec[:3], 0.0)


def test_vectorize_sequence_has_separators():
    emb = random_model(4, seed=1)
    seq = vectorize_sequence(("acetic acid", "is", "base"), emb)
    # 2 + sep + 1 + sep + 1 rows
    assert seq.shape == (6, 4)
    assert np.allclose(seq[2], emb.lookup("sep"))
    assert np.allclose(seq[4], emb.lookup("sep"))


def test_forest_learns_xor():
    X, y = _xor_data()
    hp = Hyperparams(tree_count=50, seed=1, feature_subsample=1.0)
    model = fit_forest(X, y, hp)
    acc = (model.predict(X) == (y == 1)).mean()
    assert acc > 0.95


def test_forest_deterministic_given_seed():
    X, y = _xor_data()
    hp = Hyperparams(tree_count=10, seed=7)
    a = fit_forest(X, y, hp).predict_score(X)
    b = fit_forest(X, y, hp).predict_score(X)
    assert np.array_equal(a, b)
    c = fit_forest(X, y, Hyperparams(tree_count=10, seed=8)).predict_score(X)
    assert not np.array_equal(a, c)


def test_single_tree_full_features_matches_reference_on_train():
    # with no bagging noise a deep tree must fit the training set exactly,
    # like the reference implementation does
    X, y = _xor_data(n=200, seed=3)
    hp = Hyperparams(tree_count=1, feature_subsample=1.0, seed=0)
    ours = fit_forest(X, y, hp)
    ref = DecisionTreeClassifier(random_state=0).fit(X, y)
    # both overfit the bootstrap/train sample; compare generalization shape
    assert (ref.predict(X) == y).all()
    grid = np.random.default_rng(0).uniform(-1, 1, size=(500, 2))
    agreement = (ours.predict(grid) == (ref.predict(grid) == 1)).mean()
    assert agreement > 0.85


def test_forest_rejects_single_class():
    X = np.zeros((10, 2))
    with pytest.raises(ValueError):
        fit_forest(X, np.ones(10), Hyperparams(tree_count=2))


def test_predict_score_range_and_tie_goes_positive():
    X, y = _xor_data(n=100)
    model = fit_forest(X, y, Hyperparams(tree_count=2, seed=0))
    scores = model.predict_score(X)
    assert np.all((scores >= 0) & (scores <= 1))
    assert model.predict(np.atleast_2d(X[0]), threshold=scores[0])[0]


def test_max_depth_and_min_samples_leaf_respected():
    X, y = _xor_data(n=300)
    shallow = fit_forest(X, y, Hyperparams(tree_count=5, max_depth=1, seed=0))
    deep = fit_forest(X, y, Hyperparams(tree_count=5, max_depth=None, seed=0))
    assert max(len(t.feature) for t in shallow.trees) <= 3  # root + 2 leaves
    assert max(len(t.feature) for t in deep.trees) > 3


def test_json_roundtrip_preserves_predictions():
    X, y = _xor_data(n=150)
    model = fit_forest(X, y, Hyperparams(tree_count=5, seed=2),
                       dataset_hash="abc123")
    back = TrainedEnsemble.from_json(model.to_json())
    assert np.array_equal(model.predict_score(X), back.predict_score(X))
    assert back.dataset_hash == "abc123"
    assert back.hyperparams == model.hyperparams


def test_feature_importances_normalized_and_informative():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(300, 6))
    y = (X[:, 2] > 0).astype(np.int8)  # only feature 2 matters
    model = fit_forest(X, y, Hyperparams(tree_count=20, seed=0))
    imp = model.feature_importances
    assert imp.sum() == pytest.approx(1.0)
    assert imp[2] > 0.5
    tsv = importances_to_tsv(model)
    assert len(tsv.strip().splitlines()) == 6


def test_feature_importance_report_blocks():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 9))
    y = (X[:, 0] > 0).astype(np.int8)
    model = fit_forest(X, y, Hyperparams(tree_count=10, seed=0))
    rep = feature_importance_report(model, embedding_dim=3)
    assert set(rep["blocks"]) == {"subject", "relation", "object"}
    assert sum(rep["blocks"].values()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        feature_importance_report(model, embedding_dim=4)


def test_grid_search_prefers_discriminative_cell():
    X, y = _xor_data(n=240, seed=5)
    grid = [Hyperparams(tree_count=1, max_depth=1, seed=3),
            Hyperparams(tree_count=30, max_depth=None, seed=3,
                        feature_subsample=1.0)]
    winner, scores = grid_search_cv(X, y, grid, folds=3, seed=1)
    assert winner == grid[1]
    assert scores[1] > scores[0]


def test_grid_search_tie_break_and_validation():
    X, y = _xor_data(n=60, seed=6)
    with pytest.raises(ValueError):
        grid_search_cv(X, y, [], folds=3)
    with pytest.raises(ValueError):
        grid_search_cv(X, y, default_grid(), folds=1)


def test_default_grid_shape():
    grid = default_grid(seed=4)
    assert len(grid) == 16
    assert len(set(grid)) == 16
    assert all(hp.seed == 4 for hp in grid)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(tree_count=0)
    with pytest.raises(ValueError):
        Hyperparams(feature_subsample=1.5)


def test_vectorize_dataset_shape():
    emb = random_model(5, seed=0)
    X = vectorize_dataset([("a", "is a", "b"), ("c d", "has role", "e")], emb)
    assert X.shape == (2, 15)
