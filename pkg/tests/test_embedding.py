import io

import numpy as np
import pytest

from kgcurate.embedding import (EmbeddingFormatError, EmbeddingModel,
                                load_text_vectors, random_model,
                                save_text_vectors)


def test_random_lookup_deterministic():
    m1 = random_model(16, seed=4)
    m2 = random_model(16, seed=4)
    assert np.array_equal(m1.lookup("acid"), m2.lookup("acid"))
    assert not np.array_equal(m1.lookup("acid"), m1.lookup("base"))


def test_random_lookup_order_independent():
    m1 = random_model(8, seed=4)
    m2 = random_model(8, seed=4)
    a_first = m1.lookup("a").copy()
    m2.lookup("zzz")  # different request order must not matter
    assert np.array_equal(a_first, m2.lookup("a"))


def test_vectors_bounded_and_right_shape():
    vec = random_model(300, seed=0).lookup("token")
    assert vec.shape == (300,)
    assert np.all(vec >= -1.0) and np.all(vec <= 1.0)


def test_vectors_write_protected():
    vec = random_model(4, seed=0).lookup("x")
    with pytest.raises(ValueError):
        vec[0] = 9.9


def test_seed_changes_vectors():
    assert not np.array_equal(random_model(8, seed=1).lookup("x"),
                              random_model(8, seed=2).lookup("x"))


def test_load_text_vectors_roundtrip():
    text = "acid 0.5 -0.25 1.0\nbase 0.125 0.0 -1.0\n"
    model, warnings = load_text_vectors(io.StringIO(text))
    assert warnings == []
    assert model.kind == "Table"
    assert model.dimension == 3
    assert np.array_equal(model.lookup("acid"), [0.5, -0.25, 1.0])
    sink = io.StringIO()
    save_text_vectors(model, sink)
    model2, _ = load_text_vectors(io.StringIO(sink.getvalue()))
    for tok in ("acid", "base"):
        assert np.array_equal(model.lookup(tok), model2.lookup(tok))


def test_duplicate_token_last_wins_with_warning():
    text = "x 1 2\nx 3 4\n"
    model, warnings = load_text_vectors(io.StringIO(text))
    assert np.array_equal(model.lookup("x"), [3.0, 4.0])
    assert len(warnings) == 1 and "duplicate" in warnings[0]


def test_dimension_mismatch_reports_line():
    with pytest.raises(EmbeddingFormatError) as err:
        load_text_vectors(io.StringIO("a 1 2\nb 1 2 3\n"))
    assert "line 2" in str(err.value)


def test_empty_file_rejected():
    with pytest.raises(EmbeddingFormatError):
        load_text_vectors(io.StringIO(""))


def test_table_oov_falls_back_to_seeded_random():
    model, _ = load_text_vectors(io.StringIO("a 1 2\n"), seed=9)
    oov1 = model.lookup("missing")
    # same vector as an independent model with the same seed
    model2, _ = load_text_vectors(io.StringIO("a 1 2\n"), seed=9)
    assert np.array_equal(oov1, model2.lookup("missing"))
    assert oov1.shape == (2,)


def test_oov_stats():
    model, _ = load_text_vectors(io.StringIO("a 1 2\nb 3 4\n"))
    frac, n_oov, n_total = model.oov_stats({"a": 10, "b": 1, "c": 2, "d": 1})
    assert (frac, n_oov, n_total) == (0.5, 2, 4)
    assert random_model(4).oov_stats({"a": 1})[0] == 0.0


def test_contains():
    model, _ = load_text_vectors(io.StringIO("a 1 2\n"))
    assert "a" in model and "zzz" not in model
    assert "anything" in random_model(4)


def test_invalid_kind_and_dimension():
    with pytest.raises(ValueError):
        EmbeddingModel("Glove", 4)
    with pytest.raises(ValueError):
        EmbeddingModel("Random", 0)
