"""Word-vector tables, the random-embedding baseline and OOV resolution.

Out-of-vocabulary tokens resolve to deterministic uniform(-1, 1) vectors
keyed by (seed, token), so lookups are order- and thread-independent.
"""

from __future__ import annotations

import json
from typing import Dict, Iterable, Optional, TextIO, Tuple

import numpy as np

from .seeding import rng_for


class EmbeddingFormatError(ValueError):
    pass


def _token_vector(seed: int, token: str, dimension: int) -> np.ndarray:
    vec = rng_for(seed, "token", token).uniform(-1.0, 1.0, dimension)
    vec.flags.writeable = False
    return vec


class EmbeddingModel:
    """Token -> vector map, either a loaded table or fully random.

    kind: "Table" or "Random". Repeated lookups of the same token return
    the identical vector; OOV vectors are cached but also recomputable.
    """

    def __init__(self, kind: str, dimension: int, seed: int = 0,
                 vocabulary: Optional[Dict[str, np.ndarray]] = None):
        if kind not in ("Table", "Random"):
            raise ValueError(f"unknown embedding kind {kind!r}")
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.kind = kind
        self.dimension = dimension
        self.seed = seed
        self.vocabulary: Dict[str, np.ndarray] = vocabulary or {}
        self.oov_cache: Dict[str, np.ndarray] = {}

    def lookup(self, token: str) -> np.ndarray:
        if self.kind == "Table":
            vec = self.vocabulary.get(token)
            if vec is not None:
                return vec
        vec = self.oov_cache.get(token)
        if vec is None:
            vec = _token_vector(self.seed, token, self.dimension)
            self.oov_cache[token] = vec
        return vec

    def __contains__(self, token: str) -> bool:
        return self.kind == "Random" or token in self.vocabulary

    def oov_stats(self, token_counts: Dict[str, int]) -> Tuple[float, int, int]:
        """(fraction, n_oov, n_total) of distinct tokens not covered."""
        total = len(token_counts)
        if total == 0:
            return 0.0, 0, 0
        if self.kind == "Random":
            return 0.0, 0, total
        n_oov = sum(1 for tok in token_counts if tok not in self.vocabulary)
        return n_oov / total, n_oov, total

    def metadata(self) -> Dict[str, object]:
        return {"kind": self.kind, "dimension": self.dimension,
                "seed": self.seed, "vocab_size": len(self.vocabulary)}

    def save_metadata(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.metadata(), fh, indent=2)


def random_model(dimension: int = 300, seed: int = 0) -> EmbeddingModel:
    return EmbeddingModel("Random", dimension, seed=seed)


def load_text_vectors(stream: Iterable[str], expected_dim: Optional[int] = None,
                      seed: int = 0) -> Tuple[EmbeddingModel, list]:
    """Parse whitespace-separated `token v1 ... vd` lines into a Table model.

    Duplicate tokens: last occurrence wins, with a warning. Returns
    (model, warnings).
    """
    vocab: Dict[str, np.ndarray] = {}
    warnings = []
    dim = expected_dim
    for lineno, line in enumerate(stream, start=1):
        parts = line.split()
        if not parts:
            continue
        token, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise EmbeddingFormatError(f"line {lineno}: no vector components")
        if len(values) != dim:
            raise EmbeddingFormatError(
                f"line {lineno}: expected {dim} components, got {len(values)}")
        if token in vocab:
            warnings.append(f"line {lineno}: duplicate token {token!r}, last wins")
        vec = np.array([float(v) for v in values])
        vec.flags.writeable = False
        vocab[token] = vec
    if not vocab:
        raise EmbeddingFormatError("empty vector file")
    return EmbeddingModel("Table", dim, seed=seed, vocabulary=vocab), warnings


def load_text_vectors_file(path, expected_dim: Optional[int] = None,
                           seed: int = 0) -> Tuple[EmbeddingModel, list]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_text_vectors(fh, expected_dim=expected_dim, seed=seed)


def save_text_vectors(model: EmbeddingModel, sink: TextIO) -> None:
    for token, vec in model.vocabulary.items():
        sink.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")
