"""Shared corpus with a planted stop-word cluster.

Construction: a tight cluster of six "planted" tokens (near-identical
embeddings) appears in ~90% of entity names, so dropping it rescales
centroid distances and shifts their variance by roughly 4x. A second,
equally tight "control" cluster appears in under 1% of entities, so
dropping it barely moves anything. Filler tokens are mutually distant
and should land in DBSCAN noise.
"""

import numpy as np

from kgcurate.embedding import EmbeddingModel

DIM = 8
N_ENTITIES = 300
PLANTED = tuple(f"planted{i}" for i in range(6))
CONTROL = tuple(f"control{i}" for i in range(6))
FILLERS = tuple(f"filler{i}" for i in range(20))
EPS = 0.1


def planted_corpus(seed: int):
    """Returns (entity_names, embedding_model, token_freq)."""
    rng = np.random.default_rng(seed)
    vocab = {}
    planted_center = rng.normal(size=DIM)
    control_center = rng.normal(size=DIM) + 10.0
    for i, tok in enumerate(PLANTED):
        vocab[tok] = planted_center + 0.001 * rng.normal(size=DIM)
    for i, tok in enumerate(CONTROL):
        vocab[tok] = control_center + 0.001 * rng.normal(size=DIM)
    for tok in FILLERS:
        vocab[tok] = 5.0 * rng.normal(size=DIM)
    for v in vocab.values():
        v.flags.writeable = False
    emb = EmbeddingModel("Table", DIM, seed=seed, vocabulary=vocab)

    names = []
    for i in range(N_ENTITIES):
        fillers = rng.choice(len(FILLERS), size=2, replace=False)
        toks = [FILLERS[j] for j in fillers]
        if i % 10 != 9:  # 90% of entities carry the planted pair
            picked = rng.choice(len(PLANTED), size=2, replace=False)
            toks += [PLANTED[j] for j in picked]
        if i < 2:  # under 1% carry a control token
            toks.append(CONTROL[i % len(CONTROL)])
        names.append(" ".join(toks))

    freq = {}
    for name in names:
        for tok in name.split():
            freq[tok] = freq.get(tok, 0) + 1
    for tok in CONTROL:  # keep the whole control cluster in-vocabulary
        freq.setdefault(tok, 1)
    return names, emb, freq
