"""Seeded synthetic ontologies for tests, demos and desk-scale benchmarks.

Entities split into class-like, role-like and leaf entities with
chemistry-flavoured multi-token names; leaves attach to classes via
`is a`, giving real sibling structure, plus a sprinkle of the other
relation types so per-relation statistics are non-trivial.
"""

from __future__ import annotations

from typing import List

from .ontology import Entity, KnowledgeGraph, Triple
from .seeding import rng_for

CATEGORIES = ("acid", "metabolite", "ester", "steroid", "amine", "ketone",
              "phenol", "lipid", "peptide", "alcohol", "inhibitor", "salt")
MODIFIERS = ("hydroxy", "methyl", "chloro", "phenyl", "acetyl", "nitro",
             "amino", "bromo", "fluoro", "oxo")


def synthetic_knowledge_graph(n_entities: int = 200, seed: int = 0) -> KnowledgeGraph:
    if n_entities < 12:
        raise ValueError("need at least 12 entities")
    rng = rng_for(seed, "synthetic")
    n_classes = max(4, n_entities // 12)
    n_roles = max(2, n_entities // 30)
    n_leaves = n_entities - n_classes - n_roles

    entities: List[Entity] = []
    triples: List[Triple] = []

    def eid(i: int) -> str:
        return f"SYN:{i:07d}"

    class_ids, role_ids = [], []
    for i in range(n_classes):
        cat = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
        ident = eid(len(entities))
        entities.append(Entity(ident, f"{cat} family {i}", "Chemical"))
        if class_ids:
            parent = class_ids[int(rng.integers(len(class_ids)))]
            triples.append(Triple(ident, "is a", parent))
        class_ids.append(ident)
    for i in range(n_roles):
        cat = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
        ident = eid(len(entities))
        entities.append(Entity(ident, f"{cat} agent {i}", "Role"))
        role_ids.append(ident)

    leaf_ids = []
    class_cat = {c.id: c.name.split()[0] for c in entities if c.sub_ontology == "Chemical"}
    for i in range(n_leaves):
        ci = int(rng.integers(n_classes))
        cls = class_ids[ci]
        n1, n2 = rng.integers(1, 20), rng.integers(1, 20)
        mod = MODIFIERS[int(rng.integers(len(MODIFIERS)))]
        ident = eid(len(entities))
        entities.append(Entity(
            ident, f"{n1},{n2}-{mod} {class_cat[cls]} {i}", "Chemical"))
        leaf_ids.append(ident)
        triples.append(Triple(ident, "is a", cls))
        if rng.random() < 0.2:
            triples.append(Triple(ident, "is a",
                                  class_ids[int(rng.integers(n_classes))]))
        if rng.random() < 0.35:
            triples.append(Triple(ident, "has role",
                                  role_ids[int(rng.integers(n_roles))]))
        if leaf_ids[:-1]:
            if rng.random() < 0.15:
                triples.append(Triple(ident, "has functional parent",
                                      leaf_ids[int(rng.integers(len(leaf_ids) - 1))]))
            if rng.random() < 0.08:
                triples.append(Triple(ident, "has part",
                                      leaf_ids[int(rng.integers(len(leaf_ids) - 1))]))

    # Symmetric and paired relations between a few leaf pairs.
    n_pairs = max(1, n_leaves // 40)
    for rel_pair in (("is tautomer of", None),
                     ("is conjugate base of", "is conjugate acid of"),
                     ("is enantiomer of", None)):
        for _ in range(n_pairs):
            a = leaf_ids[int(rng.integers(len(leaf_ids)))]
            b = leaf_ids[int(rng.integers(len(leaf_ids)))]
            if a == b:
                continue
            triples.append(Triple(a, rel_pair[0], b))
            triples.append(Triple(b, rel_pair[1] or rel_pair[0], a))

    return KnowledgeGraph(entities, triples)
