"""Flat OBO parsing and immutable knowledge-graph queries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Tuple

SUB_ONTOLOGIES = ("Chemical", "Role", "SubatomicParticle", "Unknown")

# Canonical relation labels use spaces; OBO relationship ids use underscores.
RELATION_LABELS = {
    "is_a": "is a",
    "has_part": "has part",
    "is_conjugate_base_of": "is conjugate base of",
    "is_conjugate_acid_of": "is conjugate acid of",
    "is_tautomer_of": "is tautomer of",
    "is_enantiomer_of": "is enantiomer of",
    "has_functional_parent": "has functional parent",
    "has_parent_hydride": "has parent hydride",
    "is_substituent_group_from": "is substituent group from",
    "has_role": "has role",
}
_LABEL_TO_ID = {v: k for k, v in RELATION_LABELS.items()}

IS_A = "is a"


def normalize_relation(relation: str) -> str:
    """Map an OBO relationship id or space-separated label to canonical form."""
    rel = relation.strip()
    if rel in _LABEL_TO_ID:
        return rel
    if rel in RELATION_LABELS:
        return RELATION_LABELS[rel]
    raise ValueError(f"unknown relation label {relation!r}")


def relation_obo_id(relation: str) -> str:
    rel = normalize_relation(relation)
    return _LABEL_TO_ID.get(rel, rel.replace(" ", "_"))


class OboParseError(ValueError):
    """Malformed stanza; carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UnknownEntityError(KeyError):
    pass


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    sub_ontology: str = "Unknown"


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    relation: str
    object: str

    def as_tuple(self) -> Tuple[str, str, str]:
        return (self.subject, self.relation, self.object)

    def flipped(self) -> "Triple":
        return Triple(self.object, self.relation, self.subject)


@dataclass(frozen=True)
class OntologyStats:
    entity_count: int
    triple_count: int
    per_relation: Dict[str, int]
    per_sub_ontology: Dict[str, int]


class KnowledgeGraph:
    """Immutable (by convention) set of entities and deduplicated triples.

    ``parent_index`` is exactly the projection of `is a` triples; sibling
    queries go through a derived child index. Safe for concurrent readers
    once constructed.
    """

    def __init__(self, entities: Iterable[Entity], triples: Iterable[Triple],
                 warnings: Iterable[str] = ()):
        self.entities: Dict[str, Entity] = {}
        for ent in entities:
            if not ent.id or not ent.name:
                raise ValueError(f"entity with empty id or name: {ent!r}")
            if ent.id in self.entities:
                raise ValueError(f"duplicate entity id {ent.id}")
            self.entities[ent.id] = ent

        seen = set()
        ordered: List[Triple] = []
        for t in triples:
            if t in seen:
                continue
            if t.subject not in self.entities or t.object not in self.entities:
                raise ValueError(f"triple references unknown entity: {t}")
            seen.add(t)
            ordered.append(t)
        self.triples: Tuple[Triple, ...] = tuple(ordered)
        self.triple_set: FrozenSet[Triple] = frozenset(ordered)
        self.relations: FrozenSet[str] = frozenset(t.relation for t in ordered)
        self.warnings: Tuple[str, ...] = tuple(warnings)

        parent: Dict[str, set] = {}
        child: Dict[str, set] = {}
        for t in ordered:
            if t.relation == IS_A:
                parent.setdefault(t.subject, set()).add(t.object)
                child.setdefault(t.object, set()).add(t.subject)
        self.parent_index: Dict[str, FrozenSet[str]] = {
            k: frozenset(v) for k, v in parent.items()}
        self._child_index: Dict[str, FrozenSet[str]] = {
            k: frozenset(v) for k, v in child.items()}

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.triple_set

    def name_of(self, entity_id: str) -> str:
        return self._entity(entity_id).name

    def _entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownEntityError(entity_id) from None

    def parents(self, entity_id: str) -> FrozenSet[str]:
        """Objects of all `is a` triples whose subject is ``entity_id``."""
        self._entity(entity_id)
        return self.parent_index.get(entity_id, frozenset())

    def siblings(self, entity_id: str) -> FrozenSet[str]:
        """All other entities sharing at least one `is a` parent."""
        self._entity(entity_id)
        out: set = set()
        for p in self.parent_index.get(entity_id, ()):
            out |= self._child_index.get(p, frozenset())
        out.discard(entity_id)
        return frozenset(out)

    def stats(self) -> OntologyStats:
        per_rel: Dict[str, int] = {}
        for t in self.triples:
            per_rel[t.relation] = per_rel.get(t.relation, 0) + 1
        per_sub: Dict[str, int] = {}
        for ent in self.entities.values():
            per_sub[ent.sub_ontology] = per_sub.get(ent.sub_ontology, 0) + 1
        return OntologyStats(len(self.entities), len(self.triples), per_rel, per_sub)

    def remove_relation(self, relation: str) -> "KnowledgeGraph":
        """New graph without triples of the given relation; entities kept."""
        rel = normalize_relation(relation)
        kept = [t for t in self.triples if t.relation != rel]
        return KnowledgeGraph(self.entities.values(), kept, self.warnings)


# Sub-ontology hints found in ChEBI-style `subset:`/`namespace:` lines.
_SUB_ONTOLOGY_HINTS = {
    "chemical": "Chemical",
    "chemical_entity": "Chemical",
    "role": "Role",
    "subatomic_particle": "SubatomicParticle",
    "subatomic particle": "SubatomicParticle",
}


def parse_obo(lines: Iterable[str]) -> KnowledgeGraph:
    """Parse a flat OBO document into a knowledge graph.

    Obsolete terms are dropped along with their triples; relationship
    targets that never resolve are recorded as warnings and skipped.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    entities: List[Entity] = []
    raw_triples: List[Tuple[str, str, str, int]] = []
    warnings: List[str] = []

    in_term = False
    cur: Dict[str, object] = {}
    stanza_line = 0

    def flush():
        if not cur:
            return
        if cur.get("obsolete"):
            return
        if "id" not in cur:
            raise OboParseError("[Term] stanza missing id", stanza_line)
        if "name" not in cur:
            raise OboParseError(f"term {cur['id']} missing name", stanza_line)
        entities.append(Entity(cur["id"], cur["name"], cur.get("sub", "Unknown")))
        for rel, target, ln in cur.get("rels", []):
            raw_triples.append((cur["id"], rel, target, ln))

    lineno = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").strip()
        if line == "[Term]":
            flush()
            cur = {"rels": []}
            in_term = True
            stanza_line = lineno
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            cur = {}
            in_term = False
            continue
        if not in_term or not line or line.startswith("!"):
            continue
        key, _, value = line.partition(":")
        value = value.split("!", 1)[0].strip()
        key = key.strip()
        if key == "id":
            if not value:
                raise OboParseError("empty id value", lineno)
            cur["id"] = value
        elif key == "name":
            if not value:
                raise OboParseError("empty name value", lineno)
            cur["name"] = value
        elif key == "is_a":
            cur["rels"].append((IS_A, value, lineno))
        elif key == "relationship":
            parts = value.split()
            if len(parts) < 2:
                raise OboParseError(f"malformed relationship line: {line!r}", lineno)
            try:
                rel = normalize_relation(parts[0])
            except ValueError as exc:
                raise OboParseError(str(exc), lineno) from None
            cur["rels"].append((rel, parts[1], lineno))
        elif key == "is_obsolete" and value.lower() == "true":
            cur["obsolete"] = True
        elif key in ("namespace", "subset"):
            hint = _SUB_ONTOLOGY_HINTS.get(value.lower())
            if hint:
                cur["sub"] = hint
    flush()

    known = {e.id for e in entities}
    triples: List[Triple] = []
    for subj, rel, obj, ln in raw_triples:
        if obj not in known:
            warnings.append(f"line {ln}: dangling reference {obj}, triple dropped")
            continue
        triples.append(Triple(subj, rel, obj))
    return KnowledgeGraph(entities, triples, warnings)


def parse_obo_file(path) -> KnowledgeGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_obo(fh)


def to_obo_text(kg: KnowledgeGraph) -> str:
    """Serialize a graph back to flat OBO; round-trips through parse_obo."""
    by_subject: Dict[str, List[Triple]] = {}
    for t in kg.triples:
        by_subject.setdefault(t.subject, []).append(t)

    sub_to_hint = {"Chemical": "chemical_entity", "Role": "role",
                   "SubatomicParticle": "subatomic_particle"}
    chunks = ["format-version: 1.2\n"]
    for eid in kg.entities:
        ent = kg.entities[eid]
        lines = ["[Term]", f"id: {ent.id}", f"name: {ent.name}"]
        if ent.sub_ontology in sub_to_hint:
            lines.append(f"namespace: {sub_to_hint[ent.sub_ontology]}")
        for t in by_subject.get(eid, ()):
            if t.relation == IS_A:
                lines.append(f"is_a: {t.object}")
            else:
                lines.append(f"relationship: {relation_obo_id(t.relation)} {t.object}")
        chunks.append("\n".join(lines) + "\n")
    return "\n".join(chunks)
