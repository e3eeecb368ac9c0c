"""Dataset generation for the three curation tasks.

Task 1: true vs randomly generated triples; task 2: true vs direction-
flipped triples; task 3: true vs sibling-object triples. Plus stratified
splits, scarcity/imbalance scenario subsets and the few-shot sampling pool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .ontology import KnowledgeGraph, Triple, normalize_relation
from .seeding import rng_for
from .tokenizer import tokenize

TASK_IDS = ("task1", "task2", "task3")
ORIGIN_POSITIVE = "positive"
ORIGIN_RANDOM = "random_negative"
ORIGIN_FLIPPED = "flipped_negative"
ORIGIN_SIBLING = "sibling_negative"
SPLIT_TAGS = ("train", "validation", "test", "unassigned")

SYMMETRIC_EXCLUDED = {"task2": ("is tautomer of",)}


class GenerationError(RuntimeError):
    pass


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledTriple:
    triple: Triple
    label: bool
    origin: str

    def __post_init__(self):
        if self.label != (self.origin == ORIGIN_POSITIVE):
            raise ValueError("label true iff origin is positive")


@dataclass
class TaskDataset:
    task_id: str
    items: List[LabeledTriple]
    seed: int
    split_tags: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.split_tags:
            self.split_tags = ["unassigned"] * len(self.items)
        if len(self.split_tags) != len(self.items):
            raise ValueError("split_tags must parallel items")

    def subset(self, tag: str) -> List[LabeledTriple]:
        return [it for it, t in zip(self.items, self.split_tags) if t == tag]

    def counts(self) -> Dict[str, int]:
        pos = sum(1 for it in self.items if it.label)
        return {"positive": pos, "negative": len(self.items) - pos}


@dataclass(frozen=True)
class ScenarioSpec:
    train_test_ratio: Fraction
    pos_neg_ratio: Fraction
    seed: int = 0

    def __post_init__(self):
        if self.train_test_ratio <= 0 or self.pos_neg_ratio <= 0:
            raise ValueError("ratios must be strictly positive")


# Splits implied by the published constant-test-size schedule, paired
# index-wise with the five imbalance ratios.
DEFAULT_SCENARIOS: Tuple[Tuple[Fraction, Fraction], ...] = (
    (Fraction(9), Fraction(1)),
    (Fraction(7), Fraction(3, 4)),
    (Fraction(4), Fraction(1, 2)),
    (Fraction(1), Fraction(1, 4)),
    (Fraction(1, 2), Fraction(1, 8)),
)


def positives_for_task(kg: KnowledgeGraph, task_id: str) -> List[Triple]:
    """All graph triples, minus symmetric relations for task 2."""
    if task_id not in TASK_IDS:
        raise ValueError(f"unknown task {task_id!r}")
    excluded = SYMMETRIC_EXCLUDED.get(task_id, ())
    return [t for t in kg.triples if t.relation not in excluded]


def gen_random_negatives(kg: KnowledgeGraph, positives: Sequence[Triple],
                         seed: int, uniform_relations: bool = False,
                         max_attempts_per_item: int = 10_000) -> List[Triple]:
    """Exactly len(positives) distinct corrupted triples absent from the graph.

    Subject and object are drawn from V with s != o; the relation follows
    the empirical relation distribution of the positives unless
    ``uniform_relations`` is set. Deterministic given seed.
    """
    count = len(positives)
    if count == 0:
        return []
    if len(kg.entities) < 2:
        raise GenerationError("need at least 2 entities to corrupt triples")
    ids = sorted(kg.entities)
    relations = (sorted({t.relation for t in positives}) if uniform_relations
                 else [t.relation for t in positives])
    out: List[Triple] = []
    seen: set = set()
    for i in range(count):
        rng = rng_for(seed, "random_neg", i)
        for _ in range(max_attempts_per_item):
            s = ids[rng.integers(len(ids))]
            o = ids[rng.integers(len(ids))]
            if s == o:
                continue
            l = relations[rng.integers(len(relations))]
            cand = Triple(s, l, o)
            if cand in kg.triple_set or cand in seen:
                continue
            seen.add(cand)
            out.append(cand)
            break
        else:
            raise GenerationError(
                f"exhausted candidates after {len(out)} of {count} negatives")
    return out


def gen_flipped_negatives(kg: KnowledgeGraph,
                          positives: Sequence[Triple]) -> List[Triple]:
    """Inversion (o, s, l) of each positive, skipping any that land in T."""
    out = []
    seen: set = set()
    for t in positives:
        cand = t.flipped()
        if cand in kg.triple_set or cand in seen:
            continue
        seen.add(cand)
        out.append(cand)
    return out


def gen_sibling_negatives(kg: KnowledgeGraph, positives: Sequence[Triple],
                          seed: int) -> List[Triple]:
    """Replace each positive's object with a random sibling; skip when the
    swap has no valid candidate. At most one negative per positive."""
    out: List[Triple] = []
    seen: set = set()
    for i, t in enumerate(positives):
        sibs = sorted(kg.siblings(t.object))
        candidates = [o2 for o2 in sibs
                      if o2 != t.subject
                      and Triple(t.subject, t.relation, o2) not in kg.triple_set]
        if not candidates:
            continue
        rng = rng_for(seed, "sibling_neg", i)
        cand = Triple(t.subject, t.relation, candidates[rng.integers(len(candidates))])
        if cand in seen:
            continue
        seen.add(cand)
        out.append(cand)
    return out


def build_task_dataset(kg: KnowledgeGraph, task_id: str, seed: int) -> TaskDataset:
    positives = positives_for_task(kg, task_id)
    if task_id == "task1":
        negatives = gen_random_negatives(kg, positives, seed)
        origin = ORIGIN_RANDOM
    elif task_id == "task2":
        negatives = gen_flipped_negatives(kg, positives)
        origin = ORIGIN_FLIPPED
    else:
        negatives = gen_sibling_negatives(kg, positives, seed)
        origin = ORIGIN_SIBLING
    items = [LabeledTriple(t, True, ORIGIN_POSITIVE) for t in positives]
    items += [LabeledTriple(t, False, origin) for t in negatives]
    return TaskDataset(task_id, items, seed)


def stratified_split(dataset: TaskDataset, ratios: Sequence[float],
                     seed: int) -> TaskDataset:
    """Partition items by (label, relation) strata into 2 or 3 parts.

    Largest-remainder allocation keeps each part within one item of its
    target per stratum. Strata smaller than the number of parts go to
    train with a warning.
    """
    if not dataset.items:
        raise ValueError("cannot split an empty dataset")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    if len(ratios) == 2:
        part_names = ["train", "test"]
    elif len(ratios) == 3:
        part_names = ["train", "validation", "test"]
    else:
        raise ValueError("expected 2 or 3 ratios")

    strata: Dict[Tuple[bool, str], List[int]] = {}
    for idx, item in enumerate(dataset.items):
        strata.setdefault((item.label, item.triple.relation), []).append(idx)

    tags = ["unassigned"] * len(dataset.items)
    warnings = list(dataset.warnings)
    for key in sorted(strata, key=str):
        idxs = list(strata[key])
        rng = rng_for(seed, "split", dataset.task_id, key[0], key[1])
        rng.shuffle(idxs)
        m = len(idxs)
        if m < len(part_names):
            warnings.append(f"stratum {key} has {m} items (< {len(part_names)} "
                            "parts); assigned to train")
            for i in idxs:
                tags[i] = "train"
            continue
        quotas = [r * m for r in ratios]
        counts = [math.floor(q) for q in quotas]
        order = sorted(range(len(ratios)),
                       key=lambda j: (quotas[j] - counts[j], -j), reverse=True)
        for j in order[: m - sum(counts)]:
            counts[j] += 1
        pos = 0
        for name, c in zip(part_names, counts):
            for i in idxs[pos:pos + c]:
                tags[i] = name
            pos += c
    return TaskDataset(dataset.task_id, list(dataset.items), dataset.seed,
                       tags, warnings)


def scenario_training_sizes(test_size: int,
                            split_ratios: Sequence[Fraction] = None) -> List[int]:
    """Training sizes for the constant-test-size scenario schedule.

    The base pool is ten times the test size minus one (a 10%-style sample
    split 9:1); ratios above 1 take the floor of the matching share of
    that pool, ratios at or below 1 scale the test size directly.
    """
    if split_ratios is None:
        split_ratios = [r for r, _ in DEFAULT_SCENARIOS]
    base = 10 * test_size - 1
    sizes = []
    for r in split_ratios:
        if r > 1:
            sizes.append(math.floor(base * r / 10))
        else:
            sizes.append(round(test_size * r))
    return sizes


def scenario_subset(dataset: TaskDataset, spec: ScenarioSpec,
                    train_size: Optional[int] = None) -> TaskDataset:
    """Downsample the training split to the scenario's size and imbalance.

    The test split is untouched. Training is first reduced (class-balanced,
    seeded) to ``train_size`` (or the schedule size for the spec's
    train:test ratio), then positives are further downsampled to the
    requested positive:negative ratio.
    """
    test_idx = [i for i, t in enumerate(dataset.split_tags) if t == "test"]
    train_idx = [i for i, t in enumerate(dataset.split_tags) if t == "train"]
    if not test_idx or not train_idx:
        raise ValueError("dataset must carry train and test splits")
    if train_size is None:
        train_size = scenario_training_sizes(
            len(test_idx), [spec.train_test_ratio])[0]
    if train_size > len(train_idx):
        raise GenerationError(
            f"requested {train_size} training items, only {len(train_idx)} available")

    pos_idx = [i for i in train_idx if dataset.items[i].label]
    neg_idx = [i for i in train_idx if not dataset.items[i].label]
    n_pos = train_size // 2
    n_neg = train_size - n_pos
    if n_pos > len(pos_idx):
        raise GenerationError(f"positive class can supply {len(pos_idx)} "
                              f"items, {n_pos} requested")
    if n_neg > len(neg_idx):
        raise GenerationError(f"negative class can supply {len(neg_idx)} "
                              f"items, {n_neg} requested")
    rng = rng_for(spec.seed, "scenario", str(spec.train_test_ratio),
                  str(spec.pos_neg_ratio))
    keep_pos = sorted(rng.choice(len(pos_idx), size=n_pos, replace=False))
    keep_neg = sorted(rng.choice(len(neg_idx), size=n_neg, replace=False))
    pos_sel = [pos_idx[i] for i in keep_pos]
    neg_sel = [neg_idx[i] for i in keep_neg]

    # Imbalance step: retain round(|neg| * ratio) positives.
    target_pos = round(len(neg_sel) * float(spec.pos_neg_ratio))
    if target_pos < len(pos_sel):
        keep = sorted(rng.choice(len(pos_sel), size=target_pos, replace=False))
        pos_sel = [pos_sel[i] for i in keep]

    selected = set(pos_sel) | set(neg_sel)
    items, tags = [], []
    for i, (item, tag) in enumerate(zip(dataset.items, dataset.split_tags)):
        if tag == "test":
            items.append(item)
            tags.append("test")
        elif i in selected:
            items.append(item)
            tags.append("train")
    return TaskDataset(dataset.task_id, items, dataset.seed, tags,
                       list(dataset.warnings))


def sample_icl_pool(dataset: TaskDataset, seed: int, n_pos: int = 50,
                    n_neg: int = 50, relation: str = "is_a",
                    max_tokens: int = 60,
                    tokenizer: Callable[[str], List[str]] = tokenize,
                    name_of: Callable[[str], str] = None,
                    split: Optional[str] = "test") -> List[LabeledTriple]:
    """Seeded sample of short triples of one relation for prompting.

    Token budget counts the concatenated subject + relation + object text.
    ``name_of`` maps entity ids to display names (identity by default).
    """
    rel = normalize_relation(relation)
    name_of = name_of or (lambda x: x)
    candidates = {True: [], False: []}
    for item, tag in zip(dataset.items, dataset.split_tags):
        if split is not None and tag != split:
            continue
        if item.triple.relation != rel:
            continue
        text = " ".join([name_of(item.triple.subject), item.triple.relation,
                         name_of(item.triple.object)])
        if len(tokenizer(text)) >= max_tokens:
            continue
        candidates[item.label].append(item)
    for label, need in ((True, n_pos), (False, n_neg)):
        if len(candidates[label]) < need:
            raise GenerationError(
                f"only {len(candidates[label])} qualifying "
                f"{'positives' if label else 'negatives'}, {need} requested")
    rng = rng_for(seed, "icl_pool", dataset.task_id)
    pool = []
    for label, need in ((True, n_pos), (False, n_neg)):
        idx = sorted(rng.choice(len(candidates[label]), size=need, replace=False))
        pool.extend(candidates[label][i] for i in idx)
    return pool


_ORIGINS = (ORIGIN_POSITIVE, ORIGIN_RANDOM, ORIGIN_FLIPPED, ORIGIN_SIBLING)
_HEADER = "subject\trelation\tobject\tlabel\torigin\tsplit"


def write_dataset(dataset: TaskDataset, sink) -> None:
    sink.write(_HEADER + "\n")
    for item, tag in zip(dataset.items, dataset.split_tags):
        t = item.triple
        sink.write(f"{t.subject}\t{t.relation}\t{t.object}\t"
                   f"{1 if item.label else 0}\t{item.origin}\t{tag}\n")


def read_dataset(source, task_id: str = "task1", seed: int = 0) -> TaskDataset:
    lines = iter(source)
    try:
        header = next(lines).rstrip("\n")
    except StopIteration:
        raise DatasetFormatError("empty dataset file") from None
    if header != _HEADER:
        raise DatasetFormatError(f"unexpected header: {header!r}")
    items, tags = [], []
    for rowno, line in enumerate(lines, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != 6:
            raise DatasetFormatError(f"row {rowno}: expected 6 columns, got {len(cols)}")
        subj, rel, obj, label, origin, tag = cols
        if label not in ("0", "1"):
            raise DatasetFormatError(f"row {rowno}: label must be 0 or 1")
        if origin not in _ORIGINS:
            raise DatasetFormatError(f"row {rowno}: unknown origin {origin!r}")
        if tag not in SPLIT_TAGS:
            raise DatasetFormatError(f"row {rowno}: unknown split {tag!r}")
        items.append(LabeledTriple(Triple(subj, rel, obj), label == "1", origin))
        tags.append(tag)
    return TaskDataset(task_id, items, seed, tags)
