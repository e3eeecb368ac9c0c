"""Classification metrics with unclassified-aware accounting.

Accuracy counts unclassified verdicts as wrong; precision, recall and F1
are computed over the classified subset only. Per-relation ROC-AUC uses
the rank statistic with midrank tie handling, and Fleiss' kappa scores
agreement across repeated categorical ratings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence

import numpy as np

VERDICT_TRUE = "true"
VERDICT_FALSE = "false"
VERDICT_UNCLASSIFIED = "unclassified"
VERDICTS = (VERDICT_TRUE, VERDICT_FALSE, VERDICT_UNCLASSIFIED)


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    n_total: int
    n_unclassified: int = 0
    macro_precision: float = 0.0
    macro_recall: float = 0.0
    macro_f1: float = 0.0
    degenerate: bool = False  # a zero-denominator metric was forced to 0
    per_relation_auc: Optional[Dict[str, float]] = None
    kappa: Optional[float] = None

    def to_json(self, **extra) -> str:
        payload = asdict(self)
        payload.update(extra)
        return json.dumps(payload, indent=2, sort_keys=True)


def _prf(tp: int, fp: int, fn: int):
    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1, degenerate


def classification_report(predictions: Sequence[bool],
                          truths: Sequence[bool]) -> EvalReport:
    """Accuracy plus positive-class and macro-averaged P/R/F1."""
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if not truths:
        raise ValueError("empty inputs")
    n = len(truths)
    tp = sum(1 for p, t in zip(predictions, truths) if p and t)
    fp = sum(1 for p, t in zip(predictions, truths) if p and not t)
    fn = sum(1 for p, t in zip(predictions, truths) if not p and t)
    tn = n - tp - fp - fn
    precision, recall, f1, degen = _prf(tp, fp, fn)
    # Macro average treats the negative class symmetrically.
    p_neg, r_neg, f_neg, degen_neg = _prf(tn, fn, fp)
    return EvalReport(
        accuracy=(tp + tn) / n,
        precision=precision, recall=recall, f1=f1,
        n_total=n,
        macro_precision=(precision + p_neg) / 2,
        macro_recall=(recall + r_neg) / 2,
        macro_f1=(f1 + f_neg) / 2,
        degenerate=degen or degen_neg,
    )


def verdict_report(verdicts: Sequence[str], truths: Sequence[bool]) -> EvalReport:
    """Evaluate three-state verdicts against boolean truths."""
    if len(verdicts) != len(truths):
        raise ValueError("verdicts and truths differ in length")
    for v in verdicts:
        if v not in VERDICTS:
            raise ValueError(f"unknown verdict {v!r}")
    n = len(verdicts)
    classified = [(v == VERDICT_TRUE, t) for v, t in zip(verdicts, truths)
                  if v != VERDICT_UNCLASSIFIED]
    n_unclassified = n - len(classified)
    correct = sum(1 for p, t in classified if p == t)
    if classified:
        sub = classification_report([p for p, _ in classified],
                                    [t for _, t in classified])
    else:
        sub = EvalReport(0.0, 0.0, 0.0, 0.0, 0, degenerate=True)
    return EvalReport(
        accuracy=correct / n if n else 0.0,
        precision=sub.precision, recall=sub.recall, f1=sub.f1,
        n_total=n, n_unclassified=n_unclassified,
        macro_precision=sub.macro_precision, macro_recall=sub.macro_recall,
        macro_f1=sub.macro_f1, degenerate=sub.degenerate,
    )


def roc_auc(scores: Sequence[float], truths: Sequence[bool]) -> float:
    """AUC via the Mann-Whitney rank statistic; ties contribute 1/2."""
    if len(scores) != len(truths):
        raise ValueError("scores and truths differ in length")
    y = np.asarray(truths, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    s = np.asarray(scores, dtype=float)
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[y].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def roc_auc_by_relation(scores: Sequence[float], truths: Sequence[bool],
                        relations: Sequence[str]):
    """Per-relation AUC; single-class groups are omitted with a warning."""
    groups: Dict[str, List[int]] = {}
    for i, rel in enumerate(relations):
        groups.setdefault(rel, []).append(i)
    out: Dict[str, float] = {}
    warnings = []
    for rel in sorted(groups):
        idx = groups[rel]
        labels = {truths[i] for i in idx}
        if len(labels) < 2:
            warnings.append(f"relation {rel!r} lacks one class; omitted")
            continue
        out[rel] = roc_auc([scores[i] for i in idx], [truths[i] for i in idx])
    return out, warnings


def auc_to_tsv(per_relation: Dict[str, float]) -> str:
    return "".join(f"{rel}\t{auc:.6f}\n" for rel, auc in sorted(per_relation.items()))


def fleiss_kappa(table: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa over an item x category count matrix.

    Every item must carry the same number of ratings. Returns 1.0 in the
    degenerate all-one-category case (perfect agreement by definition).
    """
    m = np.asarray(table, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError("table must be a 2-D item x category matrix")
    row_sums = m.sum(axis=1)
    n = row_sums[0]
    if n < 2:
        raise ValueError("need at least 2 ratings per item")
    if not np.all(row_sums == n):
        raise ValueError("ragged table: unequal ratings per item")
    n_items = m.shape[0]
    p_cat = m.sum(axis=0) / (n_items * n)
    p_bar = ((m * (m - 1)).sum(axis=1) / (n * (n - 1))).mean()
    p_e = float((p_cat ** 2).sum())
    if p_e >= 1.0 - 1e-15:
        return 1.0
    return (p_bar - p_e) / (1 - p_e)
