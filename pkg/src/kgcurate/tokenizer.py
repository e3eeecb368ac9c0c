"""Regex tokenization of entity names and corpus token statistics."""

from __future__ import annotations

import re
from typing import Dict, Iterable, List

# Maximal runs of lowercase alphanumerics after lowercasing. Keeps
# stereo-descriptors like "6r"/"2s" as single tokens; punctuation separates.
DEFAULT_PATTERN = r"[a-z0-9]+"

_compiled: Dict[str, "re.Pattern[str]"] = {}


def tokenize(name: str, pattern: str = DEFAULT_PATTERN) -> List[str]:
    """Lowercase ``name`` and split into tokens by the given regex."""
    if pattern not in _compiled:
        _compiled[pattern] = re.compile(pattern)
    return _compiled[pattern].findall(name.lower())


def count_tokens(names: Iterable[str], pattern: str = DEFAULT_PATTERN) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for name in names:
        for tok in tokenize(name, pattern):
            counts[tok] = counts.get(tok, 0) + 1
    return counts


def token_frequency_report(kg, positives, population: str = "Both",
                           pattern: str = DEFAULT_PATTERN) -> Dict[str, int]:
    """Token counts over head/tail entity names of positive triples.

    population: "Heads", "Tails" or "Both".
    """
    if population not in ("Heads", "Tails", "Both"):
        raise ValueError(f"unknown population {population!r}")
    names: List[str] = []
    for t in positives:
        if population in ("Heads", "Both"):
            names.append(kg.name_of(t.subject))
        if population in ("Tails", "Both"):
            names.append(kg.name_of(t.object))
    return count_tokens(names, pattern)


def frequency_to_tsv(counts: Dict[str, int]) -> str:
    """TSV serialization, descending by count, ties lexicographic."""
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return "".join(f"{tok}\t{n}\n" for tok, n in rows)
