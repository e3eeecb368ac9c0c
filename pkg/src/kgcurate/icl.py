"""Few-shot prompting harness for chat-completion endpoints.

Builds the three prompt variants, delivers each prompt with repetition
through a retrying HTTP client, parses True/False/refusal verdicts, and
persists an incrementally written, resume-safe verdict table.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import requests

from .metrics import (VERDICT_FALSE, VERDICT_TRUE, VERDICT_UNCLASSIFIED,
                      EvalReport, fleiss_kappa, verdict_report)
from .seeding import derive_seed, rng_for
from .taskgen import LabeledTriple

VARIANTS = ("base", "dont_know", "shuffled")

BASE_TASK_LINE = "Your task is to classify triples as True or False."
DONT_KNOW_SENTENCE = "If you do not know the answer, state 'I don't know'"


class PromptSpecError(ValueError):
    pass


class TransportError(RuntimeError):
    pass


class ConfigurationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PromptSpec:
    variant: str
    positives: Tuple[LabeledTriple, ...]
    negatives: Tuple[LabeledTriple, ...]
    query: LabeledTriple
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise PromptSpecError(f"unknown variant {self.variant!r}")
        if len(self.positives) != 3 or len(self.negatives) != 3:
            raise PromptSpecError("exactly 3 examples per class required")
        examples = self.positives + self.negatives
        if len({e.triple for e in examples}) != 6:
            raise PromptSpecError("duplicate example triples")
        if any(e.triple == self.query.triple for e in examples):
            raise PromptSpecError("query must not appear among examples")


def render_triple(triple, name_of: Callable[[str], str] = None) -> str:
    name_of = name_of or (lambda x: x)
    return (f"({name_of(triple.subject)}, {triple.relation}, "
            f"{name_of(triple.object)})")


def build_prompt(spec: PromptSpec, name_of: Callable[[str], str] = None) -> str:
    """Render the prompt text; pure function of the spec (and names)."""
    task_line = BASE_TASK_LINE
    if spec.variant == "dont_know":
        task_line = f"{BASE_TASK_LINE} {DONT_KNOW_SENTENCE}."
    blocks = [(ex, "True") for ex in spec.positives]
    blocks += [(ex, "False") for ex in spec.negatives]
    if spec.variant == "shuffled":
        order = list(range(6))
        rng_for(spec.seed, "shuffle").shuffle(order)
        blocks = [blocks[i] for i in order]
    lines = [task_line]
    for ex, answer in blocks:
        lines.append(f"<triple>: {render_triple(ex.triple, name_of)}")
        lines.append(f"<classification>: {answer}")
    lines.append(f"<triple>: {render_triple(spec.query.triple, name_of)}")
    return "\n".join(lines)


_TRUE_RE = re.compile(r"\btrue\b")
_FALSE_RE = re.compile(r"\bfalse\b")
_DONT_KNOW_RE = re.compile(r"i\s+(?:don'?t|do\s+not)\s+know")


def parse_verdict(text: str) -> str:
    """Map raw response text to true/false/unclassified.

    Scans after the last "classification" marker when one is present;
    refusals and ambiguous answers (both or neither keyword) are
    unclassified.
    """
    lowered = text.lower()
    marker = lowered.rfind("classification")
    scope = lowered[marker:] if marker >= 0 else lowered
    if _DONT_KNOW_RE.search(scope):
        return VERDICT_UNCLASSIFIED
    has_true = _TRUE_RE.search(scope) is not None
    has_false = _FALSE_RE.search(scope) is not None
    if has_true and not has_false:
        return VERDICT_TRUE
    if has_false and not has_true:
        return VERDICT_FALSE
    return VERDICT_UNCLASSIFIED


@dataclass
class EndpointConfig:
    url: str
    model: str
    credential_env: Optional[str] = None
    temperature: float = 0.0
    max_tokens: int = 16
    max_retries: int = 5
    backoff_base: float = 0.5
    requests_per_minute: Optional[float] = None
    timeout: float = 60.0


@dataclass
class ChatResponse:
    text: str
    latency: float
    status: int
    retries: int = 0


def send_chat(prompt: str, config: EndpointConfig,
              session: Optional[requests.Session] = None) -> ChatResponse:
    """POST a single-user-message chat request, retrying 429/5xx."""
    headers = {"Content-Type": "application/json"}
    if config.credential_env:
        credential = os.environ.get(config.credential_env)
        if not credential:
            raise ConfigurationError(
                f"credential environment variable {config.credential_env} is not set")
        headers["Authorization"] = f"Bearer {credential}"
    body = {"model": config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens}
    post = (session or requests).post
    started = time.monotonic()
    last_error = "no attempt made"
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(config.backoff_base * (2 ** (attempt - 1)))
        try:
            resp = post(config.url, json=body, headers=headers,
                        timeout=config.timeout)
        except requests.RequestException as exc:
            last_error = f"transport: {exc}"
            continue
        if resp.status_code in (401, 403):
            raise ConfigurationError(f"authentication failed ({resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            continue
        if resp.status_code != 200:
            raise TransportError(f"unexpected HTTP {resp.status_code}: {resp.text[:200]}")
        text = resp.json()["choices"][0]["message"]["content"]
        return ChatResponse(text, time.monotonic() - started,
                            resp.status_code, retries=attempt)
    raise TransportError(f"retries exhausted: {last_error}")


class _RateLimiter:
    def __init__(self, per_minute: Optional[float]):
        self.interval = 60.0 / per_minute if per_minute else 0.0
        self.last = 0.0

    def wait(self):
        if not self.interval:
            return
        now = time.monotonic()
        delta = self.last + self.interval - now
        if delta > 0:
            time.sleep(delta)
        self.last = time.monotonic()


@dataclass
class IclRun:
    variant: str
    repeats: int
    verdicts: Dict[Tuple[int, int], str]
    report: EvalReport
    per_repeat: List[EvalReport]
    kappa: float


def _sample_examples(example_pool: Sequence[LabeledTriple], query: LabeledTriple,
                     seed: int, item_index: int):
    """Three positive and three negative examples, excluding the query."""
    rng = rng_for(seed, "examples", item_index)
    pos = [e for e in example_pool if e.label and e.triple != query.triple]
    neg = [e for e in example_pool if not e.label and e.triple != query.triple]
    if len(pos) < 3 or len(neg) < 3:
        raise PromptSpecError("example pool too small for 3+3 sampling")
    pos_idx = rng.choice(len(pos), size=3, replace=False)
    neg_idx = rng.choice(len(neg), size=3, replace=False)
    return (tuple(pos[i] for i in pos_idx), tuple(neg[i] for i in neg_idx))


def _read_verdict_table(path: Path) -> Dict[Tuple[int, int], str]:
    table: Dict[Tuple[int, int], str] = {}
    if not path.exists():
        return table
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        for line in fh:
            cols = line.rstrip("\n").split("\t")
            if len(cols) >= 3:
                table[(int(cols[0]), int(cols[1]))] = cols[2]
    return table


def majority_verdict(votes: Sequence[str]) -> str:
    counts = {VERDICT_TRUE: 0, VERDICT_FALSE: 0, VERDICT_UNCLASSIFIED: 0}
    for v in votes:
        counts[v] += 1
    if counts[VERDICT_TRUE] > counts[VERDICT_FALSE] and \
            counts[VERDICT_TRUE] >= counts[VERDICT_UNCLASSIFIED]:
        return VERDICT_TRUE
    if counts[VERDICT_FALSE] > counts[VERDICT_TRUE] and \
            counts[VERDICT_FALSE] >= counts[VERDICT_UNCLASSIFIED]:
        return VERDICT_FALSE
    return VERDICT_UNCLASSIFIED


def run_icl(pool: Sequence[LabeledTriple], example_pool: Sequence[LabeledTriple],
            variant: str, config: EndpointConfig, out_dir, seed: int,
            repeats: int = 5, name_of: Callable[[str], str] = None) -> IclRun:
    """Issue |pool| x repeats prompts, persisting verdicts incrementally.

    Completed (item, repeat) cells found in an existing verdict table are
    skipped, so an interrupted run resumes to the identical final table.
    Transport failures mark the cell unclassified instead of aborting.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    verdict_path = out / "verdicts.tsv"
    table = _read_verdict_table(verdict_path)
    new_file = not verdict_path.exists()
    limiter = _RateLimiter(config.requests_per_minute)
    session = requests.Session()

    with open(verdict_path, "a", encoding="utf-8") as vfh, \
            open(out / "prompts.jsonl", "a", encoding="utf-8") as pfh, \
            open(out / "responses.jsonl", "a", encoding="utf-8") as rfh:
        if new_file:
            vfh.write("item\trepeat\tverdict\treason\n")
            vfh.flush()
        for i, query in enumerate(pool):
            positives, negatives = _sample_examples(example_pool, query, seed, i)
            spec = PromptSpec(variant, positives, negatives, query,
                              seed=derive_seed(seed, "prompt", i))
            prompt = build_prompt(spec, name_of)
            for r in range(repeats):
                if (i, r) in table:
                    continue
                pfh.write(json.dumps({"item": i, "repeat": r, "prompt": prompt,
                                      "label": query.label}) + "\n")
                limiter.wait()
                reason = ""
                try:
                    resp = send_chat(prompt, config, session=session)
                    verdict = parse_verdict(resp.text)
                    rfh.write(json.dumps({"item": i, "repeat": r,
                                          "text": resp.text,
                                          "latency": resp.latency,
                                          "retries": resp.retries}) + "\n")
                except TransportError as exc:
                    verdict, reason = VERDICT_UNCLASSIFIED, "transport"
                    rfh.write(json.dumps({"item": i, "repeat": r,
                                          "error": str(exc)}) + "\n")
                table[(i, r)] = verdict
                vfh.write(f"{i}\t{r}\t{verdict}\t{reason}\n")
                vfh.flush()
                pfh.flush()
                rfh.flush()

    truths = [q.label for q in pool]
    majority = [majority_verdict([table[(i, r)] for r in range(repeats)])
                for i in range(len(pool))]
    report = verdict_report(majority, truths)
    per_repeat = [verdict_report([table[(i, r)] for i in range(len(pool))], truths)
                  for r in range(repeats)]
    counts = [[sum(1 for r in range(repeats) if table[(i, r)] == cat)
               for cat in (VERDICT_TRUE, VERDICT_FALSE, VERDICT_UNCLASSIFIED)]
              for i in range(len(pool))]
    # agreement needs repeated ratings; a single repeat trivially agrees
    kappa = fleiss_kappa(counts) if repeats >= 2 else 1.0
    report.kappa = kappa

    with open(out / "report.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json(
            variant=variant, repeats=repeats, seed=seed,
            model=config.model, temperature=config.temperature,
            per_repeat_f1=[r.f1 for r in per_repeat],
            per_repeat_accuracy=[r.accuracy for r in per_repeat]))
    return IclRun(variant, repeats, table, report, per_repeat, kappa)
