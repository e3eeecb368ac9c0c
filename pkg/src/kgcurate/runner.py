"""Configuration-driven pipeline: ingest -> gen -> train -> eval -> report,
plus the scarcity/imbalance simulation and prompting runs.

Every stage writes a manifest (config hash, seeds, versions, artifact
hashes) and is idempotent given identical config and seed. A single
master seed fans out to stage seeds by stable hashing.
"""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import __version__
from .adaptation import StopTokenSet, task_oriented_stopwords
from .classifier import (Hyperparams, TrainedEnsemble, default_grid,
                         feature_importance_report, fit_forest, grid_search_cv,
                         vectorize_dataset)
from .embedding import EmbeddingModel, load_text_vectors_file, random_model
from .icl import EndpointConfig, run_icl
from .metrics import auc_to_tsv, classification_report, roc_auc_by_relation
from .ontology import KnowledgeGraph, parse_obo_file, to_obo_text
from .seeding import derive_seed
from .taskgen import (DEFAULT_SCENARIOS, ScenarioSpec, TaskDataset,
                      build_task_dataset, read_dataset, sample_icl_pool,
                      scenario_subset, stratified_split, write_dataset)
from .tokenizer import token_frequency_report

STAGES = ("ingest", "gen", "train", "eval", "simulate", "icl", "report")


class ConfigError(ValueError):
    pass


class PrerequisiteError(RuntimeError):
    def __init__(self, missing_stage: str):
        super().__init__(
            f"missing artifacts from stage {missing_stage!r}; "
            f"run `kgcurate {missing_stage}` first")
        self.missing_stage = missing_stage


@dataclass
class ExperimentConfig:
    ontology: str
    out_dir: str
    seed: int = 0
    tasks: List[str] = field(default_factory=lambda: ["task1", "task2", "task3"])
    embeddings: Dict[str, str] = field(default_factory=lambda: {"random": "random"})
    embedding_dim: int = 300
    adaptations: List[str] = field(default_factory=lambda: ["none", "naive"])
    split: List[float] = field(default_factory=lambda: [0.9, 0.1])
    removed_relation: str = "is conjugate acid of"
    classifier: Dict = field(default_factory=dict)
    scenarios: object = "default"
    stopword_params: Dict = field(default_factory=dict)
    icl: Dict = field(default_factory=dict)

    def __post_init__(self):
        for adapt in self.adaptations:
            if adapt not in ("none", "naive", "task_oriented"):
                raise ConfigError(f"unknown adaptation {adapt!r}")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        if not Path(cfg.ontology).exists():
            raise ConfigError(f"ontology path does not exist: {cfg.ontology}")
        return cfg

    def hash(self) -> str:
        payload = {k: v for k, v in self.__dict__.items() if k != "out_dir"}
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(stage_dir: Path, stage: str, config: ExperimentConfig,
                    inputs: Dict[str, str]) -> None:
    outputs = {p.name: _sha256(p) for p in sorted(stage_dir.iterdir())
               if p.is_file() and p.name != "manifest.json"}
    manifest = {
        "stage": stage,
        "config_hash": config.hash(),
        "seed": config.seed,
        "versions": {"kgcurate": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "inputs": inputs,
        "outputs": outputs,
    }
    with open(stage_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _read_manifest(out: Path, stage: str) -> dict:
    path = out / stage / "manifest.json"
    if not path.exists():
        raise PrerequisiteError(stage)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _stage_dir(config: ExperimentConfig, stage: str) -> Path:
    d = Path(config.out_dir) / stage
    d.mkdir(parents=True, exist_ok=True)
    return d


# ----------------------------------------------------------------- stages

def cmd_ingest(config: ExperimentConfig) -> KnowledgeGraph:
    """Parse the ontology, drop the inverse relation, persist the graph."""
    kg = parse_obo_file(config.ontology)
    kg = kg.remove_relation(config.removed_relation)
    stage = _stage_dir(config, "ingest")
    with open(stage / "graph.obo", "w", encoding="utf-8") as fh:
        fh.write(to_obo_text(kg))
    stats = kg.stats()
    with open(stage / "stats.json", "w", encoding="utf-8") as fh:
        json.dump({"entities": stats.entity_count, "triples": stats.triple_count,
                   "per_relation": stats.per_relation,
                   "per_sub_ontology": stats.per_sub_ontology,
                   "warnings": list(kg.warnings)}, fh, indent=2, sort_keys=True)
    _write_manifest(stage, "ingest", config,
                    {"ontology": _sha256(Path(config.ontology))})
    return kg


def _load_graph(config: ExperimentConfig) -> KnowledgeGraph:
    _read_manifest(Path(config.out_dir), "ingest")
    return parse_obo_file(Path(config.out_dir) / "ingest" / "graph.obo")


def cmd_gen(config: ExperimentConfig) -> Dict[str, TaskDataset]:
    """Generate and split a labeled dataset per task."""
    kg = _load_graph(config)
    stage = _stage_dir(config, "gen")
    ingest_manifest = _read_manifest(Path(config.out_dir), "ingest")
    datasets = {}
    counts = {}
    for task in config.tasks:
        ds = build_task_dataset(kg, task, derive_seed(config.seed, "gen", task))
        ds = stratified_split(ds, config.split,
                              derive_seed(config.seed, "split", task))
        with open(stage / f"{task}.tsv", "w", encoding="utf-8") as fh:
            write_dataset(ds, fh)
        datasets[task] = ds
        counts[task] = ds.counts()
    with open(stage / "counts.json", "w", encoding="utf-8") as fh:
        json.dump(counts, fh, indent=2, sort_keys=True)
    _write_manifest(stage, "gen", config,
                    {"graph": ingest_manifest["outputs"]["graph.obo"]})
    return datasets


def _load_datasets(config: ExperimentConfig) -> Tuple[Dict[str, TaskDataset], dict]:
    manifest = _read_manifest(Path(config.out_dir), "gen")
    datasets = {}
    for task in config.tasks:
        path = Path(config.out_dir) / "gen" / f"{task}.tsv"
        if not path.exists():
            raise PrerequisiteError("gen")
        with open(path, "r", encoding="utf-8") as fh:
            datasets[task] = read_dataset(fh, task_id=task, seed=config.seed)
    return datasets, manifest


def _load_embedding(config: ExperimentConfig, name: str) -> EmbeddingModel:
    source = config.embeddings[name]
    seed = derive_seed(config.seed, "embedding", name)
    if source == "random":
        return random_model(config.embedding_dim, seed=seed)
    model, _ = load_text_vectors_file(source, seed=seed)
    return model


def _hyperparams(config: ExperimentConfig, seed_ctx: str) -> Hyperparams:
    c = dict(config.classifier)
    c.pop("grid_search", None)
    fs = c.get("feature_subsample", "sqrt")
    return Hyperparams(
        tree_count=c.get("tree_count", 100),
        max_depth=c.get("max_depth"),
        min_samples_leaf=c.get("min_samples_leaf", 1),
        feature_subsample=fs if fs == "sqrt" else float(fs),
        seed=derive_seed(config.seed, "forest", seed_ctx))


def _triples_text(kg: KnowledgeGraph, items) -> List[Tuple[str, str, str]]:
    return [(kg.name_of(it.triple.subject), it.triple.relation,
             kg.name_of(it.triple.object)) for it in items]


def _stop_for(config: ExperimentConfig, kg: KnowledgeGraph, ds: TaskDataset,
              emb: EmbeddingModel, adapt: str, task: str):
    if adapt == "none":
        return None
    if adapt == "naive":
        return "naive"
    train_pos = [it for it in ds.subset("train") if it.label]
    freq = token_frequency_report(kg, [it.triple for it in train_pos], "Both")
    names = set()
    for it in train_pos:
        names.add(kg.name_of(it.triple.subject))
        names.add(kg.name_of(it.triple.object))
    params = dict(config.stopword_params)
    return task_oriented_stopwords(
        names, emb, freq, seed=derive_seed(config.seed, "stopwords", task),
        **params)


def _combos(config: ExperimentConfig, emb_models: Dict[str, EmbeddingModel]):
    # Cluster/t-test selection is embedding-specific and meaningless for
    # the random baseline; those combinations are skipped.
    for emb_name, emb in emb_models.items():
        for adapt in config.adaptations:
            if adapt == "task_oriented" and emb.kind == "Random":
                continue
            yield emb_name, emb, adapt


def cmd_train(config: ExperimentConfig) -> List[str]:
    """Fit one ensemble per task x embedding x adaptation combination."""
    kg = _load_graph(config)
    datasets, gen_manifest = _load_datasets(config)
    stage = _stage_dir(config, "train")
    emb_models = {name: _load_embedding(config, name) for name in config.embeddings}
    trained = []
    for task in config.tasks:
        ds = datasets[task]
        dataset_hash = gen_manifest["outputs"][f"{task}.tsv"]
        train_items = ds.subset("train")
        y = np.array([it.label for it in train_items], dtype=np.int8)
        for emb_name, emb, adapt in _combos(config, emb_models):
            stop = _stop_for(config, kg, ds, emb, adapt, task)
            if isinstance(stop, StopTokenSet):
                with open(stage / f"stopwords_{task}_{emb_name}.json", "w",
                          encoding="utf-8") as fh:
                    fh.write(stop.to_json())
            X = vectorize_dataset(_triples_text(kg, train_items), emb, stop)
            ctx = f"{task}:{emb_name}:{adapt}"
            if config.classifier.get("grid_search"):
                hp, _scores = grid_search_cv(
                    X, y, default_grid(derive_seed(config.seed, "grid", ctx)),
                    seed=derive_seed(config.seed, "folds", ctx))
                hp = Hyperparams(hp.tree_count, hp.max_depth, hp.min_samples_leaf,
                                 hp.feature_subsample,
                                 derive_seed(config.seed, "forest", ctx))
            else:
                hp = _hyperparams(config, ctx)
            model = fit_forest(X, y, hp, dataset_hash=dataset_hash)
            name = f"model_{task}_{emb_name}_{adapt}"
            with open(stage / f"{name}.json", "w", encoding="utf-8") as fh:
                fh.write(model.to_json())
            with open(stage / f"{name}_importance.json", "w", encoding="utf-8") as fh:
                json.dump(feature_importance_report(model, emb.dimension), fh)
            trained.append(name)
    _write_manifest(stage, "train", config,
                    {f"{t}.tsv": gen_manifest["outputs"][f"{t}.tsv"]
                     for t in config.tasks})
    return trained


def cmd_eval(config: ExperimentConfig) -> Dict[str, dict]:
    """Score every trained model on its task's test split."""
    kg = _load_graph(config)
    datasets, gen_manifest = _load_datasets(config)
    _read_manifest(Path(config.out_dir), "train")
    stage = _stage_dir(config, "eval")
    train_dir = Path(config.out_dir) / "train"
    emb_models = {name: _load_embedding(config, name) for name in config.embeddings}
    results = {}
    for task in config.tasks:
        ds = datasets[task]
        test_items = ds.subset("test")
        truths = [it.label for it in test_items]
        relations = [it.triple.relation for it in test_items]
        for emb_name, emb, adapt in _combos(config, emb_models):
            name = f"model_{task}_{emb_name}_{adapt}"
            model_path = train_dir / f"{name}.json"
            if not model_path.exists():
                raise PrerequisiteError("train")
            with open(model_path, "r", encoding="utf-8") as fh:
                model = TrainedEnsemble.from_json(fh.read())
            stop = None if adapt == "none" else "naive"
            if adapt == "task_oriented":
                with open(train_dir / f"stopwords_{task}_{emb_name}.json",
                          "r", encoding="utf-8") as fh:
                    stop = StopTokenSet.from_json(fh.read())
            X = vectorize_dataset(_triples_text(kg, test_items), emb, stop)
            scores = model.predict_score(X)
            report = classification_report(list(scores >= 0.5), truths)
            auc, warnings = roc_auc_by_relation(scores, truths, relations)
            report.per_relation_auc = auc
            payload = {"task": task, "embedding": emb_name, "adaptation": adapt,
                       "dataset_hash": model.dataset_hash,
                       "report": json.loads(report.to_json()),
                       "warnings": warnings}
            with open(stage / f"eval_{task}_{emb_name}_{adapt}.json", "w",
                      encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
            with open(stage / f"auc_{task}_{emb_name}_{adapt}.tsv", "w",
                      encoding="utf-8") as fh:
                fh.write(auc_to_tsv(auc))
            results[f"{task}_{emb_name}_{adapt}"] = payload
    _write_manifest(stage, "eval", config,
                    {f"{t}.tsv": gen_manifest["outputs"][f"{t}.tsv"]
                     for t in config.tasks})
    return results


def _scenario_table(config: ExperimentConfig) -> List[ScenarioSpec]:
    if config.scenarios == "default":
        table = DEFAULT_SCENARIOS
    else:
        table = [(Fraction(a), Fraction(b)) for a, b in config.scenarios]
    return [ScenarioSpec(tt, pn, seed=derive_seed(config.seed, "scenario", i))
            for i, (tt, pn) in enumerate(table)]


def cmd_simulate(config: ExperimentConfig) -> Dict[str, list]:
    """Train/evaluate across the five scarcity/imbalance scenarios."""
    kg = _load_graph(config)
    datasets, gen_manifest = _load_datasets(config)
    stage = _stage_dir(config, "simulate")
    emb_models = {name: _load_embedding(config, name) for name in config.embeddings}
    results = {}
    for task in config.tasks:
        ds = datasets[task]
        test_items = ds.subset("test")
        truths = [it.label for it in test_items]
        for emb_name, emb, adapt in _combos(config, emb_models):
            stop = _stop_for(config, kg, ds, emb, adapt, task)
            X_test = vectorize_dataset(_triples_text(kg, test_items), emb, stop)
            rows = []
            for si, spec in enumerate(_scenario_table(config)):
                sub = scenario_subset(ds, spec)
                train_items = sub.subset("train")
                X = vectorize_dataset(_triples_text(kg, train_items), emb, stop)
                y = np.array([it.label for it in train_items], dtype=np.int8)
                hp = _hyperparams(config, f"sim:{task}:{emb_name}:{adapt}:{si}")
                model = fit_forest(X, y, hp)
                report = classification_report(
                    list(model.predict(X_test)), truths)
                rows.append({"scenario": si,
                             "train_test_ratio": str(spec.train_test_ratio),
                             "pos_neg_ratio": str(spec.pos_neg_ratio),
                             "train_size": len(train_items),
                             "f1": report.f1, "accuracy": report.accuracy})
            key = f"{task}_{emb_name}_{adapt}"
            with open(stage / f"sim_{key}.json", "w", encoding="utf-8") as fh:
                json.dump(rows, fh, indent=2, sort_keys=True)
            results[key] = rows
    _write_manifest(stage, "simulate", config,
                    {f"{t}.tsv": gen_manifest["outputs"][f"{t}.tsv"]
                     for t in config.tasks})
    return results


def cmd_icl(config: ExperimentConfig) -> Dict[str, object]:
    """Run the prompting experiment for each configured variant."""
    if not config.icl:
        raise ConfigError("config has no icl section")
    kg = _load_graph(config)
    datasets, gen_manifest = _load_datasets(config)
    stage = _stage_dir(config, "icl")
    icl_cfg = dict(config.icl)
    endpoint = EndpointConfig(
        url=icl_cfg["url"], model=icl_cfg.get("model", "mock"),
        credential_env=icl_cfg.get("credential_env"),
        temperature=icl_cfg.get("temperature", 0.0),
        max_tokens=icl_cfg.get("max_tokens_completion", 16),
        max_retries=icl_cfg.get("max_retries", 5),
        backoff_base=icl_cfg.get("backoff_base", 0.5),
        requests_per_minute=icl_cfg.get("requests_per_minute"))
    task = icl_cfg.get("task", config.tasks[0])
    ds = datasets[task]
    pool = sample_icl_pool(
        ds, seed=derive_seed(config.seed, "icl_pool", task),
        n_pos=icl_cfg.get("n_pos", 50), n_neg=icl_cfg.get("n_neg", 50),
        relation=icl_cfg.get("relation", "is_a"),
        max_tokens=icl_cfg.get("max_tokens", 60), name_of=kg.name_of)
    example_pool = ds.subset("train")
    results = {}
    for variant in icl_cfg.get("variants", ["base"]):
        run = run_icl(pool, example_pool, variant, endpoint,
                      stage / variant, seed=derive_seed(config.seed, "icl", variant),
                      repeats=icl_cfg.get("repeats", 5), name_of=kg.name_of)
        results[variant] = run
    _write_manifest(stage, "icl", config,
                    {f"{task}.tsv": gen_manifest["outputs"][f"{task}.tsv"]})
    return results


def cmd_report(config: ExperimentConfig) -> dict:
    """Join evaluation artifacts into one comparison table."""
    out = Path(config.out_dir)
    gen_manifest = _read_manifest(out, "gen")
    _read_manifest(out, "eval")
    stage = _stage_dir(config, "report")
    rows = []
    for path in sorted((out / "eval").glob("eval_*.json")):
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        expected = gen_manifest["outputs"][f"{payload['task']}.tsv"]
        if payload["dataset_hash"] != expected:
            raise RuntimeError(
                f"{path.name} was trained on a different dataset "
                f"({payload['dataset_hash']} != {expected}); regenerate or retrain")
        rows.append(payload)

    table: Dict[Tuple[str, str], Dict[str, dict]] = {}
    for payload in rows:
        key = (payload["embedding"], payload["adaptation"])
        table.setdefault(key, {})[payload["task"]] = payload["report"]
    report = {"rows": [
        {"embedding": empar[0], "adaptation": empar[1],
         "tasks": {t: {m: r[m] for m in
                       ("precision", "recall", "f1", "accuracy")}
                   for t, r in by_task.items()}}
        for empar, by_task in sorted(table.items())]}
    with open(stage / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)

    lines = [f"{'embedding':<14}{'adaptation':<16}"
             + "".join(f"{t + ' ' + m:>18}" for t in config.tasks
                       for m in ("P", "R", "F1"))]
    for row in report["rows"]:
        cells = []
        for t in config.tasks:
            r = row["tasks"].get(t)
            for m in ("precision", "recall", "f1"):
                cells.append(f"{r[m]:>18.4f}" if r else f"{'-':>18}")
        lines.append(f"{row['embedding']:<14}{row['adaptation']:<16}" + "".join(cells))
    with open(stage / "report.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    for path in sorted((out / "eval").glob("auc_*.tsv")):
        (stage / path.name).write_bytes(path.read_bytes())
    _write_manifest(stage, "report", config,
                    {f"{t}.tsv": gen_manifest["outputs"][f"{t}.tsv"]
                     for t in config.tasks})
    return report
