"""End-to-end steps shared by the command line and the demo scripts.

All randomness derives from one master seed through named substreams, so
each step can be rerun in isolation with the same result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import io
from .dataset import LabeledDataset, SplitSpec, kfold, smote, stratified_split
from .evaluation import CVResult, EvalReport, cross_validate, evaluate, search_hyperparams
from .features import feature_vector
from .gbt import GbtModel, Hyperparams, save_model, train
from .generators import CLASS_NAMES, ModelClass, SimulationManifest, simulate_corpus
from .graph import format_edge_list, read_edge_list

log = logging.getLogger(__name__)

STREAMS = ("split", "cv", "search", "smote", "train", "hstats")


def named_seed(seed: int, name: str) -> int:
    """Independent 32-bit seed for the step ``name``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0x5EED, STREAMS.index(name)))
    return int(ss.generate_state(1)[0])


# -- simulate -------------------------------------------------------------------------------

def write_corpus(manifest: SimulationManifest, out_dir, jobs: int = 1) -> int:
    """Simulate the manifest into ``out_dir/graphs/*.edges`` plus ``index.csv``."""
    out = Path(out_dir)
    corpus = simulate_corpus(manifest, jobs=jobs)
    for s in corpus:
        io.atomic_write(out / "graphs" / f"{s.graph_id}.edges", format_edge_list(s.graph))
    io.write_csv(out / "index.csv", io.INDEX_HEADER, io.index_rows(corpus, manifest.seed))
    io.atomic_write(out / "manifest.yaml", io.manifest_to_yaml(manifest))
    log.info("wrote %d graphs to %s", len(corpus), out)
    return len(corpus)


# -- featurize ------------------------------------------------------------------------------

def _featurize_file(path) -> np.ndarray:
    return feature_vector(read_edge_list(path)).as_array()


def _safe_featurize(path):
    try:
        return _featurize_file(path), None
    except Exception as exc:  # noqa: BLE001 - reported per graph
        return None, f"{type(exc).__name__}: {exc}"


@dataclass
class FeatureTable:
    ids: list[str]
    classes: list
    X: np.ndarray
    errors: list[tuple[str, str]] = field(default_factory=list)


def featurize_corpus(corpus_dir, jobs: int = 1) -> FeatureTable:
    """Compute features for every graph listed in ``index.csv``, sorted by graph id."""
    corpus_dir = Path(corpus_dir)
    entries = sorted(io.read_index(corpus_dir / "index.csv"), key=lambda e: e["graph_id"])
    paths = [corpus_dir / "graphs" / f"{e['graph_id']}.edges" for e in entries]
    if jobs > 1:
        results = Parallel(n_jobs=jobs)(delayed(_safe_featurize)(p) for p in paths)
    else:
        results = [_safe_featurize(p) for p in paths]
    ids, classes, rows, errors = [], [], [], []
    for e, (x, err) in zip(entries, results):
        if err is not None:
            errors.append((e["graph_id"], err))
            continue
        ids.append(e["graph_id"])
        classes.append(ModelClass.parse(e["class"]) if e["class"] else None)
        rows.append(x)
    X = np.array(rows).reshape(-1, len(io.FEATURE_NAMES))
    return FeatureTable(ids, classes, io.quantize(X), errors)


# -- train ------------------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: GbtModel
    report: EvalReport
    hyperparams: Hyperparams
    cv: CVResult | None
    search: list[tuple[Hyperparams, CVResult]]
    train: LabeledDataset
    test: LabeledDataset
    folds: list
    k: int


def run_training(d: LabeledDataset, seed: int = 0, hp: Hyperparams | None = None,
                 search: int = 0, k: int = 10, repeats: int = 1, jobs: int = 1) -> TrainResult:
    """Split, optionally search, cross-validate, oversample, fit and test.

    ``hp`` defaults to :class:`Hyperparams` seeded from the ``train``
    substream. With ``search > 0`` the best of ``search`` sampled
    configurations (CV on the training split) replaces the four searched
    fields of ``hp``. ``k = 0`` skips CV when no search runs.
    """
    base = hp if hp is not None else Hyperparams(seed=named_seed(seed, "train"))
    cv_seed = named_seed(seed, "cv")
    tr, te = stratified_split(d, SplitSpec(seed=named_seed(seed, "split")))
    ranked: list = []
    cv = None
    folds = []
    if search > 0:
        ranked = search_hyperparams(tr, search, seed=named_seed(seed, "search"), k=k,
                                    repeats=repeats, jobs=jobs, base=base, cv_seed=cv_seed)
        base, cv = ranked[0]
    elif k > 0:
        cv = cross_validate(tr, base, k, repeats, seed=cv_seed, jobs=jobs)
    if k > 0:
        folds = kfold(tr, k, repeats, cv_seed)
    fit = smote(tr, seed=named_seed(seed, "smote"))
    model = train(fit, base)
    return TrainResult(model, evaluate(model, te), base, cv, ranked, tr, te, folds, k)


def write_training_outputs(res: TrainResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = {int(c): c.name for c in ModelClass}
    io.write_csv(out / "eval_report.csv", ("section", "key", "column", "value"),
                 res.report.rows(names))
    if res.cv is not None:
        s = res.cv.summary()
        io.write_csv(out / "cv_summary.csv", ("metric", "value"), s.items())
        io.write_csv(out / "cv_folds.csv", ("fold", "accuracy", "auc", "log_loss"),
                     ([i, f.accuracy, f.auc, f.log_loss] for i, f in enumerate(res.cv.folds)))
    if res.search:
        keys = ("trees", "tree_depth", "learning_rate", "mtry")
        io.write_csv(out / "search_log.csv", ("rank",) + keys + ("cv_accuracy", "cv_log_loss"),
                     ([r, *(getattr(h, k) for k in keys), c.summary()["accuracy_mean"],
                       c.summary()["log_loss_mean"]] for r, (h, c) in enumerate(res.search, 1)))
    io.write_csv(out / "split.csv", ("graph_id", "role", "fold", "repeat"),
                 io.split_rows(res.train.graph_ids, res.test.graph_ids, res.folds, res.k))
    save_model(res.model, out / "model.json")


# -- predict -------------------------------------------------------------------------------------

def prediction_rows(model: GbtModel, ids, X):
    proba = model.predict_proba(X)
    pred = model.predict_class(X)
    for gid, c, p in zip(ids, pred, proba):
        yield [gid, CLASS_NAMES[int(c)], *map(float, p)]


def prediction_header(model: GbtModel) -> tuple:
    return ("graph_id", "class") + tuple(f"proba_{CLASS_NAMES[c]}" for c in model.classes)


def features_from_edge_list(path) -> np.ndarray:
    """Feature row for one edge-list file, rounded exactly as a feature table would be."""
    return io.quantize(_featurize_file(path)).reshape(1, -1)
