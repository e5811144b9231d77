"""Confusion-matrix metrics, cross-validation and hyperparameter search."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import qmc, rankdata

from .dataset import LabeledDataset, kfold, smote
from .gbt import GbtModel, Hyperparams, log_loss, train

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """Test-set metrics. ``confusion[i, j]`` counts rows predicted ``classes[i]`` with truth ``classes[j]``."""

    classes: list[int]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    accuracy: float
    auc: float
    log_loss: float = float("nan")

    def rows(self, names=None):
        """Flat ``(section, key, column, value)`` records for CSV export."""
        label = (lambda c: names[c]) if names else str
        yield "summary", "accuracy", "", self.accuracy
        yield "summary", "macro_auc", "", self.auc
        yield "summary", "log_loss", "", self.log_loss
        for i, c in enumerate(self.classes):
            yield "precision", label(c), "", float(self.precision[i])
            yield "recall", label(c), "", float(self.recall[i])
        for i, ci in enumerate(self.classes):
            for j, cj in enumerate(self.classes):
                yield "confusion", label(ci), label(cj), int(self.confusion[i, j])


def confusion_matrix(pred, truth, classes) -> np.ndarray:
    """Counts with predicted classes on rows and true classes on columns."""
    pos = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, t in zip(pred, truth):
        cm[pos[int(p)], pos[int(t)]] += 1
    return cm


def metrics_from_confusion(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-class precision (row ratio), recall (column ratio) and accuracy.

    Empty rows or columns give 0 rather than NaN.
    """
    cm = np.asarray(cm, dtype=float)
    diag = np.diag(cm)
    row, col = cm.sum(axis=1), cm.sum(axis=0)
    precision = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    recall = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    total = cm.sum()
    return precision, recall, float(diag.sum() / total) if total else 0.0


def rank_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for ties; 0.5 when one side is empty."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    r = rankdata(scores)
    return float((r[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def macro_auc(proba: np.ndarray, truth, classes) -> float:
    truth = np.asarray(truth)
    return float(np.mean([rank_auc(proba[:, i], truth == c) for i, c in enumerate(classes)]))


def report_from_predictions(classes, truth, proba: np.ndarray) -> EvalReport:
    classes = list(classes)
    truth = np.asarray(truth)
    pred = np.asarray(classes)[np.argmax(proba, axis=1)]
    cm = confusion_matrix(pred, truth, classes)
    precision, recall, acc = metrics_from_confusion(cm)
    y_index = np.searchsorted(classes, truth)
    ll = log_loss(y_index, np.log(np.clip(proba, 1e-300, None)))
    return EvalReport(classes, cm, precision, recall, acc, macro_auc(proba, truth, classes), ll)


def evaluate(m: GbtModel, test: LabeledDataset) -> EvalReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    unknown = set(test.y.tolist()) - set(m.classes)
    if unknown:
        raise ValueError(f"test classes {sorted(unknown)} unknown to the model")
    return report_from_predictions(m.classes, test.y, m.predict_proba(test.X))


# -- cross-validation -------------------------------------------------------------------

@dataclass
class CVResult:
    hyperparams: Hyperparams
    folds: list[EvalReport]

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds])

    @property
    def log_losses(self) -> np.ndarray:
        return np.array([f.log_loss for f in self.folds])

    def summary(self) -> dict[str, float]:
        acc, ll = self.accuracies, self.log_losses
        auc = np.array([f.auc for f in self.folds])
        return {"folds": len(self.folds), "accuracy_mean": float(acc.mean()),
                "accuracy_sd": float(acc.std(ddof=1)) if len(acc) > 1 else 0.0,
                "auc_mean": float(auc.mean()), "log_loss_mean": float(ll.mean())}


def _fit_fold(d: LabeledDataset, fit_idx, val_idx, hp: Hyperparams, smote_seed: int,
              use_smote: bool) -> EvalReport:
    fit = d.subset(fit_idx)
    if use_smote:
        fit = smote(fit, seed=smote_seed)
    model = train(fit, hp)
    return evaluate(model, d.subset(val_idx))


def cross_validate(d: LabeledDataset, hp: Hyperparams, k: int = 10, repeats: int = 1,
                   seed: int = 0, use_smote: bool = True, jobs: int = 1) -> CVResult:
    """Repeated stratified k-fold CV; SMOTE touches only each fold's fit rows."""
    if np.any(d.synthetic):
        raise ValueError("cross-validation input must not contain synthetic rows")
    folds = kfold(d, k, repeats, seed)
    ss = np.random.SeedSequence(seed)
    smote_seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(len(folds))]
    args = [(fi, vi, hp, s, use_smote) for (fi, vi), s in zip(folds, smote_seeds)]
    if jobs == 1:
        reports = [_fit_fold(d, *a) for a in args]
    else:
        reports = Parallel(n_jobs=jobs)(delayed(_fit_fold)(d, *a) for a in args)
    return CVResult(hp, reports)


# -- hyperparameter search --------------------------------------------------------------------

SEARCH_SPACE = {
    "trees": (50, 600),
    "tree_depth": (2, 8),
    "learning_rate": (0.01, 0.3),
    "mtry": (4, 18),
}


def sample_hyperparams(budget: int, seed: int = 0, base: Hyperparams = Hyperparams()) -> list[Hyperparams]:
    """Latin hypercube over :data:`SEARCH_SPACE`; learning rate on a log scale."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    u = qmc.LatinHypercube(d=4, seed=np.random.default_rng(seed)).random(budget)
    out = []
    for row in u:
        t_lo, t_hi = SEARCH_SPACE["trees"]
        d_lo, d_hi = SEARCH_SPACE["tree_depth"]
        l_lo, l_hi = SEARCH_SPACE["learning_rate"]
        m_lo, m_hi = SEARCH_SPACE["mtry"]
        out.append(base.replace(
            trees=int(t_lo + np.floor(row[0] * (t_hi - t_lo + 1))),
            tree_depth=int(d_lo + np.floor(row[1] * (d_hi - d_lo + 1))),
            learning_rate=float(np.exp(np.log(l_lo) + row[2] * (np.log(l_hi) - np.log(l_lo)))),
            mtry=int(m_lo + np.floor(row[3] * (m_hi - m_lo + 1))),
        ))
    return out


def search_hyperparams(d: LabeledDataset, budget: int, seed: int = 0, k: int = 10,
                       repeats: int = 1, jobs: int = 1,
                       base: Hyperparams = Hyperparams(),
                       cv_seed: int | None = None) -> list[tuple[Hyperparams, CVResult]]:
    """Evaluate ``budget`` sampled configurations by CV on shared folds.

    ``cv_seed`` (default ``seed``) fixes folds and SMOTE draws.

    Ranked by mean accuracy (descending), then mean log-loss (ascending),
    then sampling order.
    """
    candidates = sample_hyperparams(budget, seed, base)
    results = []
    for i, hp in enumerate(candidates):
        cv = cross_validate(d, hp, k, repeats, seed if cv_seed is None else cv_seed, jobs=jobs)
        s = cv.summary()
        log.info("config %d/%d %s: accuracy %.4f", i + 1, budget, hp, s["accuracy_mean"])
        results.append((-s["accuracy_mean"], s["log_loss_mean"], i, hp, cv))
    results.sort(key=lambda r: r[:3])
    return [(r[3], r[4]) for r in results]
