"""Multiclass gradient-boosted regression trees with a softmax readout.

Each boosting round fits one tree per class to the gradient and diagonal
Hessian of the multiclass log-loss (XGBoost-style second-order gain with
an L2 penalty on leaf values). Margins are ``base + learning_rate * sum of
tree outputs``; probabilities are their softmax.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _kernels
from .dataset import LabeledDataset

SCHEMA = "netclass.gbt"
SCHEMA_VERSION = 1


class TrainingError(ValueError):
    pass


class PredictionError(ValueError):
    pass


class ModelFormatError(ValueError):
    """The model file could not be parsed."""


class ModelVersionError(ModelFormatError):
    """The model file declares an unsupported schema version."""


@dataclass(frozen=True)
class Hyperparams:
    trees: int = 100
    tree_depth: int = 4
    learning_rate: float = 0.3
    mtry: int = 18
    min_leaf: int = 1
    seed: int = 0
    l2: float = 1.0

    def __post_init__(self):
        if self.trees < 0:
            raise ValueError("trees must be >= 0")
        if self.tree_depth < 1:
            raise ValueError("tree_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")

    def replace(self, **kw) -> "Hyperparams":
        return Hyperparams(**{**asdict(self), **kw})

    @classmethod
    def from_overrides(cls, pairs: list[str], base: "Hyperparams | None" = None) -> "Hyperparams":
        """Apply ``key=value`` strings to ``base`` (default values when omitted)."""
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for item in pairs:
            key, sep, val = item.partition("=")
            key = key.strip()
            if not sep or key not in types:
                raise ValueError(f"bad hyperparameter override {item!r}; keys: {sorted(types)}")
            kw[key] = float(val) if types[key] in ("float", float) else int(val)
        return base.replace(**kw)


@dataclass
class RegressionTree:
    """Flat binary tree; ``feature == -1`` marks a leaf.

    ``weight`` is the number of training rows reaching each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _kernels.predict_tree_values(np.ascontiguousarray(X, dtype=float), self.feature,
                                            self.threshold, self.left, self.right, self.value)

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "weight": self.weight.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        t = cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                np.array(d["value"], dtype=float), np.array(d["weight"], dtype=float))
        n = t.n_nodes
        if n == 0 or any(len(a) != n for a in (t.threshold, t.left, t.right, t.value, t.weight)):
            raise ModelFormatError("tree arrays have inconsistent lengths")
        internal = t.feature >= 0
        kids = np.concatenate([t.left[internal], t.right[internal]])
        if np.any(kids <= 0) or np.any(kids >= n) or not np.all(np.isfinite(t.threshold)):
            raise ModelFormatError("tree has invalid child indices or thresholds")
        return t


@dataclass
class GbtModel:
    classes: list[int]
    base_score: np.ndarray
    trees: list[list[RegressionTree]]
    learning_rate: float
    feature_names: tuple[str, ...]
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    _packed: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_rounds(self) -> int:
        return len(self.trees[0]) if self.trees else 0

    def _pack(self, c: int):
        if c not in self._packed:
            ts = self.trees[c]
            offsets = np.zeros(len(ts) + 1, dtype=np.int64)
            offsets[1:] = np.cumsum([t.n_nodes for t in ts])
            cat = (lambda name, dt: np.concatenate([getattr(t, name) for t in ts]).astype(dt)
                   if ts else np.zeros(0, dtype=dt))
            self._packed[c] = (offsets, cat("feature", np.int64), cat("threshold", float),
                               cat("left", np.int64), cat("right", np.int64), cat("value", float))
        return self._packed[c]

    def _check_input(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.feature_names):
            raise PredictionError(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise PredictionError("non-finite feature value")
        return np.ascontiguousarray(X)

    def class_margin(self, X, c: int) -> np.ndarray:
        """Margin of class index ``c`` (position in ``classes``) for each row."""
        X = self._check_input(X)
        return self.base_score[c] + self.learning_rate * _kernels.predict_forest(X, *self._pack(c))

    def predict_margin(self, X) -> np.ndarray:
        X = self._check_input(X)
        return np.column_stack([self.class_margin(X, c) for c in range(self.n_classes)])

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.predict_margin(X))

    def predict_class(self, X) -> np.ndarray:
        """Class codes; ``argmax`` keeps the lowest class on ties."""
        idx = np.argmax(self.predict_margin(X), axis=1)
        return np.asarray(self.classes)[idx]

    def used_features(self) -> set[int]:
        return {f for ts in self.trees for t in ts for f in t.used_features()}


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_loss(y_index: np.ndarray, margins: np.ndarray) -> float:
    """Mean multiclass cross-entropy of softmax(margins) against class positions."""
    z = margins - margins.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(z)), y_index]))


def softmax_grad_hess(y_index: np.ndarray, margins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row gradient ``p - y`` and diagonal Hessian ``p (1 - p)`` of the log-loss."""
    p = softmax(margins)
    y = np.zeros_like(p)
    y[np.arange(len(p)), y_index] = 1.0
    return p - y, np.maximum(p * (1.0 - p), 1e-16)


def train(data: LabeledDataset, hp: Hyperparams = Hyperparams(), *,
          loss_trace: list | None = None) -> GbtModel:
    """Fit a boosted ensemble; deterministic given ``hp.seed``.

    Rows are put in canonical graph-id order first. When ``loss_trace`` is a
    list it receives the training log-loss before round one and after each
    round.
    """
    data = data.canonical()
    classes = sorted(set(data.y.tolist()))
    if len(classes) < 2:
        raise TrainingError("training data must contain at least two classes")
    if not np.all(np.isfinite(data.X)):
        raise TrainingError("training features contain non-finite values")
    X = np.ascontiguousarray(data.X)
    n, nf = X.shape
    mtry = min(hp.mtry, nf)
    y_index = np.searchsorted(classes, data.y)
    prior = np.bincount(y_index, minlength=len(classes)) / n
    base = np.log(prior)
    margins = np.tile(base, (n, 1))
    order = np.ascontiguousarray(np.stack([np.argsort(X[:, f], kind="stable") for f in range(nf)]))
    rng = np.random.default_rng(hp.seed)
    max_nodes = 2 ** (hp.tree_depth + 1) - 1
    no_keys = np.zeros((max_nodes, nf))
    trees: list[list[RegressionTree]] = [[] for _ in classes]
    if loss_trace is not None:
        loss_trace.append(log_loss(y_index, margins))
    for _ in range(hp.trees):
        grad, hess = softmax_grad_hess(y_index, margins)
        step = np.zeros_like(margins)
        for c in range(len(classes)):
            keys = rng.random((max_nodes, nf)) if mtry < nf else no_keys
            feat, thr, left, right, value, weight, leaf_of = _kernels.grow_tree(
                X, order, np.ascontiguousarray(grad[:, c]), np.ascontiguousarray(hess[:, c]),
                hp.tree_depth, float(hp.min_leaf), hp.l2, keys, mtry, 1e-12)
            trees[c].append(RegressionTree(feat, thr, left, right, value, weight))
            step[:, c] = value[leaf_of]
        margins = margins + hp.learning_rate * step
        if loss_trace is not None:
            loss_trace.append(log_loss(y_index, margins))
    return GbtModel(classes, base, trees, hp.learning_rate, tuple(data.feature_names), hp)


# -- persistence -------------------------------------------------------------------

def model_to_json(m: GbtModel) -> str:
    doc = {
        "schema": SCHEMA,
        "version": SCHEMA_VERSION,
        "hyperparams": asdict(m.hyperparams),
        "classes": [int(c) for c in m.classes],
        "feature_names": list(m.feature_names),
        "learning_rate": m.learning_rate,
        "base_score": m.base_score.tolist(),
        "trees": [[t.to_dict() for t in ts] for ts in m.trees],
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def model_from_json(text: str) -> GbtModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise ModelFormatError(f"not a {SCHEMA} model document")
    if doc.get("version") != SCHEMA_VERSION:
        raise ModelVersionError(f"unsupported model schema version {doc.get('version')!r}; "
                                f"this build reads version {SCHEMA_VERSION}")
    try:
        trees = [[RegressionTree.from_dict(t) for t in ts] for ts in doc["trees"]]
        m = GbtModel(classes=[int(c) for c in doc["classes"]],
                     base_score=np.array(doc["base_score"], dtype=float),
                     trees=trees, learning_rate=float(doc["learning_rate"]),
                     feature_names=tuple(doc["feature_names"]),
                     hyperparams=Hyperparams(**doc["hyperparams"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model document: {exc}") from None
    if len(m.trees) != len(m.classes) or len(m.base_score) != len(m.classes):
        raise ModelFormatError("class count disagrees with trees/base scores")
    if len({len(ts) for ts in m.trees}) > 1:
        raise ModelFormatError("ensembles differ in length across classes")
    return m


def save_model(m: GbtModel, path) -> None:
    """Write atomically: a temp file in the same directory, then rename."""
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(model_to_json(m))
    os.replace(tmp, path)


def load_model(path) -> GbtModel:
    with open(path) as fh:
        return model_from_json(fh.read())
