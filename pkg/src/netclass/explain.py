"""Attributions and interaction measures for a trained :class:`GbtModel`.

Everything here works on per-class margins (log-odds units). SHAP values
use path-dependent TreeSHAP, so the base value is each ensemble's expected
margin under its training node weights. Partial dependence averages over an
explicit background sample and H-statistics follow Friedman and Popescu with
all partial dependence functions evaluated at the sample's own points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .gbt import GbtModel


@dataclass
class ShapExplanation:
    model_class: int
    base_value: float
    phi: np.ndarray
    prediction: float


def _tree_weights(model: GbtModel, c: int) -> np.ndarray:
    return np.concatenate([t.weight for t in model.trees[c]]) if model.trees[c] else np.zeros(0)


def expected_margin(model: GbtModel, c: int) -> float:
    """Base score plus the node-weighted mean leaf value of each tree."""
    total = 0.0
    for t in model.trees[c]:
        leaf = t.feature < 0
        total += float(np.sum(t.value[leaf] * t.weight[leaf]) / t.weight[0])
    return float(model.base_score[c] + model.learning_rate * total)


def shap_values(model: GbtModel, X) -> tuple[np.ndarray, np.ndarray]:
    """SHAP values for every row and class.

    Returns ``(phi, base)`` with ``phi`` of shape ``(rows, classes, features)``
    and ``base`` of shape ``(classes,)``.
    """
    X = model._check_input(X)
    n, nf = X.shape
    phi = np.zeros((n, model.n_classes, nf))
    base = np.zeros(model.n_classes)
    depth = max([_depth(t) for ts in model.trees for t in ts] + [1])
    for c in range(model.n_classes):
        base[c] = expected_margin(model, c)
        if not model.trees[c]:
            continue
        offsets, feat, thr, left, right, value = model._pack(c)
        phi[:, c, :] = model.learning_rate * _kernels.tree_shap_forest(
            X, offsets, feat, thr, left, right, value, _tree_weights(model, c), depth)
    return phi, base


def tree_shap(model: GbtModel, x, background=None) -> list[ShapExplanation]:
    """Per-class explanation of a single instance.

    The base value is the node-weighted expected margin, which equals the
    mean margin over the training rows. ``background`` is only checked for
    shape and emptiness; it is accepted so callers can pass the data they
    consider the reference population.
    """
    if background is not None and len(model._check_input(background)) == 0:
        raise ValueError("background sample is empty")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    phi, base = shap_values(model, x)
    margin = model.predict_margin(x)[0]
    return [ShapExplanation(model.classes[c], float(base[c]), phi[0, c], float(margin[c]))
            for c in range(model.n_classes)]


def _depth(tree) -> int:
    depth = np.zeros(tree.n_nodes, dtype=np.int64)
    for nd in range(tree.n_nodes):
        if tree.feature[nd] >= 0:
            depth[tree.left[nd]] = depth[tree.right[nd]] = depth[nd] + 1
    return int(depth.max())


# -- global summaries and exports ----------------------------------------------------

@dataclass
class ShapSummary:
    """Mean ``|phi|`` per feature and class, plus the full per-row table."""

    classes: list[int]
    feature_names: tuple[str, ...]
    mean_abs: np.ndarray      # (classes, features)
    phi: np.ndarray           # (rows, classes, features)
    base: np.ndarray

    def ranking(self, c: int) -> list[tuple[str, float]]:
        """Features of class index ``c`` by decreasing mean ``|phi|`` (stable on ties)."""
        order = np.argsort(-self.mean_abs[c], kind="stable")
        return [(self.feature_names[i], float(self.mean_abs[c, i])) for i in order]

    def rows(self):
        """``(class, feature, mean_abs_shap, rank)`` records, rank starting at 1."""
        for c, code in enumerate(self.classes):
            for rank, (name, val) in enumerate(self.ranking(c), 1):
                yield code, name, val, rank


def shap_global_summary(model: GbtModel, X) -> ShapSummary:
    phi, base = shap_values(model, X)
    return ShapSummary(list(model.classes), model.feature_names, np.abs(phi).mean(axis=0), phi, base)


def shap_dependence(model: GbtModel, X, feature: int, color_feature: int | None = None,
                    phi: np.ndarray | None = None) -> dict[int, np.ndarray]:
    """Per class, an array with columns ``(feature value, phi[, colour value])``."""
    X = model._check_input(X)
    if phi is None:
        phi, _ = shap_values(model, X)
    out = {}
    for c, code in enumerate(model.classes):
        cols = [X[:, feature], phi[:, c, feature]]
        if color_feature is not None:
            cols.append(X[:, color_feature])
        out[code] = np.column_stack(cols)
    return out


def waterfall(model: GbtModel, x) -> dict[int, list[tuple[str, float, float]]]:
    """Per class, ``(feature, value, phi)`` sorted by decreasing ``|phi|``."""
    x = np.asarray(x, dtype=float)
    out = {}
    for exp in tree_shap(model, x):
        order = np.argsort(-np.abs(exp.phi), kind="stable")
        out[exp.model_class] = [(model.feature_names[i], float(x[i]), float(exp.phi[i])) for i in order]
    return out


# -- partial dependence -------------------------------------------------------------------

def pd_raw(model: GbtModel, c: int, features, X_eval, X_bg) -> np.ndarray:
    """Uncentred partial dependence of class index ``c`` at each eval row.

    The mean margin over background rows after overwriting ``features``
    with the eval row's values.
    """
    X_eval = model._check_input(X_eval)
    X_bg = model._check_input(X_bg)
    if len(X_bg) == 0:
        raise ValueError("background sample is empty")
    in_s = np.zeros(X_eval.shape[1], dtype=np.bool_)
    in_s[list(features)] = True
    if not model.trees[c]:
        return np.full(len(X_eval), model.base_score[c])
    offsets, feat, thr, left, right, value = model._pack(c)
    max_nodes = int(np.max(np.diff(offsets)))
    s = _kernels.pd_forest(X_eval, X_bg, in_s, offsets, feat, thr, left, right, value, max_nodes)
    return model.base_score[c] + model.learning_rate * s


@dataclass
class PartialDependence:
    model_class: int
    features: tuple[int, ...]
    grid: list[np.ndarray]
    values: np.ndarray        # shape: one axis per feature

    def records(self):
        for idx in itertools.product(*(range(len(g)) for g in self.grid)):
            yield tuple(float(self.grid[k][i]) for k, i in enumerate(idx)), float(self.values[idx])


def default_grid(x: np.ndarray, size: int = 20) -> np.ndarray:
    """Up to ``size`` distinct quantiles of ``x``, ascending."""
    return np.unique(np.quantile(x, np.linspace(0.0, 1.0, size)))


def partial_dependence(model: GbtModel, model_class: int, features, background,
                       grid: list | None = None, grid_size: int = 20) -> PartialDependence:
    """Centred partial dependence of one class over 1-3 features on a Cartesian grid.

    Centring subtracts the mean of the partial dependence function over the
    background rows' own values of ``features``.
    """
    features = tuple(int(f) for f in features)
    if not 1 <= len(features) <= 3 or len(set(features)) != len(features):
        raise ValueError("need 1 to 3 distinct feature indices")
    c = model.classes.index(model_class)
    bg = model._check_input(background)
    if grid is None:
        grid = [default_grid(bg[:, f], grid_size) for f in features]
    grid = [np.sort(np.asarray(g, dtype=float)) for g in grid]
    mesh = np.array(list(itertools.product(*grid)))
    pts = np.repeat(bg[:1], len(mesh), axis=0)
    pts[:, list(features)] = mesh
    # drop the base score before centring so a tree-free model gives exact zeros
    vals = pd_raw(model, c, features, pts, bg) - model.base_score[c]
    centre = (pd_raw(model, c, features, bg, bg) - model.base_score[c]).mean()
    return PartialDependence(model_class, features, grid,
                             (vals - centre).reshape([len(g) for g in grid]))


# -- H-statistics ----------------------------------------------------------------------------

@dataclass
class HStatReport:
    model_class: int
    h2_total: float
    h2_feature: np.ndarray
    h2_pairwise: dict[tuple[int, int], float]
    h2_threeway: dict[tuple[int, int, int], float]
    sample_size: int
    seed: int
    undefined: list = field(default_factory=list)

    def rows(self, feature_names):
        """``(class, order, features, h2)`` records."""
        yield self.model_class, 0, "", self.h2_total
        for i, v in enumerate(self.h2_feature):
            yield self.model_class, 1, feature_names[i], float(v)
        for key, v in self.h2_pairwise.items():
            yield self.model_class, 2, ":".join(feature_names[i] for i in key), v
        for key, v in self.h2_threeway.items():
            yield self.model_class, 3, ":".join(feature_names[i] for i in key), v


def _ratio(num: float, den: float, key, undefined: list) -> float:
    if den <= 0.0:
        undefined.append(key)
        return float("nan")
    return max(num / den, 0.0)


def h_statistics(model: GbtModel, model_class: int, data, max_order: int = 3,
                 sample_size: int = 500, seed: int = 0,
                 pairwise_features=None, threeway_top: int = 6) -> HStatReport:
    """Friedman-Popescu interaction statistics for one class.

    ``data`` is subsampled without replacement to ``sample_size`` rows.
    Pairwise statistics cover ``pairwise_features`` (default: all); three-way
    statistics cover the ``threeway_top`` features with the largest overall
    statistic. Zero denominators give NaN and are listed in ``undefined``.
    """
    c = model.classes.index(model_class)
    X = model._check_input(data)
    rng = np.random.default_rng(seed)
    if len(X) > sample_size:
        X = X[np.sort(rng.choice(len(X), sample_size, replace=False))]
    nf = X.shape[1]
    undefined: list = []

    def centred(v):
        return v - v.mean()

    f = centred(model.class_margin(X, c))
    f_ss = float(np.sum(f ** 2))
    pd1 = {j: centred(pd_raw(model, c, (j,), X, X)) for j in range(nf)}
    main = sum(pd1.values())
    h2_total = _ratio(float(np.sum((f - main) ** 2)), f_ss, ("total",), undefined)
    h2_feature = np.zeros(nf)
    for j in range(nf):
        rest = centred(pd_raw(model, c, [k for k in range(nf) if k != j], X, X))
        h2_feature[j] = _ratio(float(np.sum((f - pd1[j] - rest) ** 2)), f_ss, (j,), undefined)

    pairwise: dict = {}
    pd2: dict = {}
    if max_order >= 2:
        feats = range(nf) if pairwise_features is None else sorted(pairwise_features)
        for i, j in itertools.combinations(feats, 2):
            pd2[(i, j)] = centred(pd_raw(model, c, (i, j), X, X))
            num = float(np.sum((pd2[(i, j)] - pd1[i] - pd1[j]) ** 2))
            pairwise[(i, j)] = _ratio(num, float(np.sum(pd2[(i, j)] ** 2)), (i, j), undefined)
    threeway: dict = {}
    if max_order >= 3:
        score = np.nan_to_num(h2_feature, nan=-1.0)
        top = sorted(np.argsort(-score, kind="stable")[:threeway_top].tolist())
        for i, j, k in itertools.combinations(top, 3):
            def two(a, b):
                if (a, b) not in pd2:
                    pd2[(a, b)] = centred(pd_raw(model, c, (a, b), X, X))
                return pd2[(a, b)]
            pd3 = centred(pd_raw(model, c, (i, j, k), X, X))
            num = pd3 - two(i, j) - two(i, k) - two(j, k) + pd1[i] + pd1[j] + pd1[k]
            threeway[(i, j, k)] = _ratio(float(np.sum(num ** 2)), float(np.sum(pd3 ** 2)),
                                         (i, j, k), undefined)
    return HStatReport(model_class, h2_total, h2_feature, pairwise, threeway, len(X), seed, undefined)


# -- two-feature surfaces -------------------------------------------------------------------

@dataclass
class InteractionSurface:
    model_class: int
    features: tuple[int, int]
    edges: tuple[np.ndarray, np.ndarray]
    mean_proba: np.ndarray     # (bins_i, bins_j), NaN where no data
    counts: np.ndarray

    def records(self):
        ei, ej = self.edges
        ci, cj = 0.5 * (ei[:-1] + ei[1:]), 0.5 * (ej[:-1] + ej[1:])
        for a in range(len(ci)):
            for b in range(len(cj)):
                yield float(ci[a]), float(cj[b]), float(self.mean_proba[a, b]), int(self.counts[a, b])


def interaction_2d(model: GbtModel, model_class: int, fi: int, fj: int, data,
                   bins: int = 20) -> InteractionSurface:
    """Mean predicted probability of ``model_class`` over a 2-D histogram of the data.

    Cells without data hold NaN, marking regions no simulated network reached.
    """
    X = model._check_input(data)
    c = model.classes.index(model_class)
    p = model.predict_proba(X)[:, c]
    edges = []
    for f in (fi, fj):
        lo, hi = float(X[:, f].min()), float(X[:, f].max())
        if hi <= lo:
            hi = lo + 1.0
        edges.append(np.linspace(lo, hi, bins + 1))
    ia = np.clip(np.searchsorted(edges[0], X[:, fi], side="right") - 1, 0, bins - 1)
    ib = np.clip(np.searchsorted(edges[1], X[:, fj], side="right") - 1, 0, bins - 1)
    sums = np.zeros((bins, bins))
    counts = np.zeros((bins, bins), dtype=np.int64)
    np.add.at(sums, (ia, ib), p)
    np.add.at(counts, (ia, ib), 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return InteractionSurface(model_class, (fi, fj), (edges[0], edges[1]), mean, counts)
