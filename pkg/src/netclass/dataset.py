"""Labelled feature tables, stratified splitting, SMOTE and k-fold partitions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_NAMES


class SplitError(ValueError):
    pass


class OversamplingError(ValueError):
    pass


@dataclass
class LabeledDataset:
    """Feature matrix with integer class codes and unique graph ids.

    ``synthetic`` marks rows produced by :func:`smote`.
    """

    X: np.ndarray
    y: np.ndarray
    graph_ids: list[str]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    synthetic: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.graph_ids = [str(g) for g in self.graph_ids]
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise ValueError(f"X must have {len(self.feature_names)} columns, got shape {self.X.shape}")
        if not (len(self.X) == len(self.y) == len(self.graph_ids)):
            raise ValueError("X, y and graph_ids differ in length")
        if len(set(self.graph_ids)) != len(self.graph_ids):
            raise ValueError("graph_ids are not unique")
        if self.synthetic is None:
            self.synthetic = np.zeros(len(self.y), dtype=bool)
        self.synthetic = np.asarray(self.synthetic, dtype=bool)

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.y[idx], [self.graph_ids[i] for i in idx],
                              self.feature_names, self.synthetic[idx])

    def class_counts(self) -> dict[int, int]:
        classes, counts = np.unique(self.y, return_counts=True)
        return dict(zip(classes.tolist(), counts.tolist()))

    def canonical(self) -> "LabeledDataset":
        """Rows sorted by graph id, so downstream results do not depend on input order."""
        return self.subset(np.argsort(np.array(self.graph_ids), kind="stable"))

    @classmethod
    def concat(cls, parts: list["LabeledDataset"]) -> "LabeledDataset":
        return cls(np.vstack([p.X for p in parts]), np.concatenate([p.y for p in parts]),
                   [g for p in parts for g in p.graph_ids], parts[0].feature_names,
                   np.concatenate([p.synthetic for p in parts]))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(d: LabeledDataset, spec: SplitSpec = SplitSpec()) -> tuple[LabeledDataset, LabeledDataset]:
    """Per-class shuffle; the first ``round(fraction * size)`` rows of each class train."""
    d = d.canonical()
    rng = np.random.default_rng(spec.seed)
    counts = d.class_counts()
    small = [c for c, k in counts.items() if k < 2]
    if small:
        raise SplitError(f"classes {small} have fewer than 2 rows")
    train_idx, test_idx = [], []
    if spec.stratified:
        for c in sorted(counts):
            rows = rng.permutation(np.flatnonzero(d.y == c))
            k = _round_half_up(spec.train_fraction * len(rows))
            train_idx.append(rows[:k])
            test_idx.append(rows[k:])
    else:
        rows = rng.permutation(len(d))
        k = _round_half_up(spec.train_fraction * len(rows))
        train_idx.append(rows[:k])
        test_idx.append(rows[k:])
    tr, te = np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))
    return d.subset(tr), d.subset(te)


def smote(train: LabeledDataset, k_neighbors: int = 5, seed: int = 0) -> LabeledDataset:
    """Oversample every minority class up to the majority count.

    Neighbours are searched in z-scored feature space (scaling from ``train``)
    among rows of the same class; the synthetic point is interpolated in the
    original space, ``x + u (x_nn - x)`` with ``u ~ U[0, 1]``. Base rows are
    taken round-robin in a shuffled order.
    """
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    train = train.canonical()
    rng = np.random.default_rng(seed)
    counts = train.class_counts()
    target = max(counts.values())
    mu = train.X.mean(axis=0)
    sd = train.X.std(axis=0)
    sd[sd == 0] = 1.0
    z = (train.X - mu) / sd
    new_x, new_y, new_ids = [], [], []
    for c in sorted(counts):
        need = target - counts[c]
        if need == 0:
            continue
        rows = np.flatnonzero(train.y == c)
        if len(rows) < 2:
            raise OversamplingError(f"class {c} has a single row; SMOTE needs at least 2")
        k = min(k_neighbors, len(rows) - 1)
        zc = z[rows]
        d2 = ((zc[:, None, :] - zc[None, :, :]) ** 2).sum(axis=-1)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
        base_order = rng.permutation(len(rows))
        for s in range(need):
            i = base_order[s % len(rows)]
            j = nn[i, rng.integers(k)]
            u = rng.random()
            xi, xj = train.X[rows[i]], train.X[rows[j]]
            new_x.append(xi + u * (xj - xi))
            new_y.append(c)
            new_ids.append(f"smote-{c}-{s:06d}")
    if not new_x:
        return train
    synth = LabeledDataset(np.array(new_x), np.array(new_y), new_ids, train.feature_names,
                           np.ones(len(new_y), dtype=bool))
    return LabeledDataset.concat([train, synth])


def kfold(d: LabeledDataset, k: int = 10, repeats: int = 1, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified ``k``-fold partitions, ``repeats`` times; indices refer to ``d`` as given.

    Within a repeat, rows of each class are shuffled and dealt to folds
    round-robin, continuing the deal across classes so fold sizes differ by
    at most one.
    """
    counts = d.class_counts()
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > min(counts.values()):
        raise ValueError(f"k={k} exceeds the smallest class size {min(counts.values())}")
    rng = np.random.default_rng(seed)
    ids = np.array(d.graph_ids)
    canon = np.argsort(ids, kind="stable")
    out = []
    for _ in range(repeats):
        fold = np.empty(len(d), dtype=np.int64)
        pos = 0
        for c in sorted(counts):
            rows = canon[d.y[canon] == c]
            rows = rows[rng.permutation(len(rows))]
            fold[rows] = (pos + np.arange(len(rows))) % k
            pos += len(rows)
        for f in range(k):
            out.append((np.flatnonzero(fold != f), np.flatnonzero(fold == f)))
    return out
