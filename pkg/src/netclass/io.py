"""On-disk formats: manifests, corpus index, feature tables and CSV exports.

Every writer goes through :func:`atomic_write`, so a failed run never leaves
a truncated file behind.
"""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np
import yaml

from .dataset import LabeledDataset
from .features import FEATURE_NAMES
from .generators import (CLASS_PARAMS, ModelClass, SimulatedGraph, SimulationManifest)

ALL_PARAMS = tuple(dict.fromkeys(p for c in ModelClass for p in CLASS_PARAMS[c]))


class FormatError(ValueError):
    """An input file does not follow its expected format."""


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def fmt(v) -> str:
    """Floats with 9 significant digits; integers and strings unchanged."""
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else f"{float(v):.9g}"
    return str(v)


def quantize(x: np.ndarray) -> np.ndarray:
    """Round-trip values through the 9-digit text form used in feature tables."""
    return np.array([float(f"{v:.9g}") for v in np.ravel(x)]).reshape(np.shape(x))


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    atomic_write(path, buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    return rows[0], rows[1:]


# -- manifest ------------------------------------------------------------------------------

def _line_map(node, path=(), out=None) -> dict:
    """Map key paths of a composed YAML node tree to 1-based line numbers."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = path + (str(k.value),)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
            out[key] = k.start_mark.line + 1
    return out


def _closest_line(lines: dict, path: tuple) -> int:
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path, 1)


def parse_manifest(text: str, source: str = "<manifest>") -> SimulationManifest:
    """Parse a YAML manifest; errors name the offending line.

    Layout::

        seed: 7
        n_min: 50
        n_max: 150
        replicates: 2
        classes:
          ER: {p: [0.1, 0.5]}
          SW: {l: [2, 4], p_rewire: [0.1, 0.3]}
    """
    try:
        node = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else 1
        raise FormatError(f"{source}:{line}: invalid YAML ({getattr(exc, 'problem', exc)})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{source}:1: manifest must be a mapping")
    lines = _line_map(node)

    def fail(path, msg):
        raise FormatError(f"{source}:{_closest_line(lines, path)}: {msg}")

    allowed = {"seed", "n_min", "n_max", "replicates", "classes"}
    for key in doc:
        if key not in allowed:
            fail((str(key),), f"unknown key {key!r}; expected one of {sorted(allowed)}")
    classes = doc.get("classes")
    if not isinstance(classes, dict) or not classes:
        fail(("classes",), "'classes' must map class names to parameter grids")
    grids = {}
    for name, grid in classes.items():
        try:
            cls = ModelClass.parse(str(name))
        except ValueError:
            fail(("classes", str(name)), f"unknown class {name!r}")
        if not isinstance(grid, dict):
            fail(("classes", str(name)), f"{name} must map parameter names to value lists")
        g = {}
        for pname, vals in grid.items():
            vals = vals if isinstance(vals, list) else [vals]
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                fail(("classes", str(name), str(pname)), f"{name}.{pname} values must be numbers")
            g[str(pname)] = vals
        grids[cls] = g
    scalars = {}
    for key, default in (("seed", 0), ("n_min", 50), ("n_max", 150), ("replicates", 1)):
        v = doc.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool):
            fail((key,), f"{key} must be an integer, got {v!r}")
        scalars[key] = v
    man = SimulationManifest(grids=grids, **scalars)
    errs = man.validate()
    if errs:
        path, msg = errs[0]
        if path and path[0] in ModelClass.__members__:
            path = ("classes",) + path
        extra = f" (+{len(errs) - 1} more)" if len(errs) > 1 else ""
        fail(path, msg + extra)
    return man


def manifest_to_yaml(man: SimulationManifest) -> str:
    doc = {"seed": man.seed, "n_min": man.n_min, "n_max": man.n_max, "replicates": man.replicates,
           "classes": {c.name: {k: list(v) for k, v in man.grids[c].items()} for c in sorted(man.grids)}}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def read_manifest(path) -> SimulationManifest:
    with open(path) as fh:
        return parse_manifest(fh.read(), str(path))


# -- corpus ---------------------------------------------------------------------------------

INDEX_HEADER = ("graph_id", "class", "n") + ALL_PARAMS + ("seed",)


def seed_label(master: int, key: tuple) -> str:
    """Substream identity, e.g. ``7:2:13:0`` for master seed 7, class 2, point 13, replicate 0."""
    return ":".join(str(v) for v in (master,) + tuple(key))


def index_rows(corpus: list[SimulatedGraph], master_seed: int):
    for s in corpus:
        params = [s.params.get(p, "") for p in ALL_PARAMS]
        yield [s.graph_id, s.model.name, s.n, *params, seed_label(master_seed, s.seed)]


def read_index(path) -> list[dict]:
    header, rows = read_csv(path)
    if tuple(header[:3]) != INDEX_HEADER[:3]:
        raise FormatError(f"{path}: header must start with graph_id,class,n")
    return [dict(zip(header, r)) for r in rows]


# -- feature tables -----------------------------------------------------------------------------

FEATURE_HEADER = ("graph_id", "class") + FEATURE_NAMES


def write_features(path, ids, classes, X) -> None:
    """``classes`` holds ModelClass values or None for unlabelled rows."""
    rows = ([gid, "" if c is None else ModelClass(c).name, *map(float, x)]
            for gid, c, x in zip(ids, classes, X))
    write_csv(path, FEATURE_HEADER, rows)


def read_features(path, require_labels: bool = True) -> LabeledDataset | tuple[list, list, np.ndarray]:
    """Load a feature table.

    With ``require_labels`` a :class:`LabeledDataset` is returned, otherwise
    ``(ids, classes_or_None, X)``.
    """
    header, rows = read_csv(path)
    if tuple(header) != FEATURE_HEADER:
        missing = [h for h in FEATURE_HEADER if h not in header]
        raise FormatError(f"{path}: feature header mismatch; missing {missing}"
                          if missing else f"{path}: feature columns out of order")
    ids, classes, X = [], [], []
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(FEATURE_HEADER):
            raise FormatError(f"{path}:{lineno}: expected {len(FEATURE_HEADER)} fields, got {len(r)}")
        try:
            X.append([float(v) for v in r[2:]])
            classes.append(ModelClass.parse(r[1]) if r[1] else None)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        ids.append(r[0])
    X = np.array(X, dtype=float).reshape(-1, len(FEATURE_NAMES))
    if not require_labels:
        return ids, classes, X
    if any(c is None for c in classes):
        raise FormatError(f"{path}: every row needs a class label for training")
    try:
        return LabeledDataset(X, np.array([int(c) for c in classes]), ids)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def split_rows(train_ids, test_ids, folds=None, repeats_k=None):
    """``graph_id,role,fold,repeat`` rows; fold/repeat are blank for the test role.

    ``folds`` is the list returned by :func:`netclass.dataset.kfold` on the
    training ids and ``repeats_k`` its ``k``.
    """
    rows = []
    if folds:
        for n, (_, val) in enumerate(folds):
            rep, fold = divmod(n, repeats_k)
            rows += [[train_ids[i], "train", fold, rep] for i in val]
    else:
        rows += [[g, "train", "", ""] for g in train_ids]
    rows += [[g, "test", "", ""] for g in test_ids]
    return rows
