"""Random graph generators for the five model classes and corpus simulation.

Every generator takes a :class:`numpy.random.Generator`; corpus simulation
derives one independent substream per ``(class, parameter index, replicate)``
from the master seed so output is independent of evaluation order.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .graph import Graph, build_graph


class ParameterError(ValueError):
    """Raised for generator parameters outside their valid range."""


class ModelClass(enum.IntEnum):
    ER = 0
    SW = 1
    SF = 2
    SP = 3
    SBM = 4

    @classmethod
    def parse(cls, s: str | int) -> "ModelClass":
        if isinstance(s, (int, np.integer)) or str(s).strip().isdigit():
            try:
                return cls(int(s))
            except ValueError:
                raise ValueError(f"unknown model class code {s!r}") from None
        try:
            return cls[str(s).upper()]
        except KeyError:
            raise ValueError(f"unknown model class {s!r}; expected one of {[c.name for c in cls]}") from None


CLASS_NAMES = [c.name for c in ModelClass]

#: Parameter names per class, in generator argument order.
CLASS_PARAMS = {
    ModelClass.ER: ("p",),
    ModelClass.SW: ("l", "p_rewire"),
    ModelClass.SF: ("m", "alpha"),
    ModelClass.SP: ("r",),
    ModelClass.SBM: ("p_within", "p_between"),
}

#: Full-scale simulation ranges; desk manifests must stay inside them.
PARAM_RANGES = {
    "p": (0.1, 0.9),
    "l": (1, 35),
    "p_rewire": (0.1, 0.3),
    "m": (1, 35),
    "alpha": (1, 3),
    "r": (0.1, 0.9),
    "p_within": (0.5, 0.9),
    "p_between": (0.1, 0.4),
}

INTEGER_PARAMS = {"l", "m", "alpha"}


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {p}")


def _bernoulli_pairs(n: int, prob: np.ndarray, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Sample each pair ``i < j`` independently with probability ``prob[i, j]``."""
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.random(iu.size)
    keep = draws < prob[iu, ju]
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    _check_prob("p", p)
    return build_graph(n, _bernoulli_pairs(n, np.full((n, n), p), rng))


def watts_strogatz(n: int, l: int, p_rewire: float, rng: np.random.Generator) -> Graph:
    """Ring lattice with ``l`` neighbours per side, each edge rewired with ``p_rewire``.

    Lattice edges ``(u, u+k mod n)`` are scanned in order ``u = 0..n-1``,
    ``k = 1..l``. A rewired edge keeps ``u`` and moves its clockwise end to a
    uniform random node; moves creating a loop or duplicate are redrawn up to
    ``n`` times, after which the original edge stays. Edge count is preserved.
    """
    _check_prob("p_rewire", p_rewire)
    if l < 1 or 2 * l >= n:
        raise ParameterError(f"lattice neighbourhood l={l} must satisfy 1 <= l < n/2 (n={n})")
    nbrs = [set() for _ in range(n)]
    order = []
    for u in range(n):
        for k in range(1, l + 1):
            v = (u + k) % n
            nbrs[u].add(v)
            nbrs[v].add(u)
            order.append((u, v))
    for u, v in order:
        if rng.random() >= p_rewire:
            continue
        for _ in range(n):
            w = int(rng.integers(n))
            if w != u and w not in nbrs[u]:
                nbrs[u].discard(v)
                nbrs[v].discard(u)
                nbrs[u].add(w)
                nbrs[w].add(u)
                break
    edges = [(u, w) for u in range(n) for w in nbrs[u] if u < w]
    return build_graph(n, edges)


def barabasi_albert(n: int, m: int, alpha: float, rng: np.random.Generator) -> Graph:
    """Preferential attachment with weight ``deg**alpha``, draws with replacement.

    Node 0 starts alone. Node ``k >= 1`` makes ``min(m, k)`` draws among nodes
    ``0..k-1``; repeated targets collapse, so a node gains at most ``m`` edges.
    Node 1's single draw sees only the degree-0 node 0, whose weight uses
    ``deg + 1`` for that first draw.
    """
    if m < 1:
        raise ParameterError(f"attachment count m must be >= 1, got {m}")
    if n <= m:
        raise ParameterError(f"node count n={n} must exceed m={m}")
    deg = np.zeros(n)
    edges: list[tuple[int, int]] = []
    for k in range(1, n):
        if k == 1:
            targets = np.array([0])
        else:
            w = deg[:k] ** alpha
            targets = rng.choice(k, size=min(m, k), replace=True, p=w / w.sum())
        for t in np.unique(targets):
            edges.append((int(t), k))
            deg[t] += 1
            deg[k] += 1
    return build_graph(n, edges)


def spatial_geometric(n: int, r: float, rng: np.random.Generator | None = None,
                      positions: np.ndarray | None = None) -> Graph:
    """Random geometric graph on the unit square: edge iff distance <= ``r``.

    ``positions`` overrides sampling (an ``(n, 2)`` array), which lets callers
    sweep ``r`` over a fixed point set.
    """
    if r < 0:
        raise ParameterError(f"threshold distance r must be >= 0, got {r}")
    if positions is None:
        positions = rng.random((n, 2))
    diff = positions[:, None, :] - positions[None, :, :]
    close = np.sqrt((diff ** 2).sum(axis=-1)) <= r
    iu, ju = np.nonzero(np.triu(close, k=1))
    return build_graph(n, zip(iu.tolist(), ju.tolist()))


def sbm_block_sizes(n: int) -> tuple[int, int]:
    first = int(np.floor(0.4 * n))
    return first, n - first


def stochastic_block_model(n: int, p_within: float, p_between: float,
                           rng: np.random.Generator) -> Graph:
    """Two blocks of sizes ``floor(0.4 n)`` and the rest, one shared within-block probability."""
    _check_prob("p_within", p_within)
    _check_prob("p_between", p_between)
    first, _ = sbm_block_sizes(n)
    block = np.arange(n) >= first
    prob = np.where(block[:, None] == block[None, :], p_within, p_between)
    return build_graph(n, _bernoulli_pairs(n, prob, rng))


def generate(model: ModelClass, n: int, params: dict, rng: np.random.Generator) -> Graph:
    model = ModelClass(model)
    if model is ModelClass.ER:
        return erdos_renyi(n, params["p"], rng)
    if model is ModelClass.SW:
        return watts_strogatz(n, int(params["l"]), params["p_rewire"], rng)
    if model is ModelClass.SF:
        return barabasi_albert(n, int(params["m"]), params["alpha"], rng)
    if model is ModelClass.SP:
        return spatial_geometric(n, params["r"], rng)
    return stochastic_block_model(n, params["p_within"], params["p_between"], rng)


@dataclass
class SimulationManifest:
    """Per-class parameter grids plus node range, replicates and master seed.

    ``grids[cls]`` maps each parameter name to its list of values; the
    parameter points are the Cartesian product in ``CLASS_PARAMS`` order.
    """

    grids: dict[ModelClass, dict[str, list]]
    n_min: int = 50
    n_max: int = 150
    replicates: int = 1
    seed: int = 0

    def validate(self) -> list[tuple[tuple, str]]:
        """Return ``(key_path, message)`` for every violated constraint."""
        errs: list[tuple[tuple, str]] = []
        if self.replicates < 1:
            errs.append((("replicates",), f"replicates must be >= 1, got {self.replicates}"))
        if self.n_min < 3:
            errs.append((("n_min",), f"n_min must be >= 3, got {self.n_min}"))
        if self.n_max < self.n_min:
            errs.append((("n_max",), f"n_max={self.n_max} is below n_min={self.n_min}"))
        for cls, grid in self.grids.items():
            expected = set(CLASS_PARAMS[cls])
            if set(grid) != expected:
                errs.append(((cls.name,), f"{cls.name} needs parameters {sorted(expected)}, got {sorted(grid)}"))
                continue
            for name, values in grid.items():
                lo, hi = PARAM_RANGES[name]
                if not values:
                    errs.append(((cls.name, name), f"{cls.name}.{name} grid is empty"))
                for v in values:
                    if not lo <= v <= hi:
                        errs.append(((cls.name, name), f"{cls.name}.{name}={v} outside [{lo}, {hi}]"))
                    elif name in INTEGER_PARAMS and v != int(v):
                        errs.append(((cls.name, name), f"{cls.name}.{name}={v} must be an integer"))
            if cls is ModelClass.SW and grid.get("l"):
                if 2 * max(grid["l"]) >= self.n_min:
                    errs.append(((cls.name, "l"),
                                 f"SW.l={max(grid['l'])} violates l < n/2 for n_min={self.n_min}"))
            if cls is ModelClass.SF and grid.get("m"):
                if max(grid["m"]) >= self.n_min:
                    errs.append(((cls.name, "m"), f"SF.m={max(grid['m'])} must be below n_min={self.n_min}"))
        return errs

    def points(self, cls: ModelClass) -> list[dict]:
        grid = self.grids[cls]
        names = CLASS_PARAMS[cls]
        return [dict(zip(names, combo)) for combo in itertools.product(*(grid[k] for k in names))]


@dataclass(frozen=True)
class SimulatedGraph:
    graph_id: str
    model: ModelClass
    n: int
    params: dict
    seed: tuple[int, ...]
    graph: Graph


def substream(master_seed: int, model: ModelClass, point: int, replicate: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(int(model), point, replicate))
    return np.random.Generator(np.random.PCG64(ss))


def simulate_one(manifest: SimulationManifest, model: ModelClass, point: int, replicate: int,
                 params: dict) -> SimulatedGraph:
    rng = substream(manifest.seed, model, point, replicate)
    n = int(rng.integers(manifest.n_min, manifest.n_max + 1))
    try:
        g = generate(model, n, params, rng)
    except ParameterError as exc:
        raise ParameterError(f"{model.name} {params} n={n}: {exc}") from exc
    gid = f"{model.name}-{point:04d}-{replicate:04d}"
    return SimulatedGraph(gid, model, n, params, (int(model), point, replicate), g)


def corpus_tasks(manifest: SimulationManifest) -> list[tuple[ModelClass, int, int, dict]]:
    tasks = []
    for model in sorted(manifest.grids):
        for i, params in enumerate(manifest.points(model)):
            for rep in range(manifest.replicates):
                tasks.append((model, i, rep, params))
    return tasks


def simulate_corpus(manifest: SimulationManifest, jobs: int = 1) -> list[SimulatedGraph]:
    """Simulate every (class, parameter point, replicate) of the manifest.

    Output order is canonical (class code, point, replicate) for any ``jobs``.
    """
    errs = manifest.validate()
    if errs:
        raise ParameterError("; ".join(msg for _, msg in errs))
    tasks = corpus_tasks(manifest)
    if jobs > 1:
        from joblib import Parallel, delayed

        return Parallel(n_jobs=jobs)(delayed(simulate_one)(manifest, *t) for t in tasks)
    return [simulate_one(manifest, *t) for t in tasks]


def desk_manifest(seed: int = 20241015, replicates: int = 27) -> SimulationManifest:
    """Scaled-down corpus: 24-25 parameter points per class, n in [50, 150].

    The default ``replicates=27`` yields 648-675 graphs per class (3294 in
    total). With 9 replicates (about 220 per class) dense ER graphs are
    too often taken for weakly separated block models.
    """
    fine = [round(float(v), 4) for v in np.linspace(0.1, 0.9, 25)]
    grids = {
        ModelClass.ER: {"p": fine},
        ModelClass.SW: {"l": [1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 18, 22], "p_rewire": [0.1, 0.3]},
        ModelClass.SF: {"m": [1, 2, 3, 4, 5, 6, 8, 10], "alpha": [1, 2, 3]},
        ModelClass.SP: {"r": fine},
        ModelClass.SBM: {"p_within": [0.5, 0.58, 0.66, 0.74, 0.82, 0.9],
                         "p_between": [0.1, 0.2, 0.3, 0.4]},
    }
    return SimulationManifest(grids=grids, n_min=50, n_max=150, replicates=replicates, seed=seed)
