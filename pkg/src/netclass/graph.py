"""Simple undirected graphs, derived matrices and the dense symmetric eigensolver."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

log = logging.getLogger(__name__)

#: Marker for "no path" in hop-distance results.
UNREACHABLE = np.inf


class GraphInputError(ValueError):
    """Raised for malformed edge lists or out-of-range endpoints."""


class NumericalError(RuntimeError):
    """Raised when the eigensolver fails to converge."""


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph on nodes ``0..n-1``.

    ``edges`` holds canonical pairs ``(u, v)`` with ``u < v`` sorted
    lexicographically; ``adjacency`` holds sorted neighbour tuples.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False)
    dropped: int = field(default=0, compare=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.adjacency], dtype=np.int64)

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.adjacency[u]
        i = np.searchsorted(nb, v)
        return i < len(nb) and nb[i] == v

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with node ``i`` renamed to ``perm[i]``."""
        return build_graph(self.n, [(perm[u], perm[v]) for u, v in self.edges])

    def subgraph(self, nodes: Iterable[int]) -> "Graph":
        """Induced subgraph, nodes renumbered in ascending order."""
        nodes = sorted(nodes)
        index = {v: i for i, v in enumerate(nodes)}
        sub = [(index[u], index[v]) for u, v in self.edges if u in index and v in index]
        return build_graph(len(nodes), sub)


def build_graph(n: int, edge_list: Iterable[tuple[int, int]]) -> Graph:
    """Build a simple graph, dropping self-loops and repeated pairs.

    The number of dropped pairs is kept on ``Graph.dropped`` and logged.
    """
    n = int(n)
    if n < 0:
        raise GraphInputError(f"node count must be non-negative, got {n}")
    seen: set[tuple[int, int]] = set()
    dropped = 0
    for pair in edge_list:
        u, v = int(pair[0]), int(pair[1])
        if not (0 <= u < n and 0 <= v < n):
            raise GraphInputError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
        if u == v:
            dropped += 1
            continue
        key = (u, v) if u < v else (v, u)
        if key in seen:
            dropped += 1
            continue
        seen.add(key)
    if dropped:
        log.warning("dropped %d self-loop/duplicate pairs", dropped)
    edges = tuple(sorted(seen))
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    adjacency = tuple(tuple(sorted(nb)) for nb in nbrs)
    return Graph(n=n, edges=edges, adjacency=adjacency, dropped=dropped)


def adjacency_matrix(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    if g.edges:
        e = np.asarray(g.edges)
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
    return a


def laplacian(g: Graph) -> np.ndarray:
    a = adjacency_matrix(g)
    return np.diag(a.sum(axis=1)) - a


def normalized_laplacian(g: Graph) -> np.ndarray:
    """``D^-1/2 L D^-1/2`` with the ``D^-1/2`` entry of isolated nodes set to 0."""
    deg = g.degrees().astype(float)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return inv_sqrt[:, None] * laplacian(g) * inv_sqrt[None, :]


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source``; unreachable nodes get ``UNREACHABLE``."""
    dist = np.full(g.n, UNREACHABLE)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if dist[v] == UNREACHABLE:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def distance_matrix(g: Graph) -> np.ndarray:
    """All-pairs hop distances (unweighted BFS in C); ``inf`` where unreachable."""
    if g.n == 0:
        return np.zeros((0, 0))
    a = csr_matrix(adjacency_matrix(g))
    return shortest_path(a, method="D", directed=False, unweighted=True)


def connected_components(g: Graph) -> list[set[int]]:
    """Components ordered by their smallest node."""
    label = [-1] * g.n
    comps: list[set[int]] = []
    for s in range(g.n):
        if label[s] >= 0:
            continue
        comp = {s}
        label[s] = len(comps)
        stack = [s]
        while stack:
            u = stack.pop()
            for v in g.adjacency[u]:
                if label[v] < 0:
                    label[v] = label[s]
                    comp.add(v)
                    stack.append(v)
        comps.append(comp)
    return comps


def largest_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component (ties: lowest smallest node)."""
    comps = connected_components(g)
    if len(comps) <= 1:
        return g
    best = max(comps, key=len)
    return g.subgraph(best)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    leading_eigenvector: np.ndarray | None = None


def symmetric_eigenvalues(m: np.ndarray, want_leading_vector: bool = False) -> Spectrum:
    """Full ascending spectrum of a dense real symmetric matrix.

    Backed by LAPACK ``syevd`` through :func:`numpy.linalg.eigh`. The leading
    eigenvector, when requested, is unit-norm with its sign chosen so the entry
    sum is nonnegative (nonnegative entries for a connected nonnegative matrix).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix has non-finite entries")
    if m.size and not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ValueError("matrix is not symmetric")
    if m.shape[0] == 0:
        return Spectrum(np.zeros(0), np.zeros(0) if want_leading_vector else None)
    try:
        if want_leading_vector:
            vals, vecs = np.linalg.eigh(m)
        else:
            vals, vecs = np.linalg.eigvalsh(m), None
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}") from exc
    lead = None
    if vecs is not None:
        lead = vecs[:, -1].copy()
        if lead.sum() < 0:
            lead = -lead
    return Spectrum(vals, lead)


def read_edge_list(path) -> Graph:
    """Parse the ``n m`` header + ``u v`` lines format; ``#`` lines are comments."""
    rows: list[tuple[int, list[str]]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            rows.append((lineno, s.split()))
    if not rows:
        raise GraphInputError(f"{path}: empty edge-list file")
    lineno, head = rows[0]
    try:
        n, m = int(head[0]), int(head[1])
        if len(head) != 2:
            raise ValueError
    except (ValueError, IndexError):
        raise GraphInputError(f"{path}:{lineno}: header must be 'n m'") from None
    if len(rows) - 1 != m:
        raise GraphInputError(f"{path}: header declares {m} edges, found {len(rows) - 1}")
    edges = []
    for lineno, parts in rows[1:]:
        if len(parts) != 2:
            raise GraphInputError(f"{path}:{lineno}: expected 'u v'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphInputError(f"{path}:{lineno}: non-integer endpoint") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphInputError(f"{path}:{lineno}: edge ({u}, {v}) has an endpoint outside [0, {n})")
        edges.append((u, v))
    try:
        return build_graph(n, edges)
    except GraphInputError as exc:
        raise GraphInputError(f"{path}: {exc}") from None


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"
