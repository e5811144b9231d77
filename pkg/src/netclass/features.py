"""The 18 structural features used to tell generative models apart.

Path-based quantities (closeness, eccentricity family, mean path length and
eigenvector centralization) are taken on the largest connected component.
Degenerate inputs never raise: the value falls back to 0 and a flag naming
the feature is recorded on the :class:`FeatureVector`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from scipy.stats import rankdata

from .graph import (Graph, adjacency_matrix, connected_components, distance_matrix,
                    symmetric_eigenvalues)

FEATURE_NAMES = (
    "degree_centralization",
    "eigen_centralization",
    "closeness_mean",
    "betweenness_centralization",
    "assortativity",
    "fiedler",
    "normalized_fiedler",
    "spectral_radius",
    "modularity",
    "transitivity",
    "mean_degree",
    "diameter",
    "mean_eccentricity",
    "mean_path_length",
    "graph_energy",
    "min_cut",
    "order",
    "num_edges",
)


@dataclass(frozen=True)
class FeatureVector:
    degree_centralization: float
    eigen_centralization: float
    closeness_mean: float
    betweenness_centralization: float
    assortativity: float
    fiedler: float
    normalized_fiedler: float
    spectral_radius: float
    modularity: float
    transitivity: float
    mean_degree: float
    diameter: float
    mean_eccentricity: float
    mean_path_length: float
    graph_energy: float
    min_cut: float
    order: float
    num_edges: float
    flags: frozenset = field(default=frozenset(), compare=False)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in FEATURE_NAMES], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in FEATURE_NAMES}


assert tuple(f.name for f in fields(FeatureVector))[:18] == FEATURE_NAMES


# -- largest component helpers -------------------------------------------------

def _largest_component_nodes(g: Graph) -> np.ndarray:
    comps = connected_components(g)
    if not comps:
        return np.zeros(0, dtype=int)
    return np.array(sorted(max(comps, key=len)))


def _lcc_distances(g: Graph, dist: np.ndarray | None = None) -> np.ndarray:
    if dist is None:
        dist = distance_matrix(g)
    nodes = _largest_component_nodes(g)
    return dist[np.ix_(nodes, nodes)]


# -- centralizations -------------------------------------------------------------

def degree_centralization(g: Graph, flags: set | None = None) -> float:
    """Freeman degree centralization ``sum(d* - d) / ((n-1)(n-2))``."""
    if g.n < 3:
        _flag(flags, "degree_centralization")
        return 0.0
    deg = g.degrees()
    return float((deg.max() - deg).sum() / ((g.n - 1) * (g.n - 2)))


def node_betweenness(g: Graph, adj: np.ndarray | None = None,
                     dist: np.ndarray | None = None) -> np.ndarray:
    """Shortest-path betweenness over unordered pairs, all sources at once.

    Row ``s`` of the path-count and dependency matrices plays the role of one
    Brandes pass; each BFS level is a single matrix product.
    """
    n = g.n
    if n == 0:
        return np.zeros(0)
    a = adjacency_matrix(g) if adj is None else adj
    d = distance_matrix(g) if dist is None else dist
    lvl = np.where(np.isfinite(d), d, -1).astype(np.int64)
    depth = int(lvl.max())
    sigma = np.eye(n)
    for k in range(1, depth + 1):
        sigma += ((sigma * (lvl == k - 1)) @ a) * (lvl == k)
    delta = np.zeros((n, n))
    for k in range(depth - 1, 0, -1):
        nxt = lvl == k + 1
        coef = np.zeros((n, n))
        coef[nxt] = (1.0 + delta[nxt]) / sigma[nxt]
        delta += sigma * (coef @ a) * (lvl == k)
    return delta.sum(axis=0) / 2.0


def betweenness_centralization(g: Graph, flags: set | None = None, *,
                               adj=None, dist=None) -> float:
    """``sum(b* - b) / ((n-1)^2 (n-2) / 2)`` over the whole graph."""
    if g.n < 3:
        _flag(flags, "betweenness_centralization")
        return 0.0
    b = node_betweenness(g, adj, dist)
    n = g.n
    return float((b.max() - b).sum() / ((n - 1) ** 2 * (n - 2) / 2.0))


def eigen_centralization(g: Graph, flags: set | None = None, *, adj=None) -> float:
    """Eigenvector centralization on the largest component.

    Scores are the leading adjacency eigenvector scaled to max 1; the sum of
    gaps to the top score is divided by the same quantity for the star on the
    component's node count, ``(n-1) - sqrt(n-1)``.
    """
    nodes = _largest_component_nodes(g)
    k = len(nodes)
    denom = (k - 1) - np.sqrt(max(k - 1, 0))
    if g.m == 0 or denom <= 0:
        _flag(flags, "eigen_centralization")
        return 0.0
    a = adjacency_matrix(g) if adj is None else adj
    sub = a[np.ix_(nodes, nodes)]
    vec = np.abs(symmetric_eigenvalues(sub, want_leading_vector=True).leading_eigenvector)
    score = vec / vec.max()
    return float((1.0 - score).sum() / denom)


# -- distance family ---------------------------------------------------------------

def closeness_mean(g: Graph, flags: set | None = None, *, dist=None) -> float:
    """Mean over largest-component nodes of ``1 / sum_j d(i, j)``."""
    d = _lcc_distances(g, dist)
    if d.shape[0] < 2:
        _flag(flags, "closeness_mean")
        return 0.0
    return float(np.mean(1.0 / d.sum(axis=1)))


def eccentricity_stats(g: Graph, *, dist=None) -> tuple[float, float, float]:
    """``(mean eccentricity, diameter, radius)`` on the largest component."""
    d = _lcc_distances(g, dist)
    if d.shape[0] == 0:
        return 0.0, 0.0, 0.0
    ecc = d.max(axis=1)
    return float(ecc.mean()), float(ecc.max()), float(ecc.min())


def mean_path_length(g: Graph, *, dist=None) -> float:
    d = _lcc_distances(g, dist)
    k = d.shape[0]
    if k < 2:
        return 0.0
    return float(d.sum() / (k * (k - 1)))


# -- local structure -----------------------------------------------------------------

def local_clustering(g: Graph, adj: np.ndarray | None = None) -> np.ndarray:
    a = adjacency_matrix(g) if adj is None else adj
    deg = a.sum(axis=1)
    tri = ((a @ a) * a).sum(axis=1) / 2.0
    pairs = deg * (deg - 1) / 2.0
    out = np.zeros(g.n)
    ok = deg >= 2
    out[ok] = tri[ok] / pairs[ok]
    return out


def transitivity(g: Graph, *, adj=None) -> float:
    """Mean local clustering coefficient; nodes of degree < 2 count as 0."""
    if g.n == 0:
        return 0.0
    return float(local_clustering(g, adj).mean())


def assortativity(g: Graph, flags: set | None = None) -> float:
    """Pearson correlation of endpoint degrees over both orientations of each edge."""
    if g.m == 0:
        _flag(flags, "assortativity")
        return 0.0
    deg = g.degrees().astype(float)
    e = np.asarray(g.edges)
    x = np.concatenate([deg[e[:, 0]], deg[e[:, 1]]])
    y = np.concatenate([deg[e[:, 1]], deg[e[:, 0]]])
    var = np.var(x)
    if var == 0.0:
        _flag(flags, "assortativity")
        return 0.0
    return float(np.mean((x - x.mean()) * (y - y.mean())) / var)


# -- modularity ------------------------------------------------------------------------

def partition_modularity(g: Graph, labels) -> float:
    """Newman modularity ``sum_u (e_uu - a_u^2)`` of a node labelling."""
    if g.m == 0:
        return 0.0
    _, comm = np.unique(np.asarray(labels), return_inverse=True)
    e = np.asarray(g.edges)
    k = comm.max() + 1
    same = comm[e[:, 0]] == comm[e[:, 1]]
    inside = np.bincount(comm[e[same, 0]], minlength=k)
    ends = np.bincount(comm, weights=g.degrees().astype(float), minlength=k)
    return float(np.sum(inside / g.m - (ends / (2.0 * g.m)) ** 2))


def refined_colors(g: Graph) -> np.ndarray:
    """Colour-refinement (1-WL) classes as canonical integers.

    The initial colour is each node's hop-distance histogram, which separates
    far more nodes than degree alone on long cycles and paths. Colours depend
    only on structure, so relabelling nodes permutes them.
    """
    dist = distance_matrix(g)
    hist = [tuple(np.bincount(row[np.isfinite(row)].astype(np.int64)).tolist()) for row in dist]
    ranking0 = {h: i for i, h in enumerate(sorted(set(hist)))}
    colors = np.array([ranking0[h] for h in hist], dtype=np.int64)
    n_classes = len(ranking0)
    while True:
        sigs = [(int(colors[v]), tuple(sorted(int(colors[u]) for u in g.adjacency[v])))
                for v in range(g.n)]
        ranking = {sig: i for i, sig in enumerate(sorted(set(sigs)))}
        colors = np.array([ranking[sig] for sig in sigs], dtype=np.int64)
        if len(ranking) == n_classes:
            return colors
        n_classes = len(ranking)


def greedy_modularity(g: Graph) -> tuple[float, np.ndarray]:
    """Agglomerative modularity maximisation (Clauset-Newman-Moore style).

    Starting from singletons, repeatedly merge the connected pair of
    communities with the largest gain ``2 (e_ij - a_i a_j)``; merging
    continues while a connected pair remains and the best partition seen is
    returned. Gains are compared exactly in integer units of ``1 / (4 m^2)``.
    Ties go to the pair whose sorted colour-refinement signatures are smallest,
    then to the lowest node labels, so the result does not depend on how
    nodes are numbered unless two non-equivalent pairs share a signature.
    """
    n = g.n
    labels = np.arange(n)
    if g.m == 0:
        return 0.0, labels
    two_m = 2 * g.m
    e = adjacency_matrix(g).astype(np.int64)
    d = g.degrees().astype(np.int64)
    colors = refined_colors(g)
    keys: list[tuple] = [(int(c),) for c in colors]
    q = -int(np.sum(d * d))
    best_q, best_labels = q, labels.copy()
    active = np.ones(n, dtype=bool)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    while True:
        valid = upper & (e > 0) & active[:, None] & active[None, :]
        if not valid.any():
            break
        gain = 2 * (two_m * e - np.outer(d, d))
        top = gain[valid].max()
        tied = np.argwhere(valid & (gain == top))
        if len(tied) > 1:
            i, j = min(tied.tolist(), key=lambda ij: (sorted((keys[ij[0]], keys[ij[1]])), ij))
        else:
            i, j = tied[0].tolist()
        q += int(top)
        e[i, :] += e[j, :]
        e[:, i] += e[:, j]
        e[j, :] = 0
        e[:, j] = 0
        d[i] += d[j]
        d[j] = 0
        active[j] = False
        keys[i] = tuple(sorted(keys[i] + keys[j]))
        labels[labels == j] = i
        if q > best_q:
            best_q, best_labels = q, labels.copy()
    return partition_modularity(g, best_labels), best_labels


def modularity(g: Graph, flags: set | None = None) -> float:
    if g.m == 0:
        _flag(flags, "modularity")
        return 0.0
    return greedy_modularity(g)[0]


# -- cuts and spectra ---------------------------------------------------------------------

def stoer_wagner(adj: np.ndarray) -> tuple[float, np.ndarray]:
    """Global minimum cut of a weighted undirected graph.

    Returns ``(cut weight, boolean mask of one side)``. Ties in the
    maximum-adjacency order go to the lowest node index.
    """
    w = np.array(adj, dtype=float)
    n = w.shape[0]
    if n < 2:
        return 0.0, np.ones(n, dtype=bool)
    groups = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)
    best, best_side = np.inf, None
    for _ in range(n - 1):
        nodes = np.flatnonzero(active)
        start = nodes[0]
        in_a = ~active.copy()
        in_a[start] = True
        key = w[start].copy()
        prev, last, cut = start, start, 0.0
        for _ in range(len(nodes) - 1):
            cand = np.where(in_a, -np.inf, key)
            nxt = int(np.argmax(cand))
            prev, last, cut = last, nxt, float(key[nxt])
            in_a[nxt] = True
            key += w[nxt]
        if cut < best:
            best = cut
            best_side = np.zeros(n, dtype=bool)
            best_side[groups[last]] = True
        w[prev, :] += w[last, :]
        w[:, prev] += w[:, last]
        w[prev, prev] = 0.0
        w[last, :] = 0.0
        w[:, last] = 0.0
        groups[prev].extend(groups[last])
        active[last] = False
    return best, best_side


def min_cut(g: Graph, *, adj=None) -> float:
    """Edge count of a global minimum cut; 0 for disconnected or 1-node graphs."""
    if g.n < 2 or len(connected_components(g)) > 1:
        return 0.0
    a = adjacency_matrix(g) if adj is None else adj
    return stoer_wagner(a)[0]


def graph_energy(g: Graph, *, adj_spectrum=None) -> float:
    """Sum of absolute adjacency eigenvalues."""
    vals = adj_spectrum if adj_spectrum is not None else \
        symmetric_eigenvalues(adjacency_matrix(g)).eigenvalues
    return float(np.abs(vals).sum())


def spectral_features(g: Graph, flags: set | None = None, *,
                      adj_spectrum=None) -> tuple[float, float, float]:
    """``(lambda_2(L), lambda_2(normalized L), lambda_max(A))``.

    Both second eigenvalues are exactly 0 for a disconnected graph, since
    the zero eigenvalue has one copy per component.
    """
    from .graph import connected_components, laplacian, normalized_laplacian

    if g.n < 2:
        _flag(flags, "spectral")
        return 0.0, 0.0, 0.0
    lap = symmetric_eigenvalues(laplacian(g)).eigenvalues
    nlap = symmetric_eigenvalues(normalized_laplacian(g)).eigenvalues
    adj = adj_spectrum if adj_spectrum is not None else \
        symmetric_eigenvalues(adjacency_matrix(g)).eigenvalues
    if len(connected_components(g)) > 1:
        return 0.0, 0.0, float(adj[-1])
    return float(max(lap[1], 0.0)), float(max(nlap[1], 0.0)), float(adj[-1])


# -- assembly ---------------------------------------------------------------------------------

def feature_vector(g: Graph) -> FeatureVector:
    """All 18 features of ``g``, sharing one distance matrix and one spectrum."""
    flags: set[str] = set()
    adj = adjacency_matrix(g)
    dist = distance_matrix(g)
    spec = symmetric_eigenvalues(adj).eigenvalues
    fiedler, nfiedler, radius = spectral_features(g, flags, adj_spectrum=spec)
    mean_ecc, diameter, _ = eccentricity_stats(g, dist=dist)
    return FeatureVector(
        degree_centralization=degree_centralization(g, flags),
        eigen_centralization=eigen_centralization(g, flags, adj=adj),
        closeness_mean=closeness_mean(g, flags, dist=dist),
        betweenness_centralization=betweenness_centralization(g, flags, adj=adj, dist=dist),
        assortativity=assortativity(g, flags),
        fiedler=fiedler,
        normalized_fiedler=nfiedler,
        spectral_radius=radius,
        modularity=modularity(g, flags),
        transitivity=transitivity(g, adj=adj),
        mean_degree=2.0 * g.m / g.n if g.n else 0.0,
        diameter=diameter,
        mean_eccentricity=mean_ecc,
        mean_path_length=mean_path_length(g, dist=dist),
        graph_energy=graph_energy(g, adj_spectrum=spec),
        min_cut=min_cut(g, adj=adj),
        order=float(g.n),
        num_edges=float(g.m),
        flags=frozenset(flags),
    )


def spearman_correlation_matrix(vectors) -> tuple[np.ndarray, set[tuple[int, int]]]:
    """Spearman rank correlation between feature columns (average ranks for ties).

    Accepts FeatureVectors or a 2-D array. Pairs involving a constant column
    get 0 and are returned in the flag set; the diagonal is always 1.
    """
    x = np.array([v.as_array() if isinstance(v, FeatureVector) else v for v in vectors], dtype=float)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ValueError("need at least 3 observations")
    ranks = np.apply_along_axis(rankdata, 0, x)
    centred = ranks - ranks.mean(axis=0)
    norm = np.sqrt((centred ** 2).sum(axis=0))
    p = x.shape[1]
    rho = np.eye(p)
    flagged: set[tuple[int, int]] = set()
    for i in range(p):
        for j in range(i + 1, p):
            if norm[i] == 0 or norm[j] == 0:
                flagged.add((i, j))
                continue
            r = float(centred[:, i] @ centred[:, j] / (norm[i] * norm[j]))
            rho[i, j] = rho[j, i] = min(1.0, max(-1.0, r))
    return rho, flagged


def _flag(flags: set | None, name: str) -> None:
    if flags is not None:
        flags.add(name)
