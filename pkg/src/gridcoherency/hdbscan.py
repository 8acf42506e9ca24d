"""Density-based hierarchical clustering of buses on a precomputed distance matrix.

The pipeline is the usual one: core distances, mutual reachability, a
minimum spanning tree, the single-linkage dendrogram, the condensed tree
and excess-of-mass cluster selection. ``dbscan_star_cut`` evaluates the
fixed-radius definitions directly and serves as a cross-check of the
hierarchy.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coherency import SimilarityMatrix
from .errors import ConfigError, FormatError, ParameterError, StructuralError

NOISE = -1


@dataclass(frozen=True)
class HdbscanParams:
    m_pts: int = 4
    min_cluster_size: int = 3
    d_floor: float = 1e-12

    def __post_init__(self):
        if self.m_pts < 2:
            raise ParameterError(f"m_pts must be >= 2, got {self.m_pts}")
        if self.min_cluster_size < 2:
            raise ParameterError(f"min_cluster_size must be >= 2, got {self.min_cluster_size}")
        if not self.d_floor > 0:
            raise ParameterError(f"d_floor must be positive, got {self.d_floor}")

    def validate(self, n_points: int):
        if self.m_pts > n_points:
            raise ParameterError(f"m_pts = {self.m_pts} exceeds the {n_points} buses")
        if self.min_cluster_size > n_points:
            raise ParameterError(
                f"min_cluster_size = {self.min_cluster_size} exceeds the {n_points} buses"
            )


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=int)
        ids = sorted(set(labels[labels != NOISE].tolist()))
        if ids != list(range(len(ids))) or len(ids) != self.k:
            raise ConfigError(f"cluster ids must be 0..k-1, got {ids} with k = {self.k}")
        if np.any(labels < NOISE):
            raise ConfigError("labels below -1 are not allowed")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels):
        labels = canonical_labels(labels)
        return cls(labels=labels, k=int(labels.max(initial=NOISE) + 1))

    @property
    def noise_count(self) -> int:
        return int(np.sum(self.labels == NOISE))

    def members(self, cluster_id) -> list:
        return np.flatnonzero(self.labels == cluster_id).tolist()


def canonical_labels(labels) -> np.ndarray:
    """Renumber clusters 0..k-1 by ascending smallest member; noise stays -1."""
    labels = np.asarray(labels, dtype=int)
    out = np.full(labels.shape, NOISE, dtype=int)
    mapping = {}
    for i, lab in enumerate(labels.tolist()):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def check_distance_matrix(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise FormatError(f"distance matrix must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise FormatError("distance matrix has non-finite entries")
    if not np.array_equal(D, D.T):
        raise FormatError("distance matrix is not symmetric")
    if np.any(np.diag(D) != 0):
        raise FormatError("distance matrix diagonal must be zero")
    if np.any(D < 0) or np.any(D > 1):
        raise FormatError("distances must lie in [0, 1]")
    return D


def similarity_to_distance(S: SimilarityMatrix) -> np.ndarray:
    D = 1.0 - np.asarray(S.values, dtype=float)
    np.fill_diagonal(D, 0.0)
    return D


def core_distances(D, params: HdbscanParams) -> np.ndarray:
    """Distance to the ``m_pts``-th nearest point, counting the point itself."""
    D = np.asarray(D, dtype=float)
    params.validate(D.shape[0])
    return np.sort(D, axis=1)[:, params.m_pts - 1]


def mutual_reachability(D, core) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    core = np.asarray(core, dtype=float)
    mr = np.maximum(D, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def minimum_spanning_tree(MR) -> list:
    """Dense Prim's algorithm.

    Edges compare by ``(weight, min index, max index)``; with that total
    order the tree is unique, so ties cannot make the output depend on
    visiting order. Returns ``(a, b, weight)`` with ``a < b``, sorted by key.
    """
    MR = np.asarray(MR, dtype=float)
    n = MR.shape[0]
    if n < 2:
        raise StructuralError("a spanning tree needs at least 2 points")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = [(MR[0, v], 0, v) for v in range(n)]
    edges = []
    for _ in range(n - 1):
        v = min((u for u in range(n) if not in_tree[u]), key=lambda u: best[u])
        w, a, b = best[v]
        edges.append((a, b, float(w)))
        in_tree[v] = True
        for u in range(n):
            if not in_tree[u]:
                cand = (MR[v, u], min(u, v), max(u, v))
                if cand < best[u]:
                    best[u] = cand
    edges.sort(key=lambda e: (e[2], e[0], e[1]))
    return edges


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        self.parent[self.find(b)] = self.find(a)


@dataclass(frozen=True)
class Dendrogram:
    """Single-linkage merges in linkage-matrix form.

    Row ``i`` is ``(node_a, node_b, distance, size)``; leaves are ``0..n-1``
    and the node created by row ``i`` is ``n + i``.
    """

    merges: np.ndarray
    n_leaves: int

    def __post_init__(self):
        m = np.asarray(self.merges, dtype=float).reshape(-1, 4)
        if len(m) != self.n_leaves - 1:
            raise StructuralError(f"expected {self.n_leaves - 1} merges, got {len(m)}")
        if np.any(np.diff(m[:, 2]) < 0):
            raise StructuralError("merge distances must be non-decreasing")
        object.__setattr__(self, "merges", m)

    def flat_cut(self, eps: float) -> np.ndarray:
        """Component label per leaf when every merge at distance <= eps is applied."""
        uf = _UnionFind(2 * self.n_leaves - 1)
        for i, (a, b, d, _) in enumerate(self.merges):
            if d > eps:
                break
            node = self.n_leaves + i
            uf.union(node, int(a))
            uf.union(node, int(b))
        return canonical_labels([uf.find(p) for p in range(self.n_leaves)])


def build_hierarchy(mst, n_points: int | None = None) -> Dendrogram:
    edges = sorted(((float(w), int(a), int(b)) for a, b, w in mst), key=lambda e: (e[0], min(e[1], e[2]), max(e[1], e[2])))
    n = len(edges) + 1 if n_points is None else n_points
    if len(edges) != n - 1:
        raise StructuralError(f"{len(edges)} edges cannot span {n} points")
    uf = _UnionFind(n)
    # current dendrogram node and size for each union-find root
    node_of = list(range(n))
    size_of = [1] * n
    merges = []
    for i, (w, a, b) in enumerate(edges):
        if not (0 <= a < n and 0 <= b < n):
            raise StructuralError(f"edge ({a}, {b}) references a point outside 0..{n - 1}")
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            raise StructuralError("edge list contains a cycle; not a spanning tree")
        na, nb = sorted((node_of[ra], node_of[rb]))
        size = size_of[ra] + size_of[rb]
        merges.append((na, nb, w, size))
        uf.union(ra, rb)
        r = uf.find(ra)
        node_of[r] = n + i
        size_of[r] = size
    return Dendrogram(merges=np.array(merges, dtype=float).reshape(-1, 4), n_leaves=n)


@dataclass
class CondensedCluster:
    id: int
    parent: int | None
    lambda_birth: float
    lambda_death: float = 0.0
    children: list = field(default_factory=list)
    departures: list = field(default_factory=list)  # (point, lambda)
    stability: float = 0.0


@dataclass
class CondensedTree:
    clusters: list
    n_points: int

    @property
    def root(self) -> CondensedCluster:
        return self.clusters[0]

    def departure_of(self) -> dict:
        """point -> (cluster id, lambda) of its single departure."""
        return {p: (c.id, lam) for c in self.clusters for p, lam in c.departures}

    def to_json_dict(self, bus_ids=None) -> dict:
        name = (lambda p: bus_ids[p]) if bus_ids is not None else (lambda p: p)
        return {
            "clusters": [
                {
                    "id": c.id,
                    "lambda_birth": c.lambda_birth,
                    "lambda_death": c.lambda_death,
                    "stability": c.stability,
                    "children": list(c.children),
                    "departures": [{"bus": name(p), "lambda": lam} for p, lam in c.departures],
                }
                for c in self.clusters
            ]
        }

    def write_json(self, path, bus_ids=None):
        Path(path).write_text(json.dumps(self.to_json_dict(bus_ids), indent=2) + "\n", encoding="utf-8")


def condense_tree(dendro: Dendrogram, params: HdbscanParams) -> CondensedTree:
    """Prune the dendrogram to splits where both sides reach ``min_cluster_size``.

    Walks merges from the top; lambda = 1 / max(distance, d_floor). The root
    is born at lambda = 0.
    """
    n = dendro.n_leaves
    mcs = params.min_cluster_size
    merges = dendro.merges

    def size(node):
        return 1 if node < n else int(merges[node - n, 3])

    def leaves(node):
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                a, b = merges[x - n, :2]
                stack.extend((int(a), int(b)))
        return sorted(out)

    clusters = [CondensedCluster(id=0, parent=None, lambda_birth=0.0)]
    if n == 1:
        clusters[0].departures.append((0, 1.0 / params.d_floor))
        clusters[0].lambda_death = 1.0 / params.d_floor
        return CondensedTree(clusters=clusters, n_points=n)
    owner = {2 * n - 2: 0}
    # points still inside each cluster when it split, for stability
    split_mass = {}
    for node in range(2 * n - 2, n - 1, -1):
        if node not in owner:
            continue
        c = clusters[owner[node]]
        a, b, dist, _ = merges[node - n]
        a, b = int(a), int(b)
        lam = 1.0 / max(dist, params.d_floor)
        big_a, big_b = size(a) >= mcs, size(b) >= mcs
        if big_a and big_b:
            for child in (a, b):
                new = CondensedCluster(id=len(clusters), parent=c.id, lambda_birth=lam)
                clusters.append(new)
                c.children.append(new.id)
                owner[child] = new.id
            c.lambda_death = lam
            split_mass[c.id] = (size(a) + size(b), lam)
            continue
        for child, big in ((a, big_a), (b, big_b)):
            if big:
                owner[child] = c.id
            else:
                c.departures.extend((p, lam) for p in leaves(child))
        if not (big_a or big_b):
            c.lambda_death = lam
    for c in clusters:
        s = sum(lam - c.lambda_birth for _, lam in c.departures)
        if c.id in split_mass:
            count, lam = split_mass[c.id]
            s += count * (lam - c.lambda_birth)
        c.stability = s
        c.departures.sort()
    return CondensedTree(clusters=clusters, n_points=n)


def select_clusters(tree: CondensedTree) -> list:
    """Excess-of-mass selection; returns the selected cluster ids."""
    selected = {}
    score = {}
    for c in reversed(tree.clusters):
        if not c.children:
            selected[c.id] = True
            score[c.id] = c.stability
            continue
        child_sum = sum(score[ch] for ch in c.children)
        if c.stability > child_sum:
            selected[c.id] = True
            score[c.id] = c.stability
            stack = list(c.children)
            while stack:
                d = stack.pop()
                selected[d] = False
                stack.extend(tree.clusters[d].children)
        else:
            selected[c.id] = False
            score[c.id] = child_sum
    return sorted(cid for cid, sel in selected.items() if sel)


def extract_clusters(tree: CondensedTree) -> Partition:
    chosen = set(select_clusters(tree))
    labels = np.full(tree.n_points, NOISE, dtype=int)
    for p, (cid, _) in tree.departure_of().items():
        node = cid
        while node is not None and node not in chosen:
            node = tree.clusters[node].parent
        if node is not None:
            labels[p] = node
    return Partition.from_labels(labels)


def dbscan_star_cut(D, eps: float, params: HdbscanParams) -> Partition:
    """Fixed-radius clusters straight from the core-point definitions.

    A point is core when at least ``m_pts`` points (itself included) lie
    within ``eps``; clusters are connected components of core points
    linked by distance <= eps; everything else is noise (no border points).
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    near = D <= eps
    is_core = near.sum(axis=1) >= params.m_pts
    labels = np.full(n, NOISE, dtype=int)
    next_id = 0
    for start in range(n):
        if not is_core[start] or labels[start] != NOISE:
            continue
        labels[start] = next_id
        queue = deque([start])
        while queue:
            p = queue.popleft()
            for q in np.flatnonzero(near[p] & is_core):
                if labels[q] == NOISE:
                    labels[q] = next_id
                    queue.append(q)
        next_id += 1
    return Partition.from_labels(labels)


def hierarchy_cut(dendro: Dendrogram, core, eps: float) -> Partition:
    """Flat cut of the mutual-reachability hierarchy at ``eps``; non-core points are noise."""
    labels = dendro.flat_cut(eps)
    labels = np.where(np.asarray(core) <= eps, labels, NOISE)
    return Partition.from_labels(labels)


def assign_noise(partition: Partition, S: SimilarityMatrix) -> Partition:
    """Attach each noise bus to the cluster it is most similar to on average."""
    labels = np.array(partition.labels)
    if partition.k == 0:
        return Partition(labels=np.zeros(len(labels), dtype=int), k=1)
    values = np.asarray(S.values)
    members = [np.flatnonzero(partition.labels == c) for c in range(partition.k)]
    for p in np.flatnonzero(partition.labels == NOISE):
        means = [values[p, m].mean() for m in members]
        labels[p] = int(np.argmax(means))  # first maximum -> lowest id
    return Partition(labels=labels, k=partition.k)


@dataclass
class HdbscanResult:
    partition: Partition
    raw: Partition
    tree: CondensedTree
    dendrogram: Dendrogram
    core: np.ndarray


def cluster_buses(S: SimilarityMatrix, params: HdbscanParams) -> HdbscanResult:
    """Run the whole chain on a similarity matrix, noise assignment included."""
    D = similarity_to_distance(S)
    core = core_distances(D, params)
    mr = mutual_reachability(D, core)
    dendro = build_hierarchy(minimum_spanning_tree(mr), D.shape[0])
    tree = condense_tree(dendro, params)
    raw = extract_clusters(tree)
    return HdbscanResult(
        partition=assign_noise(raw, S), raw=raw, tree=tree, dendrogram=dendro, core=core
    )
