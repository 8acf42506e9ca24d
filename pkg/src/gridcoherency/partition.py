"""Turn bus clusters into connected electrical islands and report on them."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .coherency import IntegrityIndices, SimilarityMatrix, integrity_indices
from .errors import ConsistencyError, FormatError
from .hdbscan import NOISE, Partition

# |recomputed - supplied| allowed when cross-checking indices
INDEX_ATOL = 1e-12


@dataclass(frozen=True)
class Line:
    a: str
    b: str
    line_id: str | None = None


@dataclass(frozen=True)
class GridTopology:
    bus_ids: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "bus_ids", tuple(self.bus_ids))
        edges = tuple(e if isinstance(e, Line) else Line(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        known = set(self.bus_ids)
        for e in edges:
            if e.a not in known or e.b not in known:
                raise FormatError(f"line {e.a}-{e.b} references an unknown bus")
            if e.a == e.b:
                raise FormatError(f"self-loop at bus {e.a}")
        if self.bus_ids and not nx.is_connected(self.graph()):
            raise FormatError("grid topology is not connected")

    def index(self) -> dict:
        return {b: i for i, b in enumerate(self.bus_ids)}

    def graph(self) -> nx.Graph:
        """Graph on bus indices (not names)."""
        idx = self.index()
        g = nx.Graph()
        g.add_nodes_from(range(len(self.bus_ids)))
        g.add_edges_from((idx[e.a], idx[e.b]) for e in self.edges)
        return g

    def reorder(self, bus_ids) -> GridTopology:
        if set(bus_ids) != set(self.bus_ids) or len(bus_ids) != len(self.bus_ids):
            raise ConsistencyError("topology buses do not match the measured buses")
        return GridTopology(bus_ids=tuple(bus_ids), edges=self.edges)


def load_topology_csv(path, bus_ids=None) -> GridTopology:
    """Read ``bus_a,bus_b[,line_id]`` rows. Buses default to the endpoints in first-seen order."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"topology file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: empty topology file")
    header = [c.strip() for c in rows[0]]
    if header[:2] != ["bus_a", "bus_b"] or len(header) > 3:
        raise FormatError(f"{path}: header must be bus_a,bus_b[,line_id]")
    edges = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        r = [c.strip() for c in r]
        edges.append(Line(r[0], r[1], r[2] if len(r) == 3 and r[2] else None))
    if bus_ids is None:
        seen = {}
        for e in edges:
            seen.setdefault(e.a, None)
            seen.setdefault(e.b, None)
        bus_ids = tuple(seen)
    return GridTopology(bus_ids=tuple(bus_ids), edges=tuple(edges))


def write_topology_csv(topo: GridTopology, path) -> None:
    with_ids = any(e.line_id is not None for e in topo.edges)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus_a", "bus_b", "line_id"] if with_ids else ["bus_a", "bus_b"])
        for e in topo.edges:
            w.writerow([e.a, e.b, e.line_id or ""] if with_ids else [e.a, e.b])


def _components(g: nx.Graph, nodes) -> list:
    comps = [sorted(c) for c in nx.connected_components(g.subgraph(nodes))]
    # largest first; ties go to the component holding the smallest bus index
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def enforce_island_connectivity(partition: Partition, topo: GridTopology, S: SimilarityMatrix) -> Partition:
    """Make every cluster induce a connected subgraph of the grid.

    The largest component of each cluster keeps its label. Stray components
    then join, as units, the neighbouring island with the largest summed
    similarity across their shared lines. A stray only attaches to buses
    already settled, so islands stay connected as they grow.
    """
    labels = np.array(partition.labels, dtype=int)
    if np.any(labels == NOISE):
        raise ConsistencyError("connectivity repair needs a partition without noise")
    if len(labels) != len(topo.bus_ids):
        raise ConsistencyError("partition and topology sizes differ")
    g = topo.graph()
    values = np.asarray(S.values)
    settled = np.zeros(len(labels), dtype=bool)
    strays = []
    for c in range(partition.k):
        comps = _components(g, np.flatnonzero(labels == c).tolist())
        if comps:
            settled[comps[0]] = True
            strays.extend(comps[1:])
    strays.sort(key=lambda comp: comp[0])
    while strays:
        pending = []
        for comp in strays:
            gain = {}
            for p in comp:
                for q in g.neighbors(p):
                    if settled[q]:
                        gain[labels[q]] = gain.get(labels[q], 0.0) + values[p, q]
            if not gain:
                pending.append(comp)
                continue
            labels[comp] = min(gain, key=lambda c: (-gain[c], c))
            settled[comp] = True
        if len(pending) == len(strays):
            raise AssertionError("connectivity repair stalled on a disconnected topology")
        strays = pending
    return Partition(labels=labels, k=partition.k)


def cutset(partition: Partition, topo: GridTopology) -> list:
    """Lines whose endpoints sit in different islands, sorted by endpoint index."""
    idx = topo.index()
    labels = partition.labels
    cut = []
    for e in topo.edges:
        i, j = idx[e.a], idx[e.b]
        if labels[i] != labels[j]:
            cut.append((min(i, j), max(i, j), e))
    cut.sort(key=lambda t: (t[0], t[1]))
    return [e for _, _, e in cut]


@dataclass
class IslandReport:
    islands: list  # [{"id": int, "buses": [bus ids]}]
    cutset: list
    indices: IntegrityIndices
    internal_similarity: list
    degenerate_buses: list
    extra: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.islands)

    def to_json_dict(self) -> dict:
        def num(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else x

        out = {
            "islands": [{"id": isl["id"], "buses": list(isl["buses"])} for isl in self.islands],
            "cutset": [{"a": e.a, "b": e.b, "line_id": e.line_id} for e in self.cutset],
            "gci": num(self.indices.gci),
            "gsi": num(self.indices.gsi),
            "degenerate_buses": list(self.degenerate_buses),
            "per_island_internal_similarity": [num(x) for x in self.internal_similarity],
        }
        out.update(self.extra)
        return out

    def write_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=False) + "\n", encoding="utf-8"
        )


def _same(a, b):
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= INDEX_ATOL


def island_report(partition: Partition, topo: GridTopology, S: SimilarityMatrix, indices: IntegrityIndices, extra=None) -> IslandReport:
    if tuple(topo.bus_ids) != tuple(S.bus_ids) or len(partition.labels) != S.n_buses:
        raise ConsistencyError("partition, topology and similarity matrix cover different buses")
    if np.any(partition.labels == NOISE):
        raise ConsistencyError("island report needs every bus assigned")
    check = integrity_indices(S, partition)
    if not (_same(check.gci, indices.gci) and _same(check.gsi, indices.gsi)):
        raise ConsistencyError(
            f"supplied indices (gci={indices.gci}, gsi={indices.gsi}) disagree with "
            f"recomputed (gci={check.gci}, gsi={check.gsi})"
        )
    g = topo.graph()
    values = np.asarray(S.values)
    islands, internal = [], []
    for c in range(partition.k):
        members = partition.members(c)
        if not nx.is_connected(g.subgraph(members)):
            raise ConsistencyError(f"island {c} is not connected")
        islands.append({"id": c, "buses": [S.bus_ids[i] for i in members]})
        if len(members) > 1:
            block = values[np.ix_(members, members)]
            internal.append(float(block[np.triu_indices(len(members), 1)].mean()))
        else:
            internal.append(None)
    return IslandReport(
        islands=islands,
        cutset=cutset(partition, topo),
        indices=indices,
        internal_similarity=internal,
        degenerate_buses=list(S.degenerate),
        extra=dict(extra or {}),
    )
