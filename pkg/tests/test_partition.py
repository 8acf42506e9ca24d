import json
from importlib import resources

import jsonschema
import networkx as nx
import numpy as np
import pytest

from conftest import planted_similarity
from gridcoherency.coherency import IntegrityIndices, SimilarityMatrix, integrity_indices
from gridcoherency.errors import ConsistencyError, FormatError
from gridcoherency.hdbscan import Partition
from gridcoherency.partition import (
    GridTopology,
    Line,
    cutset,
    enforce_island_connectivity,
    island_report,
    load_topology_csv,
    write_topology_csv,
)
from oracles import is_connected_subgraph


def names(n):
    return [f"b{i}" for i in range(n)]


def topo_from_graph(g):
    ids = names(g.number_of_nodes())
    return GridTopology(ids, [(ids[a], ids[b]) for a, b in g.edges])


def uniform_sim(n, value=0.5):
    v = np.full((n, n), value)
    np.fill_diagonal(v, 1.0)
    return SimilarityMatrix(names(n), v)


def test_connected_partition_unchanged():
    topo = topo_from_graph(nx.path_graph(6))
    part = Partition(labels=[0, 0, 0, 1, 1, 1], k=2)
    out = enforce_island_connectivity(part, topo, uniform_sim(6))
    assert out.labels.tolist() == [0, 0, 0, 1, 1, 1]


def test_path_middle_bus_moves():
    # 1-2-3 with {1,3} in one cluster: the stray singleton joins bus 2's cluster
    topo = GridTopology(["1", "2", "3"], [("1", "2"), ("2", "3")])
    part = Partition(labels=[0, 1, 0], k=2)
    out = enforce_island_connectivity(part, topo, uniform_sim(3))
    labels = out.labels.tolist()
    assert labels[0] != labels[2] or labels == [1, 1, 1]
    for c in set(labels):
        members = [topo.bus_ids[i] for i, l in enumerate(labels) if l == c]
        assert is_connected_subgraph(members, [(e.a, e.b) for e in topo.edges])


def test_stray_goes_to_most_similar_neighbour():
    # star around bus 0; bus 3 (cluster 0) is cut off and borders clusters 1 and 2
    g = nx.Graph([(0, 1), (1, 3), (3, 2), (2, 4), (0, 4)])
    topo = topo_from_graph(g)
    v = np.full((5, 5), 0.1)
    np.fill_diagonal(v, 1.0)
    v[3, 2] = v[2, 3] = 0.9
    S = SimilarityMatrix(names(5), v)
    part = Partition(labels=[0, 1, 2, 0, 0], k=3)
    out = enforce_island_connectivity(part, topo, S)
    assert out.labels.tolist() == [0, 1, 2, 2, 0]


def test_stray_tie_goes_to_lowest_id():
    g = nx.Graph([(0, 1), (1, 3), (3, 2), (2, 4), (0, 4)])
    topo = topo_from_graph(g)
    part = Partition(labels=[0, 1, 2, 0, 0], k=3)
    out = enforce_island_connectivity(part, topo, uniform_sim(5))
    assert out.labels[3] == 1


def test_random_graphs_give_connected_islands(rng):
    for trial in range(40):
        n = int(rng.integers(6, 25))
        g = nx.connected_watts_strogatz_graph(n, 4, 0.3, seed=int(rng.integers(1 << 30)))
        topo = topo_from_graph(g)
        k = int(rng.integers(1, min(5, n) + 1))
        labels = rng.integers(0, k, n)
        labels[:k] = np.arange(k)
        S, _ = planted_similarity(rng, [n], within=(0, 1))
        part = Partition(labels=labels, k=k)
        out = enforce_island_connectivity(part, topo, S)
        assert out.k == k
        for c in range(k):
            members = np.flatnonzero(out.labels == c).tolist()
            assert members and nx.is_connected(g.subgraph(members))
            # the largest component of each original cluster stays put
            before = [sorted(cc) for cc in nx.connected_components(g.subgraph(np.flatnonzero(labels == c).tolist()))]
            biggest = max(before, key=lambda cc: (len(cc), -cc[0]))
            assert set(biggest) <= set(members)


def test_noise_rejected():
    topo = topo_from_graph(nx.path_graph(3))
    with pytest.raises(ConsistencyError):
        enforce_island_connectivity(Partition(labels=[0, -1, 0], k=1), topo, uniform_sim(3))


def test_cutset_examples():
    topo = GridTopology(["a", "b", "c", "d"], [("c", "d", "L3"), ("a", "b", "L1"), ("b", "c", "L2"), ("a", "d", "L4")])
    part = Partition(labels=[0, 0, 1, 1], k=2)
    cut = cutset(part, topo)
    # sorted by endpoint indices: (0, 3) before (1, 2)
    assert [e.line_id for e in cut] == ["L4", "L2"]
    assert cutset(Partition(labels=[0, 0, 0, 0], k=1), topo) == []


def test_removing_cutset_leaves_k_components(rng):
    for _ in range(20):
        n = int(rng.integers(6, 20))
        g = nx.connected_watts_strogatz_graph(n, 4, 0.3, seed=int(rng.integers(1 << 30)))
        topo = topo_from_graph(g)
        labels = rng.integers(0, 3, n)
        labels[:3] = [0, 1, 2]
        part = enforce_island_connectivity(Partition(labels=labels, k=3), topo, uniform_sim(n))
        cut = {(e.a, e.b) for e in cutset(part, topo)}
        h = nx.Graph()
        h.add_nodes_from(topo.bus_ids)
        h.add_edges_from((e.a, e.b) for e in topo.edges if (e.a, e.b) not in cut)
        assert nx.number_connected_components(h) == 3


def test_topology_validation():
    with pytest.raises(FormatError):
        GridTopology(["a", "b"], [("a", "c")])
    with pytest.raises(FormatError):
        GridTopology(["a", "b"], [("a", "a")])
    with pytest.raises(FormatError):
        GridTopology(["a", "b", "c"], [("a", "b")])


def test_topology_csv_round_trip(tmp_path):
    topo = GridTopology(["x", "y", "z"], [Line("x", "y", "L1"), Line("y", "z", "L2")])
    path = tmp_path / "t.csv"
    write_topology_csv(topo, path)
    assert path.read_text() == "bus_a,bus_b,line_id\nx,y,L1\ny,z,L2\n"
    back = load_topology_csv(path)
    assert back == topo


def test_topology_bad_header(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("from,to\na,b\n")
    with pytest.raises(FormatError):
        load_topology_csv(path)


def test_reorder_mismatch():
    topo = GridTopology(["a", "b"], [("a", "b")])
    with pytest.raises(ConsistencyError):
        topo.reorder(["a", "c"])


def three_island_case(rng):
    sizes = [4, 5, 3]
    S, truth = planted_similarity(rng, sizes, shuffle=False)
    g = nx.Graph()
    start = 0
    for s in sizes:
        nx.add_path(g, range(start, start + s))
        start += s
    g.add_edges_from([(3, 4), (8, 9)])
    return S, truth, topo_from_graph(g)


def test_island_report_three_islands(rng, tmp_path):
    S, truth, topo = three_island_case(rng)
    part = Partition(labels=truth, k=3)
    ind = integrity_indices(S, part)
    extra = {"k": 3, "window": 0, "t_start": 0.0, "bus_ids": list(S.bus_ids), "noise_pre_assign": 0, "config": {}}
    rep = island_report(part, topo, S, ind, extra=extra)
    assert rep.k == 3
    assert [isl["buses"] for isl in rep.islands] == [names(12)[:4], names(12)[4:9], names(12)[9:]]
    assert [(e.a, e.b) for e in rep.cutset] == [("b3", "b4"), ("b8", "b9")]
    assert all(0.9 <= x <= 1.0 for x in rep.internal_similarity)
    path = tmp_path / "r.json"
    rep.write_json(path)
    doc = json.loads(path.read_text())
    schema = json.loads(resources.files("gridcoherency").joinpath("data/island_report.schema.json").read_text())
    jsonschema.validate(doc, schema)
    assert doc["gci"] == ind.gci and doc["k"] == 3


def test_island_report_rejects_wrong_indices(rng):
    S, truth, topo = three_island_case(rng)
    part = Partition(labels=truth, k=3)
    ind = integrity_indices(S, part)
    with pytest.raises(ConsistencyError):
        island_report(part, topo, S, IntegrityIndices(gci=ind.gci + 1e-9, gsi=ind.gsi))


def test_island_report_single_island(rng):
    S, _, topo = three_island_case(rng)
    part = Partition(labels=[0] * 12, k=1)
    rep = island_report(part, topo, S, integrity_indices(S, part))
    doc = rep.to_json_dict()
    assert doc["gsi"] is None and doc["cutset"] == [] and len(doc["islands"]) == 1


def test_island_report_disconnected_island(rng):
    S, truth, topo = three_island_case(rng)
    labels = truth.copy()
    labels[0], labels[4] = labels[4], labels[0]
    part = Partition(labels=labels, k=3)
    with pytest.raises(ConsistencyError):
        island_report(part, topo, S, integrity_indices(S, part))
