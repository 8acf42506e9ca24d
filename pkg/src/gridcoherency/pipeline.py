"""End-to-end orchestration: angles -> similarity -> islands -> indices, per window."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import coherency, hdbscan, partition, spectrum, swingsim, timeseries
from .config import PipelineConfig
from .errors import ConfigError, GridCoherencyError, PipelineError

log = logging.getLogger(__name__)

ANGLES_FILE = "angles.csv"
TOPOLOGY_FILE = "topology.csv"
SIMILARITY_FILE = "similarity.csv"
SERIES_FILE = "index_series.csv"
VARIATION_FILE = "variation.csv"
REPORT_FILE = "island_report.json"
TREE_FILE = "condensed_tree.json"


@dataclass(frozen=True)
class IndexRow:
    window: int
    t_start: float
    gci: float | None
    gsi: float | None
    k: int
    noise_pre_assign: int


@dataclass
class WindowResult:
    index: int
    traces: timeseries.AngleTraceSet
    similarity: coherency.SimilarityMatrix
    clustering: hdbscan.HdbscanResult
    partition: hdbscan.Partition
    indices: coherency.IntegrityIndices

    def row(self) -> IndexRow:
        return IndexRow(
            window=self.index,
            t_start=self.traces.meta.t0,
            gci=self.indices.gci,
            gsi=self.indices.gsi,
            k=self.partition.k,
            noise_pre_assign=self.clustering.raw.noise_count,
        )


def _stage(name, window, fn, *args):
    try:
        return fn(*args)
    except GridCoherencyError as exc:
        raise PipelineError(exc, name, window) from exc


def similarity_for(traces, config: PipelineConfig, window=None) -> coherency.SimilarityMatrix:
    vel = _stage("velocity", window, timeseries.angular_velocity, traces)
    feats = _stage("spectrum", window, spectrum.build_feature_matrix, vel, config.band)
    return _stage("similarity", window, coherency.similarity_matrix, feats)


def analyze_window(traces, config: PipelineConfig, topology=None, index=0) -> WindowResult:
    S = similarity_for(traces, config, index)
    result = _stage("hdbscan", index, hdbscan.cluster_buses, S, config.hdbscan)
    part = result.partition
    if topology is not None:
        part = _stage("connectivity", index, partition.enforce_island_connectivity, part, topology, S)
    ind = coherency.integrity_indices(S, part, window_index=index, t_start=traces.meta.t0)
    return WindowResult(index=index, traces=traces, similarity=S, clustering=result, partition=part, indices=ind)


def analyze_traces(traces, config: PipelineConfig, topology=None) -> list:
    if topology is not None:
        topology = _stage("topology", None, topology.reorder, traces.bus_ids)
    windows = _stage("windowing", None, timeseries.sliding_windows, traces, config.window)
    return [analyze_window(w, config, topology, i) for i, w in enumerate(windows)]


def fixed_partition_indices(results, labels) -> list:
    """GCI/GSI of every window evaluated against one given labelling."""
    return [
        coherency.integrity_indices(r.similarity, labels, window_index=r.index, t_start=r.traces.meta.t0)
        for r in results
    ]


def report_window(results, config: PipelineConfig) -> WindowResult:
    idx = config.report_window
    if not -len(results) <= idx < len(results):
        raise ConfigError(f"report.window = {idx} but only {len(results)} windows exist")
    return results[idx]


def build_report(result: WindowResult, topology, config: PipelineConfig) -> partition.IslandReport:
    topo = topology.reorder(result.traces.bus_ids)
    extra = {
        "k": result.partition.k,
        "window": result.index,
        "t_start": result.traces.meta.t0,
        "bus_ids": list(result.traces.bus_ids),
        "noise_pre_assign": result.clustering.raw.noise_count,
        "config": config.as_report_dict(),
    }
    return _stage(
        "report", result.index, partition.island_report,
        result.partition, topo, result.similarity, result.indices, extra,
    )


def _fmt(x):
    return "nan" if x is None else f"{x:.17g}"


def write_index_series(rows, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "t_start", "gci", "gsi", "k", "noise_pre_assign"])
        for r in rows:
            w.writerow([r.window, _fmt(r.t_start), _fmt(r.gci), _fmt(r.gsi), r.k, r.noise_pre_assign])


def read_index_series(path) -> list:
    def num(s):
        v = float(s)
        return None if np.isnan(v) else v

    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            IndexRow(
                window=int(r["window"]),
                t_start=float(r["t_start"]),
                gci=num(r["gci"]),
                gsi=num(r["gsi"]),
                k=int(r["k"]),
                noise_pre_assign=int(r["noise_pre_assign"]),
            )
            for r in reader
        ]


def write_variation_csv(bus_ids, values, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(bus_ids))
        for bus, row in zip(bus_ids, values):
            w.writerow([bus] + [f"{v:.17g}" for v in row])


# ---------------------------------------------------------------- commands


def _out_dir(config) -> Path:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def simulate(config: PipelineConfig, out_path=None):
    """Generate angle traces (and a topology for swing systems); return written paths."""
    dt, t_end = config.get("simulate.dt"), config.get("simulate.t_end")
    out_path = Path(out_path) if out_path else _out_dir(config) / ANGLES_FILE
    out_path.parent.mkdir(parents=True, exist_ok=True)
    written = {"angles": out_path}
    planted = config.get("input.planted")
    if planted:
        try:
            doc = json.loads(Path(planted).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PipelineError(ConfigError(f"cannot read planted spec: {exc}"), "simulate") from None
        spec = _stage("simulate", None, swingsim.GroupSpec.from_dict, doc)
        traces = _stage("simulate", None, swingsim.planted_group_signals, spec, dt, t_end, config.seed)
    else:
        sys_path = config.get("input.system")
        if sys_path:
            system = _stage("simulate", None, swingsim.load_system_json, sys_path)
        else:
            system = swingsim.default_system()
        fault_path = config.get("input.faults")
        if fault_path:
            faults = _stage("simulate", None, swingsim.load_faults_json, fault_path)
        elif sys_path:
            faults = []
        else:
            faults = swingsim.default_faults()
        traces = _stage("simulate", None, swingsim.integrate_swing, system, faults, None, None, dt, t_end)
        topo = system_topology(system)
        topo_path = out_path.parent / TOPOLOGY_FILE
        partition.write_topology_csv(topo, topo_path)
        written["topology"] = topo_path
    timeseries.write_angle_csv(traces, out_path)
    if config.get("output.figures"):
        from . import plots

        fig = out_path.with_suffix(".png")
        plots.plot_angles(traces, fig)
        written["figure"] = fig
    return written


def system_topology(system) -> partition.GridTopology:
    ids = system.ids
    lines = [partition.Line(ids[i], ids[j], f"{ids[i]}-{ids[j]}") for i, j in sorted(system.lines)]
    return partition.GridTopology(bus_ids=ids, edges=lines)


def _load_angles(config):
    path = config.get("input.angles")
    if not path:
        raise PipelineError(ConfigError("input.angles is not set"), "load")
    return _stage("load", None, timeseries.load_angle_csv, path, config.get("input.tolerance"))


def _load_topology(config, bus_ids, required):
    path = config.get("input.topology")
    if not path:
        if required:
            raise PipelineError(ConfigError("input.topology is not set"), "load")
        return None
    topo = _stage("load", None, partition.load_topology_csv, path)
    return _stage("load", None, topo.reorder, bus_ids)


def analyze(config: PipelineConfig):
    """Angle CSV -> similarity CSV (report window), index-series CSV, variation CSV."""
    traces = _load_angles(config)
    topo = _load_topology(config, traces.bus_ids, required=False)
    results = analyze_traces(traces, config, topo)
    chosen = report_window(results, config)
    out = _out_dir(config)
    coherency.write_similarity_csv(chosen.similarity, out / SIMILARITY_FILE)
    rows = [r.row() for r in results]
    write_index_series(rows, out / SERIES_FILE)
    var = _stage(
        "variation", chosen.index, timeseries.variation_index, chosen.traces, config.baseline_sample
    )
    write_variation_csv(chosen.traces.bus_ids, var, out / VARIATION_FILE)
    if config.get("output.figures"):
        from . import plots

        plots.plot_index_series(rows, out / "index_series.png")
        plots.plot_similarity(chosen.similarity, out / "similarity.png", chosen.partition.labels)
    return results, rows


def partition_cmd(config: PipelineConfig):
    """Angle CSV + topology CSV -> island-report JSON (and condensed-tree JSON)."""
    traces = _load_angles(config)
    topo = _load_topology(config, traces.bus_ids, required=True)
    results = analyze_traces(traces, config, topo)
    chosen = report_window(results, config)
    report = build_report(chosen, topo, config)
    out = _out_dir(config)
    report.write_json(out / REPORT_FILE)
    chosen.clustering.tree.write_json(out / TREE_FILE, chosen.traces.bus_ids)
    return report, results


def run_pipeline(config: PipelineConfig):
    """Simulate when no angle file is configured, then analyze and partition.

    Returns ``(report, index_rows, window_results)``.
    """
    values = dict(config.values)
    if not values.get("input.angles"):
        written = simulate(config)
        values["input.angles"] = str(written["angles"])
        if "topology" in written and not values.get("input.topology"):
            values["input.topology"] = str(written["topology"])
    config = PipelineConfig.from_values(values)
    results, rows = analyze(config)
    report, _ = partition_cmd(config)
    log.info("pipeline finished: %d windows, k = %d", len(rows), report.k)
    return report, rows, results
