import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from gridcoherency import cli, pipeline
from gridcoherency.config import DEFAULTS, PipelineConfig, parse_config_text
from gridcoherency.errors import ConfigError
from oracles import ari

GROUPS = [[f"{g}{k}" for k in range(1, 6)] for g in "abc"]
OUTPUTS = ["angles.csv", "similarity.csv", "index_series.csv", "variation.csv", "island_report.json", "condensed_tree.json"]


def schema(name):
    return json.loads(resources.files("gridcoherency").joinpath(f"data/{name}").read_text())


def write_planted(path, groups=GROUPS, freqs=(0.5, 1.0, 1.5), jitter=0.01):
    n = len(groups)
    doc = {"groups": groups, "freq_hz": list(freqs[:n]), "amplitude": [0.1] * n, "phase_rad": [0.0] * n, "jitter": jitter}
    path.write_text(json.dumps(doc))
    return path


def write_ring_topology(path, groups=GROUPS):
    lines = ["bus_a,bus_b,line_id"]
    for g in groups:
        lines += [f"{a},{b},{a}-{b}" for a, b in zip(g, g[1:])]
    for g, h in zip(groups, groups[1:] + groups[:1]):
        if g is not h:
            lines.append(f"{g[-1]},{h[0]},{g[-1]}-{h[0]}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def planted_case(tmp_path):
    return write_planted(tmp_path / "planted.json"), write_ring_topology(tmp_path / "topo.csv")


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_planted_pipeline_recovers_groups(planted_case, tmp_path):
    spec, topo = planted_case
    out = tmp_path / "out"
    assert run("pipeline", "--planted", spec, "--topology", topo, "--out-dir", out, "--t-end", 10) == 0
    for name in OUTPUTS:
        assert (out / name).is_file()
    report = json.loads((out / "island_report.json").read_text())
    assert report["k"] == 3
    lab = {b: isl["id"] for isl in report["islands"] for b in isl["buses"]}
    truth = [gi for gi, g in enumerate(GROUPS) for _ in g]
    assert ari(truth, [lab[b] for g in GROUPS for b in g]) == 1.0
    assert sorted(c["line_id"] for c in report["cutset"]) == ["a5-b1", "b5-c1", "c5-a1"]
    jsonschema.validate(report, schema("island_report.schema.json"))
    jsonschema.validate(json.loads((out / "condensed_tree.json").read_text()), schema("condensed_tree.schema.json"))
    assert report["config"]["hdbscan.m_pts"] == 4


def test_single_group_pipeline(tmp_path):
    group = [[f"x{k}" for k in range(6)]]
    spec = write_planted(tmp_path / "one.json", group, jitter=0.0)
    topo = write_ring_topology(tmp_path / "t.csv", group)
    out = tmp_path / "out"
    assert run("pipeline", "--planted", spec, "--topology", topo, "--out-dir", out, "--t-end", 5) == 0
    report = json.loads((out / "island_report.json").read_text())
    assert report["k"] == 1 and report["gsi"] is None and report["cutset"] == []
    assert report["gci"] == pytest.approx(1.0, abs=1e-9)
    series = pipeline.read_index_series(out / "index_series.csv")
    assert all(r.gsi is None for r in series)
    assert "nan" in (out / "index_series.csv").read_text()


def test_noise_free_planted_gci_is_one(tmp_path):
    spec = write_planted(tmp_path / "p.json", jitter=0.0)
    topo = write_ring_topology(tmp_path / "t.csv")
    out = tmp_path / "out"
    assert run("pipeline", "--planted", spec, "--topology", topo, "--out-dir", out, "--t-end", 6) == 0
    for row in pipeline.read_index_series(out / "index_series.csv"):
        assert abs(row.gci - 1.0) <= 1e-9


def test_reruns_are_byte_identical(planted_case, tmp_path):
    spec, topo = planted_case
    out = tmp_path / "out"
    args = ("pipeline", "--planted", spec, "--topology", topo, "--out-dir", out, "--t-end", 6, "--figures")
    assert run(*args) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert {"index_series.png", "similarity.png", "angles.png"} <= set(first)
    assert run(*args) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first


def test_analyze_then_partition_matches_pipeline(planted_case, tmp_path):
    spec, topo = planted_case
    out = tmp_path / "out"
    assert run("pipeline", "--planted", spec, "--topology", topo, "--out-dir", out, "--t-end", 6) == 0
    expected = {name: (out / name).read_bytes() for name in OUTPUTS}
    for name in OUTPUTS[1:]:
        (out / name).unlink()
    # the pipeline records the simulated angle file as its input
    stages = ("--set", f"input.planted={spec}", "--set", "simulate.t_end=6", "--angles", out / "angles.csv", "--topology", topo, "--out-dir", out)
    assert run("analyze", *stages) == 0
    assert run("partition", *stages) == 0
    assert {name: (out / name).read_bytes() for name in OUTPUTS} == expected


def test_swing_scenario_writes_topology(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--out-dir", out, "--t-end", 1) == 0
    assert (out / "topology.csv").read_text().startswith("bus_a,bus_b,line_id\n")
    header = (out / "angles.csv").read_text().splitlines()[0]
    assert header == "t," + ",".join(f"G{k}" for k in range(1, 10))


def test_exit_code_format_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,a,b\n0,1\n")
    assert run("analyze", "--angles", bad, "--out-dir", tmp_path) == 2
    assert "error:" in capsys.readouterr().err


def test_exit_code_non_uniform(tmp_path):
    bad = tmp_path / "jitter.csv"
    bad.write_text("t,a,b\n0,0,0\n0.01,0,0\n0.05,0,0\n0.06,0,0\n")
    assert run("analyze", "--angles", bad, "--out-dir", tmp_path) == 2


def test_exit_code_numerical(tmp_path):
    sys_doc = {
        "machines": [{"id": "a", "H": 1e-6, "D": 0, "Pm": 0, "E": 1, "delta0": 0.5}, {"id": "b", "H": 1e-6, "D": 0, "Pm": 0, "E": 1, "delta0": 0.0}],
        "admittance": [{"i": "a", "j": "b", "B": 1e6}],
    }
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(sys_doc))
    assert run("simulate", "--system", path, "--dt", 0.02, "--t-end", 1, "--out-dir", tmp_path) == 3


def test_exit_code_config(tmp_path, planted_case):
    spec, _ = planted_case
    assert run("simulate", "--set", "window.length=abc", "--out-dir", tmp_path) == 4
    assert run("simulate", "--set", "no.such.key=1", "--out-dir", tmp_path) == 4
    assert run("simulate", "--dt", 0.5, "--planted", spec, "--out-dir", tmp_path) in (0, 4)
    assert run("simulate", "--dt", 0.5, "--out-dir", tmp_path) == 4
    assert run("analyze", "--out-dir", tmp_path) == 4


def test_window_longer_than_trace(planted_case, tmp_path):
    spec, topo = planted_case
    code = run("pipeline", "--planted", spec, "--topology", topo, "--out-dir", tmp_path, "--t-end", 1, "--window", 500)
    assert code == 4


def test_config_precedence(tmp_path, capsys):
    conf = tmp_path / "c.conf"
    conf.write_text("# scenario\nwindow.length = 300\nwindow.stride = 25  # trailing comment\nhdbscan.m_pts = 5\n")
    assert run("show-config", "--config", conf, "--window", 120, "--set", "hdbscan.m_pts=6") == 0
    shown = parse_config_text(capsys.readouterr().out)
    assert shown["window.length"] == 120  # flag beats file
    assert shown["window.stride"] == 25  # file beats default
    assert shown["hdbscan.m_pts"] == 6  # --set beats file
    assert shown["band.f_hi_hz"] == 2.5  # default
    assert set(shown) == set(DEFAULTS)


def test_config_parse_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign here")
    with pytest.raises(ConfigError):
        PipelineConfig.load(None, {"hdbscan.m_pts": "1"})
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "missing.conf")


def test_bundled_scenario_config_loads():
    text = resources.files("gridcoherency").joinpath("data/nine_machine.conf").read_text()
    cfg = PipelineConfig.load(None, parse_config_text(text))
    assert cfg.hdbscan.m_pts == 3 and cfg.window.length == 200


def test_index_series_round_trip(tmp_path):
    rows = [pipeline.IndexRow(0, 0.0, 0.75, None, 1, 2), pipeline.IndexRow(1, 0.5, 1.0, 0.125, 2, 0)]
    path = tmp_path / "s.csv"
    pipeline.write_index_series(rows, path)
    assert path.read_text().splitlines()[0] == "window,t_start,gci,gsi,k,noise_pre_assign"
    assert pipeline.read_index_series(path) == rows


def test_variation_output_antisymmetric(planted_case, tmp_path):
    spec, topo = planted_case
    assert run("analyze", "--angles", tmp_path / "missing.csv", "--out-dir", tmp_path) == 2
    out = tmp_path / "out"
    assert run("pipeline", "--planted", spec, "--topology", topo, "--out-dir", out, "--t-end", 4) == 0
    lines = (out / "variation.csv").read_text().splitlines()
    vals = np.array([[float(x) for x in ln.split(",")[1:]] for ln in lines[1:]])
    np.testing.assert_array_equal(vals, -vals.T)
