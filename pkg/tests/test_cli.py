"""End-to-end command-line behavior: generation, runs, artifacts, exit codes."""
import json
import os

import numpy as np
import pytest

from simmap import cli
from simmap.geometry import power_diagram, square, cell_neighbors
from simmap.pipeline import PipelineError


THREE_NODE_DOC = {
    "name": "root",
    "children": [
        {"name": "a", "weight": 3.0, "similarity": [1.0, 0.0]},
        {"name": "b", "weight": 1.0, "similarity": [0.9, 0.1]},
        {"name": "c", "weight": 1.0, "similarity": [0.0, 1.0]},
    ],
}


@pytest.fixture
def three_node(tmp_path):
    path = tmp_path / "three.json"
    path.write_text(json.dumps(THREE_NODE_DOC))
    return str(path)


# ------------------------------------------------------------------------ --gen

def test_gen_writes_valid_json_to_stdout(capsys):
    assert cli.main(["--gen", "m_n", "--leaves", "6", "--seed", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["name"]
    assert len(doc["children"]) >= 1


def test_gen_writes_file_with_out(tmp_path, capsys):
    prefix = str(tmp_path / "ds")
    assert cli.main(["--gen", "m_n", "--leaves", "6", "--seed", "1",
                     "--out", prefix]) == 0
    doc = json.loads((tmp_path / "ds.json").read_text())
    assert doc["name"]


def test_gen_deterministic(capsys):
    cli.main(["--gen", "two_level", "--leaves", "8", "--seed", "7"])
    first = capsys.readouterr().out
    cli.main(["--gen", "two_level", "--leaves", "8", "--seed", "7"])
    assert capsys.readouterr().out == first


def test_gen_unknown_kind_is_usage_error(capsys):
    assert cli.main(["--gen", "nope"]) == 1


# ------------------------------------------------------------------------- run

def test_run_writes_svg_and_metrics(three_node, tmp_path, capsys):
    prefix = str(tmp_path / "out")
    code = cli.main(["--input", three_node, "--out", prefix,
                     "--iters", "40", "--seed", "0"])
    assert code == 0
    svg = (tmp_path / "out.svg").read_text()
    assert svg.startswith("<?xml")
    metrics = json.loads((tmp_path / "out.metrics.json").read_text())
    assert metrics["config"]["seed"] == 0
    assert metrics["leaf"]["constraints_total"] >= 1


def test_run_area_ratios_match_weights(three_node, tmp_path):
    prefix = str(tmp_path / "out")
    cli.main(["--input", three_node, "--out", prefix, "--iters", "80",
              "--seed", "0", "--emit-geometry"])
    geom = json.loads((tmp_path / "out.geometry.json").read_text())
    cells = geom["1"][0]["cells"]

    def poly_area(verts):
        v = np.asarray(verts)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    areas = {c["id"]: poly_area(c["polygon"]) for c in cells}
    total = sum(areas.values())
    assert areas["a"] / total == pytest.approx(0.6, abs=0.03)
    assert areas["b"] / total == pytest.approx(0.2, abs=0.03)
    assert areas["c"] / total == pytest.approx(0.2, abs=0.03)


def test_seed_flag_beats_env(three_node, tmp_path, monkeypatch):
    monkeypatch.setenv("SIMMAP_SEED", "99")
    prefix = str(tmp_path / "out")
    cli.main(["--input", three_node, "--out", prefix, "--iters", "5",
              "--seed", "3"])
    metrics = json.loads((tmp_path / "out.metrics.json").read_text())
    assert metrics["config"]["seed"] == 3


def test_env_seed_fallback(three_node, tmp_path, monkeypatch):
    monkeypatch.setenv("SIMMAP_SEED", "11")
    prefix = str(tmp_path / "out")
    cli.main(["--input", three_node, "--out", prefix, "--iters", "5"])
    metrics = json.loads((tmp_path / "out.metrics.json").read_text())
    assert metrics["config"]["seed"] == 11


def test_default_seed_zero(three_node, tmp_path, monkeypatch):
    monkeypatch.delenv("SIMMAP_SEED", raising=False)
    prefix = str(tmp_path / "out")
    cli.main(["--input", three_node, "--out", prefix, "--iters", "5"])
    metrics = json.loads((tmp_path / "out.metrics.json").read_text())
    assert metrics["config"]["seed"] == 0


# ------------------------------------------------------------------ exit codes

def test_no_arguments_is_usage_error(capsys):
    assert cli.main([]) == 1


def test_unknown_flag_is_usage_error(capsys):
    assert cli.main(["--frobnicate"]) == 1


def test_bad_compare_strategy_is_usage_error(three_node, capsys):
    assert cli.main(["--input", three_node, "--compare", "match_swap,bogus"]) == 1


def test_malformed_json_is_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["--input", str(bad)]) == 2


def test_missing_file_is_validation_error(capsys):
    assert cli.main(["--input", "/nonexistent/x.json"]) == 2


def test_duplicate_ids_is_validation_error(tmp_path, capsys):
    doc = {"name": "r", "children": [
        {"name": "a", "weight": 1.0}, {"name": "a", "weight": 1.0}]}
    path = tmp_path / "dup.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["--input", str(path)]) == 2


def test_bad_env_seed_is_validation_error(three_node, monkeypatch, capsys):
    monkeypatch.setenv("SIMMAP_SEED", "not-a-number")
    assert cli.main(["--input", three_node]) == 2


def test_numeric_failure_is_exit_three(three_node, monkeypatch, capsys):
    def boom(config):
        raise PipelineError("diagram collapsed")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["--input", three_node]) == 3


# -------------------------------------------------------------------- --compare

def test_compare_single_strategy_matches_run(three_node, tmp_path, capsys):
    prefix = str(tmp_path / "out")
    cli.main(["--input", three_node, "--out", prefix, "--iters", "30",
              "--seed", "4"])
    metrics = json.loads((tmp_path / "out.metrics.json").read_text())
    capsys.readouterr()
    assert cli.main(["--input", three_node, "--compare", "match_swap",
                     "--seeds", "4", "--iters", "30"]) == 0
    table = capsys.readouterr().out
    assert "match_swap" in table
    frac = metrics["leaf"]["preserved_fraction"]
    assert f"{100.0 * frac:.1f}" in table or f"{frac:.3f}" in table


def test_compare_multiple_strategies_prints_all(three_node, capsys):
    assert cli.main(["--input", three_node,
                     "--compare", "match_swap,random_cvt,proj_scale",
                     "--seeds", "0,1", "--iters", "10"]) == 0
    table = capsys.readouterr().out
    for name in ("match_swap", "random_cvt", "proj_scale"):
        assert name in table


# ------------------------------------------------------------------ --emit-trace

def test_trace_roundtrip_rebuilds_final_diagram(tmp_path, capsys):
    gen_prefix = str(tmp_path / "mn")
    cli.main(["--gen", "m_n", "--leaves", "8", "--seed", "2",
              "--out", gen_prefix])
    prefix = str(tmp_path / "out")
    assert cli.main(["--input", gen_prefix + ".json", "--out", prefix,
                     "--iters", "60", "--seed", "1", "--emit-trace"]) == 0
    frames = [json.loads(line)
              for line in (tmp_path / "out.trace.ndjson").read_text().splitlines()]
    assert frames, "trace must contain at least one frame"
    assert [f["iter"] for f in frames] == sorted(f["iter"] for f in frames)
    final = frames[-1]

    metrics = json.loads((tmp_path / "out.metrics.json").read_text())
    geom_ids = sorted(final["sites"])
    # rebuild the diagram from the final frame and re-count realized pairs
    boundary = None
    from simmap.pipeline import make_boundary
    boundary = make_boundary("circle", 1000.0)
    sites = [final["sites"][nid] for nid in geom_ids]
    weights = [final["weights"][nid] for nid in geom_ids]
    d = power_diagram(sites, boundary, weights=weights, node_ids=geom_ids,
                      scale=boundary.diagonal)
    nm = cell_neighbors([d])
    constraints = metrics["leaf"]["per_constraint"]
    realized = sum(
        1 for c in constraints
        if tuple(sorted((c["a"], c["b"]))) in nm
    )
    assert realized == metrics["leaf"]["constraints_preserved"]
    assert realized == final["realized"]
