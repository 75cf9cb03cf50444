"""The vsparse command: exit codes, artifacts and chained runs."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from artifact.cli import run
from artifact.graph_core import parse_graph, serialize_graph


def _gen(tmp: Path, name: str, *args: str) -> Path:
    out = tmp / name
    assert run(["gen", *args, "--out", str(out)]) == 0
    return out


def test_gen_writes_graph_and_manifest(tmp_path):
    out = _gen(tmp_path, "g.txt", "--family", "digraph", "--seed", "3", "--n", "20", "--k", "4")
    manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
    assert manifest["family"] == "digraph" and manifest["seed"] == 3
    g = parse_graph(out.read_text())
    assert (manifest["n"], manifest["k"], manifest["m"]) == (g.n, g.k, g.m)


def test_gen_is_deterministic(tmp_path):
    a = _gen(tmp_path, "a.txt", "--family", "os", "--seed", "5", "--n", "20", "--k", "3")
    b = _gen(tmp_path, "b.txt", "--family", "os", "--seed", "5", "--n", "20", "--k", "3")
    assert a.read_text() == b.read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "--family", "digraph", "--n", "5", "--k", "2", "--out", "x"],  # no seed
        ["gen", "--family", "digraph", "--seed", "1", "--k", "2", "--out", "x"],  # no n
        ["gen", "--family", "lb-grid", "--seed", "1", "--k", "10", "--out", "x"],  # bad k
        ["sparsify", "--mode", "reach", "--in", "/nonexistent/file", "--out", "x"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_two(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 2


def test_malformed_graph_exits_two(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("graph directed none\nvertices 2\nterminals 0\ne 0 9\n")
    assert run(["stats", "--in", str(bad)]) == 2


def test_reach_chain(tmp_path):
    g = _gen(tmp_path, "g.txt", "--family", "dag", "--seed", "2", "--n", "40", "--k", "5")
    h = tmp_path / "h.txt"
    assert run(["sparsify", "--mode", "reach", "--in", str(g), "--out", str(h)]) == 0
    trace = Path(str(h) + ".trace")
    stats = json.loads(Path(str(h) + ".stats.json").read_text())
    assert trace.exists() and stats["output"]["k"] == 5
    assert run(["verify", "--mode", "reach", "--in", str(g), "--sparsifier", str(h), "--trace", str(trace)]) == 0
    assert run(["replay", "--mode", "reach", "--in", str(g), "--trace", str(trace), "--sparsifier", str(h)]) == 0


def test_lower_bound_chain(tmp_path):
    g = _gen(tmp_path, "lb.txt", "--family", "lb-grid", "--seed", "0", "--k", "16")
    h = tmp_path / "h.txt"
    assert run(["sparsify", "--mode", "reach-planar", "--in", str(g), "--out", str(h)]) == 0
    report = tmp_path / "report.json"
    argv = ["verify", "--mode", "reach", "--in", str(g), "--sparsifier", str(h), "--trace", str(h) + ".trace"]
    assert run(argv + ["--report", str(report)]) == 0
    stats = json.loads(Path(str(h) + ".stats.json").read_text())
    assert stats["output"]["nonterminals"] >= (16 // 4 - 1) ** 2
    assert json.loads(report.read_text())["ok"] is True


@pytest.mark.parametrize("mode", ["cut", "distance", "flow"])
def test_os_chain(tmp_path, mode):
    g = _gen(tmp_path, "os.txt", "--family", "os", "--seed", "7", "--n", "16", "--k", "3", "--mode", mode)
    h = tmp_path / "h.txt"
    assert run(["sparsify", "--mode", mode, "--in", str(g), "--out", str(h)]) == 0
    log = Path(str(h) + ".log.jsonl")
    assert log.exists()
    assert run(["verify", "--mode", mode, "--in", str(g), "--sparsifier", str(h)]) == 0
    assert run(["replay", "--mode", mode, "--in", str(g), "--trace", str(log), "--sparsifier", str(h)]) == 0


def test_corrupted_cut_sparsifier_exits_one(tmp_path, capsys):
    g = _gen(tmp_path, "os.txt", "--family", "os", "--seed", "4", "--n", "16", "--k", "3")
    h = tmp_path / "h.txt"
    assert run(["sparsify", "--mode", "cut", "--in", str(g), "--out", str(h)]) == 0
    sp = parse_graph(h.read_text()).thaw()
    t = min(sp.terminals)
    for eid in list(sp.incident(t)):
        sp.remove_edge(eid)
    h.write_text(serialize_graph(sp.freeze()))
    capsys.readouterr()
    assert run(["verify", "--mode", "cut", "--in", str(g), "--sparsifier", str(h)]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is False and "side" in report["mismatches"][0]


def test_tampered_trace_fails_replay(tmp_path):
    g = _gen(tmp_path, "g.txt", "--family", "dag", "--seed", "8", "--n", "30", "--k", "4")
    h = tmp_path / "h.txt"
    assert run(["sparsify", "--mode", "reach", "--in", str(g), "--out", str(h)]) == 0
    trace = Path(str(h) + ".trace")
    lines = trace.read_text().splitlines()
    trace.write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    assert run(["replay", "--mode", "reach", "--in", str(g), "--trace", str(trace), "--sparsifier", str(h)]) == 1


def test_size_cap_aborts(tmp_path):
    g = _gen(tmp_path, "g.txt", "--family", "digraph", "--seed", "1", "--n", "30", "--k", "3")
    assert run(["sparsify", "--mode", "reach", "--in", str(g), "--out", str(tmp_path / "h"), "--cap", "10"]) == 2


def test_stats(tmp_path, capsys):
    g = _gen(tmp_path, "g.txt", "--family", "incompressibility", "--seed", "0", "--k", "9")
    capsys.readouterr()
    assert run(["stats", "--in", str(g)]) == 0
    assert json.loads(capsys.readouterr().out)["k"] == 9
