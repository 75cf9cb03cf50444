"""Batch command-line front end: ``vsparse gen|sparsify|verify|replay|stats``.

Exit codes: 0 on success, 1 on a verification mismatch (a JSON report is
printed), 2 on a usage or input error.
"""

from __future__ import annotations

import json
import logging
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import click

from .graph_core import (
    GraphError,
    MinorTrace,
    TerminalGraph,
    check_minor_witness,
    graph_stats,
    parse_graph,
    replay_trace,
    serialize_graph,
)
from .instances import (
    gen_incompressibility_family,
    gen_lb_grid,
    gen_os_instance,
    gen_random_digraph,
)
from .oracles import equivalence_report, random_demand, sparsest_cut
from .os_pipeline import PipelineLog, build_sparsifier_os, replay_pipeline, same_weighted_graph
from .planar_reach import sparsify_planar_reach
from .reach_minor import count_branching_events, minor_sparsify
from .wye_delta import RuleError

log = logging.getLogger("vsparse")

FAMILIES = ("digraph", "dag", "planar-digraph", "os", "lb-grid", "incompressibility")
MODES = ("reach", "reach-planar", "cut", "distance", "flow")
OS_MODES = ("cut", "distance", "flow")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    """Bad input file, parameter or size cap; maps to exit code 2."""


class Mismatch(Exception):
    """Verification failed; carries the JSON report."""

    def __init__(self, report: Dict[str, object]) -> None:
        super().__init__("verification mismatch")
        self.report = report


# ---------------------------------------------------------------------------
# helpers


def _read_graph(path: str, cap: Optional[int] = None) -> TerminalGraph:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        g = parse_graph(text)
    except GraphError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if cap is not None and g.n > cap:
        raise InputError(f"{path}: {g.n} vertices exceed the size cap {cap}")
    return g


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _sidecar(out: str, suffix: str) -> Path:
    return Path(out + suffix)


def _dump(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=str) + "\n"


def _emit(report: Dict[str, object], path: Optional[str]) -> None:
    text = _dump(report)
    if path:
        _write(Path(path), text)
    click.echo(text, nl=False)


def _need(value: Optional[int], name: str, family: str) -> int:
    if value is None:
        raise InputError(f"--{name} is required for family {family}")
    return value


# ---------------------------------------------------------------------------
# command group


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    """Exact vertex sparsifiers: reachability minors, cut/distance/flow sparsifiers."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--seed", type=int, required=True, help="Mandatory: generators use no hidden entropy.")
@click.option("--n", "n", type=int, help="Vertex count.")
@click.option("--k", "k", type=int, help="Terminal count.")
@click.option("--m", "m", type=int, help="Edge count (digraph families; default 2n).")
@click.option("--t", "t", type=int, default=3, show_default=True, help="Cycle bound (incompressibility).")
@click.option("--mode", type=click.Choice(OS_MODES), default="cut", show_default=True, help="Weight role (os family).")
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
def gen(family: str, seed: int, n: Optional[int], k: Optional[int], m: Optional[int], t: int, mode: str, out: str) -> None:
    """Generate one instance plus a JSON manifest {family, params, seed, k, n, m}."""
    params: Dict[str, object] = {}
    if family in ("digraph", "dag", "planar-digraph"):
        n_, k_ = _need(n, "n", family), _need(k, "k", family)
        m_ = 2 * n_ if m is None else m
        params = {"n": n_, "k": k_, "m": m_}
        g = gen_random_digraph(n_, m_, k_, acyclic=family == "dag", planar=family == "planar-digraph", seed=seed)
    elif family == "os":
        n_, k_ = _need(n, "n", family), _need(k, "k", family)
        params = {"n": n_, "k": k_, "mode": mode}
        g = gen_os_instance(n_, k_, mode=mode, seed=seed)
    elif family == "lb-grid":
        k_ = _need(k, "k", family)
        params = {"k": k_}
        g = gen_lb_grid(k_)
    else:
        k_ = _need(k, "k", family)
        full, s_prime = gen_incompressibility_family(k_, t, seed=seed)
        rng = random.Random(seed)
        R = sorted(i for i in s_prime if rng.random() < 0.5)
        g, _ = gen_incompressibility_family(k_, t, R=R, subset=s_prime)
        params = {"k": k_, "t": t, "s_prime": s_prime, "R": R}
    _write(Path(out), serialize_graph(g))
    manifest = {"family": family, "params": params, "seed": seed, "k": g.k, "n": g.n, "m": g.m}
    _write(_sidecar(out, ".manifest.json"), _dump(manifest))
    click.echo(_dump(manifest), nl=False)


@cli.command()
@click.option("--mode", type=click.Choice(MODES), required=True)
@click.option("--in", "inp", type=click.Path(dir_okay=False), required=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
@click.option("--cap", type=int, help="Abort when the input has more vertices.")
def sparsify(mode: str, inp: str, out: str, cap: Optional[int]) -> None:
    """Sparsify one graph; writes OUT, a replayable trace/log and OUT.stats.json."""
    g = _read_graph(inp, cap)
    stats: Dict[str, object] = {"mode": mode, "input": graph_stats(g)}
    try:
        if mode in ("reach", "reach-planar"):
            if not g.directed:
                raise InputError("reachability modes need a directed graph")
            if mode == "reach":
                h, trace = minor_sparsify(g)
            else:
                h, trace, report = sparsify_planar_reach(g)
                stats["planar"] = report.to_dict()
            _write(_sidecar(out, ".trace"), trace.to_text())
            stats["trace"] = str(_sidecar(out, ".trace"))
            stats["branching_events"] = count_branching_events(h)
        else:
            h, plog = build_sparsifier_os(g, mode)
            _write(_sidecar(out, ".log.jsonl"), plog.to_jsonl())
            stats["log"] = str(_sidecar(out, ".log.jsonl"))
            stats["steps"] = len(plog.steps)
            stats["scaling"] = str(plog.scaling)
            stats["size_bound"] = (g.k + 4) * (g.k + 5) // 2
    except GraphError as exc:
        raise InputError(str(exc)) from exc
    stats["output"] = graph_stats(h)
    _write(Path(out), serialize_graph(h))
    _write(_sidecar(out, ".stats.json"), _dump(stats))
    click.echo(_dump(stats), nl=False)


def _phi_pair(args: Tuple[TerminalGraph, TerminalGraph, Dict[Tuple[int, int], Fraction]]) -> Tuple[Fraction, Fraction]:
    g, h, d = args
    return sparsest_cut(g, d)[0], sparsest_cut(h, d)[0]


def _flow_report(g: TerminalGraph, h: TerminalGraph, seed: int, n_demands: int, jobs: int) -> Dict[str, object]:
    rng = random.Random(seed)
    demands = [random_demand(g.terminal_list(), rng) for _ in range(n_demands)]
    tasks = [(g, h, d) for d in demands]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(_phi_pair, tasks))
    else:
        values = [_phi_pair(task) for task in tasks]
    mismatches = [
        {"demand": i, "input": str(a), "output": str(b)} for i, (a, b) in enumerate(values) if a != b
    ]
    return {"mode": "flow", "ok": not mismatches, "checked": len(demands), "mismatches": mismatches}


@cli.command()
@click.option("--mode", type=click.Choice(MODES), required=True)
@click.option("--in", "inp", type=click.Path(dir_okay=False), required=True, help="Original graph.")
@click.option("--sparsifier", "sp", type=click.Path(dir_okay=False), required=True, help="Candidate sparsifier.")
@click.option("--trace", type=click.Path(dir_okay=False), help="Minor trace to check as a witness (reach modes).")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the demand sample (flow).")
@click.option("--demands", type=int, default=5, show_default=True, help="Demand functions sampled (flow).")
@click.option("--cap", type=int, default=12, show_default=True, help="Largest terminal count for cut tables.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes for flow demands.")
@click.option("--report", type=click.Path(dir_okay=False), help="Also write the JSON report here.")
def verify(mode: str, inp: str, sp: str, trace: Optional[str], seed: int, demands: int, cap: int, jobs: int, report: Optional[str]) -> None:
    """Compare a sparsifier with its input using the brute-force oracles."""
    g, h = _read_graph(inp), _read_graph(sp)
    try:
        if g.terminals != h.terminals:
            raise InputError("terminal labels differ between the two graphs")
        if len(g.terminals) > cap and mode == "cut":
            raise InputError(f"{g.k} terminals exceed the cut-table cap {cap}")
        if mode == "flow":
            out = _flow_report(g, h, seed, demands, jobs)
        else:
            out = json.loads(equivalence_report(g, h, mode, cap=cap).to_json())
    except GraphError as exc:
        raise InputError(str(exc)) from exc
    if trace:
        try:
            tr = MinorTrace.from_text(Path(trace).read_text())
        except (OSError, ValueError, GraphError) as exc:
            raise InputError(f"cannot read trace {trace}: {exc}") from exc
        witness = check_minor_witness(g, h, tr)
        out["minor_witness"] = {"ok": witness.ok, "problems": witness.problems}
        out["ok"] = bool(out["ok"]) and witness.ok
    _emit(out, report)
    if not out["ok"]:
        raise Mismatch(out)


@cli.command()
@click.option("--mode", type=click.Choice(MODES), required=True)
@click.option("--in", "inp", type=click.Path(dir_okay=False), required=True, help="Original graph.")
@click.option("--trace", type=click.Path(dir_okay=False), required=True, help="Minor trace or pipeline log.")
@click.option("--sparsifier", "sp", type=click.Path(dir_okay=False), help="Expected result to compare against.")
@click.option("--out", "out", type=click.Path(dir_okay=False), help="Write the replayed graph here.")
def replay(mode: str, inp: str, trace: str, sp: Optional[str], out: Optional[str]) -> None:
    """Re-apply a trace (reach modes) or a pipeline log (cut/distance/flow)."""
    g = _read_graph(inp)
    try:
        text = Path(trace).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {trace}: {exc.strerror or exc}") from exc
    report: Dict[str, object] = {"mode": mode}
    try:
        if mode in ("reach", "reach-planar"):
            tr = MinorTrace.from_text(text)
            r, _ = replay_trace(g, tr)
            report["ops"] = len(tr)
        else:
            steps = PipelineLog.steps_from_jsonl(text)
            r = replay_pipeline(g, steps, mode, cleanup=PipelineLog.steps_from_jsonl(text, "cleanup"))
            report["steps"] = len(steps)
        report["ok"] = True
    except (RuleError, GraphError, ValueError) as exc:
        report.update(ok=False, error=str(exc))
        _emit(report, None)
        raise Mismatch(report)
    report["result"] = graph_stats(r)
    if out:
        _write(Path(out), serialize_graph(r))
    if sp:
        h = _read_graph(sp)
        if mode in ("reach", "reach-planar"):
            same = r.vertices == h.vertices and r.terminals == h.terminals and r.edge_list() == h.edge_list()
        else:
            same = same_weighted_graph(r, h)
        report["matches_sparsifier"] = same
        report["ok"] = same
    _emit(report, None)
    if not report["ok"]:
        raise Mismatch(report)


@cli.command()
@click.option("--in", "inp", type=click.Path(dir_okay=False), required=True)
def stats(inp: str) -> None:
    """Print the canonical stats object of a graph file."""
    g = _read_graph(inp)
    rec = graph_stats(g)
    if g.directed:
        rec["branching_events"] = count_branching_events(g)
    click.echo(json.dumps(rec, sort_keys=True))


# ---------------------------------------------------------------------------
# entry point


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI on ``argv`` and return the exit code."""
    args: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        cli.main(args=args, prog_name="vsparse", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except Mismatch:
        return EXIT_MISMATCH
    except GraphError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


def main() -> None:
    sys.exit(run())
