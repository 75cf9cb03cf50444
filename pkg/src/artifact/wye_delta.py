"""Exact local rewrites on undirected weighted terminal graphs.

Five primitive rules (degree-one, series, parallel, Wye-Delta, Delta-Wye)
plus edge subdivision, each in a cut flavour (weights are capacities) and a
distance flavour (weights are lengths), and the two composite rules built
from them (edge deletion and edge replacement).  Every rule keeps all
terminal min-cut values, respectively all terminal distances, unchanged.

Sites are addressed by explicit vertex ids, and every application produces
a :class:`ReductionStep` that can be serialized, parsed and replayed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .graph_core import GraphError, TerminalGraph, format_weight, parse_weight

__all__ = [
    "COMPOSITES",
    "PRIMITIVES",
    "RULES",
    "Normalization",
    "ReductionStep",
    "Rewriter",
    "Rule",
    "RuleError",
    "apply_composite",
    "apply_rule",
    "greedy_reduce",
    "normalize_site",
    "parse_steps",
    "replay_steps",
    "rule_mode",
    "steps_to_text",
]

log = logging.getLogger(__name__)

PRIMITIVES = ("degree-one", "series", "parallel", "wye-delta", "delta-wye", "edge-subdivision")
COMPOSITES = ("edge-deletion", "edge-replacement")
RULES = PRIMITIVES[:5] + COMPOSITES + PRIMITIVES[5:]
RULE_MODES = ("cut", "distance")
_GRAPH_MODE = {"cut": "cut", "length": "distance"}


class RuleError(GraphError):
    """The site does not have the shape the rule requires."""


@dataclass(frozen=True)
class Rule:
    identifier: str
    mode: str

    def __post_init__(self) -> None:
        if self.identifier not in RULES:
            raise RuleError(f"unknown rule {self.identifier!r}")
        if self.mode not in RULE_MODES:
            raise RuleError(f"unknown rule mode {self.mode!r}")

    @property
    def composite(self) -> bool:
        return self.identifier in COMPOSITES


def rule_mode(g: TerminalGraph) -> str:
    """Rule flavour matching the graph's weight role."""
    try:
        return _GRAPH_MODE[g.mode]
    except KeyError:
        raise RuleError(f"graph mode {g.mode!r} carries no capacities or lengths") from None


@dataclass(frozen=True)
class Normalization:
    """A weight lowered before a Wye-Delta (cut) or Delta-Wye (distance) step."""

    u: int
    v: int
    old: Fraction
    new: Fraction

    def to_text(self) -> str:
        return f"~{self.u}-{self.v}:{format_weight(self.old)}>{format_weight(self.new)}"


@dataclass
class ReductionStep:
    """One primitive rule application.

    ``site`` lists the matched vertices; ``rewrites`` the edges the step
    added (endpoints, weight); ``new_vertex`` the vertex it created, if any.
    ``part_of`` names the composite rule the step belongs to.
    """

    rule: str
    mode: str
    site: Tuple[int, ...]
    rewrites: List[Tuple[int, int, Fraction]] = field(default_factory=list)
    normalizations: List[Normalization] = field(default_factory=list)
    new_vertex: Optional[int] = None
    part_of: Optional[str] = None

    def to_text(self) -> str:
        parts = ["step", self.rule, self.mode, *map(str, self.site)]
        if self.new_vertex is not None:
            parts.append(f"new={self.new_vertex}")
        if self.part_of is not None:
            parts.append(f"in={self.part_of}")
        parts.extend(n.to_text() for n in self.normalizations)
        parts.extend(f"+{u}-{v}:{format_weight(w)}" for u, v, w in self.rewrites)
        return " ".join(parts)

    @classmethod
    def from_text(cls, line: str) -> "ReductionStep":
        tok = line.split()
        if len(tok) < 3 or tok[0] != "step":
            raise RuleError(f"not a step line: {line!r}")
        step = cls(rule=tok[1], mode=tok[2], site=())
        Rule(step.rule, step.mode)
        site: List[int] = []
        for t in tok[3:]:
            if t.startswith("new="):
                step.new_vertex = int(t[4:])
            elif t.startswith("in="):
                step.part_of = t[3:]
            elif t[0] in "+~":
                ends, _, rest = t[1:].partition(":")
                a, _, b = ends.partition("-")
                if t[0] == "+":
                    step.rewrites.append((int(a), int(b), parse_weight(rest)))
                else:
                    old, _, new = rest.partition(">")
                    step.normalizations.append(Normalization(int(a), int(b), parse_weight(old), parse_weight(new)))
            else:
                site.append(int(t))
        step.site = tuple(site)
        return step


def steps_to_text(steps: Iterable[ReductionStep]) -> str:
    return "".join(s.to_text() + "\n" for s in steps)


def parse_steps(text: str) -> List[ReductionStep]:
    return [ReductionStep.from_text(ln) for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


# ---------------------------------------------------------------------------
# the rewriting engine


class Rewriter:
    """Applies rules in place on a mutable copy and records every step."""

    def __init__(self, g: TerminalGraph, mode: Optional[str] = None) -> None:
        if g.directed:
            raise RuleError("rewrite rules need an undirected graph")
        self.g = g.thaw()
        self.mode = mode or rule_mode(g)
        if self.mode not in RULE_MODES:
            raise RuleError(f"unknown rule mode {self.mode!r}")
        self.steps: List[ReductionStep] = []
        self._part_of: Optional[str] = None

    # -- helpers ------------------------------------------------------------
    def finish(self) -> Tuple[TerminalGraph, List[ReductionStep]]:
        return self.g.freeze(), self.steps

    def _record(self, rule: str, site: Sequence[int], **kw) -> ReductionStep:
        step = ReductionStep(rule=rule, mode=self.mode, site=tuple(site), part_of=self._part_of, **kw)
        self.steps.append(step)
        return step

    def _nonterminal(self, x: int, rule: str) -> None:
        if not self.g.has_vertex(x):
            raise RuleError(f"{rule}: vertex {x} does not exist")
        if self.g.is_terminal(x):
            raise RuleError(f"{rule}: vertex {x} is a terminal")

    def _star(self, x: int, degree: int, rule: str) -> List[Tuple[int, int, Fraction]]:
        """(eid, neighbour, weight) for a vertex of the given degree with distinct neighbours."""
        self._nonterminal(x, rule)
        g = self.g
        eids = g.incident(x)
        if len(eids) != degree:
            raise RuleError(f"{rule}: vertex {x} has degree {len(eids)}, expected {degree}")
        out = sorted((g.edge(e).other(x), e, g.edge(e).weight) for e in eids)
        if len({nb for nb, _, _ in out}) != degree:
            raise RuleError(f"{rule}: vertex {x} has parallel edges")
        return [(e, nb, w) for nb, e, w in out]

    def _single(self, u: int, v: int, rule: str) -> int:
        ids = self.g.edges_between(u, v)
        if len(ids) != 1:
            raise RuleError(f"{rule}: expected one edge between {u} and {v}, found {len(ids)}")
        return ids[0]

    def _add(self, u: int, v: int, w: Fraction, out: List[Tuple[int, int, Fraction]]) -> None:
        self.g.add_edge(u, v, w)
        out.append((min(u, v), max(u, v), w))

    # -- rules 1-3 ----------------------------------------------------------
    def degree_one(self, x: int) -> ReductionStep:
        """Delete a non-terminal of degree at most one (isolated vertices included)."""
        self._nonterminal(x, "degree-one")
        if self.g.degree(x) > 1:
            raise RuleError(f"degree-one: vertex {x} has degree {self.g.degree(x)}")
        self.g.remove_vertex(x)
        return self._record("degree-one", (x,))

    def series(self, y: int) -> ReductionStep:
        (e1, x, a), (e2, z, b) = self._star(y, 2, "series")
        w = min(a, b) if self.mode == "cut" else a + b
        self.g.remove_vertex(y)
        out: List[Tuple[int, int, Fraction]] = []
        self._add(x, z, w, out)
        return self._record("series", (y,), rewrites=out)

    def parallel(self, u: int, v: int) -> ReductionStep:
        ids = self.g.edges_between(u, v)
        if len(ids) < 2:
            raise RuleError(f"parallel: {len(ids)} edge(s) between {u} and {v}")
        ws = [self.g.edge(e).weight for e in ids]
        w = sum(ws, Fraction(0)) if self.mode == "cut" else min(ws)
        for e in ids[1:]:
            self.g.remove_edge(e)
        self.g.set_weight(ids[0], w)
        return self._record("parallel", (min(u, v), max(u, v)), rewrites=[(min(u, v), max(u, v), w)])

    # -- rules 4-5 ----------------------------------------------------------
    def normalize_wye(self, x: int) -> List[Normalization]:
        """Cut flavour: lower c(w,x) to c(u,x)+c(v,x) wherever it exceeds it."""
        star = self._star(x, 3, "wye-delta")
        out: List[Normalization] = []
        for i in range(3):
            e, nb, w = star[i]
            rest = sum((star[j][2] for j in range(3) if j != i), Fraction(0))
            if w > rest:
                self.g.set_weight(e, rest)
                star[i] = (e, nb, rest)
                out.append(Normalization(min(x, nb), max(x, nb), w, rest))
        return out

    def normalize_triangle(self, x: int, y: int, z: int) -> List[Normalization]:
        """Distance flavour: lower any triangle edge longer than the other two together."""
        tri = [(x, y, z), (x, z, y), (y, z, x)]
        out: List[Normalization] = []
        for a, b, c in tri:
            e = self._single(a, b, "delta-wye")
            rest = self.g.weight(a, c) + self.g.weight(b, c)
            w = self.g.edge(e).weight
            if w > rest:
                self.g.set_weight(e, rest)
                out.append(Normalization(min(a, b), max(a, b), w, rest))
        return out

    def wye_delta(self, x: int) -> ReductionStep:
        norm = self.normalize_wye(x) if self.mode == "cut" else []
        (_, u, cu), (_, v, cv), (_, w, cw) = self._star(x, 3, "wye-delta")
        if self.mode == "cut":
            new = [(u, v, (cu + cv - cw) / 2), (v, w, (cv + cw - cu) / 2), (u, w, (cu + cw - cv) / 2)]
        else:
            new = [(u, v, cu + cv), (v, w, cv + cw), (u, w, cu + cw)]
        self.g.remove_vertex(x)
        out: List[Tuple[int, int, Fraction]] = []
        for a, b, c in new:
            self._add(a, b, c, out)
        return self._record("wye-delta", (x,), rewrites=out, normalizations=norm)

    def delta_wye(self, x: int, y: int, z: int) -> ReductionStep:
        if len({x, y, z}) != 3:
            raise RuleError("delta-wye: triangle needs three distinct vertices")
        for a in (x, y, z):
            if not self.g.has_vertex(a):
                raise RuleError(f"delta-wye: vertex {a} does not exist")
        exy, exz, eyz = self._single(x, y, "delta-wye"), self._single(x, z, "delta-wye"), self._single(y, z, "delta-wye")
        norm = self.normalize_triangle(x, y, z) if self.mode == "distance" else []
        cxy, cxz, cyz = (self.g.edge(e).weight for e in (exy, exz, eyz))
        if self.mode == "cut":
            wx, wy, wz = cxy + cxz, cxy + cyz, cxz + cyz
        else:
            # the y-leg uses l(x,y): the only length that makes the star metric match the triangle
            wx, wy, wz = (cxy + cxz - cyz) / 2, (cxy + cyz - cxz) / 2, (cxz + cyz - cxy) / 2
        for e in (exy, exz, eyz):
            self.g.remove_edge(e)
        w = self.g.add_vertex()
        out: List[Tuple[int, int, Fraction]] = []
        for a, c in ((x, wx), (y, wy), (z, wz)):
            self._add(w, a, c, out)
        return self._record("delta-wye", (x, y, z), rewrites=out, normalizations=norm, new_vertex=w)

    def subdivide(self, u: int, v: int) -> ReductionStep:
        e = self._single(u, v, "edge-subdivision")
        c = self.g.remove_edge(e).weight
        half = c if self.mode == "cut" else c / 2
        w = self.g.add_vertex()
        out: List[Tuple[int, int, Fraction]] = []
        self._add(u, w, half, out)
        self._add(w, v, half, out)
        return self._record("edge-subdivision", (min(u, v), max(u, v)), rewrites=out, new_vertex=w)

    # -- composites -----------------------------------------------------------
    def parallel_pass(self, vertices: Iterable[int]) -> List[ReductionStep]:
        out = []
        for a in sorted(set(vertices)):
            if not self.g.has_vertex(a):
                continue
            seen: Set[int] = set()
            multi: Set[int] = set()
            for e in self.g.incident(a):
                b = self.g.edge(e).other(a)
                (multi if b in seen else seen).add(b)
            for b in sorted(multi):
                out.append(self.parallel(a, b))
        return out

    def edge_deletion(self, x: int, u: int, v: int) -> List[ReductionStep]:
        """Remove edge (u,v) using the non-terminal x adjacent to both.

        x normally has degree three (Delta-Wye then series).  A degree-two x
        is accepted as well: after the Delta-Wye it is a leaf and is removed
        by the degree-one rule.
        """
        self._nonterminal(x, "edge-deletion")
        deg = self.g.degree(x)
        if deg not in (2, 3):
            raise RuleError(f"edge-deletion: vertex {x} has degree {deg}")
        nbs = {nb for _, nb, _ in self._star(x, deg, "edge-deletion")}
        if u not in nbs or v not in nbs or u == v:
            raise RuleError(f"edge-deletion: {u} and {v} must both be neighbours of {x}")
        self._single(u, v, "edge-deletion")
        before = len(self.steps)
        self._part_of = "edge-deletion"
        try:
            dw = self.delta_wye(x, u, v)
            if deg == 3:
                self.series(x)
            else:
                self.degree_one(x)
            assert dw.new_vertex is not None
            self.parallel_pass([dw.new_vertex])
        finally:
            self._part_of = None
        return self.steps[before:]

    def edge_replacement(self, y: int, x: int, u: int) -> List[ReductionStep]:
        """Replace edge (x,u) by (v,w), where v,w are the other neighbours of the degree-4 non-terminal y."""
        star = self._star(y, 4, "edge-replacement")
        nbs = [nb for _, nb, _ in star]
        if x not in nbs or u not in nbs or x == u:
            raise RuleError(f"edge-replacement: {x} and {u} must both be neighbours of {y}")
        self._single(x, u, "edge-replacement")
        v, w = [nb for nb in nbs if nb not in (x, u)]
        before = len(self.steps)
        self._part_of = "edge-replacement"
        try:
            dw = self.delta_wye(y, x, u)
            self.wye_delta(y)
            assert dw.new_vertex is not None
            self.parallel_pass([dw.new_vertex, v, w])
        finally:
            self._part_of = None
        return self.steps[before:]

    # -- dispatch -------------------------------------------------------------
    def apply(self, rule: str, site: Sequence[int]) -> List[ReductionStep]:
        site = tuple(site)
        arity = {
            "degree-one": 1,
            "series": 1,
            "parallel": 2,
            "wye-delta": 1,
            "delta-wye": 3,
            "edge-subdivision": 2,
            "edge-deletion": 3,
            "edge-replacement": 3,
        }
        if rule not in arity:
            raise RuleError(f"unknown rule {rule!r}")
        if len(site) != arity[rule]:
            raise RuleError(f"{rule}: site needs {arity[rule]} ids, got {len(site)}")
        fn = {
            "degree-one": self.degree_one,
            "series": self.series,
            "parallel": self.parallel,
            "wye-delta": self.wye_delta,
            "delta-wye": self.delta_wye,
            "edge-subdivision": self.subdivide,
            "edge-deletion": self.edge_deletion,
            "edge-replacement": self.edge_replacement,
        }[rule]
        res = fn(*site)
        return res if isinstance(res, list) else [res]


# ---------------------------------------------------------------------------
# functional wrappers


def normalize_site(g: TerminalGraph, site: Sequence[int], mode: Optional[str] = None) -> Tuple[TerminalGraph, List[Normalization]]:
    """Repair the Wye-Delta (cut) or Delta-Wye (distance) precondition at ``site``.

    Cut flavour: ``site`` is the degree-3 non-terminal.  Distance flavour:
    ``site`` is the triangle.
    """
    rw = Rewriter(g, mode)
    if rw.mode == "cut":
        if len(site) != 1:
            raise RuleError("cut normalization expects the degree-3 vertex")
        norm = rw.normalize_wye(site[0])
    else:
        if len(site) != 3:
            raise RuleError("distance normalization expects a triangle")
        for a in site:
            if not rw.g.has_vertex(a):
                raise RuleError(f"vertex {a} does not exist")
        norm = rw.normalize_triangle(*site)
    return rw.g.freeze(), norm


def apply_rule(g: TerminalGraph, rule: str, site: Sequence[int], mode: Optional[str] = None) -> Tuple[TerminalGraph, ReductionStep]:
    """Apply one primitive rule; the input graph is left untouched."""
    if rule not in PRIMITIVES:
        raise RuleError(f"{rule!r} is not a primitive rule")
    rw = Rewriter(g, mode)
    (step,) = rw.apply(rule, site)
    return rw.g.freeze(), step


def apply_composite(g: TerminalGraph, composite: str, site: Sequence[int], mode: Optional[str] = None) -> Tuple[TerminalGraph, List[ReductionStep]]:
    """Apply edge deletion, edge replacement or edge subdivision."""
    if composite not in COMPOSITES + ("edge-subdivision",):
        raise RuleError(f"{composite!r} is not a composite rule")
    rw = Rewriter(g, mode)
    steps = rw.apply(composite, site)
    return rw.g.freeze(), steps


def replay_steps(g: TerminalGraph, steps: Iterable[ReductionStep]) -> TerminalGraph:
    """Re-apply a step log and check every step reproduces its recorded effect."""
    rw: Optional[Rewriter] = None
    for i, step in enumerate(steps):
        if rw is None:
            rw = Rewriter(g, step.mode)
        if step.mode != rw.mode:
            raise RuleError(f"step {i}: mode {step.mode} differs from {rw.mode}")
        if step.rule not in PRIMITIVES:
            raise RuleError(f"step {i}: logs hold primitive rules only, got {step.rule}")
        (got,) = rw.apply(step.rule, step.site)
        if (got.rewrites, got.new_vertex, got.normalizations) != (step.rewrites, step.new_vertex, step.normalizations):
            raise RuleError(f"step {i} ({step.rule} at {step.site}) does not replay: {got.to_text()} != {step.to_text()}")
    return g if rw is None else rw.g.freeze()


# ---------------------------------------------------------------------------
# greedy driver


def _first_site(g: TerminalGraph, rule: str) -> Optional[Tuple[int, ...]]:
    for x in g.vertices:
        if rule == "parallel":
            for y in g.neighbors(x):
                if y > x and len(g.edges_between(x, y)) > 1:
                    return (x, y)
            continue
        if g.is_terminal(x):
            continue
        d = g.degree(x)
        if rule == "degree-one" and d <= 1:
            return (x,)
        if rule in ("series", "wye-delta") and d == (2 if rule == "series" else 3) and len(g.neighbors(x)) == d:
            return (x,)
        if rule == "edge-deletion" and d == 3 and len(g.neighbors(x)) == 3:
            nbs = g.neighbors(x)
            for i in range(3):
                for j in range(i + 1, 3):
                    if len(g.edges_between(nbs[i], nbs[j])) == 1:
                        return (x, nbs[i], nbs[j])
    return None


def greedy_reduce(g: TerminalGraph, mode: Optional[str] = None, policy: str = "safe") -> Tuple[TerminalGraph, List[ReductionStep]]:
    """Apply the lowest-numbered applicable rule at the lowest-id site until none applies.

    ``policy="safe"`` uses rules 1-4; ``"with-deletion"`` also uses edge
    deletion (rule 6), tried after rule 4.  Delta-Wye and edge replacement
    are never fired on their own: every allowed move lowers
    (vertices, edges) lexicographically, so the loop terminates.
    """
    order = {"safe": ("degree-one", "series", "parallel", "wye-delta"), "with-deletion": ("degree-one", "series", "parallel", "wye-delta", "edge-deletion")}
    if policy not in order:
        raise RuleError(f"unknown policy {policy!r}")
    rw = Rewriter(g, mode)
    while True:
        for rule in order[policy]:
            site = _first_site(rw.g, rule)
            if site is not None:
                rw.apply(rule, site)
                break
        else:
            return rw.finish()
