"""Terminal graphs with exact rational weights, minor operations and serialization.

Every other module builds on :class:`TerminalGraph`.  Weights are
:class:`fractions.Fraction` values so that every exactness claim can be
checked with ``==``; the role of the weights (capacity, length or none) is
carried by the graph's ``mode``.

Graphs handed out by public operations are *frozen*: mutators raise
``FrozenGraphError``.  Algorithms obtain a private mutable copy with
:meth:`TerminalGraph.thaw`, work on it, and freeze the result.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

__all__ = [
    "MODES",
    "Edge",
    "FrozenGraphError",
    "GraphError",
    "GraphFormatError",
    "MinorOp",
    "MinorTrace",
    "MinorReport",
    "PairSet",
    "TerminalGraph",
    "apply_minor_op",
    "check_minor_witness",
    "format_weight",
    "graph_stats",
    "parse_graph",
    "parse_weight",
    "replay_trace",
    "serialize_graph",
    "trivial_pair_set",
    "validate_pair_set",
]

MODES = ("cut", "length", "none")

Coord = Tuple[int, int]
PairSet = FrozenSet[Tuple[int, int]]


class GraphError(ValueError):
    """Raised when an operation violates a graph invariant."""


class FrozenGraphError(GraphError):
    """Raised when mutating a frozen graph."""


class GraphFormatError(GraphError):
    """Parse error in a graph file; ``line`` is 1-based (0 when not line specific)."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
        self.reason = message


# ---------------------------------------------------------------------------
# weights

_WEIGHT_RE = re.compile(r"^\+?(\d+)(?:/(\d+))?$")


def parse_weight(token: str) -> Fraction:
    """Parse ``num/den`` or an integer into a non-negative Fraction."""
    m = _WEIGHT_RE.match(token.strip())
    if m is None:
        if token.strip().startswith("-"):
            raise ValueError("negative weight")
        raise ValueError(f"bad weight {token!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise ValueError("zero denominator")
    return Fraction(num, den)


def format_weight(w: Fraction) -> str:
    w = Fraction(w)
    if w.denominator == 1:
        return str(w.numerator)
    return f"{w.numerator}/{w.denominator}"


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    weight: Fraction = Fraction(1)

    def endpoints(self) -> Tuple[int, int]:
        return (self.tail, self.head)

    def other(self, v: int) -> int:
        if v == self.tail:
            return self.head
        if v == self.head:
            return self.tail
        raise GraphError(f"vertex {v} not on edge {self}")


class TerminalGraph:
    """A directed or undirected multigraph with a distinguished terminal set.

    Vertices carry stable integer ids that are never reused; edges carry
    stable integer edge ids.  Undirected edges are stored once with
    ``tail < head``.
    """

    __slots__ = (
        "directed",
        "mode",
        "_vertices",
        "_terminals",
        "_edges",
        "_out",
        "_in",
        "_next_vid",
        "_next_eid",
        "_frozen",
    )

    def __init__(self, directed: bool = True, mode: str = "none") -> None:
        if mode not in MODES:
            raise GraphError(f"unknown mode {mode!r}")
        self.directed = bool(directed)
        self.mode = mode
        self._vertices: Dict[int, Optional[Coord]] = {}
        self._terminals: Set[int] = set()
        self._edges: Dict[int, Edge] = {}
        self._out: Dict[int, Set[int]] = {}
        self._in: Dict[int, Set[int]] = {}
        self._next_vid = 0
        self._next_eid = 0
        self._frozen = False

    # -- construction helpers -------------------------------------------------
    @classmethod
    def build(
        cls,
        vertices: Iterable[int] | int,
        edges: Iterable[Tuple[int, int] | Tuple[int, int, object]],
        terminals: Iterable[int],
        *,
        directed: bool = True,
        mode: str = "none",
        coords: Optional[Mapping[int, Coord]] = None,
    ) -> "TerminalGraph":
        """Convenience constructor returning a frozen graph."""
        g = cls(directed=directed, mode=mode)
        vs = range(vertices) if isinstance(vertices, int) else vertices
        for v in vs:
            g.add_vertex(v, (coords or {}).get(v))
        for e in edges:
            if len(e) == 2:
                g.add_edge(e[0], e[1])
            else:
                g.add_edge(e[0], e[1], Fraction(e[2]))  # type: ignore[arg-type]
        for t in terminals:
            g.set_terminal(t)
        return g.freeze()

    def freeze(self) -> "TerminalGraph":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def thaw(self) -> "TerminalGraph":
        """Return a mutable deep copy."""
        h = TerminalGraph.__new__(TerminalGraph)
        h.directed = self.directed
        h.mode = self.mode
        h._vertices = dict(self._vertices)
        h._terminals = set(self._terminals)
        h._edges = dict(self._edges)
        h._out = {v: set(s) for v, s in self._out.items()}
        h._in = {v: set(s) for v, s in self._in.items()}
        h._next_vid = self._next_vid
        h._next_eid = self._next_eid
        h._frozen = False
        return h

    copy = thaw

    def _check_mutable(self) -> None:
        if self._frozen:
            raise FrozenGraphError("graph is frozen; call thaw() for a mutable copy")

    # -- queries ---------------------------------------------------------------
    @property
    def vertices(self) -> List[int]:
        return sorted(self._vertices)

    @property
    def terminals(self) -> FrozenSet[int]:
        return frozenset(self._terminals)

    def terminal_list(self) -> List[int]:
        return sorted(self._terminals)

    @property
    def n(self) -> int:
        return len(self._vertices)

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def k(self) -> int:
        return len(self._terminals)

    def nonterminals(self) -> List[int]:
        return sorted(v for v in self._vertices if v not in self._terminals)

    def has_vertex(self, v: int) -> bool:
        return v in self._vertices

    def has_edge_id(self, eid: int) -> bool:
        return eid in self._edges

    def is_terminal(self, v: int) -> bool:
        return v in self._terminals

    def coord(self, v: int) -> Optional[Coord]:
        return self._vertices[v]

    def coords(self) -> Dict[int, Coord]:
        return {v: c for v, c in self._vertices.items() if c is not None}

    def edge(self, eid: int) -> Edge:
        try:
            return self._edges[eid]
        except KeyError:
            raise GraphError(f"edge id {eid} does not exist") from None

    def edge_ids(self) -> List[int]:
        return sorted(self._edges)

    def edges(self) -> Iterator[Tuple[int, Edge]]:
        for eid in sorted(self._edges):
            yield eid, self._edges[eid]

    def edge_list(self) -> List[Tuple[int, int, Fraction]]:
        """Edges as sorted ``(tail, head, weight)`` triples (id free)."""
        return sorted((e.tail, e.head, e.weight) for e in self._edges.values())

    def _require(self, v: int) -> None:
        if v not in self._vertices:
            raise GraphError(f"vertex {v} does not exist")

    def out_edges(self, v: int) -> List[int]:
        """Edge ids leaving ``v`` (directed) or incident to ``v`` (undirected)."""
        self._require(v)
        if self.directed:
            return sorted(self._out[v])
        return sorted(self._out[v] | self._in[v])

    def in_edges(self, v: int) -> List[int]:
        self._require(v)
        if self.directed:
            return sorted(self._in[v])
        return sorted(self._out[v] | self._in[v])

    def incident(self, v: int) -> List[int]:
        self._require(v)
        return sorted(self._out[v] | self._in[v])

    def successors(self, v: int) -> List[int]:
        if self.directed:
            return sorted({self._edges[e].head for e in self._out[v]})
        return self.neighbors(v)

    def predecessors(self, v: int) -> List[int]:
        if self.directed:
            return sorted({self._edges[e].tail for e in self._in[v]})
        return self.neighbors(v)

    def neighbors(self, v: int) -> List[int]:
        self._require(v)
        edges = self._edges
        nbs = {edges[e].head for e in self._out[v]}
        nbs.update(edges[e].tail for e in self._in[v])
        return sorted(nbs)

    def degree(self, v: int) -> int:
        """Number of incident edge ids (parallel edges counted separately)."""
        self._require(v)
        return len(self._out[v]) + len(self._in[v])

    def in_degree(self, v: int) -> int:
        self._require(v)
        return len(self._in[v])

    def out_degree(self, v: int) -> int:
        self._require(v)
        return len(self._out[v])

    def edges_between(self, u: int, v: int) -> List[int]:
        """Edge ids joining u and v (u→v only, for directed graphs)."""
        self._require(u)
        self._require(v)
        edges = self._edges
        found = [e for e in self._out[u] if edges[e].head == v]
        if not self.directed:
            found.extend(e for e in self._in[u] if edges[e].tail == v)
        if len(found) > 1:
            found.sort()
        return found

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.edges_between(u, v))

    def weight(self, u: int, v: int) -> Fraction:
        ids = self.edges_between(u, v)
        if len(ids) != 1:
            raise GraphError(f"expected exactly one edge between {u} and {v}, found {len(ids)}")
        return self._edges[ids[0]].weight

    def has_parallel_edges(self) -> bool:
        seen: Set[Tuple[int, int]] = set()
        for e in self._edges.values():
            key = (e.tail, e.head)
            if key in seen:
                return True
            seen.add(key)
        return False

    def next_vertex_id(self) -> int:
        return self._next_vid

    # -- mutation ----------------------------------------------------------------
    def add_vertex(self, v: Optional[int] = None, coord: Optional[Coord] = None) -> int:
        self._check_mutable()
        if v is None:
            v = self._next_vid
        if v in self._vertices:
            raise GraphError(f"vertex {v} already exists")
        if v < 0:
            raise GraphError("vertex ids are non-negative")
        self._vertices[v] = coord
        self._out[v] = set()
        self._in[v] = set()
        self._next_vid = max(self._next_vid, v + 1)
        return v

    def set_terminal(self, v: int, flag: bool = True) -> None:
        self._check_mutable()
        self._require(v)
        if flag:
            self._terminals.add(v)
        else:
            self._terminals.discard(v)

    def set_coord(self, v: int, coord: Optional[Coord]) -> None:
        self._check_mutable()
        self._require(v)
        self._vertices[v] = coord

    def add_edge(self, u: int, v: int, weight: Fraction | int = 1, eid: Optional[int] = None) -> int:
        self._check_mutable()
        self._require(u)
        self._require(v)
        if u == v:
            raise GraphError(f"self-loop at {u}")
        w = weight if type(weight) is Fraction else Fraction(weight)
        if w < 0:
            raise GraphError("negative weight")
        if not self.directed and u > v:
            u, v = v, u
        if eid is None:
            eid = self._next_eid
        if eid in self._edges:
            raise GraphError(f"edge id {eid} already exists")
        self._edges[eid] = Edge(u, v, w)
        self._out[u].add(eid)
        self._in[v].add(eid)
        self._next_eid = max(self._next_eid, eid + 1)
        return eid

    def remove_edge(self, eid: int) -> Edge:
        self._check_mutable()
        e = self.edge(eid)
        del self._edges[eid]
        self._out[e.tail].discard(eid)
        self._in[e.head].discard(eid)
        return e

    def set_weight(self, eid: int, weight: Fraction | int) -> None:
        self._check_mutable()
        e = self.edge(eid)
        w = Fraction(weight)
        if w < 0:
            raise GraphError("negative weight")
        self._edges[eid] = Edge(e.tail, e.head, w)

    def remove_vertex(self, v: int) -> List[int]:
        """Delete ``v`` and its incident edges; returns removed edge ids."""
        self._check_mutable()
        self._require(v)
        removed = sorted(self._out[v] | self._in[v])
        for eid in removed:
            self.remove_edge(eid)
        del self._vertices[v]
        del self._out[v]
        del self._in[v]
        self._terminals.discard(v)
        return removed

    def contract_edge(self, eid: int, survivor: Optional[int] = None) -> Tuple[int, int]:
        """Contract edge ``eid``; returns ``(survivor, absorbed)``.

        The terminal endpoint survives; otherwise the lower id survives.  An
        explicit ``survivor`` overrides the rule as long as no terminal is
        absorbed (used when replaying traces recorded with extra terminals).
        Incident edges are re-targeted, resulting self-loops are dropped,
        parallel edges are kept (callers normalize them).
        """
        self._check_mutable()
        e = self.edge(eid)
        u, v = e.tail, e.head
        tu, tv = u in self._terminals, v in self._terminals
        if tu and tv:
            raise GraphError(f"contraction would merge terminals {u} and {v}")
        if survivor is not None:
            if survivor not in (u, v):
                raise GraphError(f"survivor {survivor} is not an endpoint of edge {eid}")
            keep, gone = survivor, (v if survivor == u else u)
            if gone in self._terminals:
                raise GraphError(f"contraction would absorb terminal {gone}")
        elif tu:
            keep, gone = u, v
        elif tv:
            keep, gone = v, u
        else:
            keep, gone = min(u, v), max(u, v)
        for fid in sorted(self._out[gone] | self._in[gone]):
            f = self._edges[fid]
            a = keep if f.tail == gone else f.tail
            b = keep if f.head == gone else f.head
            self.remove_edge(fid)
            if a == b:
                continue
            if not self.directed and a > b:
                a, b = b, a
            self._edges[fid] = Edge(a, b, f.weight)
            self._out[a].add(fid)
            self._in[b].add(fid)
        del self._vertices[gone]
        del self._out[gone]
        del self._in[gone]
        return keep, gone

    def restrict_terminals(self, keep: Iterable[int]) -> None:
        self._check_mutable()
        self._terminals &= set(keep)

    # -- misc ----------------------------------------------------------------------
    def subgraph(self, vs: Iterable[int]) -> "TerminalGraph":
        """Induced subgraph (ids, weights, coordinates and terminal flags kept)."""
        keep = set(vs)
        h = TerminalGraph(self.directed, self.mode)
        for v in sorted(keep):
            h.add_vertex(v, self._vertices[v])
            if v in self._terminals:
                h._terminals.add(v)
        for eid, e in self.edges():
            if e.tail in keep and e.head in keep:
                h.add_edge(e.tail, e.head, e.weight, eid=eid)
        h._next_vid = max(h._next_vid, self._next_vid)
        h._next_eid = max(h._next_eid, self._next_eid)
        return h.freeze()

    def undirected_adjacency(self) -> Dict[int, Set[int]]:
        adj: Dict[int, Set[int]] = {v: set() for v in self._vertices}
        for e in self._edges.values():
            adj[e.tail].add(e.head)
            adj[e.head].add(e.tail)
        return adj

    def successor_map(self) -> Dict[int, List[int]]:
        """Adjacency lists (sorted, deduplicated) following edge direction."""
        if not self.directed:
            return {v: sorted(s) for v, s in self.undirected_adjacency().items()}
        adj: Dict[int, Set[int]] = {v: set() for v in self._vertices}
        for e in self._edges.values():
            adj[e.tail].add(e.head)
        return {v: sorted(s) for v, s in adj.items()}

    def predecessor_map(self) -> Dict[int, List[int]]:
        if not self.directed:
            return self.successor_map()
        adj: Dict[int, Set[int]] = {v: set() for v in self._vertices}
        for e in self._edges.values():
            adj[e.head].add(e.tail)
        return {v: sorted(s) for v, s in adj.items()}

    def to_networkx(self):
        import networkx as nx

        G = nx.MultiDiGraph() if self.directed else nx.MultiGraph()
        for v in self.vertices:
            G.add_node(v, terminal=v in self._terminals)
        for eid, e in self.edges():
            G.add_edge(e.tail, e.head, key=eid, weight=e.weight)
        return G

    def same_as(self, other: "TerminalGraph") -> bool:
        """Structural equality ignoring edge ids."""
        return (
            self.directed == other.directed
            and self.vertices == other.vertices
            and self.terminals == other.terminals
            and self.edge_list() == other.edge_list()
        )

    def __eq__(self, other: object) -> bool:  # pragma: no cover - trivial
        if not isinstance(other, TerminalGraph):
            return NotImplemented
        return self.same_as(other) and self.mode == other.mode

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"TerminalGraph({kind}, mode={self.mode}, n={self.n}, m={self.m}, k={self.k})"


# ---------------------------------------------------------------------------
# pair sets


def trivial_pair_set(terminals: Iterable[int]) -> PairSet:
    ts = sorted(set(terminals))
    return frozenset((s, t) for s in ts for t in ts if s != t)


def validate_pair_set(g: TerminalGraph, pairs: Iterable[Tuple[int, int]]) -> PairSet:
    out = frozenset((int(s), int(t)) for s, t in pairs)
    for s, t in out:
        if s == t:
            raise GraphError(f"pair ({s},{t}) has equal endpoints")
        if not (g.is_terminal(s) and g.is_terminal(t)):
            raise GraphError(f"pair endpoint of ({s},{t}) is not a terminal")
    return out


# ---------------------------------------------------------------------------
# minor operations and traces


@dataclass(frozen=True)
class MinorOp:
    """One minor operation.

    ``kind`` is ``"delete_vertex"`` (``a`` = vertex), ``"delete_edge"``
    (``a`` = edge id) or ``"contract"`` (``a`` = edge id, ``b`` = absorbed
    vertex, ``survivor`` = surviving vertex).
    """

    kind: str
    a: int
    b: Optional[int] = None
    survivor: Optional[int] = None

    def to_text(self) -> str:
        if self.kind == "contract":
            return f"contract {self.a} {self.survivor} {self.b}"
        return f"{self.kind} {self.a}"

    @classmethod
    def from_text(cls, line: str) -> "MinorOp":
        parts = line.split()
        if parts[0] == "contract" and len(parts) == 4:
            return cls("contract", int(parts[1]), b=int(parts[3]), survivor=int(parts[2]))
        if parts[0] in ("delete_vertex", "delete_edge") and len(parts) == 2:
            return cls(parts[0], int(parts[1]))
        raise ValueError(f"bad trace line {line!r}")


@dataclass
class MinorTrace:
    """Ordered minor operations plus the branch set of every output vertex."""

    ops: List[MinorOp] = field(default_factory=list)
    branch_sets: Dict[int, FrozenSet[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ops)

    def to_text(self) -> str:
        lines = [op.to_text() for op in self.ops]
        for v in sorted(self.branch_sets):
            lines.append("branch " + " ".join(str(x) for x in [v, *sorted(self.branch_sets[v])]))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "MinorTrace":
        tr = cls()
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("branch "):
                ids = [int(x) for x in line.split()[1:]]
                tr.branch_sets[ids[0]] = frozenset(ids[1:])
            else:
                tr.ops.append(MinorOp.from_text(line))
        return tr


def _apply_inplace(g: TerminalGraph, op: MinorOp, branches: Optional[Dict[int, Set[int]]] = None) -> MinorOp:
    if op.kind == "delete_vertex":
        g.remove_vertex(op.a)
        if branches is not None:
            branches.pop(op.a, None)
        return op
    if op.kind == "delete_edge":
        g.remove_edge(op.a)
        return op
    if op.kind == "contract":
        e = g.edge(op.a)
        keep, gone = g.contract_edge(op.a, survivor=op.survivor)
        if op.b is not None and op.b != gone:
            raise GraphError(f"contraction of edge {op.a} ({e.tail},{e.head}) does not match trace entry")
        if branches is not None:
            branches[keep] |= branches.pop(gone)
        return MinorOp("contract", op.a, b=gone, survivor=keep)
    raise GraphError(f"unknown minor operation {op.kind!r}")


def apply_minor_op(g: TerminalGraph, op: MinorOp) -> Tuple[TerminalGraph, MinorOp]:
    """Apply one minor operation, returning a new frozen graph and the trace entry."""
    h = g.thaw()
    entry = _apply_inplace(h, op)
    return h.freeze(), entry


class MinorRecorder:
    """Mutable working graph that records every minor operation it performs."""

    def __init__(self, g: TerminalGraph) -> None:
        self.graph = g.thaw()
        self.trace = MinorTrace()
        self._branches: Dict[int, Set[int]] = {v: {v} for v in g.vertices}

    def delete_vertex(self, v: int) -> None:
        self.trace.ops.append(_apply_inplace(self.graph, MinorOp("delete_vertex", v), self._branches))

    def delete_edge(self, eid: int) -> None:
        self.trace.ops.append(_apply_inplace(self.graph, MinorOp("delete_edge", eid), self._branches))

    def contract(self, eid: int) -> int:
        entry = _apply_inplace(self.graph, MinorOp("contract", eid), self._branches)
        self.trace.ops.append(entry)
        assert entry.survivor is not None
        return entry.survivor

    def dedupe_parallel(self) -> None:
        """Delete duplicate parallel edges, keeping the lowest edge id."""
        seen: Set[Tuple[int, int]] = set()
        for eid, e in list(self.graph.edges()):
            key = (e.tail, e.head)
            if key in seen:
                self.delete_edge(eid)
            else:
                seen.add(key)

    def branch_of(self, v: int) -> FrozenSet[int]:
        return frozenset(self._branches[v])

    def finish(self) -> Tuple[TerminalGraph, MinorTrace]:
        self.trace.branch_sets = {v: frozenset(s) for v, s in self._branches.items()}
        return self.graph.freeze(), self.trace


def replay_trace(g: TerminalGraph, trace: MinorTrace) -> Tuple[TerminalGraph, Dict[int, FrozenSet[int]]]:
    """Replay ``trace`` on ``g``; returns the result and the replayed branch sets."""
    h = g.thaw()
    branches: Dict[int, Set[int]] = {v: {v} for v in g.vertices}
    for op in trace.ops:
        _apply_inplace(h, op, branches)
    return h.freeze(), {v: frozenset(s) for v, s in branches.items()}


@dataclass
class MinorReport:
    ok: bool
    problems: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _weakly_connected(g: TerminalGraph, vs: FrozenSet[int], adj: Dict[int, Set[int]]) -> bool:
    if not vs:
        return False
    start = min(vs)
    seen = {start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y in vs and y not in seen:
                seen.add(y)
                queue.append(y)
    return len(seen) == len(vs)


def check_minor_witness(src: TerminalGraph, out: TerminalGraph, trace: MinorTrace) -> MinorReport:
    """Replay ``trace`` on ``src`` and compare against ``out``; never raises."""
    problems: List[str] = []
    try:
        replayed, branches = replay_trace(src, trace)
    except GraphError as exc:
        return MinorReport(False, [f"replay failed: {exc}"])
    if replayed.vertices != out.vertices:
        a, b = set(replayed.vertices), set(out.vertices)
        problems.append(f"vertex sets differ: only-replayed={sorted(a - b)} only-output={sorted(b - a)}")
    if replayed.terminals != out.terminals:
        problems.append("terminal sets differ")
    if replayed.edge_list() != out.edge_list():
        problems.append("edge multisets differ")
    if replayed.directed != out.directed:
        problems.append("directedness differs")
    if trace.branch_sets and trace.branch_sets != branches:
        problems.append("recorded branch sets differ from replay")
    adj = src.undirected_adjacency()
    owner: Dict[int, int] = {}
    for v, bs in branches.items():
        for x in bs:
            if x in owner:
                problems.append(f"input vertex {x} in two branch sets")
            owner[x] = v
        if not _weakly_connected(src, bs, adj):
            problems.append(f"branch set of {v} is not connected")
        if len(bs & src.terminals) > 1:
            problems.append(f"branch set of {v} holds several terminals")
    for t in src.terminals:
        if t not in owner:
            problems.append(f"terminal {t} was deleted")
        elif not out.has_vertex(owner[t]) or not out.is_terminal(owner[t]):
            problems.append(f"terminal {t} does not map to an output terminal")
    return MinorReport(not problems, problems)


# ---------------------------------------------------------------------------
# serialization


def parse_graph(text: str) -> TerminalGraph:
    """Parse the line-oriented graph format; errors carry line numbers.

    Format::

        graph <directed|undirected> <cut|length|none>
        vertices <n>
        [ids <id> ...]              # optional, for non-contiguous ids
        terminals <id> ...
        [coord <id> <row> <col>]    # optional planar coordinates
        e <tail> <head> [<weight>]  # weight mandatory unless mode is none
    """
    lines = [(i + 1, raw.split("#", 1)[0].strip()) for i, raw in enumerate(text.splitlines())]
    lines = [(no, s) for no, s in lines if s]
    if not lines:
        raise GraphFormatError(0, "empty file")

    def fail(no: int, msg: str) -> GraphFormatError:
        return GraphFormatError(no, msg)

    it = iter(lines)
    no, head = next(it)
    parts = head.split()
    if len(parts) != 3 or parts[0] != "graph" or parts[1] not in ("directed", "undirected") or parts[2] not in MODES:
        raise fail(no, "malformed header")
    g = TerminalGraph(directed=parts[1] == "directed", mode=parts[2])

    try:
        no, line = next(it)
    except StopIteration:
        raise fail(no, "missing vertices line") from None
    parts = line.split()
    if len(parts) != 2 or parts[0] != "vertices" or not parts[1].isdigit():
        raise fail(no, "malformed vertices line")
    n = int(parts[1])

    rest = list(it)
    pos = 0
    ids: List[int] = list(range(n))
    if pos < len(rest) and rest[pos][1].split()[0] == "ids":
        no, line = rest[pos]
        try:
            ids = [int(x) for x in line.split()[1:]]
        except ValueError:
            raise fail(no, "malformed ids line") from None
        if len(ids) != n or len(set(ids)) != n or any(x < 0 for x in ids):
            raise fail(no, "ids line must list n distinct non-negative ids")
        pos += 1
    for v in ids:
        g.add_vertex(v)

    if pos >= len(rest) or rest[pos][1].split()[0] != "terminals":
        raise fail(rest[pos][0] if pos < len(rest) else no, "missing terminals line")
    no, line = rest[pos]
    pos += 1
    try:
        ts = [int(x) for x in line.split()[1:]]
    except ValueError:
        raise fail(no, "malformed terminals line") from None
    if not ts:
        raise fail(no, "at least one terminal required")
    for t in ts:
        if not g.has_vertex(t):
            raise fail(no, "terminal id not a vertex")
        if g.is_terminal(t):
            raise fail(no, f"duplicate terminal {t}")
        g.set_terminal(t)

    for no, line in rest[pos:]:
        parts = line.split()
        if parts[0] == "coord":
            if len(parts) != 4:
                raise fail(no, "malformed coord line")
            try:
                v, r, c = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                raise fail(no, "malformed coord line") from None
            if not g.has_vertex(v):
                raise fail(no, "coord for unknown vertex")
            g.set_coord(v, (r, c))
            continue
        if parts[0] != "e":
            raise fail(no, f"unknown record {parts[0]!r}")
        if len(parts) not in (3, 4) or (len(parts) == 3 and g.mode != "none"):
            raise fail(no, "malformed edge line")
        try:
            u, v = int(parts[1]), int(parts[2])
        except ValueError:
            raise fail(no, "malformed edge endpoints") from None
        if not g.has_vertex(u) or not g.has_vertex(v):
            raise fail(no, "edge endpoint not a vertex")
        if u == v:
            raise fail(no, "self-loop")
        w = Fraction(1)
        if len(parts) == 4:
            try:
                w = parse_weight(parts[3])
            except ValueError as exc:
                raise fail(no, str(exc)) from None
        g.add_edge(u, v, w)
    return g.freeze()


def serialize_graph(g: TerminalGraph) -> str:
    """Canonical text: vertices ascending, edges sorted by (tail, head, weight)."""
    out = [f"graph {'directed' if g.directed else 'undirected'} {g.mode}", f"vertices {g.n}"]
    vs = g.vertices
    if vs != list(range(g.n)):
        out.append("ids " + " ".join(map(str, vs)))
    out.append("terminals " + " ".join(map(str, g.terminal_list())))
    for v in vs:
        c = g.coord(v)
        if c is not None:
            out.append(f"coord {v} {c[0]} {c[1]}")
    for u, v, w in g.edge_list():
        if g.mode == "none":
            out.append(f"e {u} {v}" if w == 1 else f"e {u} {v} {format_weight(w)}")
        else:
            out.append(f"e {u} {v} {format_weight(w)}")
    return "\n".join(out) + "\n"


def graph_stats(g: TerminalGraph) -> Dict[str, object]:
    return {
        "n": g.n,
        "m": g.m,
        "k": g.k,
        "nonterminals": g.n - g.k,
        "mode": g.mode,
        "directed": g.directed,
    }


def stats_json(g: TerminalGraph) -> str:
    return json.dumps(graph_stats(g), sort_keys=True)


def relabel_compact(g: TerminalGraph) -> Tuple[TerminalGraph, Dict[int, int]]:
    """Copy of ``g`` with vertex ids renumbered 0..n-1 in ascending order."""
    mapping = {v: i for i, v in enumerate(g.vertices)}
    h = TerminalGraph(g.directed, g.mode)
    for v in g.vertices:
        h.add_vertex(mapping[v], g.coord(v))
    for t in g.terminals:
        h.set_terminal(mapping[t])
    for _, e in g.edges():
        h.add_edge(mapping[e.tail], mapping[e.head], e.weight)
    return h.freeze(), mapping


def undirected_components(adj: Mapping[int, Iterable[int]], vs: Optional[Iterable[int]] = None) -> List[List[int]]:
    """Connected components of an adjacency mapping (restricted to ``vs``)."""
    pool = set(adj) if vs is None else set(vs)
    comps: List[List[int]] = []
    for s in sorted(pool):
        if s not in pool:
            continue
        pool.discard(s)
        comp = [s]
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y in pool:
                    pool.discard(y)
                    comp.append(y)
                    queue.append(y)
        comps.append(sorted(comp))
    return comps


def pairs_from_sequence(seq: Sequence[int]) -> List[Tuple[int, int]]:
    return [(seq[i], seq[i + 1]) for i in range(len(seq) - 1)]
