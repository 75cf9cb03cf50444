"""Instance generators and per-instance property checks.

Random digraphs, grid instances with all terminals on the outer face, the
directed-grid lower-bound family for reachability minors, Steiner triple
systems and the distance-incompressibility family built from them.
"""

from __future__ import annotations

import itertools
import math
import random
import sys
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .graph_core import GraphError, MinorTrace, TerminalGraph, check_minor_witness
from .oracles import INF, terminal_distance_matrix, terminal_reach_matrix

__all__ = [
    "IncompressibilityReport",
    "LowerBoundReport",
    "SteinerTripleSystem",
    "detouring_cycles",
    "detouring_graph",
    "detouring_subset",
    "gen_incompressibility_family",
    "gen_lb_grid",
    "gen_os_instance",
    "gen_random_digraph",
    "gen_sts",
    "grid_shape",
    "is_acyclic",
    "lb_grid_labels",
    "verify_incompressibility_claims",
    "verify_lb_grid",
]

Triple = Tuple[int, int, int]


# ---------------------------------------------------------------------------
# helpers


def is_acyclic(g: TerminalGraph) -> bool:
    """Kahn's algorithm on a directed graph."""
    indeg = {v: g.in_degree(v) for v in g.vertices}
    queue = deque(v for v, d in indeg.items() if d == 0)
    seen = 0
    while queue:
        x = queue.popleft()
        seen += 1
        for eid in g.out_edges(x):
            y = g.edge(eid).head
            indeg[y] -= 1
            if indeg[y] == 0:
                queue.append(y)
    return seen == g.n


def grid_shape(n: int, cols: int) -> List[Tuple[int, int]]:
    """First ``n`` cells of a grid with ``cols`` columns in row-major order."""
    return [(i // cols, i % cols) for i in range(n)]


def _grid_edges(cells: Sequence[Tuple[int, int]]) -> List[Tuple[int, int]]:
    index = {c: i for i, c in enumerate(cells)}
    out = []
    for i, (r, c) in enumerate(cells):
        for nb in ((r, c + 1), (r + 1, c)):
            j = index.get(nb)
            if j is not None:
                out.append((i, j))
    return out


def _outer_cells(cells: Sequence[Tuple[int, int]]) -> List[int]:
    """Indices of cells lying on the outer face of the (hole-free) shape."""
    occupied = set(cells)
    out = []
    for i, (r, c) in enumerate(cells):
        nbrs = [(r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1), (r + 1, c + 1), (r - 1, c - 1), (r + 1, c - 1), (r - 1, c + 1)]
        if any(nb not in occupied for nb in nbrs):
            out.append(i)
    return out


def _rand_weight(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(1, 9), rng.randint(1, 4))


# ---------------------------------------------------------------------------
# random digraphs


def gen_random_digraph(
    n: int,
    m: int,
    k: int,
    acyclic: bool = False,
    planar: bool = False,
    seed: int = 0,
) -> TerminalGraph:
    """Seed-deterministic random digraph with ``k`` terminals.

    ``planar`` draws ``m`` edges from a grid (with one diagonal per cell),
    orients them at random and picks terminals on the outer face.
    ``acyclic`` orients every edge along a random topological order.
    """
    if not 1 <= k <= n:
        raise GraphError("need 1 <= k <= n")
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    rank = {v: i for i, v in enumerate(order)}
    g = TerminalGraph(directed=True, mode="none")
    coords: Dict[int, Tuple[int, int]] = {}
    if planar:
        cols = max(1, int(math.ceil(math.sqrt(n))))
        cells = grid_shape(n, cols)
        index = {c: i for i, c in enumerate(cells)}
        cand = _grid_edges(cells)
        for i, (r, c) in enumerate(cells):
            j = index.get((r + 1, c + 1))
            if j is not None:
                cand.append((i, j))
        if m > len(cand):
            raise GraphError(f"m={m} exceeds the {len(cand)} available planar edges")
        chosen = rng.sample(cand, m)
        pool = _outer_cells(cells)
        coords = dict(enumerate(cells))
    else:
        limit = n * (n - 1) // (2 if acyclic else 1)
        if m > limit:
            raise GraphError(f"m={m} exceeds {limit}")
        chosen_set: Set[Tuple[int, int]] = set()
        if m > limit // 2:
            allp = [(u, v) for u in range(n) for v in range(n) if u != v and (not acyclic or rank[u] < rank[v])]
            chosen = rng.sample(allp, m)
        else:
            while len(chosen_set) < m:
                u, v = rng.randrange(n), rng.randrange(n)
                if u == v:
                    continue
                if acyclic and rank[u] > rank[v]:
                    u, v = v, u
                if not acyclic and (u, v) in chosen_set:
                    continue
                chosen_set.add((u, v))
            chosen = sorted(chosen_set)
        pool = list(range(n))
    if k > len(pool):
        raise GraphError(f"only {len(pool)} candidate terminal positions for k={k}")
    for v in range(n):
        g.add_vertex(v, coords.get(v))
    for u, v in chosen:
        if planar:
            if acyclic:
                if rank[u] > rank[v]:
                    u, v = v, u
            elif rng.random() < 0.5:
                u, v = v, u
        g.add_edge(u, v)
    for t in rng.sample(sorted(pool), k):
        g.set_terminal(t)
    return g.freeze()


# ---------------------------------------------------------------------------
# instances with all terminals on the outer face


def gen_os_instance(n: int, k: int, mode: str = "cut", seed: int = 0, keep: float = 0.75) -> TerminalGraph:
    """Connected grid subgraph on ``n`` vertices with ``k`` outer-face terminals.

    Vertices carry their grid coordinates.  A random spanning tree is kept and
    every other grid edge survives with probability ``keep``.  Weights are
    random positive rationals in the requested role (``cut`` or ``length``;
    ``distance`` is accepted as an alias of ``length``).
    """
    gmode = {"cut": "cut", "flow": "cut", "length": "length", "distance": "length"}.get(mode)
    if gmode is None:
        raise GraphError(f"unknown mode {mode!r}")
    if not 1 <= k <= n:
        raise GraphError("need 1 <= k <= n")
    rng = random.Random(seed)
    if n <= 3:
        cols = n
    else:
        lo = max(2, int(math.ceil(math.sqrt(n) * 0.6)))
        hi = max(lo, int(math.ceil(math.sqrt(n) * 1.6)))
        cols = min(n, rng.randint(lo, hi))
    cells = grid_shape(n, cols)
    cand = _grid_edges(cells)
    # random spanning tree (randomized Kruskal)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    shuffled = cand[:]
    rng.shuffle(shuffled)
    chosen = []
    for u, v in shuffled:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            chosen.append((u, v))
        elif rng.random() < keep:
            chosen.append((u, v))
    pool = _outer_cells(cells)
    if k > len(pool):
        raise GraphError(f"only {len(pool)} outer-face positions for k={k}")
    g = TerminalGraph(directed=False, mode=gmode)
    for i, c in enumerate(cells):
        g.add_vertex(i, c)
    for u, v in sorted(chosen):
        g.add_edge(u, v, _rand_weight(rng))
    for t in rng.sample(pool, k):
        g.set_terminal(t)
    return g.freeze()


# ---------------------------------------------------------------------------
# directed-grid lower bound


def gen_lb_grid(k: int) -> TerminalGraph:
    """Directed (r+1)×(r+1) grid with r = k/4, corners and boundary edges removed.

    Horizontal edges point right, vertical edges point down.  All 4r−4
    non-corner boundary vertices are terminals.  Vertex ``(i, j)`` gets id
    ``i*(r+1)+j`` and coordinate ``(i, j)``.
    """
    if k % 4 != 0 or k < 8:
        raise GraphError("k must be a multiple of 4 and at least 8")
    r = k // 4
    side = r + 1
    corners = {(0, 0), (0, r), (r, 0), (r, r)}

    def vid(i: int, j: int) -> int:
        return i * side + j

    def boundary(i: int, j: int) -> bool:
        return i in (0, r) or j in (0, r)

    g = TerminalGraph(directed=True, mode="none")
    for i in range(side):
        for j in range(side):
            if (i, j) not in corners:
                g.add_vertex(vid(i, j), (i, j))
                if boundary(i, j):
                    g.set_terminal(vid(i, j))
    for i in range(side):
        for j in range(side):
            for a, b in (((i, j), (i, j + 1)), ((i, j), (i + 1, j))):
                if b[0] > r or b[1] > r or a in corners or b in corners:
                    continue
                if boundary(*a) and boundary(*b):
                    continue
                g.add_edge(vid(*a), vid(*b))
    return g.freeze()


def lb_grid_labels(g: TerminalGraph) -> Dict[str, List[int]]:
    """Terminal labels x (left), y (right), u (top), v (bottom), each ordered."""
    coords = g.coords()
    r = max(c[0] for c in coords.values())
    at = {c: v for v, c in coords.items()}
    rng = range(1, r)
    return {
        "x": [at[(i, 0)] for i in rng],
        "y": [at[(i, r)] for i in rng],
        "u": [at[(0, j)] for j in rng],
        "v": [at[(r, j)] for j in rng],
    }


def _bfs_path(g: TerminalGraph, s: int, t: int) -> Optional[List[int]]:
    succ = g.successor_map()
    prev = {s: s}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        if x == t:
            break
        for y in succ[x]:
            if y not in prev:
                prev[y] = x
                queue.append(y)
    if t not in prev:
        return None
    path = [t]
    while path[-1] != s:
        path.append(prev[path[-1]])
    return path[::-1]


def _count_paths(g: TerminalGraph, s: int, t: int) -> int:
    """Number of s→t dipaths in a DAG (memoized DFS)."""
    succ = g.successor_map()
    memo: Dict[int, int] = {}

    def go(x: int) -> int:
        if x == t:
            return 1
        if x not in memo:
            memo[x] = sum(go(y) for y in succ[x])
        return memo[x]

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10 * g.n + 100))
    try:
        return go(s)
    finally:
        sys.setrecursionlimit(old)


@dataclass
class LowerBoundReport:
    ok: bool
    r: int
    problems: List[str] = field(default_factory=list)
    intersections: int = 0
    required: int = 0
    nonterminals: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "ok": self.ok,
            "r": self.r,
            "problems": self.problems,
            "intersections": self.intersections,
            "required": self.required,
            "nonterminals": self.nonterminals,
        }


def verify_lb_grid(g: TerminalGraph, h: Optional[TerminalGraph] = None, trace: Optional[MinorTrace] = None) -> LowerBoundReport:
    """Check the generator postconditions on ``g`` and, if given, the path claims on ``h``.

    For the candidate minor ``h`` (``g`` itself when omitted) a dipath is
    chosen for every horizontal pair (x_i, y_i) and vertical pair (u_j, v_j).
    The report checks disjointness within each family, intersection across
    families at non-terminals, and counts the distinct intersection points.
    """
    problems: List[str] = []
    labels = lb_grid_labels(g)
    r = len(labels["x"]) + 1
    if not is_acyclic(g):
        problems.append("grid is not acyclic")
    for _, e in g.edges():
        (a, b), (c, d) = g.coord(e.tail), g.coord(e.head)  # type: ignore[misc]
        if not ((c == a and d == b + 1) or (c == a + 1 and d == b)):
            problems.append(f"edge {e.tail}->{e.head} is neither rightward nor downward")
    reach = terminal_reach_matrix(g)
    for j, xj in enumerate(labels["x"]):
        for i, yi in enumerate(labels["y"]):
            if reach[(xj, yi)] != (i >= j):
                problems.append(f"x_{j + 1} -> y_{i + 1} reachability wrong")
    for a, b in itertools.chain(zip(labels["x"], labels["y"]), zip(labels["u"], labels["v"])):
        if _count_paths(g, a, b) != 1:
            problems.append(f"path {a}->{b} is not unique")

    target = g if h is None else h
    if h is not None and trace is not None:
        rep = check_minor_witness(g, h, trace)
        if not rep.ok:
            problems.extend(f"minor witness: {p}" for p in rep.problems)
    horiz: List[List[int]] = []
    vert: List[List[int]] = []
    for fam, (src, dst) in ((horiz, ("x", "y")), (vert, ("u", "v"))):
        for a, b in zip(labels[src], labels[dst]):
            if not (target.has_vertex(a) and target.has_vertex(b)):
                problems.append(f"terminal {a} or {b} missing")
                fam.append([])
                continue
            p = _bfs_path(target, a, b)
            if p is None:
                problems.append(f"no dipath {a}->{b} in candidate")
                p = []
            fam.append(p)
    for name, fam in (("horizontal", horiz), ("vertical", vert)):
        for i, j in itertools.combinations(range(len(fam)), 2):
            if set(fam[i]) & set(fam[j]):
                problems.append(f"{name} paths {i + 1} and {j + 1} share a vertex")
    points: Set[int] = set()
    for i, p in enumerate(horiz):
        for j, q in enumerate(vert):
            common = set(p) & set(q)
            if not common:
                problems.append(f"horizontal {i + 1} and vertical {j + 1} do not intersect")
                continue
            if any(target.is_terminal(z) for z in common):
                problems.append(f"horizontal {i + 1} and vertical {j + 1} meet at a terminal")
            points.add(min(common))
    required = (r - 1) ** 2
    return LowerBoundReport(
        ok=not problems and len(points) >= required,
        r=r,
        problems=problems,
        intersections=len(points),
        required=required,
        nonterminals=target.n - target.k,
    )


# ---------------------------------------------------------------------------
# Steiner triple systems


@dataclass(frozen=True)
class SteinerTripleSystem:
    k: int
    triples: Tuple[Triple, ...]

    def check(self) -> None:
        seen: Dict[Tuple[int, int], int] = {}
        for t in self.triples:
            if len(set(t)) != 3 or not all(0 <= x < self.k for x in t):
                raise GraphError(f"bad triple {t}")
            for a, b in itertools.combinations(sorted(t), 2):
                seen[(a, b)] = seen.get((a, b), 0) + 1
        for a, b in itertools.combinations(range(self.k), 2):
            if seen.get((a, b), 0) != 1:
                raise GraphError(f"pair {(a, b)} covered {seen.get((a, b), 0)} times")

    def triple_of(self, a: int, b: int) -> int:
        for i, t in enumerate(self.triples):
            if a in t and b in t:
                return i
        raise KeyError((a, b))


def gen_sts(k: int) -> SteinerTripleSystem:
    """Steiner triple system on {0..k−1}: Bose for k ≡ 3, Skolem for k ≡ 1 (mod 6)."""
    if k < 1 or k % 6 not in (1, 3):
        raise GraphError("k must be congruent to 1 or 3 modulo 6")
    triples: List[Triple] = []
    if k % 6 == 3:
        q = k // 3  # order 2n+1

        def pt(x: int, i: int) -> int:
            return x + q * (i % 3)

        half = (q + 1) // 2  # inverse of 2 modulo q: x∘y = (x+y)/2
        for x in range(q):
            triples.append((pt(x, 0), pt(x, 1), pt(x, 2)))
        for x, y in itertools.combinations(range(q), 2):
            for i in range(3):
                triples.append((pt(x, i), pt(y, i), pt(((x + y) * half) % q, i + 1)))
    elif k == 1:
        triples = []
    else:
        n = (k - 1) // 6
        q = 2 * n
        inf = k - 1

        def pt(x: int, i: int) -> int:
            return x + q * (i % 3)

        def op(x: int, y: int) -> int:
            s = (x + y) % q
            return s // 2 + n * (s % 2)

        for x in range(n):
            triples.append((pt(x, 0), pt(x, 1), pt(x, 2)))
        for x in range(n):
            for i in range(3):
                triples.append((inf, pt(x + n, i), pt(x, i + 1)))
        for x, y in itertools.combinations(range(q), 2):
            for i in range(3):
                triples.append((pt(x, i), pt(y, i), pt(op(x, y), i + 1)))
    sts = SteinerTripleSystem(k, tuple(tuple(sorted(t)) for t in triples))  # type: ignore[misc]
    sts.check()
    return sts


def detouring_graph(triples: Sequence[Triple]) -> Dict[Tuple[int, int], int]:
    """Edges ``(i, j) -> label`` between triples sharing exactly one point."""
    out: Dict[Tuple[int, int], int] = {}
    for i, j in itertools.combinations(range(len(triples)), 2):
        common = set(triples[i]) & set(triples[j])
        if len(common) == 1:
            out[(i, j)] = next(iter(common))
    return out


def detouring_cycles(triples: Sequence[Triple], t: int, indices: Optional[Iterable[int]] = None) -> List[Tuple[int, ...]]:
    """All detouring cycles of length 3..t among ``indices`` (each reported once).

    A cycle is detouring when consecutive edges (cyclically) carry different
    labels.  Cycles are rooted at their minimum index and listed in one
    direction only.
    """
    idx = sorted(range(len(triples)) if indices is None else set(indices))
    sets = {i: set(triples[i]) for i in idx}
    adj: Dict[int, List[Tuple[int, int]]] = {i: [] for i in idx}
    for a, b in itertools.combinations(idx, 2):
        common = sets[a] & sets[b]
        if len(common) == 1:
            lab = next(iter(common))
            adj[a].append((b, lab))
            adj[b].append((a, lab))
    found: List[Tuple[int, ...]] = []
    for root in idx:
        # path: list of vertices, labels: labels of edges along the path
        stack: List[Tuple[List[int], List[int]]] = [([root], [])]
        while stack:
            path, labs = stack.pop()
            x = path[-1]
            for y, lab in adj[x]:
                if labs and labs[-1] == lab:
                    continue
                if y == root and len(path) >= 3:
                    if lab != labs[0] and path[1] < path[-1]:
                        found.append(tuple(path))
                    continue
                if y <= root or y in path or len(path) >= t:
                    continue
                stack.append((path + [y], labs + [lab]))
    return sorted(set(found))


def detouring_subset(sts: SteinerTripleSystem, t: int, seed: int = 0, greedy: bool = True) -> List[int]:
    """Indices of triples whose induced detouring graph has no detouring cycle of length ≤ t.

    Random inclusion at rate k^(1/(t−1)−1)/4, one deletion per surviving short
    cycle, then (optionally) a greedy pass that adds any remaining triple that
    keeps the property.  The result is verified before it is returned.
    """
    if t < 3:
        raise GraphError("t must be at least 3")
    rng = random.Random(seed)
    k = sts.k
    p = min(1.0, k ** (1.0 / (t - 1) - 1.0) / 4.0)
    chosen = {i for i in range(len(sts.triples)) if rng.random() < p}
    while True:
        cycles = detouring_cycles(sts.triples, t, chosen)
        if not cycles:
            break
        chosen.discard(rng.choice(cycles[0]))
    if greedy:
        rest = [i for i in range(len(sts.triples)) if i not in chosen]
        rng.shuffle(rest)
        for i in rest:
            if not _creates_cycle(sts.triples, t, chosen, i):
                chosen.add(i)
    out = sorted(chosen)
    if detouring_cycles(sts.triples, t, out):
        raise AssertionError("detouring subset verification failed")
    return out


def _creates_cycle(triples: Sequence[Triple], t: int, chosen: Set[int], new: int) -> bool:
    return any(new in c for c in detouring_cycles(triples, t, chosen | {new}))


# ---------------------------------------------------------------------------
# incompressibility family


def gen_incompressibility_family(
    k: int,
    t: int,
    R: Optional[Iterable[int]] = None,
    seed: int = 0,
    subset: Optional[Sequence[int]] = None,
) -> Tuple[TerminalGraph, List[int]]:
    """Graph G_R over terminals 0..k−1 plus one non-terminal per triple of S′.

    Returns ``(G_R, S′)`` where S′ lists triple indices of ``gen_sts(k)``.
    Non-terminal ``k+i`` stands for the i-th triple of S′ and is joined to its
    three points with unit length, except that the edge to the triple's
    smallest point is dropped when the triple is not in ``R``.
    ``R`` defaults to all of S′.
    """
    sts = gen_sts(k)
    s_prime = list(subset) if subset is not None else detouring_subset(sts, t, seed=seed)
    Rset = set(s_prime) if R is None else set(R)
    if not Rset <= set(s_prime):
        raise GraphError("R must be a subset of S'")
    g = TerminalGraph(directed=False, mode="length")
    for x in range(k):
        g.add_vertex(x)
        g.set_terminal(x)
    for pos, ti in enumerate(s_prime):
        v = g.add_vertex(k + pos)
        tri = sorted(sts.triples[ti])
        for j, x in enumerate(tri):
            if j == 0 and ti not in Rset:
                continue
            g.add_edge(v, x, 1)
    return g.freeze(), s_prime


@dataclass
class IncompressibilityReport:
    ok: bool
    covered: Dict[Tuple[int, int], object] = field(default_factory=dict)
    uncovered_respecting: Dict[Tuple[int, int], object] = field(default_factory=dict)
    problems: List[str] = field(default_factory=list)


def verify_incompressibility_claims(g: TerminalGraph, k: int, s_prime: Sequence[int], R: Iterable[int], t: int) -> IncompressibilityReport:
    """Covered pairs at distance 2; respecting uncovered pairs at distance ≥ 2t."""
    sts = gen_sts(k)
    Rset = set(R)
    dist = terminal_distance_matrix(g)
    rep = IncompressibilityReport(ok=True)
    for ti in s_prime:
        tri = sorted(sts.triples[ti])
        pairs = list(itertools.combinations(tri, 2))
        for a, b in pairs:
            covered = ti in Rset or a != tri[0]
            d = dist[(a, b)]
            if covered:
                rep.covered[(a, b)] = d
                if d != 2:
                    rep.problems.append(f"covered pair {(a, b)} at distance {d}")
            else:
                rep.uncovered_respecting[(a, b)] = d
                if d is not INF and d < 2 * t:  # type: ignore[operator]
                    rep.problems.append(f"uncovered pair {(a, b)} at distance {d} < {2 * t}")
    rep.ok = not rep.problems
    return rep


def distinguishing_pair(k: int, g1: TerminalGraph, g2: TerminalGraph) -> Optional[Tuple[int, int]]:
    """First terminal pair whose distances differ between the two graphs."""
    d1, d2 = terminal_distance_matrix(g1), terminal_distance_matrix(g2)
    for key in sorted(d1):
        if d1[key] != d2[key]:
            return key
    return None
