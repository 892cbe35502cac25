"""Bipartite-graph toolkit shared by the scheme constructors.

Vertices on the left are ``0..left_size-1``; right vertices are numbered
separately ``0..right_size-1``.  Algorithms that need a single vertex space
map right vertex ``j`` to ``left_size + j``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ._numeric import ceil_root, iroot
from .errors import BudgetExceeded, FormulaRegime, NoMatching, RetriesExhausted

INFINITE = math.inf


@dataclass(frozen=True)
class BipartiteGraph:
    left_size: int
    right_size: int
    adjacency: tuple
    multigraph: bool = False
    labels: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.adjacency) != self.left_size:
            raise ValueError("adjacency needs one row per left vertex")
        rows = []
        for v, row in enumerate(self.adjacency):
            row = tuple(sorted(int(j) for j in row))
            if row and (row[0] < 0 or row[-1] >= self.right_size):
                raise ValueError(f"left vertex {v} has a neighbor outside [0, {self.right_size})")
            if not self.multigraph and len(set(row)) != len(row):
                raise ValueError(f"left vertex {v} has repeated neighbors")
            rows.append(row)
        object.__setattr__(self, "adjacency", tuple(rows))

    @property
    def num_edges(self) -> int:
        return sum(len(row) for row in self.adjacency)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edges(self) -> list[tuple[int, int]]:
        return [(v, j) for v, row in enumerate(self.adjacency) for j in row]

    def right_adjacency(self) -> list[list[int]]:
        out = [[] for _ in range(self.right_size)]
        for v, row in enumerate(self.adjacency):
            for j in row:
                out[j].append(v)
        return out

    def unified_adjacency(self) -> list[list[int]]:
        """Adjacency over ``left_size + right_size`` vertices."""
        L = self.left_size
        adj = [[L + j for j in row] for row in self.adjacency]
        adj.extend([v for v in col] for col in self.right_adjacency())
        return adj

    def dumps(self) -> str:
        head = f"bipartite left={self.left_size} right={self.right_size} multigraph={int(self.multigraph)}"
        lines = [head]
        for v, row in enumerate(self.adjacency):
            lines.append(f"L{v}: " + " ".join(str(j) for j in row) if row else f"L{v}:")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "BipartiteGraph":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or not lines[0].startswith("bipartite"):
            raise ValueError("missing 'bipartite' header line")
        fields = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        left, right = int(fields["left"]), int(fields["right"])
        rows: list = [None] * left
        for ln in lines[1:]:
            tag, _, rest = ln.partition(":")
            if not tag.startswith("L"):
                raise ValueError(f"bad adjacency line {ln!r}")
            v = int(tag[1:])
            if not 0 <= v < left or rows[v] is not None:
                raise ValueError(f"bad or repeated left vertex {v}")
            rows[v] = [int(x) for x in rest.split()]
        missing = [v for v, r in enumerate(rows) if r is None]
        if missing:
            raise ValueError(f"no adjacency line for left vertex {missing[0]}")
        return cls(left, right, tuple(rows), multigraph=fields.get("multigraph", "0") == "1")


# -- girth -------------------------------------------------------------------


def _bfs_cycle_bound(adj: Sequence[Sequence[int]], root: int, bound: float) -> float:
    """Shortest closed walk through a non-tree edge of the BFS tree at
    ``root``, if shorter than ``bound``; otherwise ``bound``.

    Every value returned below ``bound`` is the length of a closed walk that
    contains a cycle, and for a root on a shortest cycle it equals the girth.
    """
    dist = {root: 0}
    parent = {root: -1}
    queue = deque([root])
    best = bound
    while queue:
        x = queue.popleft()
        dx = dist[x]
        if 2 * dx + 1 >= best:
            break
        px = parent[x]
        for y in adj[x]:
            if y == px:
                continue
            dy = dist.get(y)
            if dy is None:
                dist[y] = dx + 1
                parent[y] = x
                queue.append(y)
            elif dx + dy + 1 < best:
                best = dx + dy + 1
    return best


def girth(g: BipartiteGraph) -> float:
    """Length of the shortest cycle of a simple bipartite graph, or ``INFINITE``."""
    if g.multigraph:
        raise ValueError("girth expects a simple graph")
    adj = g.unified_adjacency()
    best = INFINITE
    for root in range(len(adj)):
        best = _bfs_cycle_bound(adj, root, best)
        if best == 4:
            break
    return best


def has_cycle_at_most(g: BipartiteGraph, k: int) -> bool:
    """Whether some cycle has length ``<= k``.  Every cycle meets the left side."""
    adj = g.unified_adjacency()
    for root in range(g.left_size):
        if _bfs_cycle_bound(adj, root, k + 1) <= k:
            return True
    return False


@dataclass(frozen=True)
class CycleThrough:
    length: int
    vertices: tuple  # closed: vertices[0] == vertices[-1] == the root
    edges: tuple  # edge ids, len == length


def shortest_cycle_through(
    adj: Sequence[Sequence[tuple[int, int]]],
    root: int,
    limit: Optional[int] = None,
    banned: Optional[set] = None,
) -> Optional[CycleThrough]:
    """Shortest cycle containing ``root`` in a multigraph.

    ``adj[v]`` lists ``(neighbor, edge_id)`` pairs; edges in ``banned`` are
    ignored.  Returns ``None`` when no cycle of length ``<= limit`` exists.
    """
    banned = banned or set()
    best = INFINITE if limit is None else limit + 1
    dist = {root: 0}
    parent_edge = {root: None}
    parent = {root: None}
    branch = {root: None}
    found = None
    queue = deque([root])
    while queue:
        x = queue.popleft()
        dx = dist[x]
        if 2 * dx + 1 >= best:
            break
        for y, e in adj[x]:
            if e in banned or e == parent_edge[x]:
                continue
            if y not in dist:
                dist[y] = dx + 1
                parent[y] = x
                parent_edge[y] = e
                branch[y] = y if x == root else branch[x]
                queue.append(y)
                continue
            if x == root:
                length = dist[y] + 1
            elif y == root:
                length = dx + 1
            elif branch[x] != branch[y]:
                length = dx + dist[y] + 1
            else:
                continue
            if length < best:
                best = length
                found = (x, y, e)
    if found is None:
        return None
    x, y, e = found

    def up(v):
        verts, eds = [v], []
        while parent[v] is not None:
            eds.append(parent_edge[v])
            v = parent[v]
            verts.append(v)
        return verts, eds

    vx, ex = up(x)  # x ... root
    vy, ey = up(y)  # y ... root
    vertices = tuple(reversed(vx)) + tuple(vy)
    edges = tuple(reversed(ex)) + (e,) + tuple(ey)
    return CycleThrough(len(edges), vertices, edges)


# -- high-girth construction -------------------------------------------------


def high_girth_size(m: int, k: int) -> tuple[int, int]:
    """Side size ``s = ceil(4 m^(1 - 1/(k+1)))`` and the largest even ``d <= s^(1/k)``."""
    if m < 1 or k < 1:
        raise ValueError("need m >= 1 and k >= 1")
    s = ceil_root(4 ** (k + 1) * m**k, k + 1)
    d = iroot(s, k)
    return s, d - d % 2


def _remove_short_cycles(rows: list[list[int]], left: int, right: int, k: int) -> None:
    """Delete, for every left vertex in turn, its two edges on each cycle of
    length ``<= k`` through it, until none remains.  Mutates ``rows``."""
    adj = [[(left + j, (v, j)) for j in row] for v, row in enumerate(rows)]
    adj.extend([] for _ in range(right))
    for v, row in enumerate(rows):
        for j in row:
            adj[left + j].append((v, (v, j)))
    for v in range(left):
        while True:
            cyc = shortest_cycle_through(adj, v, limit=k)
            if cyc is None:
                break
            for edge in (cyc.edges[0], cyc.edges[-1]):
                j = edge[1]
                rows[v].remove(j)
                adj[v].remove((left + j, edge))
                adj[left + j].remove((v, edge))


def _check_high_girth(g: BipartiteGraph, k: int, min_edges: int) -> Optional[str]:
    if any(len(row) % 2 for row in g.adjacency):
        return "odd left degree"
    if g.num_edges < min_edges:
        return f"only {g.num_edges} edges, need {min_edges}"
    if has_cycle_at_most(g, k):
        return f"cycle of length <= {k} survived"
    return None


def sample_high_girth(
    m: int,
    k: int,
    seed: int,
    *,
    s: Optional[int] = None,
    d: Optional[int] = None,
    retries: int = 20,
) -> BipartiteGraph:
    """Random ``s x s`` bipartite graph with even left degrees, girth above
    ``k`` and at least ``2m`` edges.

    Each left vertex picks ``d`` distinct right neighbors uniformly; short
    cycles are then deleted vertex by vertex.  All output invariants are
    re-checked; a failing sample is redrawn up to ``retries`` times.
    """
    if k < 4 or k % 2:
        raise ValueError("k must be even and at least 4")
    if s is None:
        s, d_formula = high_girth_size(m, k)
        d = d_formula if d is None else d
        if d < 4:
            raise FormulaRegime(f"m={m}, k={k}: s={s} gives degree {d} < 4")
    elif d is None:
        d = iroot(s, k)
        d -= d % 2
    if d < 2 or d % 2 or d > s:
        raise FormulaRegime(f"degree {d} is not an even number in [2, {s}]")
    reasons = []
    for attempt in range(retries):
        rng = np.random.default_rng([seed, attempt])
        rows = [sorted(rng.choice(s, size=d, replace=False).tolist()) for _ in range(s)]
        _remove_short_cycles(rows, s, s, k)
        g = BipartiteGraph(s, s, tuple(rows))
        problem = _check_high_girth(g, k, 2 * m)
        if problem is None:
            return g
        reasons.append(problem)
    raise RetriesExhausted(f"no valid sample in {retries} attempts (last: {reasons[-1]})")


def grow_high_girth(m: int, k: int, s: int, seed: int) -> Optional[BipartiteGraph]:
    """Greedy construction on ``s + s`` vertices: repeatedly give a left
    vertex two new neighbors at distance ``> k`` from it, so no cycle of
    length ``<= k`` ever forms and left degrees stay even.  Stops at ``2m``
    edges; returns ``None`` if every left vertex saturates first.
    """
    rng = np.random.default_rng(seed)
    left_adj = [[] for _ in range(s)]
    right_adj = [[] for _ in range(s)]

    def near(v):
        # right vertices within distance k - 1 of left vertex v
        seen_l, seen_r = {v}, set()
        frontier, depth = [v], 0
        while frontier and depth < k - 1:
            nxt = []
            if depth % 2 == 0:
                for x in frontier:
                    for j in left_adj[x]:
                        if j not in seen_r:
                            seen_r.add(j)
                            nxt.append(j)
            else:
                for j in frontier:
                    for x in right_adj[j]:
                        if x not in seen_l:
                            seen_l.add(x)
                            nxt.append(x)
            frontier, depth = nxt, depth + 1
        return seen_r

    edges = 0
    active = list(range(s))
    while edges < 2 * m and active:
        order = rng.permutation(len(active))
        still = []
        for idx in order:
            if edges >= 2 * m:
                break
            v = active[idx]
            blocked = near(v)
            free = [j for j in range(s) if j not in blocked]
            if not free:
                continue
            j1 = free[int(rng.integers(len(free)))]
            left_adj[v].append(j1)
            right_adj[j1].append(v)
            blocked = near(v)
            free = [j for j in range(s) if j not in blocked]
            if not free:
                left_adj[v].pop()
                right_adj[j1].pop()
                continue
            j2 = free[int(rng.integers(len(free)))]
            left_adj[v].append(j2)
            right_adj[j2].append(v)
            edges += 2
            still.append(v)
        active = sorted(still)
    if edges < 2 * m:
        return None
    g = BipartiteGraph(s, s, tuple(left_adj))
    problem = _check_high_girth(g, k, 2 * m)
    if problem is not None:
        raise AssertionError(f"greedy construction broke an invariant: {problem}")
    return g


# -- Hall b-matchings --------------------------------------------------------


def hall_b_matching(
    neighborhoods: Sequence[Iterable[int]], demand: Union[int, Sequence[int]]
) -> list[list[int]]:
    """Pick ``demand[i]`` distinct private vertices for each element ``i``
    from its neighborhood, disjoint across elements.

    Solved as a maximum bipartite matching after replicating element ``i``
    ``demand[i]`` times.  Raises ``NoMatching`` when no such system exists
    (the maximum matching is then a certificate).
    """
    hoods = [sorted(set(int(x) for x in h)) for h in neighborhoods]
    if isinstance(demand, int):
        demand = [demand] * len(hoods)
    demand = [int(b) for b in demand]
    if len(demand) != len(hoods):
        raise ValueError("one demand per element")
    total = sum(demand)
    if total == 0:
        return [[] for _ in hoods]
    verts = sorted(set().union(*hoods)) if hoods else []
    col = {x: i for i, x in enumerate(verts)}
    owner, indptr, indices = [], [0], []
    for i, (h, b) in enumerate(zip(hoods, demand)):
        for _ in range(b):
            owner.append(i)
            indices.extend(col[x] for x in h)
            indptr.append(len(indices))
    if len(verts) < total:
        raise NoMatching(f"{total} private vertices needed but only {len(verts)} available")
    data = np.ones(len(indices), dtype=np.int8)
    bi = csr_matrix((data, indices, indptr), shape=(total, len(verts)))
    match = maximum_bipartite_matching(bi, perm_type="column")
    unmatched = np.flatnonzero(match < 0)
    if unmatched.size:
        raise NoMatching(
            f"maximum matching covers {total - unmatched.size} of {total} demanded slots "
            f"(element {owner[int(unmatched[0])]} short)"
        )
    out = [[] for _ in hoods]
    for row, c in enumerate(match.tolist()):
        out[owner[row]].append(verts[c])
    for i, chosen in enumerate(out):
        chosen.sort()
        if len(chosen) != demand[i] or not set(chosen) <= set(hoods[i]):
            raise AssertionError("matching post-check failed")
    if len(set().union(*map(set, out))) != total:
        raise AssertionError("matching post-check failed: private sets overlap")
    return out


# -- expansion ---------------------------------------------------------------


@dataclass
class ExpansionReport:
    ok: bool
    witness: Optional[tuple] = None
    neighborhood_size: Optional[int] = None
    checked: int = 0
    probabilistic: bool = False

    def __bool__(self) -> bool:
        return self.ok


def _masks(adjacency: Sequence[Sequence[int]]) -> list[int]:
    out = []
    for row in adjacency:
        mask = 0
        for j in row:
            mask |= 1 << j
        out.append(mask)
    return out


def _overlap_graph(adjacency: Sequence[Sequence[int]], right_size: int) -> list[set]:
    by_right = [[] for _ in range(right_size)]
    for v, row in enumerate(adjacency):
        for j in row:
            by_right[j].append(v)
    nbr = [set() for _ in adjacency]
    for col in by_right:
        for v in col:
            nbr[v].update(col)
    for v, s in enumerate(nbr):
        s.discard(v)
    return nbr


def check_expansion(
    g: BipartiteGraph,
    r_max: int = 8,
    c: float = 1,
    *,
    mode: str = "exhaustive",
    budget: int = 2_000_000,
    trials: int = 10_000,
    seed: int = 0,
) -> ExpansionReport:
    """Look for a left set ``W`` with ``1 <= |W| <= r_max`` and
    ``|Gamma(W)| < c |W|``.

    Exhaustive mode enumerates connected sets of the element-overlap graph
    only, which is exact: neighborhoods of non-overlapping parts are
    disjoint, so a smallest violator is connected.  ``budget`` caps the
    number of sets visited.  Sampled mode grows random connected sets.
    """
    masks = _masks(g.adjacency)
    nbr = _overlap_graph(g.adjacency, g.right_size)
    if mode == "exhaustive":
        return _expansion_exhaustive(masks, nbr, r_max, c, budget)
    if mode == "sampled":
        return _expansion_sampled(masks, nbr, r_max, c, trials, seed)
    raise ValueError(f"unknown mode {mode!r}")


def _expansion_exhaustive(masks, nbr, r_max, c, budget) -> ExpansionReport:
    checked = 0

    def extend(sub, mask, ext, root, closed):
        nonlocal checked
        checked += 1
        if checked > budget:
            raise BudgetExceeded(f"expansion check visited more than {budget} sets")
        size = bin(mask).count("1")
        if size < c * len(sub):
            return tuple(sub), size
        if len(sub) == r_max:
            return None
        ext = list(ext)
        while ext:
            w = ext.pop()
            fresh = [u for u in nbr[w] if u > root and u not in closed]
            hit = extend(sub + [w], mask | masks[w], ext + fresh, root, closed | nbr[w])
            if hit:
                return hit
        return None

    for root in range(len(masks)):
        first = sorted(u for u in nbr[root] if u > root)
        hit = extend([root], masks[root], first, root, nbr[root] | {root})
        if hit:
            return ExpansionReport(False, tuple(sorted(hit[0])), hit[1], checked)
    return ExpansionReport(True, checked=checked)


def _expansion_sampled(masks, nbr, r_max, c, trials, seed) -> ExpansionReport:
    rng = np.random.default_rng(seed)
    n = len(masks)
    checked = 0
    for _ in range(trials):
        sub = [int(rng.integers(n))]
        mask = masks[sub[0]]
        frontier = set(nbr[sub[0]])
        target = int(rng.integers(1, r_max + 1))
        while True:
            checked += 1
            size = bin(mask).count("1")
            if size < c * len(sub):
                return ExpansionReport(False, tuple(sorted(sub)), size, checked, probabilistic=True)
            if len(sub) >= target or not frontier:
                break
            w = sorted(frontier)[int(rng.integers(len(frontier)))]
            sub.append(w)
            mask |= masks[w]
            frontier |= nbr[w]
            frontier -= set(sub)
    return ExpansionReport(True, checked=checked, probabilistic=True)
