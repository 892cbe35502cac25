"""Executable lower bounds: fooling pairs for undersized schemes.

A *fooling pair* ``(S, T)`` is two disjoint element sets such that no memory
makes every element of ``S`` answer Yes and every element of ``T`` answer No.
For two probes it comes from two short edge-disjoint cycles sharing a vertex
in the pseudo-graph of a systematic scheme: one cycle forces that cell to 0,
the other forces it to 1.  For more probes, the most popular root cell is
fixed to each value in turn and the resulting shallower schemes are attacked
recursively.

Pseudo-graph vertices are memory cells.  When the cells read on 0-branches
and on 1-branches are disjoint (as in the two-probe construction), the graph
is bipartite between those two groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from .core import Kind, Scheme, SchemeParams, evaluate_table, make_systematic
from .errors import BudgetExceeded, DegenerateCycle, NotFound
from .graphs import CycleThrough, shortest_cycle_through

EXHAUSTIVE_CELLS = 20
ENUMERATION_VERTICES = 200


# -- pseudo-graph --------------------------------------------------------------


@dataclass(frozen=True)
class PseudoEdge:
    """Edge ``{u, v}``: ``x`` reads ``u`` after a 0 at the shared root cell,
    ``x2`` reads ``v`` after a 1 there."""

    u: int
    v: int
    x: int
    x2: int
    color: int

    def label(self) -> tuple:
        return ((self.u, self.x), (self.v, self.x2))


@dataclass(frozen=True, eq=False)
class PseudoGraph:
    num_cells: int
    edges: tuple
    a0: frozenset
    a1: frozenset
    colors: int
    addresses: np.ndarray = field(repr=False)

    @property
    def bipartite(self) -> bool:
        return not (self.a0 & self.a1)

    def adjacency(self) -> list:
        """``adj[cell]`` lists ``(neighbor, edge_id)``; a loop appears once."""
        adj = [[] for _ in range(self.num_cells)]
        for eid, e in enumerate(self.edges):
            adj[e.u].append((e.v, eid))
            if e.u != e.v:
                adj[e.v].append((e.u, eid))
        return adj


def build_pseudo_graph(scheme: Scheme) -> PseudoGraph:
    """Pair, per root cell and in element order, the elements probing it first.

    A pair ``(x, x')`` contributes the edge joining ``x``'s 0-branch cell to
    ``x'``'s 1-branch cell; an odd element out is dropped.
    """
    if scheme.t != 2 or not scheme.is_systematic:
        raise ValueError("pseudo-graphs need a systematic two-probe scheme")
    addr = scheme.addresses
    by_color: dict[int, list[int]] = {}
    for x, root in enumerate(addr[:, 0].tolist()):
        by_color.setdefault(root, []).append(x)
    edges = []
    for color in sorted(by_color):
        members = by_color[color]
        for k in range(0, len(members) - 1, 2):
            x, x2 = members[k], members[k + 1]
            edges.append(PseudoEdge(int(addr[x, 1]), int(addr[x2, 2]), x, x2, color))
    return PseudoGraph(
        num_cells=scheme.total_bits,
        edges=tuple(edges),
        a0=frozenset(e.u for e in edges),
        a1=frozenset(e.v for e in edges),
        colors=len(by_color),
        addresses=addr,
    )


# -- forcing -------------------------------------------------------------------


@dataclass(frozen=True)
class ForcingWitness:
    v: int
    b: int
    S0: tuple
    S1: tuple
    cycle: CycleThrough


def _propagates_to_contradiction(rows: np.ndarray, yes: Sequence[int], no: Sequence[int], start: dict) -> bool:
    """Unit propagation over depth-2 systematic trees; True on contradiction.

    ``rows[x] = (root, cell_after_0, cell_after_1)``.  Every derived value is
    implied by ``start`` plus the membership constraints.
    """
    want = [(int(x), 1) for x in yes] + [(int(x), 0) for x in no]
    val = dict(start)
    changed = True
    while changed:
        changed = False
        for x, y in want:
            i, j, k = (int(c) for c in rows[x])
            if i in val:
                cell = k if val[i] else j
                if cell in val:
                    if val[cell] != y:
                        return True
                else:
                    val[cell] = y
                    changed = True
                continue
            bad0 = j in val and val[j] != y
            bad1 = k in val and val[k] != y
            if bad0 and bad1:
                return True
            if bad0 or bad1:
                val[i] = 1 if bad0 else 0
                changed = True
    return False


def forcing_sets(pg: PseudoGraph, cycle: CycleThrough, b: int) -> ForcingWitness:
    """Membership constraints that force the cycle's start cell to ``b``.

    Walking edge ``e_i`` from ``v_{i-1}`` to ``v_i``, ``a_i`` is the element
    reading ``v_{i-1}`` and ``b_i`` the one reading ``v_i``.  For ``b = 1``
    the members are ``a_1..a_k, b_k`` and the non-members ``b_1..b_{k-1}``;
    ``b = 0`` swaps the roles.
    """
    if b not in (0, 1):
        raise ValueError("b must be 0 or 1")
    v = int(cycle.vertices[0])
    cur = v
    a_list, b_list = [], []
    for eid in cycle.edges:
        e = pg.edges[eid]
        if e.u == cur:
            a_list.append(e.x)
            b_list.append(e.x2)
            cur = e.v
        elif e.v == cur:
            a_list.append(e.x2)
            b_list.append(e.x)
            cur = e.u
        else:
            raise ValueError(f"edge {eid} does not continue the walk at cell {cur}")
    if cur != v:
        raise ValueError("edge sequence is not closed")
    forced = tuple(a_list) + (b_list[-1],)
    rest = tuple(b_list[:-1])
    S1, S0 = (forced, rest) if b == 1 else (rest, forced)
    if len(set(S1)) != len(S1) or len(set(S0)) != len(S0) or set(S1) & set(S0):
        raise DegenerateCycle("cycle repeats an element label")
    if not _propagates_to_contradiction(pg.addresses, S1, S0, {v: 1 - b}):
        raise AssertionError(f"propagation did not force cell {v} to {b}")
    return ForcingWitness(v, b, tuple(sorted(S0)), tuple(sorted(S1)), cycle)


# -- short intersecting cycles -------------------------------------------------


@dataclass(frozen=True)
class ConflictingCycles:
    v: int
    first: CycleThrough
    second: CycleThrough


def _simple_cycles_through(adj, root: int, limit: int, budget: list):
    """All simple cycles through ``root`` of length ``<= limit`` (both directions)."""
    path_v = [root]
    path_e: list[int] = []
    on_path = {root}

    def walk(x):
        for y, e in adj[x]:
            budget[0] -= 1
            if budget[0] < 0:
                raise BudgetExceeded("cycle enumeration budget exhausted")
            if e in path_e:
                continue
            if y == root:
                yield CycleThrough(len(path_e) + 1, tuple(path_v) + (root,), tuple(path_e) + (e,))
            elif y not in on_path and len(path_e) + 1 < limit:
                path_v.append(y)
                path_e.append(e)
                on_path.add(y)
                yield from walk(y)
                on_path.discard(y)
                path_e.pop()
                path_v.pop()

    yield from walk(root)


def _check_pair(pg: PseudoGraph, found: ConflictingCycles, limit: int) -> ConflictingCycles:
    c1, c2 = found.first, found.second
    assert c1.length <= limit and c2.length <= limit
    assert not set(c1.edges) & set(c2.edges)
    assert c1.vertices[0] == c2.vertices[0] == found.v
    return found


def find_conflicting_cycles(
    pg: PseudoGraph, n: int, *, enumeration_budget: int = 2_000_000
) -> Optional[ConflictingCycles]:
    """Two edge-disjoint cycles of length at most ``n // 2`` through one cell.

    Each cell is tried with its shortest cycle and then the shortest cycle
    avoiding those edges.  When that fails and the graph has at most 200
    non-isolated cells, every short cycle through each cell is tried as the
    first one.  Returns ``None`` if nothing is found.
    """
    limit = n // 2
    if limit < 1 or not pg.edges:
        return None
    adj = pg.adjacency()
    degree = [sum(2 if y == x else 1 for y, _ in adj[x]) for x in range(pg.num_cells)]
    active = [x for x in range(pg.num_cells) if degree[x] >= 4]
    for v in active:
        c1 = shortest_cycle_through(adj, v, limit)
        if c1 is None:
            continue
        c2 = shortest_cycle_through(adj, v, limit, banned=set(c1.edges))
        if c2 is not None:
            return _check_pair(pg, ConflictingCycles(v, c1, c2), limit)
    if sum(1 for d in degree if d) > ENUMERATION_VERTICES:
        return None
    budget = [enumeration_budget]
    try:
        for v in active:
            for c1 in _simple_cycles_through(adj, v, limit, budget):
                c2 = shortest_cycle_through(adj, v, limit, banned=set(c1.edges))
                if c2 is not None:
                    return _check_pair(pg, ConflictingCycles(v, c1, c2), limit)
    except BudgetExceeded:
        return None
    return None


# -- fooling pairs and their validation ----------------------------------------


@dataclass(frozen=True)
class FoolingPair:
    """``validation`` is ``"exhaustive"``, ``"search"`` or ``"propagation"``."""

    S: tuple
    T: tuple
    validation: str = "propagation"
    witnesses: tuple = ()
    cycles: tuple = ()
    regime: Optional["RegimeReport"] = None

    def touched_cells(self, scheme: Scheme) -> int:
        return len(touched_cells(scheme, self.S + self.T))


def touched_cells(scheme: Scheme, elements: Sequence[int]) -> np.ndarray:
    if not len(elements):
        return np.zeros(0, dtype=np.int64)
    return np.unique(scheme.addresses[list(elements)])


def representable_exhaustive(scheme: Scheme, S: Sequence[int], T: Sequence[int], *, max_cells: int = EXHAUSTIVE_CELLS) -> bool:
    """Whether some memory accepts all of ``S`` and rejects all of ``T``.

    Enumerates every assignment of the cells the trees of ``S`` and ``T``
    can read (at most ``max_cells`` of them).
    """
    elems = list(S) + list(T)
    if not elems:
        return True
    cells = touched_cells(scheme, elems)
    k = len(cells)
    if k > max_cells:
        raise BudgetExceeded(f"{k} touched cells exceed the enumeration limit {max_cells}")
    local = np.searchsorted(cells, scheme.addresses[elems])
    leaves = None if scheme.leaves is None else scheme.leaves[elems]
    want = np.array([True] * len(S) + [False] * len(T))
    shifts = np.arange(k, dtype=np.int64)
    chunk = 1 << 16
    for start in range(0, 1 << k, chunk):
        ids = np.arange(start, min(start + chunk, 1 << k), dtype=np.int64)
        bits = ((ids[:, None] >> shifts) & 1).astype(np.uint8)
        got = evaluate_table(local, leaves, bits)
        if (got == want).all(axis=1).any():
            return True
    return False


def find_representation(
    scheme: Scheme, S: Sequence[int], T: Sequence[int], *, budget: int = 1_000_000
) -> Optional[dict]:
    """Backtracking search over the cells the queries actually reach.

    Returns a partial memory ``{cell: bit}`` under which every element of
    ``S`` answers Yes and every element of ``T`` answers No, or ``None``.
    """
    addr = scheme.addresses
    leaves = scheme.leaves
    width = addr.shape[1]
    goals = [(int(x), True) for x in S] + [(int(x), False) for x in T]
    steps = [0]

    def status(x: int, want: bool, assign: dict):
        pos, last = 0, 0
        while pos < width:
            cell = int(addr[x, pos])
            if cell not in assign:
                return cell
            last = assign[cell]
            pos = 2 * pos + 1 + last
        answer = bool(last) if leaves is None else bool(leaves[x, pos - width])
        return answer == want

    def search(assign: dict) -> Optional[dict]:
        steps[0] += 1
        if steps[0] > budget:
            raise BudgetExceeded("representation search budget exhausted")
        for x, want in goals:
            st = status(x, want, assign)
            if st is False:
                return None
            if st is True:
                continue
            for bit in (0, 1):
                assign[st] = bit
                got = search(assign)
                if got is not None:
                    return got
                del assign[st]
            return None
        return dict(assign)

    return search({})


def validate_fooling_pair(scheme: Scheme, S: Sequence[int], T: Sequence[int]) -> str:
    """Confirm no memory separates ``S`` from ``T``; returns the method used.

    Raises ``AssertionError`` if a separating memory exists.
    """
    if set(S) & set(T):
        raise DegenerateCycle("fooling sets intersect")
    if len(touched_cells(scheme, list(S) + list(T))) <= EXHAUSTIVE_CELLS:
        if representable_exhaustive(scheme, S, T):
            raise AssertionError("a memory represents S while excluding T")
        return "exhaustive"
    if find_representation(scheme, S, T) is not None:
        raise AssertionError("a memory represents S while excluding T")
    return "search"


def fooling_set_two_probe(scheme: Scheme, n: int, *, validate: bool = True) -> FoolingPair:
    """Fooling pair with ``|S|, |T| <= n`` for a two-probe scheme.

    Non-systematic schemes are made systematic first; the pair is validated
    against the scheme as given.
    """
    if scheme.t != 2:
        raise ValueError("two-probe attack needs t = 2")
    target = scheme if scheme.is_systematic else make_systematic(scheme)[0]
    pg = build_pseudo_graph(target)
    found = find_conflicting_cycles(pg, n)
    if found is None:
        raise NotFound(f"no two short edge-disjoint cycles share a cell (n={n})")
    w0 = forcing_sets(pg, found.first, 0)
    w1 = forcing_sets(pg, found.second, 1)
    S = tuple(sorted(w0.S1 + w1.S1))
    T = tuple(sorted(w0.S0 + w1.S0))
    assert len(S) <= n and len(T) <= n and not set(S) & set(T)
    method = validate_fooling_pair(scheme, S, T) if validate else "propagation"
    return FoolingPair(S, T, method, (w0, w1), (found.first, found.second))


# -- recursion over root cells -------------------------------------------------


@dataclass(frozen=True)
class RegimeReport:
    n_range: bool
    space: bool
    space_bound: float

    @property
    def inside(self) -> bool:
        return self.n_range and self.space


def regime_report(m: int, n: int, t: int, s: int) -> RegimeReport:
    """Checks ``4^t <= n <= m^(1/(2(t-1)))`` and ``s <= m^((1 - 4^t/n)/(t-1)) / 15``."""
    n_ok = 4**t <= n and n ** (2 * (t - 1)) <= m
    bound = float(mpmath.power(m, mpmath.mpf(1 - mpmath.mpf(4**t) / n) / (t - 1)) / 15)
    return RegimeReport(n_ok, s <= bound, bound)


def subtree_table(addresses: np.ndarray, leaves: Optional[np.ndarray], c: int):
    """Tables of the depth ``t - 1`` subtrees entered after reading ``c`` at the root."""
    width = addresses.shape[1]
    t = (width + 1).bit_length() - 1
    cols = []
    for level in range(t - 1):
        first = 2 ** (level + 1) - 1 + c * 2**level
        cols.extend(range(first, first + 2**level))
    sub_addr = addresses[:, cols]
    sub_leaves = None
    if leaves is not None:
        half = 2 ** (t - 1)
        sub_leaves = leaves[:, c * half:(c + 1) * half]
    return sub_addr, sub_leaves


def _table_scheme(addresses: np.ndarray, leaves, total_bits: int, n: int) -> Scheme:
    m, width = addresses.shape
    t = (width + 1).bit_length() - 1
    params = SchemeParams(m=m, n=max(1, min(n, m)), t=t, s=total_bits, total_bits=total_bits, kind=Kind.TREES)
    return Scheme(params, addresses, leaves)


def _recurse(addresses, leaves, elements: np.ndarray, n: int, total_bits: int) -> tuple:
    width = addresses.shape[1]
    t = (width + 1).bit_length() - 1
    if len(elements) == 0:
        raise NotFound("empty sub-universe")
    if t == 2:
        sub = _table_scheme(addresses[elements], None if leaves is None else leaves[elements], total_bits, n)
        pair = fooling_set_two_probe(sub, n, validate=False)
        return tuple(int(elements[x]) for x in pair.S), tuple(int(elements[x]) for x in pair.T)
    half = n // 2
    if half < 1:
        raise NotFound("set budget exhausted before the base case")
    roots = addresses[elements, 0]
    cell = int(np.argmax(np.bincount(roots, minlength=total_bits)))  # lowest address on ties
    pool = elements[roots == cell]
    S: list[int] = []
    T: list[int] = []
    for c in (0, 1):
        sub_addr, sub_leaves = subtree_table(addresses, leaves, c)
        part_S, part_T = _recurse(sub_addr, sub_leaves, pool, half, total_bits)
        S.extend(part_S)
        T.extend(part_T)
        used = set(part_S) | set(part_T)
        pool = np.array([x for x in pool.tolist() if x not in used], dtype=np.int64)
    return tuple(sorted(S)), tuple(sorted(T))


def fooling_set_recursive(scheme: Scheme, n: int, t: Optional[int] = None) -> FoolingPair:
    """Fooling pair for a ``t``-probe scheme by splitting on popular root cells.

    The regime conditions are evaluated and attached; outside them the search
    is best-effort.  Each level halves the set budget, and the second branch
    only uses elements not already spent by the first.
    """
    t = scheme.t if t is None else t
    if t != scheme.t or t < 2:
        raise ValueError(f"scheme has depth {scheme.t}, requested t={t}")
    regime = regime_report(scheme.m, n, t, scheme.total_bits)
    if t == 2:
        pair = fooling_set_two_probe(scheme, n)
        return FoolingPair(pair.S, pair.T, pair.validation, pair.witnesses, pair.cycles, regime)
    S, T = _recurse(scheme.addresses, scheme.leaves, np.arange(scheme.m, dtype=np.int64), n, scheme.total_bits)
    assert len(S) <= n and len(T) <= n and not set(S) & set(T)
    return FoolingPair(S, T, validate_fooling_pair(scheme, S, T), regime=regime)


def attack(scheme: Scheme, n: Optional[int] = None) -> FoolingPair:
    """Run the attack matching the scheme's depth."""
    n = scheme.params.n if n is None else n
    if scheme.t < 2:
        raise NotFound("one-probe schemes have no shared root cells")
    if scheme.t == 2:
        return fooling_set_two_probe(scheme, n)
    return fooling_set_recursive(scheme, n)


# -- bounds --------------------------------------------------------------------


def moore_bound(num_vertices: int, n: int) -> float:
    """``(V/2)^(1/floor(n/4)) + 1``, rounded up to the next float when inexact."""
    if n < 4 or num_vertices < 2:
        raise ValueError("need n >= 4 and at least 2 vertices")
    p = n // 4
    if num_vertices % 2 == 0:
        half = num_vertices // 2
        r = round(half ** (1 / p))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand**p == half:
                return float(cand + 1)
    elif p == 1:
        return num_vertices / 2 + 1
    with mpmath.workdps(50):
        exact = mpmath.root(mpmath.mpf(num_vertices) / 2, p) + 1
        approx = float(exact)
        if mpmath.mpf(approx) < exact:
            approx = math.nextafter(approx, math.inf)
    return approx


@dataclass(frozen=True)
class LowerBound:
    value: Optional[float]
    formula: str


def lower_bound(m: int, n: int, t: int) -> LowerBound:
    """Reference space lower bound for the bench tables."""
    if t == 2 and n >= 4:
        p = n // 4
        return LowerBound(float(mpmath.power(m, 1 - mpmath.mpf(1) / p) / 11), "m^(1-1/floor(n/4))/11")
    if t >= 3 and 4**t <= n:
        expo = (1 - mpmath.mpf(4**t) / n) / (t - 1)
        return LowerBound(float(mpmath.power(m, expo) / 15), "m^((1-4^t/n)/(t-1))/15")
    return LowerBound(None, "n/a")


# -- planted fixtures ----------------------------------------------------------


def planted_cycles_scheme(lengths: Sequence[int], extra: int = 0) -> tuple[Scheme, list]:
    """Systematic two-probe scheme whose pseudo-graph is cycles through cell 0.

    Cycle ``c`` visits fresh cells ``w_1 .. w_{k-1}`` and returns to cell 0.
    Each edge gets its own root cell and two elements: one reading the
    edge's first cell on a 0, one reading the second cell on a 1.  Their
    other branches go to two shared spare cells.  ``extra`` isolated
    elements with their own root cells are appended.  Returns the scheme and
    the planted cycles (edge ids follow element order).
    """
    walks = []
    nxt = 1
    for k in lengths:
        if k < 1:
            raise ValueError("cycle lengths must be positive")
        inner = list(range(nxt, nxt + k - 1))
        nxt += k - 1
        walks.append([0] + inner + [0])
    num_edges = sum(lengths)
    root0 = nxt
    spare0, spare1 = root0 + num_edges, root0 + num_edges + 1
    total = spare1 + 1 + extra
    rows, cycles = [], []
    eid = 0
    for walk in walks:
        ids = []
        for a, b in zip(walk, walk[1:]):
            root = root0 + eid
            rows.append((root, a, spare0))
            rows.append((root, spare1, b))
            ids.append(eid)
            eid += 1
        cycles.append(CycleThrough(len(ids), tuple(walk), tuple(ids)))
    for j in range(extra):
        cell = spare1 + 1 + j
        rows.append((cell, spare0, spare1))
    m = len(rows)
    params = SchemeParams(m=m, n=max(1, min(m, num_edges)), t=2, s=total, total_bits=total, kind=Kind.TREES)
    return Scheme(params, np.array(rows, dtype=np.int64)), cycles
