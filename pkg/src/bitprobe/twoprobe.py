"""Two-probe adaptive membership scheme backed by a high-girth graph.

Memory is three blocks of ``s`` bits: ``A``, ``A0`` and ``A1``.  Element
``x`` owns a triple ``(i, i0, i1)``; its query reads ``A[i]`` and then
``A1[i1]`` if that bit is 1, else ``A0[i0]``, answering with the second bit.
Storing a set compiles the collisions between members and non-members into a
2-SAT instance over ``A``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import twosat
from .core import BitMemory, Kind, Scheme, SchemeParams, build_charvec_scheme, check_set
from .errors import RetriesExhausted, Unsatisfiable, VerificationFailed
from .graphs import BipartiteGraph, grow_high_girth, has_cycle_at_most, high_girth_size, sample_high_girth


@dataclass(frozen=True, eq=False)
class TwoProbeQueryGraph:
    """Per-element triples ``(i, i0, i1)``, each coordinate in ``[0, s)``.

    ``base`` is the bipartite graph the triples were cut from, if any.
    """

    s: int
    triples: np.ndarray
    base: Optional[BipartiteGraph] = None

    def __post_init__(self):
        tri = np.array(self.triples, dtype=np.int64).reshape(-1, 3)
        if tri.size and (tri.min() < 0 or tri.max() >= self.s):
            raise ValueError(f"triple coordinates must lie in [0, {self.s})")
        tri.flags.writeable = False
        object.__setattr__(self, "triples", tri)
        seen0 = set(map(tuple, tri[:, [0, 1]].tolist()))
        seen1 = set(map(tuple, tri[:, [0, 2]].tolist()))
        if len(seen0) != len(tri) or len(seen1) != len(tri):
            raise ValueError("an edge of the query graph carries two labels")
        buckets0, buckets1 = defaultdict(list), defaultdict(list)
        for x, (_, j0, j1) in enumerate(tri.tolist()):
            buckets0[j0].append(x)
            buckets1[j1].append(x)
        object.__setattr__(self, "_by_i0", dict(buckets0))
        object.__setattr__(self, "_by_i1", dict(buckets1))

    @property
    def m(self) -> int:
        return len(self.triples)

    def query_graph(self) -> BipartiteGraph:
        """``A`` on the left, ``A0`` then ``A1`` on the right (``2s`` vertices)."""
        rows = [[] for _ in range(self.s)]
        for i, j0, j1 in self.triples.tolist():
            rows[i].extend((j0, self.s + j1))
        return BipartiteGraph(self.s, 2 * self.s, tuple(rows))

    def colliding_i0(self, x: int) -> list:
        return self._by_i0[int(self.triples[x, 1])]

    def colliding_i1(self, x: int) -> list:
        return self._by_i1[int(self.triples[x, 2])]


def triples_from_graph(g: BipartiteGraph, m: int) -> np.ndarray:
    """Pair consecutive sorted neighbors of each left vertex into labels.

    Of each pair, the later neighbor becomes the ``A0`` copy and the earlier
    one the ``A1`` copy; the first ``m`` pairs in vertex order are used.
    """
    out = []
    for i, row in enumerate(g.adjacency):
        if len(row) % 2:
            raise ValueError(f"left vertex {i} has odd degree")
        for k in range(0, len(row), 2):
            out.append((i, row[k + 1], row[k]))
            if len(out) == m:
                return np.array(out, dtype=np.int64)
    raise ValueError(f"graph yields {len(out)} labels, need {m}")


def scheme_from_triples(m: int, n: int, s: int, triples: np.ndarray, seed: int = 0, base=None) -> Scheme:
    graph = TwoProbeQueryGraph(s, triples, base)
    tri = graph.triples
    addresses = np.stack([tri[:, 0], s + tri[:, 1], 2 * s + tri[:, 2]], axis=1)
    params = SchemeParams(m=m, n=n, t=2, s=s, total_bits=3 * s, kind=Kind.TWO_PROBE, seed=seed)
    return Scheme(params, addresses, None, graph=graph)


def default_block_size(m: int, n: int) -> int:
    """Per-block size ``ceil(4 m^(1 - 1/(4n+1)))``."""
    return high_girth_size(m, 4 * n)[0]


def _grow_until_fits(m: int, k: int, seed: int, start: int) -> BipartiteGraph:
    s = max(4, start)
    while True:
        g = grow_high_girth(m, k, s, seed)
        if g is not None:
            return g
        s = math.ceil(s * 1.1) + 1


def build_two_probe_scheme(
    m: int,
    n: int,
    seed: int = 0,
    *,
    s_override: Optional[int] = None,
    fallback: bool = True,
) -> Scheme:
    """Build a two-probe scheme storing any set of at most ``n`` elements.

    With the default size, the graph is sampled and repaired; when the size
    formula is out of range or would need ``3s >= m`` bits, the
    characteristic vector is returned if ``fallback`` is set, otherwise the
    block size is grown greedily from a small start until a graph of girth
    above ``4n`` with ``2m`` edges exists.  ``s_override`` forces the block
    size (greedy construction, no fallback).
    """
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and n >= 1")
    k = 4 * n
    if s_override is not None:
        g = grow_high_girth(m, k, int(s_override), seed)
        if g is None:
            raise RetriesExhausted(f"no girth > {k} graph with {2 * m} edges found at s={s_override}")
    else:
        s, d = high_girth_size(m, k)
        if d >= 4 and 3 * s < m:
            g = sample_high_girth(m, k, seed)
        elif fallback:
            return build_charvec_scheme(m, n, seed)
        else:
            g = _grow_until_fits(m, k, seed, math.isqrt(2 * m))
    scheme = scheme_from_triples(m, n, g.left_size, triples_from_graph(g, m), seed, base=g)
    if has_cycle_at_most(scheme.graph.query_graph(), k):
        raise AssertionError(f"query graph has a cycle of length <= {k}")
    return scheme


def random_two_probe_scheme(m: int, s: int, seed: int, n: int = 1) -> Scheme:
    """Systematic two-probe scheme with independent uniform triples.

    No girth or label constraints hold, so the kind is the generic tree kind;
    these are the undersized targets of the adversary.
    """
    rng = np.random.default_rng(seed)
    tri = rng.integers(0, s, size=(m, 3))
    addresses = np.stack([tri[:, 0], s + tri[:, 1], 2 * s + tri[:, 2]], axis=1)
    params = SchemeParams(m=m, n=min(n, m), t=2, s=s, total_bits=3 * s, kind=Kind.TREES, seed=seed)
    return Scheme(params, addresses, None, graph=("triples", tri))


def compile_constraints(graph: TwoProbeQueryGraph, S: Iterable[int]) -> twosat.TwoSatInstance:
    """Clauses forced by member/non-member collisions in ``A0`` and ``A1``."""
    members = set(int(x) for x in S)
    inst = twosat.TwoSatInstance(graph.s)
    tri = graph.triples
    for x in sorted(members):
        ix = int(tri[x, 0])
        for y in graph.colliding_i0(x):
            if y not in members:
                inst.add((ix, True), (int(tri[y, 0]), True))
        for y in graph.colliding_i1(x):
            if y not in members:
                inst.add((ix, False), (int(tri[y, 0]), False))
    return inst


def _solve_touched(inst: twosat.TwoSatInstance):
    """Solve over the variables that occur; untouched ones default to 0."""
    used = sorted({v for clause in inst.clauses for v, _ in clause})
    index = {v: k for k, v in enumerate(used)}
    small = twosat.TwoSatInstance(
        len(used), [((index[a], pa), (index[b], pb)) for (a, pa), (b, pb) in inst.clauses]
    )
    result = twosat.solve(small)
    if not result:
        w = result.witness
        back = lambda chain: [(used[v], p) for v, p in chain]  # noqa: E731
        return twosat.Unsatisfiable(
            twosat.UnsatWitness(
                (used[w.literal[0]], w.literal[1]), back(w.chain), w.chain_clauses,
                back(w.back_chain), w.back_clauses,
            )
        )
    full = [False] * inst.num_vars
    for k, v in enumerate(used):
        full[v] = result.assignment[k]
    return twosat.Satisfiable(full)


def store_two_probe(scheme: Scheme, S: Iterable[int]) -> BitMemory:
    """Memory of ``3s`` bits representing ``S``; every query is re-checked."""
    members = check_set(scheme, S, scheme.params.n)
    graph: TwoProbeQueryGraph = scheme.graph
    s = graph.s
    inst = compile_constraints(graph, members)
    result = _solve_touched(inst)
    if not result:
        raise Unsatisfiable(f"constraints for S={list(members)} are unsatisfiable", result.witness)
    bits = np.zeros(3 * s, dtype=np.uint8)
    bits[:s] = result.assignment
    for x in members:
        i, j0, j1 = graph.triples[x].tolist()
        if bits[i]:
            bits[2 * s + j1] = 1
        else:
            bits[s + j0] = 1
    memory = BitMemory(bits)
    want = np.zeros(scheme.m, dtype=bool)
    want[list(members)] = True
    bad = np.flatnonzero(scheme.answers(memory) != want)
    if bad.size:
        raise VerificationFailed(f"element {int(bad[0])} answered wrongly for S={list(members)}", int(bad[0]))
    return memory


def planted_unsat_scheme() -> tuple[Scheme, tuple]:
    """Five elements over ``s = 3`` whose constraints for ``S = {0, 1}``
    chain ``A[a] xor A[b]``, ``A[b] xor A[c]`` and ``A[a] xor A[c]``.

    Elements 0 and 2 (and 2 with 4) close alternating 4-cycles
    ``a - p1 - b - q1 - a`` in the query graph.
    """
    a, b, c = 0, 1, 2
    triples = [
        (a, 0, 0),  # x1 in S
        (b, 1, 1),  # x2 in S
        (b, 0, 0),  # y1 meets x1 in both A0 and A1
        (c, 1, 1),  # y2 meets x2 in both
        (c, 0, 0),  # y3 meets x1 in both
    ]
    return scheme_from_triples(5, 2, 3, np.array(triples)), (0, 1)
