"""Three-probe adaptive scheme: peel the easy non-members, Hall-match the rest.

Memory holds one block of ``s`` bits per node of the complete depth-3 tree
(7 blocks, heap order).  Element ``u`` has one cell in every block; its
query walks the tree reading the cell of ``u`` in the block of the current
node and answers with the third bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ._numeric import ceil_mp, exact_lg
from .core import BitMemory, Kind, Scheme, SchemeParams, build_charvec_scheme, check_set, verify_sampled
from .errors import NoMatching, NotAdmissible, RetriesExhausted, VerificationFailed
from .forcing import force_answer
from .graphs import BipartiteGraph, check_expansion, hall_b_matching

LEAF_DISJOINT = "leaf-disjoint"
SINGLE_LEAF = "single-leaf"


@dataclass(frozen=True, eq=False)
class AdaptiveProbeGraph:
    """``rows[u, p]`` is the cell of ``u`` inside the block of tree node ``p``."""

    t: int
    s: int
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64)
        width = 2**self.t - 1
        if rows.ndim != 2 or rows.shape[1] != width:
            raise ValueError(f"rows must have {width} columns")
        if rows.size and (rows.min() < 0 or rows.max() >= self.s):
            raise ValueError(f"cells must lie in [0, {self.s})")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        absolute = rows + self.s * np.arange(width)
        absolute.flags.writeable = False
        object.__setattr__(self, "absolute", absolute)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return 2**self.t - 1

    @property
    def first_leaf(self) -> int:
        return 2 ** (self.t - 1) - 1

    def leaves(self, u: int) -> tuple:
        """Cells of ``u`` in the last probe level."""
        return tuple(self.absolute[u, self.first_leaf :].tolist())

    def internal(self, u: int) -> tuple:
        return tuple(self.absolute[u, : self.first_leaf].tolist())

    def level(self, i: int) -> BipartiteGraph:
        """Level-``i`` subgraph (``i`` = 1 .. t): elements versus that level's cells."""
        lo, hi = 2 ** (i - 1) - 1, 2**i - 1
        return BipartiteGraph(self.m, self.s * self.width, tuple(map(tuple, self.absolute[:, lo:hi].tolist())))

    def as_bipartite(self) -> BipartiteGraph:
        return BipartiteGraph(self.m, self.s * self.width, tuple(map(tuple, self.absolute.tolist())))


def scheme_from_rows(m: int, n: int, s: int, rows: np.ndarray, seed: int = 0) -> Scheme:
    graph = AdaptiveProbeGraph(3, s, rows)
    params = SchemeParams(m=m, n=n, t=3, s=s, total_bits=7 * s, kind=Kind.THREE_PROBE, seed=seed)
    return Scheme(params, graph.absolute, None, graph=graph)


def default_block_size(m: int, n: int) -> int:
    """``ceil(500 sqrt(m n lg(2m/n)))``."""
    lg = exact_lg(2 * m, n)
    if lg is not None:
        x = 250_000 * m * n * lg
        r = math.isqrt(x)
        return r if r * r == x else r + 1
    return ceil_mp(lambda mp: 500 * mp.sqrt(m * n * mp.log(mp.mpf(2 * m) / n, 2)))


def peel_threshold(m: int, n: int) -> int:
    """``ceil(n lg(2m/n))``, the admissible size of the unpeeled core."""
    lg = exact_lg(2 * m, n)
    if lg is not None:
        return n * lg
    return ceil_mp(lambda mp: n * mp.log(mp.mpf(2 * m) / n, 2))


# -- peeling -----------------------------------------------------------------


@dataclass(frozen=True)
class PeelRecord:
    """One peeled non-member.

    ``shared_leaf`` is the tree position of the single leaf ``y`` shares
    with the stored set and ``free`` the internal positions of ``y`` no
    other unpeeled element or member touches; both are empty for the
    leaf-disjoint case.
    """

    y: int
    case: str
    shared_leaf: Optional[int] = None
    free: tuple = ()


def _classify(graph: AdaptiveProbeGraph, members: tuple):
    """Per element: number of its leaf cells that are leaves of members, and
    the position of the shared one when there is exactly one."""
    total = graph.s * graph.width
    member_leaf = np.zeros(total, dtype=bool)
    fl = graph.first_leaf
    if members:
        member_leaf[graph.absolute[list(members), fl:].ravel()] = True
    hits = member_leaf[graph.absolute[:, fl:]]
    return hits.sum(axis=1), fl + hits.argmax(axis=1)


def peel(
    graph: AdaptiveProbeGraph,
    S: Iterable[int],
    n: int,
    target: Optional[int] = None,
    *,
    strict: bool = True,
) -> tuple[tuple, list[PeelRecord]]:
    """Peel non-members until at most ``target`` remain (default: the
    admissible threshold), always taking the lowest-index peelable one.

    A non-member ``y`` is peelable when its leaves avoid the members'
    leaves, or share exactly one of them while at most one of its internal
    cells is used by another unpeeled element or member.  Peelability only
    grows as elements leave, so a heap of candidates realises the
    lowest-index-first rule.  Raises ``NotAdmissible`` if no element can be
    peeled while the core still exceeds the threshold, unless ``strict`` is
    off, in which case the stuck core is returned.
    """
    members = tuple(sorted(set(int(x) for x in S)))
    m = graph.m
    threshold = peel_threshold(m, n) if m >= 1 else 0
    target = threshold if target is None else target
    member_set = set(members)
    alive = np.ones(m, dtype=bool)
    alive_count = m - len(members)
    fl = graph.first_leaf
    internal = graph.absolute[:, :fl]
    usage = np.bincount(internal.ravel(), minlength=graph.s * graph.width)
    users: dict = {}
    for u in range(m):
        for c in internal[u].tolist():
            users.setdefault(c, []).append(u)
    overlap, shared_pos = _classify(graph, members)

    def free_nodes(y: int) -> tuple:
        return tuple(p for p in range(fl) if usage[internal[y, p]] == 1)

    heap = []
    for y in range(m):
        if y in member_set:
            continue
        if overlap[y] == 0 or (overlap[y] == 1 and len(free_nodes(y)) >= fl - 1):
            heap.append(y)
    heapq.heapify(heap)
    queued = set(heap)
    records = []
    while alive_count > target:
        if not heap:
            if strict and alive_count > threshold:
                core = tuple(u for u in range(m) if alive[u] and u not in member_set)
                raise NotAdmissible(f"{alive_count} non-members left and none peelable", core)
            break
        y = heapq.heappop(heap)
        if overlap[y] == 0:
            records.append(PeelRecord(y, LEAF_DISJOINT))
        else:
            records.append(PeelRecord(y, SINGLE_LEAF, int(shared_pos[y]), free_nodes(y)))
        alive[y] = False
        alive_count -= 1
        for c in internal[y].tolist():
            usage[c] -= 1
            if usage[c] == 1:
                for w in users[c]:
                    if (
                        alive[w]
                        and w not in member_set
                        and w not in queued
                        and overlap[w] == 1
                        and len(free_nodes(w)) >= fl - 1
                    ):
                        heapq.heappush(heap, w)
                        queued.add(w)
    core = tuple(u for u in range(m) if alive[u] and u not in member_set)
    return core, records


def replay_peel(graph: AdaptiveProbeGraph, S: Iterable[int], records: list[PeelRecord]) -> Optional[str]:
    """Re-check every record against the unpeeled set of its own step.

    Returns ``None`` when all records hold, else a description of the first
    broken one.  Written directly from the definitions, without the
    incremental counters used by ``peel``.
    """
    members = set(int(x) for x in S)
    remaining = set(range(graph.m)) - members
    member_leaves = set()
    for x in members:
        member_leaves.update(graph.leaves(x))
    fl = graph.first_leaf
    for step, rec in enumerate(records):
        y = rec.y
        if y not in remaining:
            return f"step {step}: element {y} is not an unpeeled non-member"
        shared = [p for p in range(fl, graph.width) if int(graph.absolute[y, p]) in member_leaves]
        others = set()
        for u in (remaining | members) - {y}:
            others.update(graph.internal(u))
        if rec.case == LEAF_DISJOINT:
            if shared:
                return f"step {step}: element {y} shares leaves {shared}"
        elif rec.case == SINGLE_LEAF:
            if shared != [rec.shared_leaf]:
                return f"step {step}: element {y} shares leaves {shared}, recorded {rec.shared_leaf}"
            used = [p for p in range(fl) if int(graph.absolute[y, p]) in others]
            if len(used) > 1:
                return f"step {step}: element {y} has {len(used)} internal cells in use"
            if set(rec.free) != set(range(fl)) - set(used) or len(rec.free) < fl - 1:
                return f"step {step}: element {y} free nodes {rec.free} disagree"
        else:
            return f"step {step}: unknown case {rec.case!r}"
        remaining.discard(y)
    return None


# -- storing -----------------------------------------------------------------


def _steer_away(graph: AdaptiveProbeGraph, y: int, rec: PeelRecord, bits: np.ndarray) -> list[int]:
    """Set free internal nodes of ``y`` so its walk avoids the shared leaf."""
    row = graph.absolute[y]
    # path bits from root to the shared leaf (depth 3: two internal steps)
    p = rec.shared_leaf
    b2 = (p - 1) % 2
    parent = (p - 1) // 2
    b1 = (parent - 1) % 2
    written = []
    if 0 in rec.free:
        bits[row[0]] = 1 - b1
        written.append(int(row[0]))
    elif bits[row[0]] == b1:
        if parent not in rec.free:
            raise AssertionError("no free node left to steer with")
        bits[row[parent]] = 1 - b2
        written.append(int(row[parent]))
    return written


def _search_paths(graph: AdaptiveProbeGraph, elements: list, targets: dict, budget: int) -> Optional[dict]:
    """Choose one root-to-leaf path per element, writing the cells on it so
    that the walk follows it and ends on the element's target bit, with no
    cell written twice with different values.  Depth-first over path
    choices, branching on the most constrained element; returns ``{cell: bit}`` or ``None`` when none exists within
    ``budget`` search nodes.
    """
    t = graph.t
    paths = []
    for bits_read in range(2 ** (t - 1)):
        pos, steps = 0, []
        for level in range(t - 1):
            b = (bits_read >> (t - 2 - level)) & 1
            steps.append((pos, b))
            pos = 2 * pos + 1 + b
        paths.append((steps, pos))
    options = []
    for u in elements:
        row = graph.absolute[u].tolist()
        options.append([[(row[p], b) for p, b in steps] + [(row[leaf], targets[u])] for steps, leaf in paths])
    assign: dict = {}
    visited = 0

    def fits(writes) -> bool:
        return all(assign.get(c, v) == v for c, v in writes)

    def go(todo: list) -> bool:
        # branch on the element with the fewest consistent paths left
        nonlocal visited
        if not todo:
            return True
        best = None
        for i in todo:
            ok = [w for w in options[i] if fits(w)]
            if best is None or len(ok) < len(best[1]):
                best = (i, ok)
                if not ok:
                    return False
        i, ok = best
        rest = [j for j in todo if j != i]
        for writes in ok:
            visited += 1
            if visited > budget:
                return False
            fresh = [c for c, _ in writes if c not in assign]
            assign.update(writes)
            if go(rest):
                return True
            for c in fresh:
                del assign[c]
        return False

    return assign if go(list(range(len(options)))) else None


def store_three_probe(
    scheme: Scheme,
    S: Iterable[int],
    *,
    core_solver: str = "auto",
    search_budget: int = 200_000,
    return_trace: bool = False,
):
    """Memory of ``7s`` bits representing ``S``, verified on all queries.

    Non-members are peeled first; the members and the unpeeled core then get
    five private cells each (Hall matching) which force their answers, and
    the peeled elements are unwound last-in first-out.  With
    ``core_solver="auto"`` a core the matching cannot serve (or a peel stuck
    above its threshold) is instead solved exactly by choosing a
    consistent root-to-leaf path for every core element; ``"hall"`` keeps the
    matching as the only option.
    """
    if core_solver not in ("auto", "hall"):
        raise ValueError(f"unknown core solver {core_solver!r}")
    members = check_set(scheme, S, scheme.params.n)
    graph: AdaptiveProbeGraph = scheme.graph
    if graph.t != 3:
        raise ValueError("store_three_probe needs a depth-3 graph")
    core, records = peel(graph, members, scheme.params.n, target=0, strict=core_solver == "hall")
    hall = sorted(members + core)
    member_set = set(members)
    bits = np.zeros(scheme.total_bits, dtype=np.uint8)
    over = len(core) > peel_threshold(scheme.m, scheme.params.n)
    try:
        if over:
            raise NoMatching("core larger than the peel threshold")
        private = hall_b_matching([graph.absolute[u].tolist() for u in hall], 5)
    except NoMatching:
        if core_solver == "hall":
            raise
        writes = _search_paths(graph, hall, {u: int(u in member_set) for u in hall}, search_budget)
        if writes is None:
            raise NoMatching(f"no consistent path choice for a core of {len(hall)} elements") from None
        for c, v in writes.items():
            bits[c] = v
    else:
        for u, cells in zip(hall, private):
            cells = set(cells)
            row = graph.absolute[u].tolist()
            controlled = [p for p in range(graph.width) if row[p] in cells]
            force_answer(row, controlled, int(u in member_set), bits)
    protected = set()
    for u in hall:
        protected.update(graph.internal(u))
    fl = graph.first_leaf
    for rec in reversed(records):
        y = rec.y
        row = graph.absolute[y]
        if rec.case == LEAF_DISJOINT:
            bits[row[fl:]] = 0
        else:
            bits[[c for p, c in enumerate(row.tolist()) if p >= fl and p != rec.shared_leaf]] = 0
            for c in _steer_away(graph, y, rec, bits):
                if c in protected:
                    raise AssertionError(f"steering element {y} rewrote a protected cell {c}")
        protected.update(graph.internal(y))
    memory = BitMemory(bits)
    want = np.zeros(scheme.m, dtype=bool)
    want[list(members)] = True
    bad = np.flatnonzero(scheme.answers(memory) != want)
    if bad.size:
        raise VerificationFailed(f"element {int(bad[0])} answered wrongly for S={list(members)}", int(bad[0]))
    if return_trace:
        return memory, core, records
    return memory


# -- construction ------------------------------------------------------------


def build_three_probe_scheme(
    m: int,
    n: int,
    seed: int = 0,
    *,
    s_override: Optional[int] = None,
    fallback: bool = True,
    validate_sets: int = 200,
    expansion_r_max: int = 3,
    max_retries: int = 20,
) -> Scheme:
    """Sample a depth-3 probe graph and validate it.

    Validation runs an exhaustive expansion check (factor 5, sets up to
    ``expansion_r_max``) and stores ``validate_sets`` random sets.  A graph
    failing either is resampled.  With the default block size the
    characteristic vector is returned whenever ``7s >= m`` and ``fallback``
    is set.
    """
    if m < 2 or not 1 <= n <= m:
        raise ValueError("need m >= 2 and 1 <= n <= m")
    s = default_block_size(m, n) if s_override is None else int(s_override)
    if s_override is None and 7 * s >= m and fallback:
        return build_charvec_scheme(m, n, seed)
    last = "no attempt made"
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        scheme = scheme_from_rows(m, n, s, rng.integers(0, s, size=(m, 7)), seed)
        if expansion_r_max > 0:
            rep = check_expansion(scheme.graph.as_bipartite(), expansion_r_max, 5)
            if not rep.ok:
                last = f"expansion violated by {rep.witness}"
                continue
        if validate_sets > 0:
            rep = verify_sampled(scheme, store_three_probe, n, validate_sets, seed=attempt)
            if not rep.ok:
                last = rep.failures[0].reason
                continue
        return scheme
    raise RetriesExhausted(f"no valid depth-3 graph in {max_retries} attempts (last: {last})")

