"""Independent reference implementations used by the tests.

Each oracle is written from the definitions with brute force or a third
party library, sharing no code with the package under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath
import networkx as nx


def brute_force_2sat(num_vars: int, clauses) -> bool:
    for bits in itertools.product((False, True), repeat=num_vars):
        if all(bits[a] == pa or bits[b] == pb for (a, pa), (b, pb) in clauses):
            return True
    return False


def nx_girth(left: int, adjacency) -> float:
    g = nx.Graph()
    g.add_nodes_from(range(left))
    for v, row in enumerate(adjacency):
        for j in row:
            g.add_edge(v, ("r", j))
    return nx.girth(g)


def tree_answer(addresses, leaves, memory) -> bool:
    """Walk one heap-ordered tree recursively."""
    def walk(pos, last):
        if pos >= len(addresses):
            leaf = pos - len(addresses)
            return bool(last) if leaves is None else bool(leaves[leaf])
        bit = int(memory[addresses[pos]])
        return walk(2 * pos + 1 + bit, bit)

    return walk(0, 0)


def brute_force_b_matching(hoods, b) -> bool:
    """Backtracking over choices of ``b`` private vertices per element."""
    hoods = [sorted(set(h)) for h in hoods]

    def go(i, used):
        if i == len(hoods):
            return True
        free = [x for x in hoods[i] if x not in used]
        for pick in itertools.combinations(free, b):
            if go(i + 1, used | set(pick)):
                return True
        return False

    return go(0, frozenset())


def brute_force_expansion(adjacency, r_max, c):
    """Smallest-first violating set ``W`` with ``|N(W)| < c |W|``, or ``None``."""
    for r in range(1, r_max + 1):
        for W in itertools.combinations(range(len(adjacency)), r):
            hood = set().union(*(set(adjacency[v]) for v in W))
            if len(hood) < c * r:
                return W
    return None


def representable(addresses, leaves, S, T) -> bool:
    """Some memory over the touched cells accepts ``S`` and rejects ``T``."""
    elems = list(S) + list(T)
    cells = sorted({int(a) for u in elems for a in addresses[u]})
    for bits in itertools.product((0, 1), repeat=len(cells)):
        mem = dict(zip(cells, bits))
        lv = (lambda u: None) if leaves is None else (lambda u: leaves[u])
        if all(tree_answer(addresses[u], lv(u), mem) for u in S) and not any(
            tree_answer(addresses[u], lv(u), mem) for u in T
        ):
            return True
    return False


def pairing_edge_count(first_probes) -> int:
    counts = {}
    for c in first_probes:
        counts[c] = counts.get(c, 0) + 1
    return sum(k // 2 for k in counts.values())


# -- high-precision formula references -----------------------------------------

mpmath.mp.dps = 60


def _ceil(x) -> int:
    # values within 1e-40 of an integer are exact integers computed with rounding noise
    nearest = mpmath.nint(x)
    if abs(x - nearest) < mpmath.mpf(10) ** -40:
        return int(nearest)
    return int(mpmath.ceil(x))


def two_probe_s(m: int, n: int) -> int:
    return _ceil(4 * mpmath.power(m, 1 - mpmath.mpf(1) / (4 * n + 1)))


def three_probe_s(m: int, n: int) -> int:
    return _ceil(500 * mpmath.sqrt(m * n * mpmath.log(mpmath.mpf(2 * m) / n, 2)))


def nonadaptive_s(m: int, n: int, t: int) -> int:
    e = mpmath.mpf(2) / (t - 1)
    return _ceil(60 * mpmath.power(m, e) * mpmath.power(n, 1 - e) * mpmath.log(mpmath.mpf(2 * m) / n, 2))


def moore(v: int, n: int) -> Fraction | float:
    return float(mpmath.root(mpmath.mpf(v) / 2, n // 4) + 1)


def isqrt_exact(x: int) -> bool:
    return math.isqrt(x) ** 2 == x


# -- vectorised brute force ----------------------------------------------------

import numpy as np  # noqa: E402


def all_assignments(k: int) -> np.ndarray:
    """``2^k x k`` boolean matrix; row ``r`` holds the binary digits of ``r``."""
    return ((np.arange(2**k)[:, None] >> np.arange(k)) & 1).astype(bool)


def brute_force_2sat_np(num_vars: int, clauses) -> bool:
    A = all_assignments(num_vars)
    ok = np.ones(len(A), dtype=bool)
    for (a, pa), (b, pb) in clauses:
        ok &= (A[:, a] == pa) | (A[:, b] == pb)
        if not ok.any():
            return False
    return bool(ok.any())


def _tree_answers(row, leaf_row, pos, mems) -> np.ndarray:
    """Answers of one decision tree on every row of ``mems``."""
    width = len(row)
    local = np.array([pos[int(a)] for a in row])
    idx = np.arange(len(mems))
    node = np.zeros(len(mems), dtype=np.int64)
    last = np.zeros(len(mems), dtype=np.int64)
    while True:
        inside = node < width
        if not inside.any():
            break
        read = mems[idx, local[np.minimum(node, width - 1)]].astype(np.int64)
        last = np.where(inside, read, last)
        node = np.where(inside, 2 * node + 1 + read, node)
    if leaf_row is None:
        return last.astype(bool)
    return np.asarray(leaf_row, dtype=bool)[node - width]


def representable_np(addresses, leaves, S, T) -> bool:
    """``representable`` over all memories of the touched cells at once."""
    cells = sorted({int(a) for u in list(S) + list(T) for a in addresses[u]})
    pos = {c: i for i, c in enumerate(cells)}
    mems = all_assignments(len(cells))
    ok = np.ones(len(mems), dtype=bool)
    for u, want in [(u, True) for u in S] + [(u, False) for u in T]:
        ok &= _tree_answers(addresses[u], None if leaves is None else leaves[u], pos, mems) == want
    return bool(ok.any())


def forced_values_np(addresses, yes, no, v) -> set:
    """Values taken by cell ``v`` over all memories (on touched cells) that
    accept every element of ``yes`` and reject every element of ``no``."""
    cells = sorted({int(c) for x in list(yes) + list(no) for c in addresses[x]} | {int(v)})
    pos = {c: i for i, c in enumerate(cells)}
    mems = all_assignments(len(cells))
    keep = np.ones(len(mems), dtype=bool)
    for x, want in [(x, True) for x in yes] + [(x, False) for x in no]:
        keep &= _tree_answers(addresses[x], None, pos, mems) == want
    return {int(b) for b in np.unique(mems[keep, pos[int(v)]])}
