"""Schemes for odd ``t >= 5``: non-adaptive majority and the adaptive
AND-composition of a non-adaptive part with an adaptive tree part.

Both are built over an extended universe of ``m + n`` elements; the last
``n`` are padding used to bring every stored set to exactly ``n`` elements
and are never queried.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ._numeric import ceil_mp, ceil_root, exact_lg
from .core import BitMemory, Kind, Scheme, SchemeParams, adaptive_split, build_charvec_scheme, check_set, verify_sampled
from .errors import FormulaRegime, RetriesExhausted, UnsupportedT, VerificationFailed
from .forcing import force_answer
from .graphs import BipartiteGraph, check_expansion, hall_b_matching
from .threeprobe import AdaptiveProbeGraph

__all__ = [
    "AdaptivePairParams",
    "AdaptivePairGraph",
    "NonAdaptiveProbeGraph",
    "SurvivorSets",
    "adaptive_block_size",
    "build_adaptive_scheme",
    "build_nonadaptive_scheme",
    "force_answer",
    "nonadaptive_block_size",
    "pad_set",
    "store_adaptive",
    "store_nonadaptive",
    "survivor_sets",
    "t_set",
]


def _check_t(t: int) -> None:
    if t < 5 or t % 2 == 0:
        raise UnsupportedT(f"t={t}: these constructions need an odd t >= 5")


def pad_set(members: tuple, m: int, n: int) -> tuple:
    """``members`` plus the first ``n - |members|`` padding elements ``m, m+1, ...``."""
    return tuple(members) + tuple(range(m, m + n - len(members)))


@dataclass(frozen=True, eq=False)
class NonAdaptiveProbeGraph:
    """``rows[u, i]`` is the cell of ``u`` in block ``V_i`` (``i < t``)."""

    t: int
    s: int
    rows: np.ndarray
    offset: int = 0

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != self.t:
            raise ValueError(f"rows must have {self.t} columns")
        if rows.size and (rows.min() < 0 or rows.max() >= self.s):
            raise ValueError(f"cells must lie in [0, {self.s})")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        absolute = self.offset + rows + self.s * np.arange(self.t)
        absolute.flags.writeable = False
        object.__setattr__(self, "absolute", absolute)

    @property
    def size(self) -> int:
        return len(self.rows)

    def neighborhood(self, elements: Iterable[int]) -> set:
        out: set = set()
        for u in elements:
            out.update(self.absolute[u].tolist())
        return out

    def as_bipartite(self) -> BipartiteGraph:
        return BipartiteGraph(self.size, self.offset + self.s * self.t, tuple(map(tuple, self.absolute.tolist())))


# -- block-size formulas -----------------------------------------------------


def nonadaptive_block_size(m: int, n: int, t: int) -> int:
    """``ceil(60 m^(2/(t-1)) n^(1-2/(t-1)) lg(2m/n))``."""
    _check_t(t)
    e = t - 1
    lg = exact_lg(2 * m, n)
    if lg is not None:
        return ceil_root(60**e * lg**e * m**2 * n ** (e - 2), e)
    return ceil_mp(
        lambda mp: 60 * mp.power(m, mp.mpf(2) / e) * mp.power(n, 1 - mp.mpf(2) / e) * mp.log(mp.mpf(2 * m) / n, 2)
    )


def adaptive_block_size(m: int, n: int, t: int, *, max_digits: int = 200_000) -> int:
    """``ceil(exp(e^(2t) - t) m^(2/(t+1)) n^(1-2/(t+1)) lg m)``; astronomically large."""
    _check_t(t)
    digits = int(math.exp(2 * t) / math.log(10)) + 2 * len(str(m)) + 40
    if digits > max_digits:
        raise FormulaRegime(f"t={t}: block size has about {digits} digits")
    return ceil_mp(
        lambda mp: mp.exp(mp.exp(2 * t) - t)
        * mp.power(m, mp.mpf(2) / (t + 1))
        * mp.power(n, 1 - mp.mpf(2) / (t + 1))
        * mp.log(m, 2),
        digits,
    )


# -- non-adaptive majority scheme ---------------------------------------------


def _majority_leaves(t: int) -> np.ndarray:
    counts = np.array([bin(i).count("1") for i in range(2**t)])
    return counts >= (t + 1) // 2


def _path_independent_addresses(absolute: np.ndarray) -> np.ndarray:
    """Tree table in which every node of level ``i`` reads column ``i``."""
    t = absolute.shape[1]
    return np.repeat(absolute, [2**i for i in range(t)], axis=1)


def nonadaptive_scheme_from_rows(m: int, n: int, t: int, s: int, rows: np.ndarray, seed: int = 0) -> Scheme:
    graph = NonAdaptiveProbeGraph(t, s, rows)
    if graph.size != m + n:
        raise ValueError(f"need rows for m + n = {m + n} elements (padding included)")
    params = SchemeParams(m=m, n=n, t=t, s=s, total_bits=t * s, kind=Kind.NON_ADAPTIVE, seed=seed)
    addresses = _path_independent_addresses(graph.absolute[:m])
    leaves = np.tile(_majority_leaves(t), (m, 1))
    return Scheme(params, addresses, leaves, graph=graph)


def t_set(graph: NonAdaptiveProbeGraph, m: int, padded: tuple) -> tuple:
    """Real non-members meeting ``Gamma(padded)`` in at least ``(t+1)/2`` cells."""
    hood = np.zeros(graph.offset + graph.s * graph.t, dtype=bool)
    hood[graph.absolute[list(padded)].ravel()] = True
    hits = hood[graph.absolute[:m]].sum(axis=1)
    chosen = set(padded)
    return tuple(int(y) for y in np.flatnonzero(hits >= (graph.t + 1) // 2) if int(y) not in chosen)


def _verify(scheme: Scheme, memory: BitMemory, members: tuple) -> None:
    want = np.zeros(scheme.m, dtype=bool)
    want[list(members)] = True
    bad = np.flatnonzero(scheme.answers(memory) != want)
    if bad.size:
        raise VerificationFailed(f"element {int(bad[0])} answered wrongly for S={list(members)}", int(bad[0]))


def store_nonadaptive(scheme: Scheme, S: Iterable[int]) -> BitMemory:
    """Pad to ``n`` elements, give the padded set and its heavy non-members
    ``(t+1)/2`` private cells each, write 1 into members' private cells and
    0 everywhere else."""
    members = check_set(scheme, S, scheme.params.n)
    graph: NonAdaptiveProbeGraph = scheme.graph
    m, n, t = scheme.m, scheme.params.n, graph.t
    padded = pad_set(members, m, n)
    heavy = t_set(graph, m, padded)
    owners = list(padded) + list(heavy)
    private = hall_b_matching([graph.absolute[u].tolist() for u in owners], (t + 1) // 2)
    bits = np.zeros(scheme.total_bits, dtype=np.uint8)
    for u in members:
        bits[private[owners.index(u)]] = 1
    memory = BitMemory(bits)
    _verify(scheme, memory, members)
    return memory


def build_nonadaptive_scheme(
    m: int,
    n: int,
    t: int,
    seed: int = 0,
    *,
    s_override: Optional[int] = None,
    fallback: bool = True,
    validate_sets: int = 200,
    expansion_r_max: int = 3,
    max_retries: int = 20,
) -> Scheme:
    """Sample a non-adaptive ``t``-block graph over ``m + n`` elements.

    Validation: exhaustive expansion by ``(t+1)/2`` for small sets, the size
    of the heavy set on sampled stored sets against ``ceil(2n lg(2m/n))``,
    and checked storing of ``validate_sets`` random sets.
    """
    _check_t(t)
    if m < 2 or not 1 <= n <= m:
        raise ValueError("need m >= 2 and 1 <= n <= m")
    if s_override is None:
        s = nonadaptive_block_size(m, n, t)
        if t * s >= m and fallback:
            return build_charvec_scheme(m, n, seed)
    else:
        s = int(s_override)
    bound = _heavy_bound(m, n)
    last = "no attempt made"
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        scheme = nonadaptive_scheme_from_rows(m, n, t, s, rng.integers(0, s, size=(m + n, t)), seed)
        graph = scheme.graph
        if expansion_r_max > 0:
            rep = check_expansion(graph.as_bipartite(), expansion_r_max, (t + 1) // 2)
            if not rep.ok:
                last = f"expansion violated by {rep.witness}"
                continue
        spot = np.random.default_rng([seed, attempt, 1])
        sizes = [len(t_set(graph, m, pad_set(tuple(sorted(spot.choice(m, n, replace=False).tolist())), m, n)))
                 for _ in range(50)]
        if max(sizes) > bound:
            last = f"heavy set of size {max(sizes)} exceeds {bound}"
            continue
        if validate_sets > 0:
            rep = verify_sampled(scheme, store_nonadaptive, n, validate_sets, seed=attempt)
            if not rep.ok:
                last = rep.failures[0].reason
                continue
        return scheme
    raise RetriesExhausted(f"no valid non-adaptive graph in {max_retries} attempts (last: {last})")


def _heavy_bound(m: int, n: int) -> int:
    lg = exact_lg(2 * m, n)
    if lg is not None:
        return 2 * n * lg
    return ceil_mp(lambda mp: 2 * n * mp.log(mp.mpf(2 * m) / n, 2))


# -- adaptive AND-composed scheme -------------------------------------------


@dataclass(frozen=True)
class AdaptivePairParams:
    t: int
    t1: int
    t2: int
    alpha: int
    beta: int
    s: int

    @classmethod
    def for_t(cls, t: int, s: int) -> "AdaptivePairParams":
        _check_t(t)
        t1, t2 = adaptive_split(t)
        return cls(t, t1, t2, 2**t2 - 1, 2**t2 - t2, s)

    def __post_init__(self):
        if self.t1 + self.t2 != self.t:
            raise ValueError("t1 + t2 must equal t")
        if self.t2 >= 3 and self.beta < self.t2 + 1:
            raise ValueError("beta too small")


@dataclass(frozen=True, eq=False)
class AdaptivePairGraph:
    """Non-adaptive part ``g1`` (cells ``[0, t1 s)``) and adaptive part ``g2``
    (cells ``[t1 s, (t1 + alpha) s)``)."""

    pair: AdaptivePairParams
    g1: NonAdaptiveProbeGraph
    g2: AdaptiveProbeGraph

    @property
    def g2_absolute(self) -> np.ndarray:
        return self.g2.absolute + self.pair.t1 * self.pair.s

    def g2_leaves(self, u: int) -> set:
        return set(self.g2_absolute[u, self.g2.first_leaf :].tolist())


@dataclass(frozen=True)
class SurvivorSets:
    survivors: tuple
    survivors_plus: tuple


def survivor_sets(graph: AdaptivePairGraph, m: int, padded: tuple) -> SurvivorSets:
    """Real non-members whose whole non-adaptive neighborhood lies inside
    that of ``padded``, and those among them sharing an adaptive leaf with it."""
    g1 = graph.g1
    chosen = set(padded)
    total1 = max(g1.offset + g1.s * g1.t, 1)
    hood = np.zeros(total1, dtype=bool)
    if g1.t:
        hood[g1.absolute[list(padded)].ravel()] = True
        inside = hood[g1.absolute[:m]].all(axis=1)
    else:
        inside = np.ones(m, dtype=bool)
    surv = tuple(int(y) for y in np.flatnonzero(inside) if int(y) not in chosen)
    member_leaves = set()
    for u in padded:
        member_leaves |= graph.g2_leaves(u)
    plus = tuple(y for y in surv if graph.g2_leaves(y) & member_leaves)
    return SurvivorSets(surv, plus)


def adaptive_scheme_from_rows(
    m: int, n: int, t: int, s: int, rows1: np.ndarray, rows2: np.ndarray, seed: int = 0
) -> Scheme:
    pair = AdaptivePairParams.for_t(t, s)
    g1 = NonAdaptiveProbeGraph(pair.t1, s, np.asarray(rows1).reshape(-1, pair.t1))
    g2 = AdaptiveProbeGraph(pair.t2, s, rows2)
    if g1.size != m + n or g2.m != m + n:
        raise ValueError(f"need rows for m + n = {m + n} elements (padding included)")
    graph = AdaptivePairGraph(pair, g1, g2)
    params = SchemeParams(m=m, n=n, t=t, s=s, total_bits=(pair.t1 + pair.alpha) * s, kind=Kind.ADAPTIVE, seed=seed)
    t1, t2 = pair.t1, pair.t2
    top = _path_independent_addresses(g1.absolute[:m]) if t1 else np.zeros((m, 0), dtype=np.int64)
    g2abs = graph.g2_absolute[:m]
    parts = [top]
    for level in range(t2):
        lo = 2**level - 1
        block = g2abs[:, lo : lo + 2**level]
        parts.append(np.tile(block, (1, 2**t1)))  # same subtree under every prefix
    addresses = np.concatenate(parts, axis=1)
    idx = np.arange(2**t)
    answers = ((idx >> t2) == 2**t1 - 1) & (idx & 1 == 1)
    leaves = np.tile(answers, (m, 1))
    return Scheme(params, addresses, leaves, graph=graph)


def store_adaptive(scheme: Scheme, S: Iterable[int]) -> BitMemory:
    """Ones on the padded set's non-adaptive cells; forced adaptive answers
    for the padded set and the leaf-sharing survivors; zeros elsewhere."""
    members = check_set(scheme, S, scheme.params.n)
    graph: AdaptivePairGraph = scheme.graph
    m, n = scheme.m, scheme.params.n
    pair = graph.pair
    padded = pad_set(members, m, n)
    bits = np.zeros(scheme.total_bits, dtype=np.uint8)
    if pair.t1:
        bits[graph.g1.absolute[list(padded)].ravel()] = 1
    sets = survivor_sets(graph, m, padded)
    owners = list(padded) + list(sets.survivors_plus)
    g2abs = graph.g2_absolute
    private = hall_b_matching([g2abs[u].tolist() for u in owners], pair.beta)
    member_set = set(padded)
    for u, cells in zip(owners, private):
        cells = set(cells)
        row = g2abs[u].tolist()
        controlled = [p for p in range(pair.alpha) if row[p] in cells]
        force_answer(row, controlled, int(u in member_set), bits)
    memory = BitMemory(bits)
    _verify(scheme, memory, members)
    return memory


def build_adaptive_scheme(
    m: int,
    n: int,
    t: int,
    seed: int = 0,
    *,
    s_override: Optional[int] = None,
    fallback: bool = True,
    validate_sets: int = 200,
    expansion_r_max: int = 2,
    max_retries: int = 20,
) -> Scheme:
    """Sample the two graphs of the AND-composed scheme and validate them.

    Validation: survivor counts on sampled sets against
    ``10 m (n/s)^t1``, expansion by ``beta`` on small subsets of the
    adaptive part, then checked storing of ``validate_sets`` random sets.
    """
    _check_t(t)
    if m < 2 or not 1 <= n <= m:
        raise ValueError("need m >= 2 and 1 <= n <= m")
    t1, t2 = adaptive_split(t)
    if s_override is None:
        if not fallback:
            raise FormulaRegime("the default adaptive block size is astronomically large; pass s_override")
        s = adaptive_block_size(m, n, t)
        if (t1 + 2**t2 - 1) * s >= m:
            return build_charvec_scheme(m, n, seed)
    else:
        s = int(s_override)
    pair = AdaptivePairParams.for_t(t, s)
    bound = 10 * m * (n / s) ** t1
    last = "no attempt made"
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        rows1 = rng.integers(0, s, size=(m + n, t1))
        rows2 = rng.integers(0, s, size=(m + n, pair.alpha))
        scheme = adaptive_scheme_from_rows(m, n, t, s, rows1, rows2, seed)
        graph: AdaptivePairGraph = scheme.graph
        spot = np.random.default_rng([seed, attempt, 1])
        worst = max(
            len(survivor_sets(graph, m, pad_set(tuple(sorted(spot.choice(m, n, replace=False).tolist())), m, n)).survivors)
            for _ in range(50)
        )
        if worst > bound:
            last = f"{worst} survivors exceed {bound:.1f}"
            continue
        if expansion_r_max > 0:
            g2 = BipartiteGraph(m + n, scheme.total_bits, tuple(map(tuple, graph.g2_absolute.tolist())))
            rep = check_expansion(g2, expansion_r_max, pair.beta)
            if not rep.ok:
                last = f"expansion violated by {rep.witness}"
                continue
        if validate_sets > 0:
            rep = verify_sampled(scheme, store_adaptive, n, validate_sets, seed=attempt)
            if not rep.ok:
                last = rep.failures[0].reason
                continue
        return scheme
    raise RetriesExhausted(f"no valid adaptive pair in {max_retries} attempts (last: {last})")
