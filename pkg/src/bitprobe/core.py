"""Bit memories, decision-tree schemes, the systematic transform and the
exhaustive correctness oracle.

Every scheme in this package is compiled to a *tree table*: for each element
``u`` a complete binary decision tree of depth ``t`` stored in heap order
(root at position 0, the child reached after reading bit ``b`` at position
``p`` is ``2p + 1 + b``).  Leaves are either explicit Yes/No values or, for
systematic schemes, implicitly the last bit read.  The same table drives
single queries (with a probe trace) and vectorised evaluation over many
memories at once.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, CorruptScheme, StoreError


class Kind(enum.IntEnum):
    CHARVEC = 0
    TWO_PROBE = 1
    THREE_PROBE = 2
    NON_ADAPTIVE = 3
    ADAPTIVE = 4
    TREES = 5

    @property
    def label(self) -> str:
        return _KIND_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Kind":
        for kind, name in _KIND_LABELS.items():
            if name == label:
                return kind
        raise ValueError(f"unknown scheme kind {label!r}")


_KIND_LABELS = {
    Kind.CHARVEC: "charvec",
    Kind.TWO_PROBE: "two",
    Kind.THREE_PROBE: "three",
    Kind.NON_ADAPTIVE: "nonadaptive",
    Kind.ADAPTIVE: "adaptive",
    Kind.TREES: "trees",
}


def adaptive_split(t: int) -> tuple[int, int]:
    """Probe split (non-adaptive part, adaptive part) of the AND-composed scheme."""
    return (t - 3) // 2, (t + 3) // 2


def expected_total_bits(kind: Kind, t: int, s: int, m: int) -> Optional[int]:
    if kind == Kind.CHARVEC:
        return m
    if kind == Kind.TWO_PROBE:
        return 3 * s
    if kind == Kind.THREE_PROBE:
        return 7 * s
    if kind == Kind.NON_ADAPTIVE:
        return t * s
    if kind == Kind.ADAPTIVE:
        t1, t2 = adaptive_split(t)
        return t1 * s + (2**t2 - 1) * s
    return None


@dataclass(frozen=True)
class SchemeParams:
    m: int
    n: int
    t: int
    s: int
    total_bits: int
    kind: Kind
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 1 <= self.n <= self.m:
            raise ValueError("need 1 <= n <= m")
        if self.t < 1 or self.s < 1:
            raise ValueError("t and s must be >= 1")
        want = expected_total_bits(self.kind, self.t, self.s, self.m)
        if want is not None and want != self.total_bits:
            raise ValueError(
                f"total_bits={self.total_bits} inconsistent with kind "
                f"{self.kind.label} (expected {want})"
            )


class BitMemory:
    """Immutable fixed-length bit array.

    Reads outside ``[0, len)`` raise ``IndexError``; there is no default value.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits: Iterable[int]):
        arr = np.array(bits, dtype=np.uint8).reshape(-1)
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def zeros(cls, length: int) -> "BitMemory":
        return cls(np.zeros(length, dtype=np.uint8))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self) -> int:
        return int(self._bits.size)

    def __getitem__(self, index: int) -> int:
        index = int(index)
        if not 0 <= index < self._bits.size:
            raise IndexError(f"bit address {index} outside memory of {self._bits.size} bits")
        return int(self._bits[index])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMemory):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash((len(self), self.to_bytes()))

    def __repr__(self) -> str:
        shown = "".join(map(str, self._bits[:64].tolist()))
        more = "..." if len(self) > 64 else ""
        return f"BitMemory({len(self)} bits: {shown}{more})"

    def ones(self) -> list[int]:
        return np.flatnonzero(self._bits).tolist()

    def with_bits(self, updates: dict[int, int]) -> "BitMemory":
        arr = self._bits.copy()
        for addr, bit in updates.items():
            if not 0 <= addr < arr.size:
                raise IndexError(f"bit address {addr} outside memory of {arr.size} bits")
            arr[addr] = bit
        return BitMemory(arr)

    def to_bytes(self) -> bytes:
        """Pack 8 bits per byte; bit ``i`` is bit ``i % 8`` of byte ``i // 8``."""
        return np.packbits(self._bits, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitMemory":
        need = (length + 7) // 8
        if len(data) != need:
            raise CorruptScheme(f"expected {need} payload bytes for {length} bits, got {len(data)}")
        raw = np.frombuffer(data, dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")
        if bits[length:].any():
            raise CorruptScheme("nonzero padding bits after memory payload")
        return cls(bits[:length])


@dataclass(frozen=True)
class DecisionTree:
    """One element's depth-``t`` tree in heap order.

    ``leaves`` is ``None`` for a systematic tree (answer = last bit read),
    otherwise a tuple of ``2**t`` answers indexed by the bits read, first
    bit most significant.
    """

    addresses: tuple
    leaves: Optional[tuple] = None

    @property
    def depth(self) -> int:
        return (len(self.addresses) + 1).bit_length() - 1

    def evaluate(self, memory: BitMemory) -> "QueryResult":
        node = 0
        trace = []
        last = 0
        internal = len(self.addresses)
        while node < internal:
            addr = self.addresses[node]
            try:
                last = memory[addr]
            except IndexError as exc:
                raise CorruptScheme(str(exc)) from None
            trace.append((addr, last))
            node = 2 * node + 1 + last
        if self.leaves is None:
            answer = bool(last)
        else:
            answer = bool(self.leaves[node - internal])
        return QueryResult(answer, tuple(trace))


@dataclass(frozen=True)
class QueryResult:
    answer: bool
    trace: tuple

    def __str__(self) -> str:
        return "Yes" if self.answer else "No"


@dataclass(frozen=True, eq=False)
class Scheme:
    """A compiled (m, n, s, t)-scheme: parameters plus a tree table.

    ``graph`` keeps the kind-specific query graph the table was compiled
    from; storers consult it.
    """

    params: SchemeParams
    addresses: np.ndarray
    leaves: Optional[np.ndarray] = None
    graph: object = field(default=None, repr=False)

    def __post_init__(self):
        p = self.params
        addr = np.array(self.addresses, dtype=np.int64)
        width = 2**p.t - 1
        if addr.shape != (p.m, width):
            raise CorruptScheme(f"address table shape {addr.shape}, expected {(p.m, width)}")
        if addr.size and (addr.min() < 0 or addr.max() >= p.total_bits):
            raise CorruptScheme("address table points outside memory")
        addr.flags.writeable = False
        object.__setattr__(self, "addresses", addr)
        if self.leaves is not None:
            lv = np.array(self.leaves, dtype=bool)
            if lv.shape != (p.m, 2**p.t):
                raise CorruptScheme(f"leaf table shape {lv.shape}, expected {(p.m, 2**p.t)}")
            lv.flags.writeable = False
            object.__setattr__(self, "leaves", lv)

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def t(self) -> int:
        return self.params.t

    @property
    def total_bits(self) -> int:
        return self.params.total_bits

    @property
    def is_systematic(self) -> bool:
        if self.leaves is None:
            return True
        pattern = np.tile([False, True], 2 ** (self.t - 1))
        return bool((self.leaves == pattern).all())

    def tree(self, u: int) -> DecisionTree:
        leaves = None if self.leaves is None else tuple(bool(x) for x in self.leaves[u])
        return DecisionTree(tuple(int(a) for a in self.addresses[u]), leaves)

    def answers(self, memory: BitMemory) -> np.ndarray:
        """Answers of all ``m`` queries against one memory."""
        if len(memory) != self.total_bits:
            raise ValueError(f"memory has {len(memory)} bits, scheme needs {self.total_bits}")
        return evaluate_table(self.addresses, self.leaves, memory.bits)

    def answer_matrix(self, memories: np.ndarray, elements: Optional[Sequence[int]] = None) -> np.ndarray:
        """Answers for a stack of memories, shape ``(M, total_bits)`` -> ``(M, k)``."""
        memories = np.asarray(memories, dtype=np.uint8)
        addr = self.addresses if elements is None else self.addresses[list(elements)]
        leaves = None
        if self.leaves is not None:
            leaves = self.leaves if elements is None else self.leaves[list(elements)]
        return evaluate_table(addr, leaves, memories)


def evaluate_table(addresses: np.ndarray, leaves: Optional[np.ndarray], bits: np.ndarray) -> np.ndarray:
    k, width = addresses.shape
    t = (width + 1).bit_length() - 1
    rows = np.arange(k)
    first = bits[..., addresses[:, 0]]  # every root is position 0
    if t == 1 and leaves is None:
        return first.astype(bool)
    last = first.astype(np.int64)
    node = 1 + last
    for _ in range(t - 1):
        addr = addresses[rows, node]
        if bits.ndim == 1:
            last = bits[addr].astype(np.int64)
        else:
            last = np.take_along_axis(bits, addr, axis=-1).astype(np.int64)
        node = 2 * node + 1 + last
    if leaves is None:
        return last.astype(bool)
    return leaves[rows, node - width]


def query(scheme: Scheme, memory: BitMemory, u: int) -> QueryResult:
    """Evaluate element ``u``'s decision tree, returning the answer and probe trace."""
    if not 0 <= u < scheme.m:
        raise ValueError(f"element {u} outside universe [0, {scheme.m})")
    if len(memory) != scheme.total_bits:
        raise ValueError(f"memory has {len(memory)} bits, scheme needs {scheme.total_bits}")
    return scheme.tree(u).evaluate(memory)


def check_set(scheme_or_m, S: Iterable[int], n: Optional[int] = None) -> tuple[int, ...]:
    m = scheme_or_m.m if isinstance(scheme_or_m, Scheme) else int(scheme_or_m)
    members = tuple(sorted(int(x) for x in S))
    if len(set(members)) != len(members):
        raise ValueError("set contains duplicates")
    if members and (members[0] < 0 or members[-1] >= m):
        raise ValueError(f"set elements must lie in [0, {m})")
    if n is not None and len(members) > n:
        raise ValueError(f"set has {len(members)} elements, scheme stores at most {n}")
    return members


# -- characteristic vector --------------------------------------------------


def build_charvec_scheme(m: int, n: int, seed: int = 0) -> Scheme:
    params = SchemeParams(m=m, n=n, t=1, s=m, total_bits=m, kind=Kind.CHARVEC, seed=seed)
    return Scheme(params, np.arange(m, dtype=np.int64).reshape(m, 1))


def store_charvec(scheme: Scheme, S: Iterable[int]) -> BitMemory:
    members = check_set(scheme, S, scheme.params.n)
    bits = np.zeros(scheme.total_bits, dtype=np.uint8)
    bits[list(members)] = 1
    return BitMemory(bits)


def store_charvec_batch(scheme: Scheme, sets: np.ndarray) -> np.ndarray:
    """Memories for a batch of equal-size sets, one per row of ``sets``."""
    sets = np.asarray(sets, dtype=np.int64)
    bits = np.zeros((len(sets), scheme.total_bits), dtype=np.uint8)
    bits[np.arange(len(sets))[:, None], sets] = 1
    return bits


def random_tree_scheme(m: int, t: int, total_bits: int, seed: int, *, systematic: bool = False, n: int = 1) -> Scheme:
    """Scheme with uniformly random probe addresses (and random Yes/No
    leaves unless ``systematic``); used for transform tests and as
    adversary targets."""
    rng = np.random.default_rng(seed)
    addresses = rng.integers(0, total_bits, size=(m, 2**t - 1))
    leaves = None if systematic else rng.integers(0, 2, size=(m, 2**t)).astype(bool)
    params = SchemeParams(m=m, n=min(n, m), t=t, s=total_bits, total_bits=total_bits, kind=Kind.TREES, seed=seed)
    return Scheme(params, addresses, leaves)


# -- systematic transform ---------------------------------------------------

Storer = Callable[[Scheme, Iterable[int]], BitMemory]


def make_systematic(scheme: Scheme, storer: Optional[Storer] = None) -> tuple[Scheme, Optional[Storer]]:
    """Turn any scheme into a systematic one over ``2s + 2`` bits.

    Layout: the original bits ``B``, their complements ``C``, then a constant
    0 cell and a constant 1 cell.  Each tree keeps its first ``t - 1`` probes;
    the final probe is redirected so that the bit it reads equals the leaf
    answer of the original tree.
    """
    p = scheme.params
    N = p.total_bits
    t = p.t
    zero_cell, one_cell = 2 * N, 2 * N + 1
    addr = scheme.addresses.copy()
    if scheme.leaves is not None:
        first_last = 2 ** (t - 1) - 1
        for j in range(2 ** (t - 1)):
            pos = first_last + j
            on0 = scheme.leaves[:, 2 * j]
            on1 = scheme.leaves[:, 2 * j + 1]
            col = scheme.addresses[:, pos]
            addr[:, pos] = np.select(
                [~on0 & ~on1, on0 & on1, ~on0 & on1],
                [zero_cell, one_cell, col],
                default=N + col,
            )
    params = SchemeParams(m=p.m, n=p.n, t=t, s=N, total_bits=2 * N + 2, kind=Kind.TREES, seed=p.seed)
    new_scheme = Scheme(params, addr, None, graph=("systematic", scheme))

    if storer is None:
        return new_scheme, None

    def systematic_storer(_scheme: Scheme, S: Iterable[int]) -> BitMemory:
        base = storer(scheme, S).bits
        return BitMemory(np.concatenate([base, 1 - base, [0, 1]]))

    return new_scheme, systematic_storer


# -- correctness oracle ------------------------------------------------------


@dataclass
class Failure:
    S: tuple
    u: Optional[int]
    reason: str


@dataclass
class VerifyReport:
    sets_tested: int = 0
    queries: int = 0
    failures: list = field(default_factory=list)
    exhaustive: bool = True
    seed: Optional[int] = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        mode = "exhaustive" if self.exhaustive else f"sampled (seed {self.seed})"
        head = f"{mode}: {self.sets_tested} sets, {self.queries} queries, {len(self.failures)} failures"
        lines = [head]
        for f in self.failures:
            where = "store failed" if f.u is None else f"element {f.u}"
            lines.append(f"  S={list(f.S)}: {where}: {f.reason}")
        return "\n".join(lines)


def count_sets(m: int, n: int) -> int:
    return sum(math.comb(m, k) for k in range(min(n, m) + 1))


def _check_one(scheme: Scheme, storer: Storer, S: tuple, report: VerifyReport) -> None:
    report.sets_tested += 1
    try:
        memory = storer(scheme, S)
    except StoreError as exc:
        report.failures.append(Failure(S, None, f"{type(exc).__name__}: {exc}"))
        return
    got = scheme.answers(memory)
    want = np.zeros(scheme.m, dtype=bool)
    want[list(S)] = True
    report.queries += scheme.m
    bad = np.flatnonzero(got != want)
    if bad.size:
        u = int(bad[0])
        report.failures.append(Failure(S, u, "answered Yes" if got[u] else "answered No"))


def verify_exhaustive(
    scheme: Scheme, storer: Storer, n: int, *, budget: int = 5_000_000, max_failures: int = 1
) -> VerifyReport:
    """Store every set of size at most ``n`` and check all ``m`` answers."""
    total = count_sets(scheme.m, n)
    if total > budget:
        raise BudgetExceeded(f"{total} sets exceed the verification budget {budget}")
    report = VerifyReport()
    for k in range(min(n, scheme.m) + 1):
        for S in itertools.combinations(range(scheme.m), k):
            _check_one(scheme, storer, S, report)
            if len(report.failures) >= max_failures:
                return report
    return report


BatchStorer = Callable[[Scheme, np.ndarray], np.ndarray]


def verify_exhaustive_batched(
    scheme: Scheme, batch_storer: BatchStorer, n: int, *, budget: int = 200_000_000,
    batch: int = 50_000, max_failures: int = 1,
) -> VerifyReport:
    """``verify_exhaustive`` for storers that map a whole batch of sets to a
    stack of memories at once; answers are evaluated vectorised."""
    total = count_sets(scheme.m, n)
    if total > budget:
        raise BudgetExceeded(f"{total} sets exceed the verification budget {budget}")
    report = VerifyReport()
    m = scheme.m
    for sets in _combination_batches(m, min(n, m), batch):
        got = evaluate_table(scheme.addresses, scheme.leaves, batch_storer(scheme, sets))
        want = np.zeros(got.shape, dtype=bool)
        want[np.arange(len(sets))[:, None], sets] = True
        np.not_equal(got, want, out=want)
        report.sets_tested += len(sets)
        report.queries += len(sets) * m
        bad_rows = np.flatnonzero(want.any(axis=1))
        for row in bad_rows[: max_failures - len(report.failures)]:
            u = int(np.flatnonzero(want[row])[0])
            S = tuple(sets[row].tolist())
            report.failures.append(Failure(S, u, "answered Yes" if got[row, u] else "answered No"))
        if len(report.failures) >= max_failures:
            return report
    return report


def _combination_batches(m: int, n: int, batch: int):
    """All subsets of ``range(m)`` of size ``<= n`` as sorted-row arrays.

    Sizes up to 3 come from one table each; larger sizes enumerate the
    first ``k - 3`` elements and append a shifted 3-subset table.
    """
    tails = {}
    for k in range(n + 1):
        if k <= 3:
            combos = list(itertools.combinations(range(m), k))
            rows = np.array(combos, dtype=np.int64).reshape(len(combos), k)
            for lo in range(0, len(rows), batch):
                yield rows[lo:lo + batch]
            continue
        for prefix in itertools.combinations(range(m), k - 3):
            start = prefix[-1] + 1
            r = m - start
            if r < 3:
                continue
            if r not in tails:
                tails[r] = np.array(list(itertools.combinations(range(r), 3)), dtype=np.int64)
            tail = tails[r] + start
            head = np.broadcast_to(np.array(prefix, dtype=np.int64), (len(tail), k - 3))
            yield np.concatenate([head, tail], axis=1)


def verify_sampled(
    scheme: Scheme, storer: Storer, n: int, samples: int, seed: int = 0, *, max_failures: int = 1
) -> VerifyReport:
    """Store ``samples`` random sets (size uniform in ``0..n``) and check all answers."""
    rng = np.random.default_rng(seed)
    report = VerifyReport(exhaustive=False, seed=seed)
    for _ in range(samples):
        k = int(rng.integers(0, min(n, scheme.m) + 1))
        S = tuple(sorted(rng.choice(scheme.m, size=k, replace=False).tolist()))
        _check_one(scheme, storer, S, report)
        if len(report.failures) >= max_failures:
            break
    return report
