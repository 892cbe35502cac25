"""2-SAT via the implication graph and strongly connected components.

A literal is a pair ``(var, polarity)``; ``(3, True)`` is ``x3`` and
``(3, False)`` is ``not x3``.  A clause ``(a, b)`` is the disjunction
``a or b``, equivalent to the implications ``not a -> b`` and ``not b -> a``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

Literal = tuple  # (var, polarity)
Clause = tuple  # (Literal, Literal)


@dataclass
class TwoSatInstance:
    num_vars: int
    clauses: list = field(default_factory=list)

    def __post_init__(self):
        clauses, self.clauses = self.clauses, []
        for a, b in clauses:
            self.add(a, b)

    def add(self, a: Literal, b: Literal) -> None:
        a, b = (int(a[0]), bool(a[1])), (int(b[0]), bool(b[1]))
        for var, _ in (a, b):
            if not 0 <= var < self.num_vars:
                raise ValueError(f"variable {var} outside [0, {self.num_vars})")
        self.clauses.append((a, b))

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        return all(
            bool(assignment[va]) == pa or bool(assignment[vb]) == pb
            for (va, pa), (vb, pb) in self.clauses
        )


@dataclass
class Satisfiable:
    assignment: list

    def __bool__(self) -> bool:
        return True


@dataclass
class UnsatWitness:
    """Implication chains ``lit -> ... -> not lit`` and back.

    Each chain is a list of literals; consecutive literals are linked by the
    clause at the same index in ``chain_clauses``.
    """

    literal: Literal
    chain: list
    chain_clauses: list
    back_chain: list
    back_clauses: list


@dataclass
class Unsatisfiable:
    witness: UnsatWitness

    def __bool__(self) -> bool:
        return False


def _node(lit: Literal) -> int:
    var, pol = lit
    return 2 * var + (0 if pol else 1)


def _lit(node: int) -> Literal:
    return (node >> 1, not (node & 1))


def _implication_graph(instance: TwoSatInstance):
    size = 2 * instance.num_vars
    succ = [[] for _ in range(size)]
    for idx, (a, b) in enumerate(instance.clauses):
        na, nb = _node(a), _node(b)
        succ[na ^ 1].append((nb, idx))
        succ[nb ^ 1].append((na, idx))
    return succ


def _tarjan(succ) -> list:
    """Component id per node; ids are in reverse topological order."""
    size = len(succ)
    index = [-1] * size
    low = [0] * size
    comp = [-1] * size
    on_stack = [False] * size
    stack = []
    counter = 0
    ncomp = 0
    for root in range(size):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            edges = succ[v]
            if i < len(edges):
                work[-1] = (v, i + 1)
                w = edges[i][0]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return comp


def _path(succ, src: int, dst: int):
    prev = {src: None}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        if v == dst:
            break
        for w, idx in succ[v]:
            if w not in prev:
                prev[w] = (v, idx)
                queue.append(w)
    if dst not in prev:
        return None
    nodes, clauses = [dst], []
    cur = dst
    while prev[cur] is not None:
        v, idx = prev[cur]
        nodes.append(v)
        clauses.append(idx)
        cur = v
    nodes.reverse()
    clauses.reverse()
    return [_lit(v) for v in nodes], clauses


def solve(instance: TwoSatInstance):
    """Return ``Satisfiable(assignment)`` or ``Unsatisfiable(witness)``.

    The model is the canonical SCC-order one: ``x`` is true iff its
    component comes after the component of ``not x`` in topological order.
    """
    succ = _implication_graph(instance)
    comp = _tarjan(succ)
    for var in range(instance.num_vars):
        pos, neg = 2 * var, 2 * var + 1
        if comp[pos] == comp[neg]:
            chain, chain_clauses = _path(succ, pos, neg)
            back, back_clauses = _path(succ, neg, pos)
            return Unsatisfiable(UnsatWitness((var, True), chain, chain_clauses, back, back_clauses))
    assignment = [comp[2 * v] < comp[2 * v + 1] for v in range(instance.num_vars)]
    if not instance.satisfied_by(assignment):
        raise AssertionError("2-SAT model failed re-check")
    return Satisfiable(assignment)


def check_witness(instance: TwoSatInstance, witness: UnsatWitness) -> bool:
    """Confirm both implication chains are valid in ``instance``."""
    var, pol = witness.literal
    neg = (var, not pol)

    def valid(chain, clause_ids, start, end) -> bool:
        if not chain or chain[0] != start or chain[-1] != end:
            return False
        if len(clause_ids) != len(chain) - 1:
            return False
        for (u, v), idx in zip(zip(chain, chain[1:]), clause_ids):
            a, b = instance.clauses[idx]
            not_u = (u[0], not u[1])
            if not ((a == not_u and b == v) or (b == not_u and a == v)):
                return False
        return True

    return valid(witness.chain, witness.chain_clauses, witness.literal, neg) and valid(
        witness.back_chain, witness.back_clauses, neg, witness.literal
    )
