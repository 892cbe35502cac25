"""Forcing a decision tree's answer through the nodes one controls."""

from __future__ import annotations

from typing import Collection, Sequence

import numpy as np

from .errors import TooFewControlled


def _uncontrolled(pos: int, internal: int, controlled: Collection[int]) -> int:
    if pos >= internal:
        return 0
    own = 0 if pos in controlled else 1
    return own + _uncontrolled(2 * pos + 1, internal, controlled) + _uncontrolled(2 * pos + 2, internal, controlled)


def force_answer(
    addresses: Sequence[int], controlled: Collection[int], b: int, bits: np.ndarray
) -> dict[int, int]:
    """Write the controlled nodes of a systematic tree so it answers ``b``.

    ``addresses`` lists the tree's memory cells in heap order and
    ``controlled`` holds node positions we may write.  Requires at most
    ``depth - 1`` uncontrolled positions.  The answer is then ``b`` for
    every value of the uncontrolled cells: a controlled node steers into the
    child subtree holding fewer uncontrolled nodes (left on ties), while an
    uncontrolled node has both subtrees forced.  ``bits`` is updated in
    place; the writes are returned as ``{cell: bit}``.
    """
    internal = len(addresses)
    depth = (internal + 1).bit_length() - 1
    if internal != 2**depth - 1:
        raise ValueError("address list is not a complete tree")
    controlled = {int(p) for p in controlled}
    if any(not 0 <= p < internal for p in controlled):
        raise ValueError("controlled position outside the tree")
    cells = [int(addresses[p]) for p in controlled]
    if len(set(cells)) != len(cells):
        raise ValueError("two controlled positions share a memory cell")
    free = _uncontrolled(0, internal, controlled)
    if free > depth - 1:
        raise TooFewControlled(f"{free} uncontrolled nodes in a depth-{depth} tree (at most {depth - 1} allowed)")
    writes: dict[int, int] = {}

    def put(pos: int, bit: int) -> None:
        cell = int(addresses[pos])
        writes[cell] = bit
        bits[cell] = bit

    def force(pos: int) -> None:
        left, right = 2 * pos + 1, 2 * pos + 2
        if left >= internal:
            if pos in controlled:
                put(pos, b)
                return
            raise AssertionError("uncontrolled leaf-level node under a valid budget")
        if pos in controlled:
            go_right = _uncontrolled(right, internal, controlled) < _uncontrolled(left, internal, controlled)
            put(pos, int(go_right))
            force(right if go_right else left)
        else:
            force(left)
            force(right)

    force(0)
    return writes
