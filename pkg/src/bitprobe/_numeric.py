"""Exact integer arithmetic for the block-size formulas."""

from __future__ import annotations

from typing import Optional


def iroot(x: int, k: int) -> int:
    """Largest integer ``r`` with ``r**k <= x`` (``x >= 0``, ``k >= 1``)."""
    if x < 0 or k < 1:
        raise ValueError("iroot needs x >= 0 and k >= 1")
    if x < 2 or k == 1:
        return x
    r = 1 << -(-x.bit_length() // k)  # an upper bound
    while True:
        nxt = ((k - 1) * r + x // r ** (k - 1)) // k
        if nxt >= r:
            break
        r = nxt
    while r**k > x:
        r -= 1
    while (r + 1) ** k <= x:
        r += 1
    return r


def ceil_root(x: int, k: int) -> int:
    """Smallest integer ``r`` with ``r**k >= x``."""
    r = iroot(x, k)
    return r if r**k == x else r + 1


def exact_lg(num: int, den: int = 1) -> Optional[int]:
    """``lg(num/den)`` when it is an integer, else ``None``."""
    if num <= 0 or den <= 0:
        raise ValueError("lg of a non-positive number")
    if num % den == 0:
        q = num // den
        if q & (q - 1) == 0:
            return q.bit_length() - 1
    return None


def ceil_mp(fn, digits: int = 50) -> int:
    """``ceil`` of a real computed by ``fn(mpmath)`` at ``digits`` significant digits.

    Only for values known to be irrational, so rounding cannot land on an
    integer boundary.
    """
    import mpmath

    with mpmath.workdps(digits):
        value = fn(mpmath)
        return int(mpmath.ceil(value))
