"""Dispatch from scheme kinds to their constructors and storers."""

from __future__ import annotations

from typing import Iterable, Optional

from .core import BatchStorer, BitMemory, Kind, Scheme, Storer, build_charvec_scheme, store_charvec, store_charvec_batch
from .multiprobe import build_adaptive_scheme, build_nonadaptive_scheme, store_adaptive, store_nonadaptive
from .threeprobe import build_three_probe_scheme, store_three_probe
from .twoprobe import build_two_probe_scheme, store_two_probe

_STORERS: dict = {
    Kind.CHARVEC: store_charvec,
    Kind.TWO_PROBE: store_two_probe,
    Kind.THREE_PROBE: store_three_probe,
    Kind.NON_ADAPTIVE: store_nonadaptive,
    Kind.ADAPTIVE: store_adaptive,
}

BUILDABLE = ("charvec", "two", "three", "nonadaptive", "adaptive")


def build(
    kind: str | Kind,
    m: int,
    n: int,
    t: Optional[int] = None,
    seed: int = 0,
    *,
    s_override: Optional[int] = None,
    fallback: bool = True,
) -> Scheme:
    """Construct a scheme of the named kind.

    ``t`` is only read by the multi-probe kinds, which require it.
    """
    kind = Kind.from_label(kind) if isinstance(kind, str) else Kind(kind)
    if kind == Kind.CHARVEC:
        return build_charvec_scheme(m, n, seed)
    if kind == Kind.TWO_PROBE:
        return build_two_probe_scheme(m, n, seed, s_override=s_override, fallback=fallback)
    if kind == Kind.THREE_PROBE:
        return build_three_probe_scheme(m, n, seed, s_override=s_override, fallback=fallback)
    if t is None:
        raise ValueError(f"kind {kind.label} needs t")
    if kind == Kind.NON_ADAPTIVE:
        return build_nonadaptive_scheme(m, n, t, seed, s_override=s_override, fallback=fallback)
    if kind == Kind.ADAPTIVE:
        return build_adaptive_scheme(m, n, t, seed, s_override=s_override, fallback=fallback)
    raise ValueError(f"kind {kind.label} has no constructor")


def storer_for(scheme: Scheme) -> Storer:
    try:
        return _STORERS[scheme.params.kind]
    except KeyError:
        raise ValueError(f"schemes of kind {scheme.params.kind.label} have no storer") from None


def batch_storer_for(scheme: Scheme) -> Optional[BatchStorer]:
    """Vectorised storer if the kind has one."""
    return store_charvec_batch if scheme.params.kind == Kind.CHARVEC else None


def store(scheme: Scheme, S: Iterable[int]) -> BitMemory:
    return storer_for(scheme)(scheme, S)
