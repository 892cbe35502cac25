"""Deterministic bit-probe set-membership schemes and lower-bound adversaries."""

from .core import (
    BitMemory,
    Kind,
    Scheme,
    SchemeParams,
    make_systematic,
    query,
    verify_exhaustive,
    verify_sampled,
)
from .schemes import build, store

__version__ = "0.1.0"

__all__ = [
    "BitMemory",
    "Kind",
    "Scheme",
    "SchemeParams",
    "build",
    "make_systematic",
    "query",
    "store",
    "verify_exhaustive",
    "verify_sampled",
]
