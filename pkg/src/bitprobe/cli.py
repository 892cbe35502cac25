"""``bitprobe`` command line: gen, store, query, verify, attack, bench.

Exit codes: 0 success, 1 verification failure or fooling pair found,
2 usage or input error, 3 construction failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Optional, Sequence

from . import adversary, formats, report, schemes
from .core import query, verify_exhaustive, verify_exhaustive_batched, verify_sampled
from .errors import BitProbeError, BudgetExceeded, CorruptScheme, NotFound, StoreError

OK, FAILED, USAGE, CONSTRUCTION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_set(text: str) -> list[int]:
    """Comma-separated 0-indexed elements; duplicates are rejected."""
    text = text.strip()
    if not text:
        return []
    try:
        items = [int(tok) for tok in text.split(",")]
    except ValueError:
        raise UsageError(f"bad set {text!r}: expected comma-separated integers") from None
    if len(set(items)) != len(items):
        raise UsageError(f"set {text!r} contains duplicates")
    return items


def _load_scheme(path: str):
    try:
        return formats.load_scheme(Path(path).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read scheme: {exc}") from None
    except CorruptScheme as exc:
        raise UsageError(f"corrupt scheme file {path}: {exc}") from None


def _write(path: str, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def cmd_gen(args) -> int:
    t = args.t
    if args.kind in ("nonadaptive", "adaptive") and t is None:
        raise UsageError(f"--kind {args.kind} needs --t")
    try:
        scheme = schemes.build(args.kind, args.m, args.n, t, args.seed,
                               s_override=args.s_override, fallback=args.fallback)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except BitProbeError as exc:
        print(f"construction failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return CONSTRUCTION
    _write(args.output, formats.dump_scheme(scheme))
    p = scheme.params
    print(f"kind={p.kind.label} m={p.m} n={p.n} t={p.t} s={p.s} total_bits={p.total_bits} seed={p.seed}")
    return OK


def cmd_store(args) -> int:
    scheme = _load_scheme(args.scheme)
    members = parse_set(args.set)
    try:
        storer = schemes.storer_for(scheme)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        memory = storer(scheme, members)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except StoreError as exc:
        print(f"store failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED
    _write(args.output, formats.dump_memory(memory, scheme.params))
    print(f"stored {len(members)} elements in {len(memory)} bits")
    return OK


def cmd_query(args) -> int:
    scheme = _load_scheme(args.scheme)
    try:
        memory, params = formats.load_memory(Path(args.memory).read_bytes())
    except (OSError, CorruptScheme) as exc:
        raise UsageError(f"cannot load memory: {exc}") from None
    if params != scheme.params:
        raise UsageError("memory file was not produced for this scheme")
    try:
        result = query(scheme, memory, args.u)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(result)
    print("trace: " + " ".join(f"{addr}={bit}" for addr, bit in result.trace))
    return OK


def cmd_verify(args) -> int:
    scheme = _load_scheme(args.scheme)
    try:
        storer = schemes.storer_for(scheme)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    n = scheme.params.n
    try:
        if args.samples is not None:
            rep = verify_sampled(scheme, storer, n, args.samples, seed=args.seed)
        elif schemes.batch_storer_for(scheme) is not None:
            rep = verify_exhaustive_batched(scheme, schemes.batch_storer_for(scheme), n)
        else:
            rep = verify_exhaustive(scheme, storer, n)
    except BudgetExceeded as exc:
        raise UsageError(f"{exc}; use --samples") from None
    print(rep.summary())
    return OK if rep.ok else FAILED


def _attack_report(pair: adversary.FoolingPair) -> dict:
    data = {"S": list(pair.S), "T": list(pair.T), "validation": pair.validation}
    if pair.witnesses:
        data["forced"] = [{"cell": w.v, "bit": w.b, "S1": list(w.S1), "S0": list(w.S0),
                           "cycle_cells": list(w.cycle.vertices), "cycle_edges": list(w.cycle.edges)}
                          for w in pair.witnesses]
    if pair.regime is not None:
        data["regime"] = {"n_range": pair.regime.n_range, "space": pair.regime.space,
                          "space_bound": pair.regime.space_bound}
    return data


def cmd_attack(args) -> int:
    scheme = _load_scheme(args.scheme)
    n = args.n if args.n is not None else scheme.params.n
    try:
        pair = adversary.attack(scheme, n)
    except NotFound as exc:
        print(f"no fooling pair found: {exc}")
        return OK
    print(f"fooling pair found (n={n}): no memory accepts all of S and rejects all of T")
    print(f"  S = {list(pair.S)}")
    print(f"  T = {list(pair.T)}")
    for w in pair.witnesses:
        print(f"  cell {w.v} forced to {w.b} by a cycle of length {w.cycle.length} through cells {list(w.cycle.vertices)}")
    if pair.regime is not None and not pair.regime.inside:
        print("  parameters are outside the proven regime (best-effort search)")
    print(f"  confirmed by {pair.validation} check")
    print("--- json ---")
    print(json.dumps(_attack_report(pair), sort_keys=True))
    return FAILED


def cmd_bench(args) -> int:
    try:
        config = json.loads(Path(args.grid).read_text())
        cells = report.expand_grid(config)
    except (OSError, ValueError) as exc:
        raise UsageError(f"bad grid config: {exc}") from None
    run = partial(report.run_cell, timing=not args.no_timing)
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                rows = list(pool.map(run, cells))
        else:
            rows = [run(cell) for cell in cells]
    except AssertionError as exc:
        print(str(exc), file=sys.stderr)
        return FAILED
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except BitProbeError as exc:
        print(f"construction failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return CONSTRUCTION
    png = report.write_report(rows, Path(args.output))
    print(f"wrote {len(rows)} rows to {args.output} and a figure to {png}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bitprobe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen", help="construct a scheme file")
    p.add_argument("--kind", required=True, choices=schemes.BUILDABLE)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, default=None, help="probes (multi-probe kinds only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s-override", type=int, default=None)
    p.add_argument("--fallback", action="store_true",
                   help="return the characteristic vector when the formula is out of range")
    p.add_argument("-o", "--output", default="scheme.bps")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("store", help="store a set into a memory file")
    p.add_argument("-s", "--scheme", required=True)
    p.add_argument("--set", required=True, help='e.g. "3,7,19"')
    p.add_argument("-o", "--output", default="mem.bpm")
    p.set_defaults(func=cmd_store)

    p = sub.add_parser("query", help="answer one membership query")
    p.add_argument("-s", "--scheme", required=True)
    p.add_argument("-d", "--memory", required=True)
    p.add_argument("-u", type=int, required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="store sets and check every answer")
    p.add_argument("-s", "--scheme", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", help="all sets of size <= n (default)")
    mode.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attack", help="search for a fooling pair")
    p.add_argument("-s", "--scheme", required=True)
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="run a grid of builds and write CSV plus PNG")
    p.add_argument("--grid", required=True, help="JSON grid config")
    p.add_argument("-o", "--output", default="bench.csv")
    p.add_argument("--no-timing", action="store_true", help="leave the time columns empty")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
