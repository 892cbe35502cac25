"""Benchmark rows, their CSV form and the summary figure."""

from __future__ import annotations

import csv
import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .adversary import lower_bound  # noqa: E402
from .core import verify_exhaustive, verify_sampled  # noqa: E402
from .schemes import build, storer_for  # noqa: E402


@dataclass(frozen=True)
class BenchRow:
    kind: str
    m: int
    n: int
    t: int
    s: int
    total_bits: int
    ratio: float
    lower_bound: Optional[float]
    lower_bound_formula: str
    seed: int
    build_seconds: Optional[float]
    store_seconds: Optional[float]
    verify_seconds: Optional[float]


FIELDS = [f.name for f in dataclasses.fields(BenchRow)]


@dataclass(frozen=True)
class BenchCell:
    kind: str
    m: int
    n: int
    t: Optional[int]
    seed: int
    samples: int = 200
    exhaustive: bool = False
    s_override: Optional[int] = None
    fallback: bool = True


_FIXED_T = {"charvec": 1, "two": 2, "three": 3}


def expand_grid(config: dict) -> list[BenchCell]:
    """Cartesian product of the grid lists, in key order kind, m, n, t, seed."""
    def as_list(key, default=None):
        value = config.get(key, default)
        if value is None:
            return [None]
        return list(value) if isinstance(value, (list, tuple)) else [value]

    unknown = set(config) - {"kinds", "m", "n", "t", "seeds", "samples", "exhaustive", "s_override", "fallback"}
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    if "kinds" not in config or "m" not in config or "n" not in config:
        raise ValueError("grid needs 'kinds', 'm' and 'n'")
    cells = []
    for kind in as_list("kinds"):
        ts = [_FIXED_T[kind]] if kind in _FIXED_T else as_list("t")
        for m in as_list("m"):
            for n in as_list("n"):
                for t in ts:
                    for seed in as_list("seeds", [0]):
                        cells.append(BenchCell(
                            kind, int(m), int(n), None if t is None else int(t), int(seed),
                            int(config.get("samples", 200)), bool(config.get("exhaustive", False)),
                            config.get("s_override"), bool(config.get("fallback", True)),
                        ))
    return cells


def run_cell(cell: BenchCell, timing: bool = True) -> BenchRow:
    clock = time.perf_counter
    t0 = clock()
    scheme = build(cell.kind, cell.m, cell.n, cell.t, cell.seed, s_override=cell.s_override, fallback=cell.fallback)
    t1 = clock()
    storer = storer_for(scheme)
    rng = np.random.default_rng([cell.seed, 7])
    storer(scheme, rng.choice(cell.m, size=min(cell.n, cell.m), replace=False).tolist())
    t2 = clock()
    if cell.exhaustive:
        rep = verify_exhaustive(scheme, storer, cell.n)
    else:
        rep = verify_sampled(scheme, storer, cell.n, cell.samples, seed=cell.seed)
    t3 = clock()
    if not rep.ok:
        raise AssertionError(f"bench cell {cell} failed verification:\n{rep.summary()}")
    p = scheme.params
    lb = lower_bound(p.m, p.n, p.t)
    return BenchRow(
        kind=p.kind.label, m=p.m, n=p.n, t=p.t, s=p.s, total_bits=p.total_bits,
        ratio=p.total_bits / p.m, lower_bound=lb.value, lower_bound_formula=lb.formula, seed=p.seed,
        build_seconds=t1 - t0 if timing else None,
        store_seconds=t2 - t1 if timing else None,
        verify_seconds=t3 - t2 if timing else None,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_csv(rows: Sequence[BenchRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELDS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, f)) for f in FIELDS])


def plot_rows(rows: Sequence[BenchRow], path: Path) -> None:
    """Total bits against ``m`` per kind, with the characteristic vector and
    any available lower bound for reference."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    kinds = sorted({(r.kind, r.t) for r in rows})
    for kind, t in kinds:
        sel = sorted((r for r in rows if (r.kind, r.t) == (kind, t)), key=lambda r: r.m)
        ax.plot([r.m for r in sel], [r.total_bits for r in sel], marker="o", label=f"{kind} (t={t})")
        bounded = [r for r in sel if r.lower_bound is not None]
        if bounded:
            ax.plot([r.m for r in bounded], [r.lower_bound for r in bounded], linestyle=":",
                    label=f"lower bound, {kind} (n={bounded[0].n})")
    ms = sorted({r.m for r in rows})
    if ms:
        ax.plot(ms, ms, color="grey", linestyle="--", label="m bits")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("universe size m")
    ax.set_ylabel("memory bits")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_report(rows: Sequence[BenchRow], csv_path: Path) -> Path:
    """CSV at ``csv_path`` plus a PNG figure beside it; returns the PNG path."""
    csv_path = Path(csv_path)
    write_csv(rows, csv_path)
    png = csv_path.with_suffix(".png")
    plot_rows(rows, png)
    return png
