"""Benchmark driver: timed engine runs with exact counters.

Timing covers the step/flush loop only (stream parsing and output writing
are excluded). In repeated mode one warm-up run is discarded and the median
wall time over the remaining runs is reported; counters are required to be
identical across runs.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .engine import compile_pattern, make_runtime
from .metrics import Metrics
from .patterns import ChainPattern
from .runtime import match_line


@dataclass
class RunResult:
    matches: list  # Match objects from the counted run (empty if not kept)
    lines: list  # formatted match lines, deduplicated when requested
    metrics: Metrics
    report: dict


def run_benchmark(
    chains: Sequence[ChainPattern],
    events: Sequence,
    mode: str,
    rates=None,
    orders=None,
    repeats: int = 1,
    warmup: bool = False,
    dedup: bool = False,
    keep_matches: bool = True,
    paired_buffers: bool = False,
) -> RunResult:
    nfas = compile_pattern(chains, mode, rates=rates, orders=orders)

    def one_run(keep: bool):
        runtime = make_runtime(nfas, paired_buffers=paired_buffers)
        kept = [] if keep else None
        start = time.perf_counter()
        for e in events:
            out = runtime.step(e)
            if kept is not None and out:
                kept.extend(out)
        out = runtime.flush()
        if kept is not None and out:
            kept.extend(out)
        elapsed = time.perf_counter() - start
        return kept, runtime.metrics, elapsed

    if warmup:
        one_run(keep=False)
    walls = []
    matches: list = []
    metrics: Optional[Metrics] = None
    for i in range(max(repeats, 1)):
        keep = keep_matches and i == 0
        kept, m, elapsed = one_run(keep)
        walls.append(elapsed)
        if keep:
            matches = kept
        if metrics is None:
            metrics = m
        elif m.counters() != metrics.counters():
            raise AssertionError("non-deterministic counters across repeats")
    metrics.wall_time = statistics.median(walls)
    lines = [match_line(m) for m in matches]
    if dedup:
        seen = set()
        unique = []
        for line in lines:
            if line not in seen:
                seen.add(line)
                unique.append(line)
        lines = unique
    return RunResult(matches=matches, lines=lines, metrics=metrics,
                     report=metrics.report())
