"""The pinned synthetic benchmark: one fixed operating point, five seeds.

Every directional claim in the regression suite (adaptation beats the
frozen head, chronological order beats destroyed order, each ablation
hurts, gates fire at boundaries, geometry separates, prototypes improve)
is measured on the streams this module pins. The operating point was
calibrated once and is frozen: thresholds elsewhere assume it.

Seed policy: seeds are the first five naturals, scanning upward from 1,
whose stream puts the frozen head's macro-F1 inside ``SOURCE_F1_WINDOW``.
The window keeps the head visibly wrong but far from chance, so headroom
for adaptation exists without the stream being degenerate. With the
pinned generator parameters seeds 1..5 all qualify; the scan exists so
the policy survives recalibration rather than being a hidden hand-pick.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterator

import numpy as np

from .errors import ValidationError
from .metrics import macro_f1
from .simulator import SimConfig, Simulation, simulate

#: Frozen-head macro-F1 band a seed must hit to join the benchmark.
SOURCE_F1_WINDOW = (0.55, 0.75)

#: Steps per benchmark stream.
BENCHMARK_LENGTH = 3000

#: Benchmark seeds under the pinned config (see module docstring).
BENCHMARK_SEEDS = (1, 2, 3, 4, 5)

#: The pinned generator operating point. Fixed-length segments make every
#: boundary position reproducible arithmetic, the worst case for a gate
#: that could otherwise ride length variance; all other fields are the
#: library defaults.
BENCHMARK_CONFIG = SimConfig(segment_mode="fixed")


def benchmark_config(seed: int) -> SimConfig:
    """Pinned config rebased onto one seed."""
    return replace(BENCHMARK_CONFIG, seed=seed)


def source_macro_f1(sim: Simulation) -> float:
    """Macro-F1 of the frozen planted head on a simulated stream."""
    labels = np.array([rec.label for rec in sim.records])
    preds = np.array([int(np.argmax(rec.logits)) for rec in sim.records])
    return macro_f1(labels, preds, sim.config.num_classes)


def select_seeds(
    count: int = 5,
    start: int = 1,
    limit: int = 64,
    length: int = BENCHMARK_LENGTH,
) -> list[int]:
    """First ``count`` seeds from ``start`` whose frozen head lands in the
    window. Raises ValidationError if ``limit`` seeds do not yield enough,
    which signals the operating point drifted and needs recalibration."""
    lo, hi = SOURCE_F1_WINDOW
    chosen: list[int] = []
    for seed in range(start, start + limit):
        if len(chosen) == count:
            break
        if lo <= source_macro_f1(simulate(benchmark_config(seed), length)) <= hi:
            chosen.append(seed)
    if len(chosen) < count:
        raise ValidationError(
            f"only {len(chosen)}/{count} seeds hit the source window "
            f"within {limit} candidates; recalibrate the benchmark"
        )
    return chosen


def benchmark_streams(length: int = BENCHMARK_LENGTH) -> Iterator[Simulation]:
    """Yield the five pinned benchmark simulations in seed order."""
    for seed in BENCHMARK_SEEDS:
        yield simulate(benchmark_config(seed), length)
