"""Step latency and state-size measurement.

The adapter's per-stream cost should be a few dense ops over K x d
arrays: latency is measured per step on an in-memory stream (IO excluded)
and state size must fit c1*K*d + c2*K + c3 exactly, since everything the
adapter carries is the prototype bank, two belief-sized vectors, and a
counter.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import adapter as sight
from .errors import ParameterError
from .simulator import SimConfig, simulate


@dataclass(frozen=True)
class LatencyReport:
    num_classes: int
    feature_dim: int
    steps: int
    p50_ms: float
    p95_ms: float
    mean_ms: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_classes": self.num_classes,
            "feature_dim": self.feature_dim,
            "steps": self.steps,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "mean_ms": self.mean_ms,
        }


@dataclass(frozen=True)
class StateSizeFit:
    """Least-squares fit of state bytes against [K*d, K, 1]."""

    c_kd: float
    c_k: float
    c_const: float
    max_rel_residual: float
    samples: list[tuple[int, int, int]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "c_kd": self.c_kd,
            "c_k": self.c_k,
            "c_const": self.c_const,
            "max_rel_residual": self.max_rel_residual,
            "samples": [list(s) for s in self.samples],
        }


def _bench_stream(num_classes: int, feature_dim: int, length: int):
    cfg = SimConfig(num_classes=num_classes, feature_dim=feature_dim, seed=0)
    sim = simulate(cfg, length)
    return sim.records, sim.weights


def measure_step_latency(
    num_classes: int = 12,
    feature_dim: int = 128,
    steps: int = 2000,
    warmup: int = 200,
    config: sight.SightConfig | None = None,
) -> LatencyReport:
    """Wall-clock per-step quantiles on an in-memory synthetic stream."""
    if steps < 100:
        raise ParameterError(f"need >= 100 measured steps, got {steps}")
    records, weights = _bench_stream(num_classes, feature_dim, warmup + steps)
    state = sight.initial_state(weights, config)
    for record in records[:warmup]:
        _, _, state = sight.step(state, record)
    samples = np.empty(steps)
    for i, record in enumerate(records[warmup:]):
        t0 = time.perf_counter_ns()
        _, _, state = sight.step(state, record)
        samples[i] = time.perf_counter_ns() - t0
    samples /= 1e6
    return LatencyReport(
        num_classes=num_classes,
        feature_dim=feature_dim,
        steps=steps,
        p50_ms=float(np.percentile(samples, 50)),
        p95_ms=float(np.percentile(samples, 95)),
        mean_ms=float(samples.mean()),
    )


def measure_state_bytes(num_classes: int, feature_dim: int) -> int:
    """State size after one step (previous belief allocated)."""
    records, weights = _bench_stream(num_classes, feature_dim, 1)
    state = sight.initial_state(weights)
    _, _, state = sight.step(state, records[0])
    return sight.state_nbytes(state)


def fit_state_size(
    k_values=tuple(range(2, 21, 2)) + (12,),
    d_values=(8, 16, 32, 64, 128, 256),
) -> StateSizeFit:
    """Measure state bytes over a (K, d) grid and fit the affine model."""
    samples = []
    for k in sorted(set(int(k) for k in k_values)):
        for d in sorted(set(int(d) for d in d_values)):
            samples.append((k, d, measure_state_bytes(k, d)))
    design = np.array([[k * d, k, 1.0] for k, d, _ in samples])
    measured = np.array([b for _, _, b in samples], dtype=np.float64)
    coef, *_ = np.linalg.lstsq(design, measured, rcond=None)
    predicted = design @ coef
    rel = np.abs(predicted - measured) / measured
    return StateSizeFit(
        c_kd=float(coef[0]),
        c_k=float(coef[1]),
        c_const=float(coef[2]),
        max_rel_residual=float(rel.max()),
        samples=samples,
    )
