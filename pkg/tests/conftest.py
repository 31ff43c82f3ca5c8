"""Shared fixtures: small streams, golden-file paths, cached benchmark runs."""

from __future__ import annotations

import json
import os
import sys

import numpy as np
import pytest
from hypothesis import settings

HERE = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.path.join(HERE, "data")
for p in (HERE, os.path.join(os.path.dirname(HERE), "src")):
    if p not in sys.path:
        sys.path.insert(0, p)

# Flaky wall-clock deadlines help nobody in CI; case counts are explicit.
settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")

from sightstream.adapter import SightConfig
from sightstream.benchmark import BENCHMARK_LENGTH, BENCHMARK_SEEDS, benchmark_config
from sightstream.runner import run_stream
from sightstream.simulator import SimConfig, simulate


def golden(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def load_golden(name: str) -> dict:
    with open(golden(name), "r", encoding="utf-8") as fh:
        return json.load(fh)


def records_from_dicts(dicts):
    """Plain-dict records (oracle format) to StreamRecord objects."""
    from sightstream.stream_io import StreamRecord

    out = []
    for obj in dicts:
        out.append(
            StreamRecord(
                index=obj["t"],
                feature=np.asarray(obj["feature"], dtype=np.float64),
                logits=(
                    np.asarray(obj["logits"], dtype=np.float64)
                    if obj.get("logits") is not None
                    else None
                ),
                probs=(
                    np.asarray(obj["probs"], dtype=np.float64)
                    if obj.get("probs") is not None
                    else None
                ),
                label=obj.get("label"),
            )
        )
    return out


@pytest.fixture(scope="session")
def tiny_sim():
    """Small labeled stream with the default planted structure."""
    return simulate(SimConfig(num_classes=4, feature_dim=8, seed=11), 240)


@pytest.fixture(scope="session")
def benchmark_sims():
    """The five pinned benchmark streams, simulated once per session."""
    return {
        seed: simulate(benchmark_config(seed), BENCHMARK_LENGTH)
        for seed in BENCHMARK_SEEDS
    }


@pytest.fixture(scope="session")
def benchmark_runs(benchmark_sims):
    """Full-config adapter runs (traces and prototype snapshots kept)."""
    return {
        seed: run_stream(
            sim.records,
            "sight",
            sim.weights,
            config=SightConfig(),
            collect_traces=True,
            collect_prototypes=True,
        )
        for seed, sim in benchmark_sims.items()
    }
