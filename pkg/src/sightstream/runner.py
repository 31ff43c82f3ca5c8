"""Single-pass stream driver shared by the CLI and the test harness.

``run_stream`` plays a record sequence through one method and collects
beliefs, hard predictions, and optional diagnostics; ``evaluate`` turns a
run into an EvalReport. Methods are addressed by their public names:
``sight``, ``source-only``, ``persistence``, ``markov``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import adapter as sight
from . import baselines
from .errors import ConfigError, StreamContractError
from .geometry import uniform
from .metrics import (
    EvalReport,
    accuracy,
    confusion_matrix,
    gate_split,
    macro_f1,
    per_class_f1,
)
from .stream_io import StreamRecord

METHODS = ("sight", "source-only", "persistence", "markov")


@dataclass(frozen=True)
class RunResult:
    """Everything one pass produces.

    ``refined`` is the (T, K) belief sequence; ``predictions`` its argmax
    (ties to the lowest index). ``traces`` is populated when requested;
    ``lambdas`` and ``prototype_snapshots`` only exist for ``sight``.
    """

    method: str
    refined: np.ndarray
    predictions: np.ndarray
    traces: list[sight.StepTrace] | None
    lambdas: np.ndarray | None
    annihilation_count: int
    prototype_snapshots: np.ndarray | None


def _sentinel_trace(record: StreamRecord, refined: np.ndarray) -> sight.StepTrace:
    k = refined.size
    return sight.StepTrace(
        t=record.index,
        expected_state=np.zeros(record.feature.size),
        discrepancy=0.0,
        surprise=0.0,
        routing=uniform(k),
        calibrated_prior=uniform(k),
        temporal_prior=uniform(k),
        refined=refined,
        annihilated=False,
    )


def run_stream(
    records,
    method: str,
    weights: np.ndarray | None = None,
    config: sight.SightConfig | None = None,
    persistence_alpha: float = baselines.DEFAULT_PERSISTENCE_ALPHA,
    markov_smoothing: float = 1.0,
    collect_traces: bool = False,
    collect_prototypes: bool = False,
) -> RunResult:
    """One chronological pass of ``records`` through ``method``.

    ``weights`` is required for ``sight`` (it seeds the prototype bank)
    and ignored by the baselines, which only consume the per-record
    scores. Baseline traces carry sentinel diagnostics so the trace file
    schema is uniform across methods.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    cfg = config if config is not None else sight.SightConfig()

    beliefs: list[np.ndarray] = []
    traces: list[sight.StepTrace] | None = [] if collect_traces else None
    lambdas: list[float] = []
    snapshots: list[np.ndarray] = []
    annihilations = 0

    if method == "sight":
        if weights is None:
            raise ConfigError("method 'sight' needs classifier weights")
        state = sight.initial_state(weights, cfg)
        for record in records:
            belief, trace, state = sight.step(state, record)
            beliefs.append(belief)
            lambdas.append(trace.surprise)
            annihilations += int(trace.annihilated)
            if traces is not None:
                traces.append(trace)
            if collect_prototypes:
                snapshots.append(state.bank.current.copy())
    else:
        p_state: np.ndarray | None = None
        m_state: baselines.MarkovState | None = None
        for record in records:
            if method == "source-only":
                belief = baselines.source_only_step(record, cfg.epsilon)
            elif method == "persistence":
                belief, p_state = baselines.persistence_step(
                    p_state, record, persistence_alpha, cfg.epsilon
                )
            else:
                if m_state is None:
                    m_state = baselines.markov_initial_state(
                        record.scores.size, markov_smoothing
                    )
                belief, m_state = baselines.markov_prior_step(
                    m_state, record, cfg.epsilon
                )
            beliefs.append(belief)
            if traces is not None:
                traces.append(_sentinel_trace(record, belief))

    if not beliefs:
        raise StreamContractError("stream is empty")
    refined = np.stack(beliefs)
    return RunResult(
        method=method,
        refined=refined,
        predictions=np.argmax(refined, axis=1).astype(np.int64),
        traces=traces,
        lambdas=np.array(lambdas) if method == "sight" else None,
        annihilation_count=annihilations,
        prototype_snapshots=np.stack(snapshots) if snapshots else None,
    )


def stream_labels(records) -> np.ndarray | None:
    """Labels as an array, or None unless every record carries one."""
    labels = [r.label for r in records]
    if any(lb is None for lb in labels):
        return None
    return np.asarray(labels, dtype=np.int64)


def evaluate(result: RunResult, records) -> EvalReport:
    """Score a run against the records it was produced from.

    Score fields are None when any record lacks a label; gate fields are
    None for methods without a gate (and the boundary side is None for
    single-segment streams).
    """
    k = result.refined.shape[1]
    labels = stream_labels(records)
    score = conf = f1_list = acc = None
    lam_within = lam_boundary = mean_lambda = None
    if labels is not None:
        matrix = confusion_matrix(result.predictions, labels, k)
        score = macro_f1(result.predictions, labels, k)
        acc = accuracy(result.predictions, labels, k)
        f1_list = [float(x) for x in per_class_f1(matrix)]
        conf = [[int(x) for x in row] for row in matrix]
    if result.lambdas is not None and result.lambdas.size >= 2:
        mean_lambda = float(result.lambdas[1:].mean())
        if labels is not None:
            lam_within, lam_boundary = gate_split(result.lambdas, labels)
    return EvalReport(
        method=result.method,
        n_steps=int(result.refined.shape[0]),
        num_classes=k,
        macro_f1=score,
        accuracy=acc,
        per_class_f1=f1_list,
        confusion=conf,
        annihilation_count=result.annihilation_count,
        mean_lambda=mean_lambda,
        lambda_within_segments=lam_within,
        lambda_at_boundaries=lam_boundary,
    )
