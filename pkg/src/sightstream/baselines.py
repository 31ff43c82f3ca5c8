"""Reference baselines sharing the adapter's step interface.

Three deliberately simple streaming decoders bracket the adapter:
``source_only`` (stateless, the frozen classifier as-is), ``persistence``
(belief smoothing with no notion of geometry), and ``markov_prior`` (a
self-bootstrapped transition table over its own hard labels). Each step
function is pure and returns ``(belief, successor_state)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapter import classifier_probs
from .errors import DimensionError, ParameterError
from .geometry import EPSILON, simplex_project, uniform
from .stream_io import StreamRecord

DEFAULT_PERSISTENCE_ALPHA = 0.9


def source_only_step(record: StreamRecord, eps: float = EPSILON) -> np.ndarray:
    """The classifier's own probabilities; no state, no adaptation."""
    return classifier_probs(record, eps)


def persistence_step(
    state: np.ndarray | None,
    record: StreamRecord,
    alpha: float = DEFAULT_PERSISTENCE_ALPHA,
    eps: float = EPSILON,
) -> tuple[np.ndarray, np.ndarray]:
    """Belief smoothing: consensus with a uniform-tempered previous belief.

    q_t = project(p_t * (alpha * q_{t-1} + (1 - alpha) * uniform)); the
    first step returns p_t itself. ``state`` is the previous belief or
    None.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha={alpha} outside [0, 1]")
    p = classifier_probs(record, eps)
    if state is None:
        return p, p
    if state.shape != p.shape:
        raise DimensionError(
            f"record {record.index}: belief shape {p.shape} does not match "
            f"state {state.shape}"
        )
    prior = alpha * state + (1.0 - alpha) * uniform(p.size)
    q = simplex_project(p * prior, eps)
    return q, q


@dataclass(frozen=True)
class MarkovState:
    """Transition pseudo-counts over the baseline's own hard labels.

    ``counts[i, j]`` accumulates observed i -> j hard-label transitions on
    top of a flat Dirichlet smoothing mass; ``prev_hard_label`` is None
    before the first step.
    """

    counts: np.ndarray
    prev_hard_label: int | None = None


def markov_initial_state(num_classes: int, smoothing: float = 1.0) -> MarkovState:
    if num_classes < 2:
        raise DimensionError(f"need at least two classes, got {num_classes}")
    if smoothing <= 0:
        raise ParameterError(f"smoothing pseudo-count must be positive, got {smoothing}")
    return MarkovState(counts=np.full((num_classes, num_classes), float(smoothing)))


def markov_prior_step(
    state: MarkovState, record: StreamRecord, eps: float = EPSILON
) -> tuple[np.ndarray, MarkovState]:
    """Consensus with the learned transition row of the previous hard label.

    The prior is the normalized counts row for the previous step's argmax
    (uniform when there is none), the belief is the renormalized product
    with p_t, and only then is the (prev, current-argmax) cell credited.
    The table only ever sees the baseline's own decisions, so early
    mistakes self-reinforce; that is the point of the baseline.
    """
    p = classifier_probs(record, eps)
    k = state.counts.shape[0]
    if p.size != k:
        raise DimensionError(
            f"record {record.index}: {p.size} classes do not match table K={k}"
        )
    if state.prev_hard_label is None:
        prior = uniform(k)
    else:
        row = state.counts[state.prev_hard_label]
        prior = row / row.sum()
    q = simplex_project(p * prior, eps)
    hard = int(np.argmax(q))
    counts = state.counts
    if state.prev_hard_label is not None:
        counts = counts.copy()
        counts[state.prev_hard_label, hard] += 1.0
    return q, MarkovState(counts=counts, prev_hard_label=hard)
