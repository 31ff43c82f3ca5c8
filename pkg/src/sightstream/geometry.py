"""Unit-sphere and probability-simplex primitives.

Every stage downstream manipulates two value families: l2-normalized
feature vectors and probability vectors on the simplex. The four
operations here are the only places that arithmetic lives; they are pure,
float64 throughout, and epsilon-stabilized so degenerate inputs degrade
gracefully instead of dividing by zero.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError, RejectedInputError

#: Default numerical-stability constant. Configs may override per run.
EPSILON = 1e-8


def as_vector(v, name: str = "input") -> np.ndarray:
    """Coerce to a finite float64 1-d vector or raise.

    Narrower dtypes are widened to float64; that is the only implicit
    conversion performed anywhere in the package.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(
            f"{name} must be a non-empty 1-d vector, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise RejectedInputError(f"{name} contains non-finite components")
    return arr


def uniform(k: int) -> np.ndarray:
    """The uniform distribution over ``k`` classes."""
    if k < 1:
        raise DimensionError(f"need at least one class, got {k}")
    return np.full(k, 1.0 / k)


def normalize(v, eps: float = EPSILON) -> np.ndarray:
    """l2-normalize ``v`` as ``v / (||v|| + eps)``.

    The all-zero vector maps to the all-zero vector; callers treat that as
    a degenerate direction (it produces zero alignment scores rather than
    an error).
    """
    arr = as_vector(v, "v")
    return arr / (np.linalg.norm(arr) + eps)


def simplex_project(a, eps: float = EPSILON) -> np.ndarray:
    """Renormalize a non-negative vector to sum to one.

    A vector whose mass is at or below ``eps`` carries no usable signal,
    so it maps to the uniform distribution instead of amplifying noise.

    Raises:
        RejectedInputError: on negative or non-finite components.
    """
    arr = as_vector(a, "a")
    if np.any(arr < 0.0):
        raise RejectedInputError("simplex projection requires non-negative components")
    total = arr.sum()
    if total <= eps:
        return uniform(arr.size)
    return arr / total


def cosine_distance(a, b) -> float:
    """Cosine distance ``1 - a.b`` between unit-norm vectors, clamped to [0, 2].

    Inputs are expected to be (approximately) unit norm already; the clamp
    guards round-off just outside the ideal range. Exactly identical inputs
    return 0.0 exactly, which epsilon-stabilized normalization alone would
    miss by ~2e-8.
    """
    va = as_vector(a, "a")
    vb = as_vector(b, "b")
    if va.size != vb.size:
        raise DimensionError(f"dimension mismatch: {va.size} vs {vb.size}")
    if np.array_equal(va, vb):
        return 0.0
    return float(min(2.0, max(0.0, 1.0 - float(va @ vb))))


def softmax_temp(scores, tau: float) -> np.ndarray:
    """Temperature softmax ``exp(s/tau) / sum(exp(s/tau))``.

    Computed with the max-shift trick, so arbitrarily large scores are
    safe. ``tau`` must be a finite positive real.
    """
    if not np.isfinite(tau) or tau <= 0.0:
        raise ParameterError(f"temperature must be finite and positive, got {tau}")
    arr = as_vector(scores, "scores")
    shifted = (arr - arr.max()) / tau
    e = np.exp(shifted)
    return e / e.sum()
