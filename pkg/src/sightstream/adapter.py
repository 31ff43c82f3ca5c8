"""Surprise-gated, prototype-anchored streaming refinement (SIGHT).

The adapter treats the frozen classifier's normalized weight rows as class
prototypes on the unit sphere and refines the classifier's per-step
probabilities online, without gradients or labels. Each step it

  1. predicts the expected feature direction from the previous belief and
     the prototype bank,
  2. converts the discrepancy between observation and expectation into a
     surprise gate,
  3. routes surprise geometrically toward the classes whose prototypes lie
     along the observed displacement,
  4. calibrates that routing with a slow habit profile of past beliefs,
  5. fuses the result with the previous belief into a temporal prior and
     takes a multiplicative consensus with the classifier's output,
  6. drifts the winning prototypes toward the observation while an elastic
     anchor pulls every prototype back to its source initialization.

State transitions are pure: ``step`` returns a fresh ``AdapterState`` and
never mutates its inputs, so concurrent streams just hold separate states.
All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigError,
    DegenerateClassError,
    DimensionError,
    ParameterError,
    RejectedInputError,
    StreamContractError,
)
from .geometry import EPSILON, cosine_distance, normalize, simplex_project, softmax_temp, uniform
from .stream_io import StreamRecord

#: Recognized ablation switches. Each removes or degrades one mechanism.
ABLATION_FLAGS = frozenset(
    {
        "surprise_feature_distance",  # D_t from euclidean instead of cosine distance
        "habit_raw",                  # skip sqrt flattening of the habit profile
        "assignment_hard",            # one-hot argmax belief drives prototype updates
        "no_source_anchor",           # omega_mu treated as 0
        "no_surprise",                # lambda forced to a constant
        "no_geometric_routing",       # routing replaced by uniform
        "no_habit_prior",             # calibrated prior = routing
        "no_prototype_update",        # prototype bank stays at initialization
    }
)


@dataclass(frozen=True)
class SightConfig:
    """Hyperparameters and ablation switches.

    Defaults are the operating point used for every reported run; they are
    deliberately conservative (slow prototype drift, strong anchoring).

    Attributes:
        beta: surprise gain; larger beta saturates the gate faster.
        tau: routing softmax temperature.
        eta_mu: prototype drift rate toward the observed direction.
        eta_h: habit tracking rate.
        omega_mu: elastic anchor strength toward source prototypes.
        epsilon: numerical guard for normalization, simplex fallback, and
            habit flattening alike.
        ablation_flags: subset of ``ABLATION_FLAGS``.
        no_surprise_lambda: constant the gate is pinned to under
            ``no_surprise`` (1.0 keeps the calibrated prior fully active;
            0.5 probes a half-open gate).
    """

    beta: float = 1.0
    tau: float = 0.05
    eta_mu: float = 0.005
    eta_h: float = 0.05
    omega_mu: float = 0.01
    epsilon: float = EPSILON
    ablation_flags: frozenset[str] = frozenset()
    no_surprise_lambda: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ablation_flags", frozenset(self.ablation_flags))
        unknown = self.ablation_flags - ABLATION_FLAGS
        if unknown:
            raise ConfigError(f"unknown ablation flags: {sorted(unknown)}")
        checks = [
            ("beta", self.beta, self.beta > 0),
            ("tau", self.tau, self.tau > 0),
            ("eta_mu", self.eta_mu, 0 <= self.eta_mu <= 1),
            ("eta_h", self.eta_h, 0 <= self.eta_h <= 1),
            ("omega_mu", self.omega_mu, 0 <= self.omega_mu < 1),
            ("epsilon", self.epsilon, 0 < self.epsilon <= 1e-3),
            (
                "no_surprise_lambda",
                self.no_surprise_lambda,
                0 <= self.no_surprise_lambda <= 1,
            ),
        ]
        for name, value, ok in checks:
            if not (ok and math.isfinite(value)):
                raise ConfigError(f"{name}={value} is out of range")

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "tau": self.tau,
            "eta_mu": self.eta_mu,
            "eta_h": self.eta_h,
            "omega_mu": self.omega_mu,
            "epsilon": self.epsilon,
            "ablation_flags": sorted(self.ablation_flags),
            "no_surprise_lambda": self.no_surprise_lambda,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SightConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "ablation_flags" in kwargs:
            flags = kwargs["ablation_flags"]
            if not isinstance(flags, (list, set, frozenset, tuple)):
                raise ConfigError("ablation_flags must be an array of flag names")
            kwargs["ablation_flags"] = frozenset(flags)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class PrototypeBank:
    """Current prototypes plus their frozen source anchors, both K x d
    with unit-norm rows. ``anchors`` is read-only for the bank's lifetime."""

    current: np.ndarray
    anchors: np.ndarray

    def __post_init__(self) -> None:
        if self.current.shape != self.anchors.shape:
            raise DimensionError(
                f"prototype shapes differ: {self.current.shape} vs {self.anchors.shape}"
            )
        if self.current.ndim != 2 or self.num_classes < 2:
            raise DimensionError(
                f"prototype bank must be K x d with K >= 2, got {self.current.shape}"
            )

    @property
    def num_classes(self) -> int:
        return self.current.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.current.shape[1]


@dataclass(frozen=True)
class AdapterState:
    """Everything the adapter carries between steps.

    ``prev_belief`` is None before the first step. ``step_index`` counts
    completed steps.
    """

    bank: PrototypeBank
    habit: np.ndarray
    prev_belief: np.ndarray | None
    step_index: int
    config: SightConfig


@dataclass(frozen=True)
class StepTrace:
    """Per-step diagnostics, one object per processed record.

    On the first step of a stream there is no previous belief, so
    ``discrepancy`` and ``surprise`` are recorded as 0, the routing and
    prior vectors as uniform, and ``expected_state`` as the observed
    direction itself; the schema stays uniform for downstream tooling.
    ``annihilated`` marks steps whose consensus product lost all mass and
    fell back to uniform.
    """

    t: int
    expected_state: np.ndarray
    discrepancy: float
    surprise: float
    routing: np.ndarray
    calibrated_prior: np.ndarray
    temporal_prior: np.ndarray
    refined: np.ndarray
    annihilated: bool = False


def initialize_prototypes(weights: np.ndarray, eps: float = EPSILON) -> PrototypeBank:
    """Seed the prototype bank from a linear head's weight rows.

    Each class prototype is the l2-normalized weight row; the bias plays
    no role. Raises DegenerateClassError naming the first class whose row
    is all-zero.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 2 or w.shape[1] < 1:
        raise DimensionError(
            f"weights must be K x d with K >= 2, d >= 1, got shape {w.shape}"
        )
    if not np.all(np.isfinite(w)):
        raise RejectedInputError("weights contain non-finite values")
    norms = np.linalg.norm(w, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateClassError(
            f"class {int(zero[0])} has an all-zero weight row; cannot seed a prototype"
        )
    rows = w / (norms + eps)[:, None]
    anchors = rows.copy()
    anchors.setflags(write=False)
    return PrototypeBank(current=rows, anchors=anchors)


def initial_state(weights: np.ndarray, config: SightConfig | None = None) -> AdapterState:
    """Fresh adapter state for one stream: source prototypes, uniform habit."""
    cfg = config if config is not None else SightConfig()
    bank = initialize_prototypes(weights, cfg.epsilon)
    return AdapterState(
        bank=bank,
        habit=uniform(bank.num_classes),
        prev_belief=None,
        step_index=0,
        config=cfg,
    )


def expected_state(bank: PrototypeBank, prev_belief: np.ndarray, eps: float = EPSILON) -> np.ndarray:
    """Belief-weighted mean prototype direction, renormalized.

    Antipodal prototypes under a symmetric belief can cancel to the zero
    vector; the result is then the zero vector and downstream stages treat
    it as a degenerate direction rather than an error.
    """
    if prev_belief.shape != (bank.num_classes,):
        raise DimensionError(
            f"belief shape {prev_belief.shape} does not match K={bank.num_classes}"
        )
    return normalize(bank.current.T @ prev_belief, eps)


def surprise(observed: np.ndarray, expected: np.ndarray, config: SightConfig) -> tuple[float, float]:
    """Discrepancy D_t and gate value lambda_t = 1 - exp(-beta D_t^2).

    The gate is smooth, 0 when observation matches expectation, and
    saturates toward 1 for large discrepancies. Under
    ``surprise_feature_distance`` the discrepancy is the euclidean
    distance between the two unit vectors instead of the cosine distance;
    under ``no_surprise`` the gate is pinned to ``no_surprise_lambda``
    while D_t is still reported.
    """
    if "surprise_feature_distance" in config.ablation_flags:
        if observed.size != expected.size:
            raise DimensionError(
                f"dimension mismatch: {observed.size} vs {expected.size}"
            )
        dist = float(np.linalg.norm(observed - expected))
    else:
        dist = cosine_distance(observed, expected)
    lam = 1.0 - math.exp(-config.beta * dist * dist)
    if "no_surprise" in config.ablation_flags:
        lam = config.no_surprise_lambda
    return dist, lam


def geometric_routing(
    observed: np.ndarray,
    expected: np.ndarray,
    bank: PrototypeBank,
    config: SightConfig,
) -> np.ndarray:
    """Distribute surprise over classes by displacement/prototype alignment.

    The displacement direction from expectation to observation is compared
    against each prototype's direction from the same expectation; the
    alignment scores pass through a temperature softmax. A zero-norm
    displacement leaves all scores at 0 and the routing uniform; a
    prototype that coincides with the expectation contributes score 0 for
    that class. Under ``no_geometric_routing`` the routing is uniform.
    """
    k = bank.num_classes
    if "no_geometric_routing" in config.ablation_flags:
        return uniform(k)
    if observed.size != expected.size or expected.size != bank.feature_dim:
        raise DimensionError(
            f"dimension mismatch: observed {observed.size}, expected "
            f"{expected.size}, bank d={bank.feature_dim}"
        )
    v = normalize(observed - expected, config.epsilon)
    offsets = bank.current - expected[None, :]
    norms = np.linalg.norm(offsets, axis=1)
    directions = offsets / (norms + config.epsilon)[:, None]
    alignments = directions @ v
    return softmax_temp(alignments, config.tau)


def calibrate_prior(routing: np.ndarray, habit: np.ndarray, config: SightConfig) -> np.ndarray:
    """Temper the routing by a flattened copy of the habit profile.

    The square root compresses habit ratios (81:1 becomes 9:1) so habitual
    classes guide rather than dominate. ``habit_raw`` skips the
    flattening; ``no_habit_prior`` returns the routing untouched.
    """
    if "no_habit_prior" in config.ablation_flags:
        return routing
    if routing.shape != habit.shape:
        raise DimensionError(
            f"routing shape {routing.shape} does not match habit {habit.shape}"
        )
    if "habit_raw" in config.ablation_flags:
        flattened = habit
    else:
        flattened = simplex_project(np.sqrt(habit + config.epsilon), config.epsilon)
    return simplex_project(routing * flattened, config.epsilon)


def refine(
    raw: np.ndarray,
    prev_belief: np.ndarray,
    lam: float,
    calibrated: np.ndarray,
    eps: float = EPSILON,
) -> tuple[np.ndarray, np.ndarray]:
    """Fuse prior and evidence: temporal prior pi_t, refined belief q_t.

    ``pi_t`` interpolates between the previous belief (calm) and the
    calibrated prior (surprised) with gate weight ``lam``; ``q_t`` is the
    renormalized product of the classifier's probabilities with ``pi_t``.
    When the product annihilates (mass <= eps) the belief falls back to
    uniform; callers can detect that from the returned vector or by
    checking the product themselves.
    """
    if not (0.0 <= lam <= 1.0):
        raise ParameterError(f"gate value {lam} outside [0, 1]")
    if raw.shape != prev_belief.shape or raw.shape != calibrated.shape:
        raise DimensionError(
            f"belief shapes differ: raw {raw.shape}, prev {prev_belief.shape}, "
            f"calibrated {calibrated.shape}"
        )
    pi = (1.0 - lam) * prev_belief + lam * calibrated
    q = simplex_project(raw * pi, eps)
    return pi, q


def update_habit(habit: np.ndarray, belief: np.ndarray, config: SightConfig) -> np.ndarray:
    """Exponential moving average of refined beliefs."""
    return (1.0 - config.eta_h) * habit + config.eta_h * belief


def update_prototypes(
    bank: PrototypeBank,
    observed: np.ndarray,
    belief: np.ndarray,
    config: SightConfig,
) -> PrototypeBank:
    """Belief-weighted drift toward the observation, then elastic anchoring.

    Every prototype moves toward the observed direction in proportion to
    its refined belief mass (or the argmax one-hot under
    ``assignment_hard``, ties to the lowest index), is renormalized, and
    is then pulled a fixed fraction ``omega_mu`` back toward its source
    anchor (``no_source_anchor`` sets that fraction to 0). Under
    ``no_prototype_update`` the bank is returned unchanged.
    """
    if "no_prototype_update" in config.ablation_flags:
        return bank
    if observed.size != bank.feature_dim or belief.size != bank.num_classes:
        raise DimensionError(
            f"dimension mismatch: observed {observed.size}, belief "
            f"{belief.size}, bank {bank.current.shape}"
        )
    if "assignment_hard" in config.ablation_flags:
        weights = np.zeros(bank.num_classes)
        weights[int(np.argmax(belief))] = 1.0
    else:
        weights = belief
    eps = config.epsilon
    rate = (config.eta_mu * weights)[:, None]
    mixed = (1.0 - rate) * bank.current + rate * observed[None, :]
    mixed /= (np.linalg.norm(mixed, axis=1) + eps)[:, None]
    omega = 0.0 if "no_source_anchor" in config.ablation_flags else config.omega_mu
    anchored = (1.0 - omega) * mixed + omega * bank.anchors
    anchored /= (np.linalg.norm(anchored, axis=1) + eps)[:, None]
    return replace(bank, current=anchored)


def classifier_probs(record: StreamRecord, eps: float) -> np.ndarray:
    if record.logits is not None:
        return softmax_temp(record.logits, 1.0)
    return simplex_project(record.probs, eps)


def step(state: AdapterState, record: StreamRecord) -> tuple[np.ndarray, StepTrace, AdapterState]:
    """Process one record: refined belief, diagnostics, successor state.

    The first step of a stream has no previous belief, so the refined
    belief is the classifier's own probability vector and the trace
    carries the documented sentinels. Habit and prototype updates run on
    every step, the first included, strictly after refinement.
    """
    cfg = state.config
    k, d = state.bank.num_classes, state.bank.feature_dim
    if record.feature.size != d or record.scores.size != k:
        raise StreamContractError(
            f"step {state.step_index}: record dimensions "
            f"({record.feature.size}, {record.scores.size}) do not match "
            f"adapter ({d}, {k})"
        )
    observed = normalize(record.feature, cfg.epsilon)
    raw = classifier_probs(record, cfg.epsilon)

    if state.prev_belief is None:
        refined = raw
        trace = StepTrace(
            t=record.index,
            expected_state=observed,
            discrepancy=0.0,
            surprise=0.0,
            routing=uniform(k),
            calibrated_prior=uniform(k),
            temporal_prior=uniform(k),
            refined=refined,
            annihilated=False,
        )
    else:
        anticipated = expected_state(state.bank, state.prev_belief, cfg.epsilon)
        dist, lam = surprise(observed, anticipated, cfg)
        routing = geometric_routing(observed, anticipated, state.bank, cfg)
        calibrated = calibrate_prior(routing, state.habit, cfg)
        pi, refined = refine(raw, state.prev_belief, lam, calibrated, cfg.epsilon)
        annihilated = bool((raw * pi).sum() <= cfg.epsilon)
        trace = StepTrace(
            t=record.index,
            expected_state=anticipated,
            discrepancy=dist,
            surprise=lam,
            routing=routing,
            calibrated_prior=calibrated,
            temporal_prior=pi,
            refined=refined,
            annihilated=annihilated,
        )

    new_state = AdapterState(
        bank=update_prototypes(state.bank, observed, refined, cfg),
        habit=update_habit(state.habit, refined, cfg),
        prev_belief=refined,
        step_index=state.step_index + 1,
        config=cfg,
    )
    return refined, trace, new_state


def state_nbytes(state: AdapterState) -> int:
    """Exact byte size of the adapter's per-stream tensor state.

    Counts the prototype bank (current rows and anchors), the habit
    profile, the previous belief, and the 8-byte step counter. The config
    is shared across streams and excluded.
    """
    total = state.bank.current.nbytes + state.bank.anchors.nbytes
    total += state.habit.nbytes
    if state.prev_belief is not None:
        total += state.prev_belief.nbytes
    return total + 8
