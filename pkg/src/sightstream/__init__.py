"""Streaming test-time adaptation over temporally structured feature streams.

A frozen classifier's per-step probabilities are refined online, without
labels or gradients, by a surprise-gated consensus between the classifier
and a geometric temporal prior built from prototype tracking on the unit
sphere. The package bundles the adapter, reference baselines, a synthetic
stream simulator with planted structure, evaluation metrics, durable file
formats, and a command line.
"""

from .adapter import (
    ABLATION_FLAGS,
    AdapterState,
    PrototypeBank,
    SightConfig,
    StepTrace,
    initial_state,
    initialize_prototypes,
    state_nbytes,
    step,
)
from .baselines import (
    MarkovState,
    markov_initial_state,
    markov_prior_step,
    persistence_step,
    source_only_step,
)
from .benchmark import (
    BENCHMARK_CONFIG,
    BENCHMARK_LENGTH,
    BENCHMARK_SEEDS,
    benchmark_config,
    benchmark_streams,
    select_seeds,
)
from .errors import SightStreamError
from .geometry import EPSILON, cosine_distance, normalize, simplex_project, softmax_temp
from .metrics import (
    AlignmentReport,
    EvalReport,
    gate_diagnostics,
    macro_f1,
    prototype_alignment,
)
from .runner import METHODS, RunResult, evaluate, run_stream
from .simulator import (
    SimConfig,
    Simulation,
    generate_stream,
    permute_stream,
    simulate,
    validate_transition_geometry,
)
from .stream_io import StreamRecord, read_stream, read_trace, write_stream, write_trace

__version__ = "0.1.0"

__all__ = [
    "ABLATION_FLAGS",
    "AdapterState",
    "AlignmentReport",
    "BENCHMARK_CONFIG",
    "BENCHMARK_LENGTH",
    "BENCHMARK_SEEDS",
    "EPSILON",
    "EvalReport",
    "MarkovState",
    "METHODS",
    "PrototypeBank",
    "RunResult",
    "SightConfig",
    "SightStreamError",
    "SimConfig",
    "Simulation",
    "StepTrace",
    "StreamRecord",
    "benchmark_config",
    "benchmark_streams",
    "cosine_distance",
    "evaluate",
    "gate_diagnostics",
    "generate_stream",
    "initial_state",
    "initialize_prototypes",
    "macro_f1",
    "markov_initial_state",
    "markov_prior_step",
    "normalize",
    "permute_stream",
    "persistence_step",
    "prototype_alignment",
    "read_stream",
    "read_trace",
    "run_stream",
    "select_seeds",
    "simplex_project",
    "simulate",
    "softmax_temp",
    "source_only_step",
    "state_nbytes",
    "step",
    "validate_transition_geometry",
    "write_stream",
    "write_trace",
    "__version__",
]
