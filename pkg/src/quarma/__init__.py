"""Quaternion online ARMA prediction: gradient-descent and Newton-step learners, data generation and benchmarks."""

from .quat_core import (
    AugmentedVector,
    InconsistentAugmentedVector,
    Quaternion,
    assemble,
    conj,
    decompose,
    extract,
    flatten,
    involution,
    lift,
    mul,
    qconj,
    qinvolution,
    qmul,
    qnorm,
)
from .quat_linalg import InverseTracker, TrackerBreakdown, complex_adjoint, matvec, qdet, qlogdet, rank1_update
from .signal_model import (
    GeneratorDivergence,
    NoiseSpec,
    QarmaSpec,
    generate_qarma,
    ghr_gradient,
    qar_predict,
    squared_loss,
    truncated_qar_predict,
)
from .learners import DecisionSet, HyperParams, Trace, ons_rate, project_A_norm, project_K, run_learner, select_m
from .baselines import run_componentwise, run_multichannel
from .bench import BenchmarkReport, ExperimentConfig, emit_outputs, parse_config, run_experiment, theoretical_floor

__version__ = "0.1.0"
