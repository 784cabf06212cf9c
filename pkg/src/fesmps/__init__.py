"""Uniform-MPS ground states and finite-entanglement scaling for critical spin chains."""

__version__ = "0.1.0"

from .errors import FESError
from .models import SpinChainModel, build_model, ising
from .umps import (
    TransferSpectrum,
    UniformMPS,
    build_transfer_operator,
    canonicalize,
    correlation_length,
    transfer_spectrum,
)
from .isolve import SolveReport, order_parameter_sweep, solve_ground_state, sweep_bond_dimensions
from .observables import (
    CorrelatorSeries,
    EntropyRecord,
    OperatorInsertion,
    half_line_entropy,
    interval_entropy,
    ising_operators,
    onsite_expectation,
    two_point,
)
from .fes import (
    ExponentEstimate,
    FitResult,
    ScalingDataset,
    estimate_exponent,
    fit_central_charge,
    fit_kappa,
)
from .pipeline import RunConfig, RunManifest, run_pipeline, validate_states
from .estimators import CentralChargeEstimator, FESExponentEstimator, GroundStateSolver

__all__ = [
    "__version__",
    "FESError",
    "SpinChainModel", "build_model", "ising",
    "UniformMPS", "TransferSpectrum", "build_transfer_operator", "canonicalize",
    "correlation_length", "transfer_spectrum",
    "SolveReport", "solve_ground_state", "sweep_bond_dimensions", "order_parameter_sweep",
    "OperatorInsertion", "CorrelatorSeries", "EntropyRecord", "ising_operators", "two_point",
    "half_line_entropy", "interval_entropy", "onsite_expectation",
    "FitResult", "ExponentEstimate", "ScalingDataset", "estimate_exponent",
    "fit_central_charge", "fit_kappa",
    "RunConfig", "RunManifest", "run_pipeline", "validate_states",
    "GroundStateSolver", "FESExponentEstimator", "CentralChargeEstimator",
]
