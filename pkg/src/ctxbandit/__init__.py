"""Continuum contextual bandits: barrier BCO, cell-wise conversion and hard instances."""

from .baselines import EpsNet, EpsNetUCB, UcbState, select_arm, update_arm
from .bco import BarrierBCO, BcoConfig, gradient_estimate, mc_surrogate_gradient, step_size
from .conversion import ContextualRouter, ConversionParams, Partition, choose_K, expected_bias_bound
from .environments import (ContextualQuadratic, FixedSequence, IIDUniform, LowerBoundFamily, PKContexts,
                           certify_constants, dist_to_cell_boundary, loss_min_oracle)
from .exceptions import (BanditError, CertificationFailed, ConfigError, DegenerateFit, ExhaustedSequence,
                         InvariantViolation, NoConvergence, NoPendingQuery, NotInCell, NotInterior,
                         NotPositiveDefinite, OracleFailure, OutOfCube, PendingQuery)
from .geometry import Ball, BallBarrier, Polytope, PolytopeBarrier, analytic_center, make_body
from .harness import ExperimentConfig, RunSummary, run_experiment, sweep_rates
from .mollifier import eta, eta0
from .randomness import NoiseModel, SeedStream, sample_sphere
from .regret import RatePoints, RegretLedger, rate_fit, record_round, static_regret

__version__ = "0.1.0"

__all__ = [
    "Ball", "BallBarrier", "BanditError", "BarrierBCO", "BcoConfig", "CertificationFailed", "ConfigError",
    "ContextualQuadratic", "ContextualRouter", "ConversionParams", "DegenerateFit", "EpsNet", "EpsNetUCB",
    "ExhaustedSequence", "ExperimentConfig", "FixedSequence", "IIDUniform", "InvariantViolation",
    "LowerBoundFamily", "NoConvergence", "NoPendingQuery", "NoiseModel", "NotInCell", "NotInterior",
    "NotPositiveDefinite", "OracleFailure", "OutOfCube", "PKContexts", "Partition", "PendingQuery",
    "Polytope", "PolytopeBarrier", "RatePoints", "RegretLedger", "RunSummary", "SeedStream", "UcbState",
    "analytic_center", "certify_constants", "choose_K", "dist_to_cell_boundary", "eta", "eta0",
    "expected_bias_bound", "gradient_estimate", "loss_min_oracle", "make_body", "mc_surrogate_gradient",
    "rate_fit", "record_round", "run_experiment", "sample_sphere", "select_arm", "static_regret",
    "step_size", "sweep_rates", "update_arm",
]
