"""sphgse - ground states of spherical mixed p-spin glasses."""

from sphgse.errors import (
    ConvergenceError,
    ReductionInconclusive,
    SphgseError,
    ValidationError,
)
from sphgse.functionals import (
    DualCertificate,
    FiniteBetaMeasure,
    cs_energy,
    dual_energy,
    duality_gap,
    formal_conjugate,
    gs_energy,
    obstacle_check,
    primal_energy,
)
from sphgse.model import MixedModel, SignProfile, eval_model, named_model, sign_intervals
from sphgse.onersb import classify_2p, criteria, solve_master
from sphgse.order_param import GridFunction, MeasureA, OrderParamAnsatz, to_grid, to_measure

__all__ = [
    "ConvergenceError",
    "DualCertificate",
    "FiniteBetaMeasure",
    "GridFunction",
    "MeasureA",
    "MixedModel",
    "OrderParamAnsatz",
    "ReductionInconclusive",
    "SignProfile",
    "SphgseError",
    "ValidationError",
    "classify_2p",
    "criteria",
    "cs_energy",
    "dual_energy",
    "duality_gap",
    "eval_model",
    "formal_conjugate",
    "gs_energy",
    "named_model",
    "obstacle_check",
    "primal_energy",
    "sign_intervals",
    "solve_master",
    "to_grid",
    "to_measure",
]
