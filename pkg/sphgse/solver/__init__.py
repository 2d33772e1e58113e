"""Minimizers of the zero- and finite-temperature problems."""

from sphgse.solver.ansatz import ansatz_minimize
from sphgse.solver.finite_beta import (
    FiniteBetaResult,
    ModerateDeviationReport,
    finite_beta_minimize,
    gamma_check,
    moderate_deviation_report,
)
from sphgse.solver.grid import grid_minimize
from sphgse.solver.result import SolveResult
from sphgse.solver.sweep import SweepTable, sweep_2p

__all__ = [
    "FiniteBetaResult",
    "ModerateDeviationReport",
    "SolveResult",
    "SweepTable",
    "ansatz_minimize",
    "finite_beta_minimize",
    "gamma_check",
    "grid_minimize",
    "moderate_deviation_report",
    "sweep_2p",
]
