"""Finite-temperature minimizer and the zero-temperature limit checks.

The cdf F of mu is constant on the cells of a graded grid and reaches 1 at the
last interior node, so q* < 1. F is parametrized by non-negative node weights
p_0..p_{G-1} through F_k = (p_0 + ... + p_k) / (p_0 + ... + p_{G-1}).

At inverse temperature beta the minimizer satisfies beta mu_beta[0, t] -> m(t)
and beta (1 - q*) -> nu({1}), where nu = m dt + c delta_1 is the ground-state
measure. The zero-temperature problem is compared at field h / beta.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq, isotonic_regression, minimize

from sphgse.config import (
    BETA_LADDER,
    FINITE_BETA_GRID,
    GRAD_TOL,
    MAX_ITERATIONS,
    MIN_SOLVER_GRID,
    STALL_TOL,
)
from sphgse.errors import ConvergenceError, ValidationError
from sphgse.functionals import FiniteBetaMeasure, cs_energy, graded_grid
from sphgse.model import MixedModel, eval_model
from sphgse.numerics import logmean_inv_grad
from sphgse.order_param import MeasureA, to_measure
from sphgse.solver.apg import apg_minimize
from sphgse.solver.grid import grid_minimize
from sphgse.solver.result import SolveResult

logger = logging.getLogger(__name__)

FiniteBetaMethod = Literal["lbfgsb", "apg"]

# Cells within this distance of a ground-state atom are left out of the sup-distance.
_ATOM_EXCLUSION = 0.02
# P(Y >= q_beta) below this makes the atom estimate unreliable.
_RELIABLE_TAIL = 0.5


def q_threshold(beta: float) -> float:
    """q_beta = 1 - beta^(-1/2), the cut used for the atom estimate."""
    return 1.0 - 1.0 / math.sqrt(beta)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


class CsProblem:
    """The finite-temperature functional as a function of the cell values of F."""

    def __init__(self, model: MixedModel, beta: float, h: float, G: int) -> None:
        self.model = model
        self.beta = beta
        self.h = h
        self.grid = graded_grid(G)
        self.widths = np.diff(self.grid)
        self._xi_steps = np.diff(np.asarray(eval_model(model, self.grid, 0)))

    @property
    def cells(self) -> int:
        return len(self.widths)

    def measure(self, cells: np.ndarray) -> FiniteBetaMeasure:
        cdf = np.append(cells, 1.0)
        cdf[-2] = 1.0
        return FiniteBetaMeasure(self.grid, cdf, self.beta, self.h)

    def gradient(self, cells: np.ndarray) -> np.ndarray:
        """Gradient of the functional in the cell values F_0..F_{G-1}."""
        w = self.widths
        parts = cells * w
        mh = np.concatenate((np.cumsum(parts[::-1])[::-1], [0.0]))
        da, db = logmean_inv_grad(mh[:-2], mh[1:-1])
        g_hat = np.zeros(len(mh))
        g_hat[:-2] += w[:-1] * da
        g_hat[1:-1] += w[:-1] * db
        prefix = np.cumsum(g_hat[:-1])
        return 0.5 * (self.beta**2 * self._xi_steps + w * prefix + self.h**2 * w)

    def value_and_gradient(self, cells: np.ndarray) -> tuple[float, np.ndarray]:
        return cs_energy(self.measure(cells), self.model), self.gradient(cells)

    # -- node weights ---------------------------------------------------

    @staticmethod
    def cells_from_weights(p: np.ndarray) -> np.ndarray:
        s = np.cumsum(p)
        return s / s[-1]

    @staticmethod
    def weights_from_cells(cells: np.ndarray) -> np.ndarray:
        return np.diff(np.concatenate(([0.0], cells)))

    def weight_objective(self, p: np.ndarray) -> tuple[float, np.ndarray]:
        total = float(np.sum(p))
        cells = self.cells_from_weights(p)
        value, g = self.value_and_gradient(cells)
        grad_p = (np.cumsum(g[::-1])[::-1] - float(np.dot(g, cells))) / total
        return value, grad_p

    def project(self, cells: np.ndarray) -> np.ndarray:
        """Nearest non-decreasing cdf in [0, 1] with the last cell pinned at 1."""
        fitted = np.clip(isotonic_regression(cells).x, 0.0, 1.0)
        fitted[-1] = 1.0
        return fitted


# ---------------------------------------------------------------------------
# Warm start from the ground state
# ---------------------------------------------------------------------------


def recovery_cells(nu: MeasureA, beta: float, grid: np.ndarray) -> np.ndarray:
    """Cells of the cdf min(1, m(t)/beta) for t < q', and 1 from q' on.

    q' solves beta (1 - q') = phi(q') = c + int_{q'}^1 m, so that the mass
    beyond q' matches the atom at 1; q' = 0 when beta <= nu[0, 1].
    """
    if beta <= nu.total_mass:
        q_cut = 0.0
    else:
        q_cut = float(brentq(lambda q: beta * (1.0 - q) - float(nu.phi(q)), 0.0, 1.0, xtol=1e-14))
    left = grid[:-1]
    cells = np.where(left < q_cut, np.minimum(1.0, np.asarray(nu.m_at(left)) / beta), 1.0)
    cells[-1] = 1.0
    return np.maximum.accumulate(cells)


# ---------------------------------------------------------------------------
# Result
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteBetaResult:
    """Minimizer at one inverse temperature and its rescaled views."""

    mu: FiniteBetaMeasure
    value: float
    iterations: int
    method: str

    @property
    def beta(self) -> float:
        return self.mu.beta

    @property
    def free_energy(self) -> float:
        """The functional divided by beta; tends to the ground-state energy."""
        return self.value / self.beta

    @property
    def rescaled_density(self) -> np.ndarray:
        """beta mu[0, t] at the nodes."""
        return self.beta * self.mu.cdf

    @property
    def q_star(self) -> float:
        return self.mu.q_star()

    @property
    def q_beta(self) -> float:
        return q_threshold(self.beta)

    def tail_probability(self) -> float:
        return float(np.sum(self.mu.masses[self.mu.grid >= self.q_beta]))

    def atom_estimate(self) -> float:
        """beta E[1 - Y | Y >= q_beta]."""
        sel = self.mu.grid >= self.q_beta
        mass = float(np.sum(self.mu.masses[sel]))
        if mass <= 0:
            return math.inf
        return self.beta * float(np.dot(self.mu.masses[sel], 1.0 - self.mu.grid[sel])) / mass

    @property
    def atom_estimate_reliable(self) -> bool:
        return self.tail_probability() >= _RELIABLE_TAIL

    def to_dict(self) -> dict[str, Any]:
        return {
            "beta": self.beta,
            "h": self.mu.h,
            "G": len(self.mu.grid) - 1,
            "method": self.method,
            "iterations": self.iterations,
            "value": self.value,
            "free_energy": self.free_energy,
            "q_star": self.q_star,
            "beta_one_minus_q_star": self.beta * (1.0 - self.q_star),
            "q_beta": self.q_beta,
            "atom_estimate": self.atom_estimate(),
            "atom_estimate_reliable": self.atom_estimate_reliable,
            "grid": self.mu.grid.tolist(),
            "rescaled_density": self.rescaled_density.tolist(),
        }


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def finite_beta_minimize(
    model: MixedModel,
    beta: float,
    h: float = 0.0,
    G: int = FINITE_BETA_GRID,
    *,
    tol: float = STALL_TOL,
    method: FiniteBetaMethod = "lbfgsb",
    max_iter: int = MAX_ITERATIONS,
    start: np.ndarray | None = None,
) -> FiniteBetaResult:
    """Minimize the finite-temperature functional over cdfs on the graded grid.

    Args:
        model: The mixture.
        beta: Inverse temperature, > 0.
        h: External field, >= 0.
        G: Number of grid cells.
        tol: Relative objective decrease that counts as converged.
        method: ``"lbfgsb"`` on node weights, or ``"apg"`` on the cdf with
            isotonic projection.
        max_iter: Iteration cap.
        start: Initial cell values of the cdf; defaults to the point mass at q*
            of the replica-symmetric equation, or the recovery cdf of the
            ground state when one is passed through :func:`gamma_check`.

    Raises:
        ValidationError: If beta <= 0, h < 0 or G < 500.
        ConvergenceError: If the iteration cap is reached.
    """
    if not beta > 0:
        raise ValidationError("beta must be positive", invariant="beta > 0")
    if h < 0:
        raise ValidationError("h must be >= 0", invariant="h >= 0")
    if G < MIN_SOLVER_GRID:
        raise ValidationError(f"G must be >= {MIN_SOLVER_GRID}, got {G}", invariant="G >= 500")
    problem = CsProblem(model, beta, h, G)
    cells0 = _default_start(problem) if start is None else problem.project(np.asarray(start))
    logger.info("finite-beta solve: %s, beta=%g, h=%g, G=%d", model.label or "model", beta, h, G)

    if method == "lbfgsb":
        p0 = problem.weights_from_cells(cells0)
        res = minimize(
            problem.weight_objective,
            p0,
            jac=True,
            method="L-BFGS-B",
            bounds=[(0.0, None)] * len(p0),
            options={
                "maxiter": max_iter,
                "maxfun": 2 * max_iter,
                "ftol": tol,
                "gtol": GRAD_TOL,
                "maxcor": 30,
            },
        )
        if res.status == 1:
            raise ConvergenceError(
                f"L-BFGS-B did not converge in {max_iter} iterations", iterations=int(res.nit)
            )
        cells, iterations = problem.cells_from_weights(np.maximum(res.x, 0.0)), int(res.nit)
    elif method == "apg":
        out = apg_minimize(
            problem.value_and_gradient,
            cells0,
            problem.project,
            step=1.0 / beta**2,
            max_iter=max_iter,
            stall_tol=tol,
        )
        cells, iterations = out.x, out.iterations
    else:
        raise ValidationError(f"unknown finite-beta method {method!r}", invariant="method")

    mu = problem.measure(cells)
    value = cs_energy(mu, model)
    logger.info("finite-beta solve done: F/beta=%.12g, q*=%.6f", value / beta, mu.q_star())
    return FiniteBetaResult(mu, value, iterations, f"finite-beta-{method}")


def _default_start(problem: CsProblem) -> np.ndarray:
    """Point mass at the q solving beta^2 xi'(q) + h^2 = q / (1 - q)^2."""
    beta, h = problem.beta, problem.h

    def rs(q: float) -> float:
        return beta**2 * float(eval_model(problem.model, q, 1)) + h * h - q / (1.0 - q) ** 2

    top = float(problem.grid[-2])
    q = float(brentq(rs, 1e-12, top)) if rs(1e-12) > 0 > rs(top) else 0.0
    node = problem.grid[np.searchsorted(problem.grid, q, side="right") - 1]
    cells = (problem.grid[:-1] >= node).astype(float)
    cells[-1] = 1.0
    return cells


# ---------------------------------------------------------------------------
# Zero-temperature limit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModerateDeviationReport:
    """Comparison of a finite-beta minimizer with the ground-state measure."""

    beta: float
    lhs: float
    rhs: float
    sup_distance: float
    atom_estimate: float
    atom_target: float
    reliable: bool
    free_energy: float
    gse: float

    @property
    def lhs_error(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "beta": self.beta,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "sup_distance": self.sup_distance,
            "atom_estimate": self.atom_estimate,
            "atom_target": self.atom_target,
            "reliable": self.reliable,
            "free_energy": self.free_energy,
            "GSE": self.gse,
        }


def _poly_pair(
    f: Polynomial | Callable[[np.ndarray], np.ndarray],
) -> tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]:
    if isinstance(f, Polynomial):
        df = f.deriv()
        return (lambda t: np.asarray(f(t))), (lambda t: np.asarray(df(t)))
    raise ValidationError("test function must be a numpy Polynomial", invariant="polynomial f")


def moderate_deviation_report(
    fb: FiniteBetaResult, gs: SolveResult, f: Polynomial | None = None
) -> ModerateDeviationReport:
    """Tabulate the zero-temperature limits for one finite-beta minimizer.

    * beta [f(1) - int f dmu_beta] against int f' dnu (default f(t) = t);
    * sup over t < q_beta of |beta mu_beta[0, t] - m(t)|, away from the atoms of nu;
    * beta E[1 - Y | Y >= q_beta] against nu({1}), flagged unreliable when
      P(Y >= q_beta) < 1/2.
    """
    f = Polynomial([0.0, 1.0]) if f is None else f
    fn, dfn = _poly_pair(f)
    nu = to_measure(gs.ansatz if gs.ansatz is not None else gs.phi)
    mu = fb.mu
    lhs = fb.beta * float(np.dot(mu.cells, np.diff(fn(mu.grid))))
    rhs = nu.integrate_derivative(fn, dfn)

    left = mu.grid[:-1]
    window = left < fb.q_beta
    for q, _ in nu.significant_atoms(min_mass=1e-6, merge_gap=2.0 / max(gs.phi.size, 1)):
        window &= np.abs(left - q) > _ATOM_EXCLUSION
    dist = np.abs(fb.beta * mu.cells - np.asarray(nu.m_at(left)))
    sup = float(np.max(dist[window])) if np.any(window) else 0.0

    estimate = fb.atom_estimate()
    reliable = fb.atom_estimate_reliable
    if not reliable:
        logger.warning(
            "beta=%g: atom estimate %.4g rests on tail mass %.3g",
            fb.beta,
            estimate,
            fb.tail_probability(),
        )
    return ModerateDeviationReport(
        beta=fb.beta,
        lhs=lhs,
        rhs=rhs,
        sup_distance=sup,
        atom_estimate=estimate,
        atom_target=nu.c,
        reliable=reliable,
        free_energy=fb.free_energy,
        gse=gs.gse,
    )


def gamma_check(
    model: MixedModel,
    betas: Sequence[float] = BETA_LADDER,
    h: float = 0.0,
    G: int = FINITE_BETA_GRID,
    *,
    gs_grid: int = MIN_SOLVER_GRID,
    f: Polynomial | None = None,
) -> list[ModerateDeviationReport]:
    """Run the beta ladder from recovery warm starts and report each rung."""
    rows = []
    cached: dict[float, SolveResult] = {}
    for beta in betas:
        field = h / beta
        if field not in cached:
            cached[field] = grid_minimize(model, field, gs_grid)
        gs = cached[field]
        grid = graded_grid(G)
        start = recovery_cells(to_measure(gs.phi), beta, grid)
        fb = finite_beta_minimize(model, beta, h, G, start=start)
        rows.append(moderate_deviation_report(fb, gs, f))
    return rows
