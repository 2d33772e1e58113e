"""Dense minimizer of P over the cone of concave non-increasing functions.

On the grid t_i = i/G the order parameter is written as

    phi(t) = c + sum_j rho_j (1 - max(t_j, t)),   c >= floor, rho_j >= 0,

one ramp per knot t_0..t_{G-1}. Every such phi lies in the cone and every
piecewise-linear member of the cone has this form, so the constraints reduce to
simple bounds. P of the piecewise-linear interpolant is evaluated exactly.

A first-order method finds the active set; a projected Newton iteration on the
free knots then drives the projected gradient to zero. In node values the
Hessian is tridiagonal, so each Newton step is a sparse solve.
"""

from __future__ import annotations

import logging
import math
from typing import Literal

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.sparse.linalg import spsolve

from sphgse.config import (
    DEFAULT_GRID,
    GRAD_TOL,
    KKT_TOL,
    MAX_ITERATIONS,
    MIN_SOLVER_GRID,
    NEWTON_MAX_ITER,
    POSITIVITY_FLOOR,
    STALL_TOL,
)
from sphgse.errors import ConvergenceError, ValidationError
from sphgse.model import MixedModel, eval_model
from sphgse.numerics import gauss_legendre, logmean_inv, logmean_inv_grad
from sphgse.onersb import solve_master
from sphgse.order_param import GridFunction
from sphgse.solver.apg import apg_minimize
from sphgse.solver.result import SolveResult

logger = logging.getLogger(__name__)

GridMethod = Literal["lbfgsb", "apg"]


class GridProblem:
    """Discretized P as a function of x = (c, rho_0, ..., rho_{G-1})."""

    def __init__(self, model: MixedModel, h: float, G: int) -> None:
        self.model = model
        self.h = h
        self.G = G
        self.grid = np.linspace(0.0, 1.0, G + 1)
        self.widths = np.diff(self.grid)
        self._ramp = 1.0 - self.grid
        self._xi_steps = np.diff(np.asarray(eval_model(model, self.grid, 0)))
        xi_p = np.asarray(eval_model(model, self.grid, 1))
        self._xip_ends = (float(xi_p[0]), float(xi_p[-1]))

    @property
    def size(self) -> int:
        return self.G + 1

    def _ramps(self, v: np.ndarray) -> np.ndarray:
        """sum_j v_j (1 - max(t_j, t_i)) at every node; the matrix is symmetric."""
        rv = v * self._ramp
        tail = np.cumsum(rv[::-1])[::-1] - rv
        return self._ramp * np.cumsum(v) + tail

    def phi(self, x: np.ndarray) -> np.ndarray:
        """Node values of phi for parameters x."""
        return x[0] + self._ramps(np.append(x[1:], 0.0))

    def pullback(self, g: np.ndarray) -> np.ndarray:
        """Gradient in x from a gradient in the node values."""
        return np.concatenate(([g.sum()], self._ramps(g)[: self.G]))

    def energy_nodes(self, phi: np.ndarray) -> tuple[float, np.ndarray]:
        """P of the piecewise-linear phi and its gradient in the node values."""
        w = self.widths
        a, b = phi[:-1], phi[1:]
        k = (b - a) / w
        xp0, xp1 = self._xip_ends
        value = (
            xp1 * phi[-1]
            - xp0 * phi[0]
            - float(np.dot(k, self._xi_steps))
            + float(np.dot(w, logmean_inv(a, b)))
            + self.h**2 * phi[0]
        )
        g = np.zeros_like(phi)
        g[-1] += xp1
        g[0] += self.h**2 - xp0
        r = self._xi_steps / w
        g[:-1] += r
        g[1:] -= r
        da, db = logmean_inv_grad(a, b)
        g[:-1] += w * da
        g[1:] += w * db
        return value, g

    def energy(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        value, g = self.energy_nodes(self.phi(x))
        return value, self.pullback(g)

    def hessian_nodes(self, phi: np.ndarray) -> sparse.csc_matrix:
        """Hessian of P in the node values; only the int 1/phi cells contribute."""
        s, wq = gauss_legendre(8)
        a, b = phi[:-1, None], phi[1:, None]
        kernel = 2.0 * wq / ((1.0 - s) * a + s * b) ** 3
        haa = self.widths * np.sum(kernel * (1.0 - s) ** 2, axis=1)
        hab = self.widths * np.sum(kernel * s * (1.0 - s), axis=1)
        hbb = self.widths * np.sum(kernel * s**2, axis=1)
        main = np.zeros(self.size)
        main[:-1] += haa
        main[1:] += hbb
        return sparse.diags([hab, main, hab], [-1, 0, 1], format="csc")

    def knot_basis(self, free: np.ndarray) -> sparse.csr_matrix:
        """Node values of phi from its values at the free knots.

        ``free`` flags rho_0..rho_{G-1}. The knots are node 0 when rho_0 is free,
        the nodes j >= 1 with free rho_j, and node G; phi is linear between knots
        and flat before the first one.
        """
        knots = np.flatnonzero(free[1:]) + 1
        if free[0]:
            knots = np.concatenate(([0], knots))
        knots = np.append(knots, self.G)
        nodes = np.arange(self.size)
        k = np.searchsorted(knots, nodes, side="left")
        inner = k > 0
        right = k[inner]
        t_lo, t_hi = self.grid[knots[right - 1]], self.grid[knots[right]]
        lam = (self.grid[nodes[inner]] - t_lo) / (t_hi - t_lo)
        rows = np.concatenate((nodes[~inner], nodes[inner], nodes[inner]))
        cols = np.concatenate((np.zeros(int(np.sum(~inner)), dtype=int), right - 1, right))
        vals = np.concatenate((np.ones(int(np.sum(~inner))), 1.0 - lam, lam))
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.size, len(knots)))

    def params_of_nodes(self, dphi: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`phi` for a direction in node values: c and the kinks."""
        slopes = np.diff(dphi) / self.widths
        dx = np.empty(self.size)
        dx[0] = dphi[-1]
        dx[1] = -slopes[0]
        dx[2:] = slopes[:-1] - slopes[1:]
        return dx

    def kkt_residual(self, x: np.ndarray, g: np.ndarray) -> float:
        """Sup norm of x - max(x - g, lower bounds); zero exactly at a constrained minimum."""
        return float(np.max(np.abs(x - np.maximum(x - g, self.lower_bounds()))))

    def start(self) -> np.ndarray:
        """The 1RSB closed form at h = 0, the best constant otherwise."""
        x = np.zeros(self.size)
        xp1 = self._xip_ends[1]
        if self.h == 0:
            sol = solve_master(self.model)
            x[0], x[1] = sol.c, sol.m
        else:
            x[0] = 1.0 / math.sqrt(xp1 + self.h**2)
        return x

    def scales(self, x: np.ndarray) -> np.ndarray:
        """Inverse square roots of the diagonal of the Hessian of int 1/phi at x."""
        phi = self.phi(x)
        wt = np.zeros_like(phi)
        wt[:-1] += 0.5 * self.widths
        wt[1:] += 0.5 * self.widths
        a = 2.0 * wt / phi**3
        ra2 = a * self._ramp**2
        diag_rho = self._ramp**2 * np.cumsum(a) + (np.cumsum(ra2[::-1])[::-1] - ra2)
        diag = np.concatenate(([a.sum()], diag_rho[: self.G]))
        return 1.0 / np.sqrt(np.maximum(diag, 1e-300))

    def lower_bounds(self) -> np.ndarray:
        lo = np.zeros(self.size)
        lo[0] = POSITIVITY_FLOOR
        return lo


def _solve_lbfgsb(
    problem: GridProblem, x0: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, int]:
    s = problem.scales(x0)
    lo = problem.lower_bounds() / s

    def fun(z: np.ndarray) -> tuple[float, np.ndarray]:
        value, g = problem.energy(z * s)
        return value, g * s

    res = minimize(
        fun,
        x0 / s,
        jac=True,
        method="L-BFGS-B",
        bounds=[(float(v), None) for v in lo],
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
    if not res.success:
        logger.debug("L-BFGS-B stopped with status %d: %s", res.status, res.message)
    return res.x * s, int(res.nit)


def _solve_apg(
    problem: GridProblem, x0: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, int]:
    s = problem.scales(x0)
    lo = problem.lower_bounds() / s

    def fun(z: np.ndarray) -> tuple[float, np.ndarray]:
        value, g = problem.energy(z * s)
        return value, g * s

    out = apg_minimize(
        fun, x0 / s, lambda z: np.maximum(z, lo), step=1e-2, max_iter=max_iter, stall_tol=tol
    )
    return out.x * s, out.iterations


def _newton_direction(
    problem: GridProblem, phi: np.ndarray, g_phi: np.ndarray, free: np.ndarray
) -> np.ndarray:
    """Newton step restricted to order parameters with kinks at the free knots."""
    basis = problem.knot_basis(free)
    hess = (basis.T @ problem.hessian_nodes(phi) @ basis).tocsc()
    step = -np.atleast_1d(spsolve(hess, basis.T @ g_phi))
    dx = problem.params_of_nodes(basis @ step)
    dx[1:][~free] = 0.0
    return dx


def newton_polish(
    problem: GridProblem,
    x0: np.ndarray,
    tol: float = KKT_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> tuple[np.ndarray, int]:
    """Projected Newton iteration from a point near the minimum.

    A kink is held at zero while it is within the current residual of its bound
    and its gradient pushes outward; the rest take a Newton step and the line
    search projects back onto the bounds. Stops when :meth:`GridProblem.kkt_residual`
    is below ``tol`` or the objective no longer decreases in double precision.
    """
    lo = problem.lower_bounds()
    x = np.maximum(np.asarray(x0, dtype=float), lo)
    phi = problem.phi(x)
    f, g_phi = problem.energy_nodes(phi)
    g = problem.pullback(g_phi)
    residual = problem.kkt_residual(x, g)
    for it in range(1, max_iter + 1):
        if residual <= tol:
            return x, it - 1
        eps = min(residual, 1e-6)
        active = (x - lo <= eps) & (g > 0)
        active[0] = False
        d = _newton_direction(problem, phi, g_phi, ~active[1:])
        d[active] = lo[active] - x[active]

        alpha = 1.0
        while True:
            x_new = np.maximum(x + alpha * d, lo)
            phi_new = problem.phi(x_new)
            f_new, g_phi_new = problem.energy_nodes(phi_new)
            if f_new <= f + 1e-4 * float(np.dot(g, x_new - x)):
                break
            alpha *= 0.5
            if alpha < 1e-10:
                logger.debug(
                    "newton line search failed at iteration %d, residual %.3g", it, residual
                )
                return x, it
        decrease = f - f_new
        x, phi, f, g_phi = x_new, phi_new, f_new, g_phi_new
        g = problem.pullback(g_phi)
        residual = problem.kkt_residual(x, g)
        if decrease <= 1e-15 * max(1.0, abs(f)):
            logger.debug("newton stalled at iteration %d, residual %.3g", it, residual)
            return x, it
    if residual > tol:
        logger.warning(
            "newton polish stopped after %d iterations with residual %.3g", max_iter, residual
        )
    return x, max_iter


def grid_minimize(
    model: MixedModel,
    h: float = 0.0,
    G: int = DEFAULT_GRID,
    tol: float = STALL_TOL,
    *,
    method: GridMethod = "lbfgsb",
    max_iter: int = MAX_ITERATIONS,
    start: np.ndarray | None = None,
) -> SolveResult:
    """Minimize P over piecewise-linear members of the cone on the uniform grid.

    Args:
        model: The mixture.
        h: External field, >= 0.
        G: Number of grid cells, >= 500.
        tol: Relative objective decrease that counts as converged.
        method: ``"lbfgsb"`` (projected quasi-Newton) or ``"apg"`` (accelerated
            projected gradient). Both work in Jacobi-scaled variables and hand
            over to :func:`newton_polish`.
        max_iter: Iteration cap.
        start: Initial parameter vector (c, rho); defaults to :meth:`GridProblem.start`.

    Raises:
        ValidationError: If G < 500 or h < 0.
        ConvergenceError: If the iteration cap is reached.
    """
    if G < MIN_SOLVER_GRID:
        raise ValidationError(f"G must be >= {MIN_SOLVER_GRID}, got {G}", invariant="G >= 500")
    if h < 0:
        raise ValidationError("h must be >= 0", invariant="h >= 0")
    problem = GridProblem(model, h, G)
    x0 = problem.start() if start is None else np.asarray(start, dtype=float)
    logger.info("grid solve: %s, h=%g, G=%d, method=%s", model.label or "model", h, G, method)
    if method == "apg":
        x, iterations = _solve_apg(problem, x0, tol, max_iter)
    elif method == "lbfgsb":
        x, iterations = _solve_lbfgsb(problem, x0, tol, max_iter)
    else:
        raise ValidationError(f"unknown grid method {method!r}", invariant="method")
    x, newton_steps = newton_polish(problem, x)
    iterations += newton_steps
    residual = problem.kkt_residual(x, problem.energy(x)[1])
    result = SolveResult.build(
        GridFunction(problem.grid, problem.phi(x)), model, h, iterations, f"grid-{method}"
    )
    logger.info(
        "grid solve done: GSE=%.12g gap=%.3g margin=%.3g kkt=%.3g after %d iterations",
        result.gse,
        result.gap,
        result.obstacle_margin,
        residual,
        iterations,
    )
    return result
