"""Accelerated projected gradient (FISTA) with backtracking and adaptive restart."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from sphgse.config import GRAD_TOL, MAX_ITERATIONS, STALL_TOL, STALL_WINDOW
from sphgse.errors import ConvergenceError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]
Projection = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ApgResult:
    x: np.ndarray
    fun: float
    iterations: int
    restarts: int = 0


def _stalled(history: list[float], window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    old, new = history[-window - 1], history[-1]
    return old - new <= tol * max(1.0, abs(old))


def apg_minimize(
    fun: Objective,
    x0: np.ndarray,
    project: Projection,
    *,
    step: float = 1.0,
    max_iter: int = MAX_ITERATIONS,
    stall_window: int = STALL_WINDOW,
    stall_tol: float = STALL_TOL,
    grad_tol: float = GRAD_TOL,
) -> ApgResult:
    """Minimize a smooth convex ``fun`` over the set ``project`` maps onto.

    ``fun`` returns the value and the gradient. The step is found by halving
    until the quadratic upper bound holds and grows by 10% after each accepted
    step; momentum restarts whenever the objective goes up, and a restart
    enters the stall history as a step without decrease.

    Stops when the relative decrease over ``stall_window`` iterations is below
    ``stall_tol`` or the projected-gradient norm is below ``grad_tol``.

    Raises:
        ConvergenceError: After ``max_iter`` iterations without meeting either test.
    """
    x = project(np.asarray(x0, dtype=float))
    fx, _ = fun(x)
    y, theta = x.copy(), 1.0
    history = [fx]
    restarts = 0
    for it in range(1, max_iter + 1):
        fy, gy = fun(y)
        while True:
            x_new = project(y - step * gy)
            d = x_new - y
            f_new, _ = fun(x_new)
            if f_new <= fy + float(np.dot(gy, d)) + float(np.dot(d, d)) / (2.0 * step) + 1e-15:
                break
            step *= 0.5
            if step < 1e-300:
                raise ConvergenceError("step size underflow", iterations=it)
        pg = float(np.linalg.norm(d)) / step

        if f_new > fx:
            # restart from the last iterate without momentum; counts as a stalled step
            y, theta = x.copy(), 1.0
            restarts += 1
            converged = False
        else:
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
            x, fx, theta = x_new, f_new, theta_new
            step *= 1.1
            converged = pg < grad_tol
        history.append(fx)

        if converged or _stalled(history, stall_window, stall_tol):
            logger.debug(
                "apg stopped after %d iterations (%d restarts), f=%.15g, pg=%.3g",
                it,
                restarts,
                fx,
                pg,
            )
            return ApgResult(x, fx, it, restarts)
    raise ConvergenceError(
        f"accelerated projected gradient did not converge in {max_iter} iterations",
        iterations=max_iter,
    )
