"""Finite-dimensional minimization over the structured family a sign profile allows.

Between consecutive roots of the structure function the optimizer has at most
two atoms of dm, and inside an interval where the structure function is negative
the two atoms may be joined by an FRSB segment with density -d. The first atom
sits at 0.

Every point of the parameter box builds a valid order parameter, so the family
is searched by bounded quasi-Newton with an exact gradient: first from the atoms
of the dense grid solution, then from the 1RSB closed form and a few random
starts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from sphgse.config import (
    DEFAULT_GRID,
    DEFAULT_SEED,
    MULTI_START,
    POSITIVITY_FLOOR,
    REDUCTION_MARGIN_TOL,
)
from sphgse.errors import ConvergenceError, ReductionInconclusive, ValidationError
from sphgse.functionals import duality_gap, obstacle_check, primal_energy
from sphgse.model import MixedModel, Sign, SignInterval, SignProfile, eval_model
from sphgse.numerics import gauss_legendre
from sphgse.onersb import solve_master
from sphgse.order_param import (
    GridFunction,
    OrderParamAnsatz,
    frsb_curvature,
    frsb_slope,
    merge_atoms,
)
from sphgse.solver.grid import grid_minimize
from sphgse.solver.result import SolveResult

logger = logging.getLogger(__name__)

_ROUND = 12
_GAUSS_NODES = 16
_REFERENCE_GRID = 1000
_CERTIFIED_GAP = 1e-7


@dataclass(frozen=True)
class AnsatzFamily:
    """Parametrization x = (c, a_0, then u_1, u_2, a_1, a_2 per interval).

    For an interval (l, r): q_1 = l + (r - l) u_1 and q_2 = q_1 + (r - q_1) u_2
    carry masses a_1 and a_2. A negative interval adds the segment [q_1, q_2].
    """

    model: MixedModel
    intervals: tuple[SignInterval, ...]

    @property
    def size(self) -> int:
        return 2 + 4 * len(self.intervals)

    def bounds(self) -> list[tuple[float | None, float | None]]:
        out: list[tuple[float | None, float | None]] = [(POSITIVITY_FLOOR, None), (0.0, None)]
        for _ in self.intervals:
            out.extend([(0.0, 1.0), (0.0, 1.0), (0.0, None), (0.0, None)])
        return out

    def locations(self, x: np.ndarray) -> list[tuple[float, float]]:
        """(q_1, q_2) of every interval."""
        out = []
        for k, iv in enumerate(self.intervals):
            u1, u2 = float(x[2 + 4 * k]), float(x[3 + 4 * k])
            q1 = iv.left + (iv.right - iv.left) * u1
            out.append((q1, q1 + (iv.right - q1) * u2))
        return out

    def build(self, x: np.ndarray) -> OrderParamAnsatz:
        atoms = [(0.0, float(x[1]))]
        segments = []
        for k, (iv, (q1, q2)) in enumerate(zip(self.intervals, self.locations(x), strict=True)):
            a1, a2 = float(x[4 + 4 * k]), float(x[5 + 4 * k])
            if q1 < 1.0:
                atoms.append((q1, a1))
            if q2 < 1.0:
                atoms.append((q2, a2))
            if iv.sign is Sign.NEGATIVE and q2 > q1:
                segments.append((q1, q2))
        return OrderParamAnsatz(
            c=float(x[0]),
            atoms=merge_atoms(atoms),
            frsb_segments=tuple(segments),
            model=self.model,
        )

    def objective(self, x: np.ndarray) -> float:
        return primal_energy(self.build(x), self.model, 0.0, rule="gauss")

    def energy(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """P and its gradient in x.

        With r = xi'' - phi^-2 the first variation is dP = int r dphi. An atom
        (q, a) moves phi by the ramp 1 - max(q, t) per unit mass and by -a on
        [0, q) per unit shift of q; the ends of a segment move it by the ramp
        times g'' at that end, with g = (xi'')^(-1/2).
        """
        ansatz = self.build(x)
        value = primal_energy(ansatz, self.model, 0.0, rule="gauss")
        locs = self.locations(x)
        ends = [min(q, 1.0) for pair in locs for q in pair]
        breaks = np.union1d(ansatz.breakpoints(), ends)
        s, w = gauss_legendre(_GAUSS_NODES)
        width = np.diff(breaks)
        t = breaks[:-1, None] + width[:, None] * s
        r = (np.asarray(eval_model(self.model, t, 2)) - np.asarray(ansatz.phi(t)) ** -2.0) * (
            width[:, None] * w
        )
        head = np.concatenate(([0.0], np.cumsum(r.sum(axis=1))))
        tail = np.append(np.cumsum((r * (1.0 - t)).sum(axis=1)[::-1])[::-1], 0.0)

        def moments(q: float) -> tuple[float, float]:
            """int_0^q r and int r (1 - max(q, t))."""
            k = int(np.searchsorted(breaks, min(q, 1.0)))
            return float(head[k]), (1.0 - q) * float(head[k]) + float(tail[k])

        grad = np.zeros(self.size)
        grad[0] = head[-1]
        grad[1] = tail[0]
        for k, (iv, (q1, q2)) in enumerate(zip(self.intervals, locs, strict=True)):
            a1, a2, u2 = float(x[4 + 4 * k]), float(x[5 + 4 * k]), float(x[3 + 4 * k])
            left1, ramp1 = moments(q1)
            left2, ramp2 = moments(q2)
            d_q1 = -a1 * left1
            d_q2 = -a2 * left2
            if iv.sign is Sign.NEGATIVE:
                d_q1 += float(frsb_curvature(self.model, q1)) * ramp1
                d_q2 -= float(frsb_curvature(self.model, q2)) * ramp2
            grad[2 + 4 * k] = (iv.right - iv.left) * (d_q1 + (1.0 - u2) * d_q2)
            grad[3 + 4 * k] = (iv.right - q1) * d_q2
            grad[4 + 4 * k] = ramp1
            grad[5 + 4 * k] = ramp2
        return value, grad

    def one_rsb_start(self, m: float, c: float) -> np.ndarray:
        x = np.zeros(self.size)
        x[0], x[1] = c, m
        x[2::4] = 0.5
        x[3::4] = 0.5
        return x

    def grid_start(self, phi: GridFunction) -> np.ndarray:
        """Parameters read off a dense solution.

        In each interval q_1 and q_2 go to the first and last node where m jumps;
        the jumps are split between the two atoms, less the mass a segment carries.
        """
        t = phi.grid[:-1]
        jumps = np.diff(np.concatenate(([0.0], -phi.slopes())))
        x = np.zeros(self.size)
        x[0] = max(float(phi.values[-1]), POSITIVITY_FLOOR)
        x[1] = max(float(jumps[0]), 0.0)
        x[2::4] = 0.5
        x[3::4] = 0.5
        for k, iv in enumerate(self.intervals):
            nodes = np.flatnonzero((t >= iv.left) & (t < iv.right))
            nodes = nodes[nodes > 0]
            mass = np.clip(jumps[nodes], 0.0, None)
            if mass.size == 0 or not mass.max() > 0:
                continue
            seen = nodes[mass > 1e-3 * mass.max()]
            q1, q2 = float(phi.grid[seen[0]]), float(phi.grid[seen[-1]])
            x[2 + 4 * k] = (q1 - iv.left) / (iv.right - iv.left)
            x[3 + 4 * k] = (q2 - q1) / (iv.right - q1)
            total = float(mass.sum())
            if iv.sign is Sign.NEGATIVE and q2 > q1:
                spread = float(frsb_slope(self.model, q1) - frsb_slope(self.model, q2))
                first = float(np.sum(mass[nodes <= seen[0] + 1]))
                x[4 + 4 * k] = first
                x[5 + 4 * k] = max(total - first - spread, 0.0)
            else:
                below = float(np.sum(mass[phi.grid[nodes] < 0.5 * (q1 + q2)]))
                x[4 + 4 * k] = below
                x[5 + 4 * k] = total - below
        x[2::4] = np.clip(x[2::4], 0.0, 1.0)
        x[3::4] = np.clip(x[3::4], 0.0, 1.0)
        return x

    def random_start(self, rng: np.random.Generator, m: float, c: float) -> np.ndarray:
        x = np.empty(self.size)
        x[0] = c * rng.uniform(0.5, 1.5)
        x[1] = m * rng.uniform(0.0, 1.0)
        n = len(self.intervals)
        x[2::4] = rng.uniform(0.0, 1.0, n)
        x[3::4] = rng.uniform(0.0, 1.0, n)
        x[4::4] = rng.uniform(0.0, max(m, c), n)
        x[5::4] = rng.uniform(0.0, max(m, c), n)
        return x


def _feasible(ansatz: OrderParamAnsatz, model: MixedModel) -> tuple[bool, float, float]:
    report = duality_gap(ansatz, model, 0.0)
    margin, _ = obstacle_check(report.cert, refine=True)
    return margin >= -report.cert.feasible_tol, report.gap, margin


def ansatz_minimize(
    model: MixedModel,
    profile: SignProfile,
    h: float = 0.0,
    *,
    starts: int = MULTI_START,
    seed: int = DEFAULT_SEED,
    G: int = DEFAULT_GRID,
    reference: GridFunction | None = None,
) -> SolveResult:
    """Minimize P over the structured family attached to ``profile``.

    Closed-form candidates are tried first: the constant order parameter for SK,
    the 1RSB order parameter, and phi = (xi'')^(-1/2) on all of [0, 1]. The first
    one with a feasible certificate is returned.

    Otherwise the family is optimized from the atoms of ``reference`` (a dense
    grid solution, computed when not given), then from the 1RSB start and
    ``starts`` random starts. A local optimum whose certificate is feasible with
    a gap below 1e-7 is returned at once. Failing that, candidates are ranked by
    (P, parameters) and the best one whose obstacle margin is at least -1e-6 is
    returned.

    Raises:
        ValidationError: If h != 0.
        ReductionInconclusive: If no candidate reaches the margin.
    """
    if h != 0:
        raise ValidationError("the structured family is defined at zero field", invariant="h = 0")
    sol = solve_master(model)
    if sol.is_sk:
        return SolveResult.build(sol.ansatz(model), model, 0.0, 0, "ansatz-sk", G)

    one_rsb = sol.ansatz(model)
    ok, gap, margin = _feasible(one_rsb, model)
    if ok:
        logger.info("1RSB closed form is certified (gap=%.3g)", gap)
        return SolveResult.build(one_rsb, model, 0.0, 0, "ansatz-1rsb", G)

    if all(iv.sign is not Sign.POSITIVE for iv in profile.intervals):
        try:
            frsb = OrderParamAnsatz.full_frsb(model)
        except ValidationError as e:
            logger.debug("full FRSB candidate rejected: %s", e)
        else:
            if _feasible(frsb, model)[0]:
                logger.info("full FRSB profile is certified")
                return SolveResult.build(frsb, model, 0.0, 0, "ansatz-frsb", G)

    family = AnsatzFamily(model, profile.intervals)
    inits: list[np.ndarray] = []
    if reference is None:
        try:
            reference = grid_minimize(model, 0.0, _REFERENCE_GRID).phi
        except ConvergenceError as e:
            logger.warning("no grid reference for the structured search: %s", e)
    if reference is not None:
        inits.append(family.grid_start(reference))
    inits.append(family.one_rsb_start(sol.m, sol.c))
    rng = np.random.default_rng(seed)
    inits.extend(family.random_start(rng, sol.m, sol.c) for _ in range(starts))

    candidates: list[tuple[float, tuple[float, ...], int, float, float]] = []
    for i, x0 in enumerate(inits):
        res = minimize(
            family.energy,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=family.bounds(),
            options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10},
        )
        params = tuple(round(float(v), _ROUND) for v in res.x)
        ansatz = family.build(np.array(params))
        ok, gap, margin = _feasible(ansatz, model)
        logger.debug(
            "start %d: P=%.15g gap=%.3g margin=%.3g after %d iterations",
            i,
            res.fun,
            gap,
            margin,
            res.nit,
        )
        if ok and abs(gap) < _CERTIFIED_GAP:
            logger.info("start %d is certified (gap=%.3g)", i, gap)
            return SolveResult.build(ansatz, model, 0.0, int(res.nit), "ansatz-family", G)
        candidates.append((round(float(res.fun), _ROUND), params, int(res.nit), gap, margin))
    candidates.sort()

    best_gap, best_margin = float("inf"), -float("inf")
    for _, params, nit, gap, margin in candidates:
        if margin > best_margin:
            best_gap, best_margin = gap, margin
        if margin >= -REDUCTION_MARGIN_TOL:
            ansatz = family.build(np.array(params))
            return SolveResult.build(ansatz, model, 0.0, nit, "ansatz-family", G)
    raise ReductionInconclusive(
        f"no structured candidate reached obstacle margin -{REDUCTION_MARGIN_TOL:g} "
        f"(best margin {best_margin:.3g})",
        best_gap=best_gap,
        best_margin=best_margin,
    )
