"""Closed-form one-step replica symmetry breaking at zero field.

The 1RSB order parameter is phi = m (1 - t) + c. Its parameters follow from the
master equation a(y) = xi(1)/xi'(1) with y = 1/(c^2 xi'(1)) and m = c (y - 1).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq, newton

from sphgse.config import (
    BOUNDARY_TOL,
    MASTER_TOL,
    ROOT_REFINE_TOL,
    ROOT_RESOLUTION,
    SK_RATIO_TOL,
)
from sphgse.errors import DomainError, ShapeError, ValidationError
from sphgse.functionals import duality_gap, obstacle_check
from sphgse.model import MixedModel, Sign, eval_model, sign_intervals
from sphgse.numerics import sign_changes
from sphgse.order_param import OrderParamAnsatz

logger = logging.getLogger(__name__)

# a(y) is evaluated from its Taylor series at 1 when y - 1 is below this.
_SERIES_RADIUS = 0.05
_SERIES_TERMS = 14


# ---------------------------------------------------------------------------
# Master equation
# ---------------------------------------------------------------------------


def _a_series(e: float) -> float:
    return sum((-1) ** (n + 1) * e ** (n - 1) / (n * (n + 1)) for n in range(1, _SERIES_TERMS + 1))


def _da_series(e: float) -> float:
    return sum(
        (-1) ** (n + 1) * (n - 1) * e ** (n - 2) / (n * (n + 1))
        for n in range(2, _SERIES_TERMS + 1)
    )


def a_of_y(y: float) -> float:
    """a(y) = (1/(y-1)) ((y/(y-1)) log y - 1).

    Strictly decreasing on (1, inf), from 1/2 at 1+ to 0 at infinity.

    Raises:
        DomainError: If y <= 1.
    """
    if not y > 1:
        raise DomainError(f"a(y) needs y > 1, got {y}", invariant="y > 1")
    e = y - 1.0
    if e < _SERIES_RADIUS:
        return _a_series(e)
    return (y * math.log1p(e) / e - 1.0) / e


def da_of_y(y: float) -> float:
    """a'(y) = (2 (y - 1) - (y + 1) log y) / (y - 1)^3."""
    if not y > 1:
        raise DomainError(f"a'(y) needs y > 1, got {y}", invariant="y > 1")
    e = y - 1.0
    if e < _SERIES_RADIUS:
        return _da_series(e)
    return (2.0 * e - (y + 1.0) * math.log1p(e)) / e**3


@dataclass(frozen=True)
class OneRsbSolution:
    """Solution of the master equation and the induced (m, c)."""

    y: float
    m: float
    c: float
    converged: bool
    is_sk: bool = False
    residuals: dict[str, float] = field(default_factory=dict)

    def ansatz(self, model: MixedModel | None = None) -> OrderParamAnsatz:
        return OrderParamAnsatz.one_rsb(self.m, self.c, model)

    def to_dict(self) -> dict[str, Any]:
        return {
            "y": self.y,
            "m": self.m,
            "c": self.c,
            "converged": self.converged,
            "is_sk": self.is_sk,
            "residuals": dict(self.residuals),
        }


def fp1rsb_residuals(model: MixedModel, m: float, c: float) -> dict[str, float]:
    """Residuals of the two stationarity equations for phi = m (1 - t) + c."""
    xi1 = float(eval_model(model, 1.0))
    xip1 = float(eval_model(model, 1.0, 1))
    if m > 0:
        energy = (math.log1p(m / c) / m - 1.0 / (c + m)) / m
    else:
        energy = 1.0 / (2.0 * c * c)
    return {"xi1": xi1 - energy, "inv_xip1": 1.0 / xip1 - c * (c + m)}


def solve_master(model: MixedModel) -> OneRsbSolution:
    """Solve a(y) = xi(1)/xi'(1) and recover (m, c).

    The root is bracketed on [1 + 1e-12, Y] with Y doubled until a(Y) drops below
    the target, found by ``brentq`` and polished by Newton with the analytic a'.
    A ratio within 1e-14 of 1/2 is the SK case: y = 1, m = 0, c = xi'(1)^(-1/2).
    """
    xi1 = float(eval_model(model, 1.0))
    xip1 = float(eval_model(model, 1.0, 1))
    target = xi1 / xip1
    if target >= 0.5 - SK_RATIO_TOL:
        c = 1.0 / math.sqrt(xip1)
        return OneRsbSolution(1.0, 0.0, c, True, True, fp1rsb_residuals(model, 0.0, c))

    lo, hi = 1.0 + 1e-12, 2.0
    while a_of_y(hi) >= target:
        hi *= 2.0
        if hi > 1e300:
            raise ValidationError("master equation has no bracket", invariant="bracket")
    y = float(brentq(lambda v: a_of_y(v) - target, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500))
    try:
        polished = float(
            newton(lambda v: a_of_y(v) - target, y, fprime=da_of_y, tol=1e-15, maxiter=20)
        )
        if polished > 1 and abs(a_of_y(polished) - target) <= abs(a_of_y(y) - target):
            y = polished
    except (RuntimeError, DomainError):
        logger.debug("newton polish failed at y=%.17g; keeping the bracketed root", y)

    c = 1.0 / math.sqrt(y * xip1)
    m = c * (y - 1.0)
    converged = abs(a_of_y(y) - target) < MASTER_TOL
    if not converged:
        logger.warning("master equation residual %.3g above tolerance", a_of_y(y) - target)
    return OneRsbSolution(y, m, c, converged, False, fp1rsb_residuals(model, m, c))


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def aba(nu_p: float, nu_pp: float) -> float:
    """log(nu''/nu') - (nu'' - nu')(nu'' - nu' + nu'^2) / (nu'' nu'^2), for xi(1) = 1."""
    return math.log(nu_pp / nu_p) - (nu_pp - nu_p) * (nu_pp - nu_p + nu_p**2) / (nu_pp * nu_p**2)


@dataclass(frozen=True)
class CriteriaReport:
    """Necessary conditions for the 1RSB order parameter to be optimal."""

    replicon: float
    purelike_margin: float
    aba_value: float | None
    y_lower: float
    y_upper: float
    replicon_nonneg: bool
    purelike_or_critical: bool

    @property
    def both(self) -> bool:
        return self.replicon_nonneg and self.purelike_or_critical

    def failing(self) -> list[str]:
        out = []
        if not self.replicon_nonneg:
            out.append("replicon")
        if not self.purelike_or_critical:
            out.append("purelike")
        return out


def criteria(model: MixedModel, sol: OneRsbSolution) -> CriteriaReport:
    """Replicon eigenvalue, pure-like margin and the bounds on y that encode them.

    ``aba_value`` is reported only for normalized models (|xi(1) - 1| < 1e-12).
    """
    if sol.is_sk:
        raise ValidationError("criteria are undefined for the SK model", invariant="not SK")
    xi1 = float(eval_model(model, 1.0))
    xip1 = float(eval_model(model, 1.0, 1))
    xipp0 = float(eval_model(model, 0.0, 2))
    xipp1 = float(eval_model(model, 1.0, 2))
    y_lower = xipp1 / xip1
    y_upper = xip1 / xipp0 if xipp0 > 0 else math.inf
    return CriteriaReport(
        replicon=1.0 / (sol.m + sol.c) ** 2 - xipp0,
        purelike_margin=1.0 / sol.c**2 - xipp1,
        aba_value=aba(xip1, xipp1) if abs(xi1 - 1.0) < 1e-12 else None,
        y_lower=y_lower,
        y_upper=y_upper,
        replicon_nonneg=sol.y <= y_upper,
        purelike_or_critical=sol.y >= y_lower,
    )


# ---------------------------------------------------------------------------
# Z polynomial and 2+p classification
# ---------------------------------------------------------------------------


def _two_p_degree(model: MixedModel) -> int:
    others = [p for p in model.degrees if p != 2]
    if len(others) > 1:
        raise ShapeError(f"model has degrees {model.degrees}, not 2+p", invariant="2+p")
    return others[0] if others else 2


@dataclass(frozen=True)
class ZReport:
    """Monomial coefficients of Z, their sign changes, and the roots of Z in (0, 1)."""

    coefficients: tuple[float, ...]
    sign_changes: int
    roots: tuple[float, ...]
    degenerate: bool = False


def z_polynomial(model: MixedModel, sol: OneRsbSolution) -> Polynomial:
    """Z(t) = 1 - C (x - t)^2 xi''(t), with C = (y-1)^2/(xi'(1) y) and x = y/(y-1).

    Z has the sign of eta'' - xi'' for the 1RSB formal conjugate.
    """
    y = sol.y
    xip1 = float(eval_model(model, 1.0, 1))
    big_c = (y - 1.0) ** 2 / (xip1 * y)
    x = y / (y - 1.0)
    square = Polynomial([x * x, -2.0 * x, 1.0])
    return Polynomial([1.0]) - big_c * square * model.as_polynomial().deriv(2)


def z_sign_changes(model: MixedModel, sol: OneRsbSolution) -> ZReport:
    """Descartes count of Z's coefficients and its located roots in (0, 1).

    Raises:
        ShapeError: If the model is not of the form mu t^2 + (1 - mu) t^p.
    """
    _two_p_degree(model)
    if sol.is_sk:
        return ZReport((), 0, (), degenerate=True)
    z = z_polynomial(model, sol)
    coef = tuple(float(v) for v in z.coef)
    ts = np.linspace(0.0, 1.0, int(round(1.0 / ROOT_RESOLUTION)) + 1)
    vals = z(ts)
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        roots.append(float(brentq(z, ts[i], ts[i + 1], xtol=ROOT_REFINE_TOL)))
    return ZReport(coef, sign_changes(np.array(coef)), tuple(roots))


class RsbClass(str, Enum):
    """Outcome of the 2+p classification."""

    SK_RS = "SK_RS"
    ONE_RSB = "ONE_RSB"
    NOT_ONE_RSB = "NOT_ONE_RSB"
    FRSB_CANDIDATE = "FRSB_CANDIDATE"


@dataclass(frozen=True)
class Classification:
    """Result of :func:`classify_2p`. FRSB_CANDIDATE is a NOT_ONE_RSB case whose
    structure function is non-positive on all of [0, 1]."""

    cls: RsbClass
    solution: OneRsbSolution
    report: CriteriaReport | None
    obstacle_margin: float
    argmin: float
    gse: float
    gap: float
    certified: bool

    @property
    def one_rsb(self) -> bool:
        return self.cls is RsbClass.ONE_RSB

    @property
    def not_one_rsb(self) -> bool:
        return self.cls in (RsbClass.NOT_ONE_RSB, RsbClass.FRSB_CANDIDATE)

    @property
    def atom_at_zero(self) -> bool:
        """Whether phi has slope -m < 0 at 0, i.e. the order parameter charges q = 0."""
        return not self.solution.is_sk and self.solution.m > 0

    def to_dict(self) -> dict[str, Any]:
        rep = self.report
        return {
            "class": self.cls.value,
            "y": self.solution.y,
            "m": self.solution.m,
            "c": self.solution.c,
            "replicon": rep.replicon if rep else None,
            "purelike_margin": rep.purelike_margin if rep else None,
            "aba": rep.aba_value if rep else None,
            "failing": rep.failing() if rep else [],
            "obstacle_margin": self.obstacle_margin,
            "argmin": self.argmin,
            "GSE": self.gse,
            "gap": self.gap,
            "certified": self.certified,
            "atom_at_zero": self.atom_at_zero,
        }


def classify_2p(model: MixedModel) -> Classification:
    """Classify mu t^2 + (1 - mu) t^p at zero field.

    ONE_RSB exactly when the replicon and pure-like conditions both hold; the
    1RSB certificate is then built and checked. Otherwise NOT_ONE_RSB, refined to
    FRSB_CANDIDATE when the structure function is nowhere positive.
    """
    _two_p_degree(model)
    sol = solve_master(model)
    report = duality_gap(sol.ansatz(model), model, 0.0)
    margin, argmin = obstacle_check(report.cert, refine=True)
    certified = margin >= -report.cert.feasible_tol
    common = {
        "solution": sol,
        "obstacle_margin": margin,
        "argmin": argmin,
        "gse": 0.5 * report.primal,
        "gap": report.gap,
        "certified": certified,
    }
    if sol.is_sk:
        return Classification(RsbClass.SK_RS, report=None, **common)  # type: ignore[arg-type]

    crit = criteria(model, sol)
    if crit.both:
        if not certified:
            logger.warning(
                "%s: criteria hold but 1RSB certificate margin is %.3g",
                model.label or "model",
                margin,
            )
        if not sol.m > 0:
            logger.warning(
                "%s: 1RSB solution has no atom at zero (m=%g)", model.label or "model", sol.m
            )
        return Classification(RsbClass.ONE_RSB, report=crit, **common)  # type: ignore[arg-type]

    profile = sign_intervals(model)
    cls = (
        RsbClass.FRSB_CANDIDATE
        if all(iv.sign is not Sign.POSITIVE for iv in profile.intervals)
        else RsbClass.NOT_ONE_RSB
    )
    return Classification(cls, report=crit, **common)  # type: ignore[arg-type]


def rs_check(model: MixedModel) -> bool:
    """At zero field only the SK model (any weight) is replica symmetric."""
    return model.is_sk()


# ---------------------------------------------------------------------------
# Sweeps over two-term mixtures
# ---------------------------------------------------------------------------


def two_term(p_low: int, p_high: int, mu: float) -> MixedModel:
    """mu t^p_low + (1 - mu) t^p_high (normalized, xi(1) = 1)."""
    return MixedModel.from_pairs({p_low: mu, p_high: 1.0 - mu}, label=f"{p_low}+{p_high}:mu={mu:g}")


def criteria_sweep(p_low: int, p_high: int, mu_grid: Sequence[float]) -> list[dict[str, Any]]:
    """Master equation and criteria along mu t^p_low + (1 - mu) t^p_high."""
    rows = []
    for mu in mu_grid:
        model = two_term(p_low, p_high, float(mu))
        sol = solve_master(model)
        if sol.is_sk:
            rows.append({"mu": float(mu), "y": sol.y, "aba": None, "class": RsbClass.SK_RS.value})
            continue
        rep = criteria(model, sol)
        rows.append(
            {
                "mu": float(mu),
                "y": sol.y,
                "replicon": rep.replicon,
                "purelike_margin": rep.purelike_margin,
                "aba": rep.aba_value,
                "replicon_nonneg": rep.replicon_nonneg,
                "purelike_or_critical": rep.purelike_or_critical,
            }
        )
    return rows


def _flag(p: int, mu: float, which: str) -> bool:
    model = MixedModel.from_pairs({2: mu, p: 1.0 - mu})
    rep = criteria(model, solve_master(model))
    return rep.purelike_or_critical if which == "purelike" else rep.replicon_nonneg


def flag_boundary(p: int, lo: float, hi: float, which: str, tol: float = BOUNDARY_TOL) -> float:
    """Bisect on mu in [lo, hi] for the change of the ``purelike`` or ``replicon`` flag
    along mu t^2 + (1 - mu) t^p.

    Raises:
        ValidationError: If the flag has the same value at both ends.
    """
    f_lo = _flag(p, lo, which)
    if f_lo == _flag(p, hi, which):
        raise ValidationError(f"{which} flag does not change on [{lo}, {hi}]", invariant="bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _flag(p, mid, which) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def purelike_boundary(
    p: int = 4, lo: float = 0.0, hi: float = 0.99, tol: float = BOUNDARY_TOL
) -> float:
    """mu_c where the 2+p family stops being pure-like."""
    return flag_boundary(p, lo, hi, "purelike", tol)


def replicon_boundary(
    p: int = 4, lo: float = 0.0, hi: float = 0.99, tol: float = BOUNDARY_TOL
) -> float:
    """mu where the replicon eigenvalue of the 2+p family changes sign."""
    return flag_boundary(p, lo, hi, "replicon", tol)
