"""Primal, dual, ground-state and finite-temperature functionals.

Every order parameter is integrated piecewise between its breakpoints: linear
pieces in closed form, pieces inside an FRSB segment by quadrature. A grid
function is read as its piecewise-linear interpolant, so the grid values of P
and of the formal conjugate are exact for that interpolant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import minimize_scalar

from sphgse.config import BC_TOL, DEFAULT_GRID, OBSTACLE_TOL
from sphgse.errors import ValidationError
from sphgse.model import MixedModel, eval_model
from sphgse.numerics import gauss_legendre, logmean_inv, logmean_inv_grad
from sphgse.order_param import (
    GridFunction,
    MeasureA,
    OrderParamAnsatz,
    OrderParameter,
    check_floor,
)

logger = logging.getLogger(__name__)

QuadRule = Literal["adaptive", "gauss"]

_GAUSS_NODES = 16
_GAUSS_CHUNK = 0.125


# ---------------------------------------------------------------------------
# Piecewise integration
# ---------------------------------------------------------------------------


def _knots(phi: OrderParameter, grid: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    breaks = phi.breakpoints()
    x = breaks if grid is None else np.union1d(grid, breaks)
    return x, phi.curved_pieces(x)


def _gauss_piece(
    fn: Any, u: float, v: float, n: int = _GAUSS_NODES
) -> float:
    chunks = max(1, math.ceil((v - u) / _GAUSS_CHUNK))
    z, w = gauss_legendre(n)
    edges = np.linspace(u, v, chunks + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:], strict=True):
        total += (b - a) * float(np.dot(w, fn(a + (b - a) * z)))
    return total


def _primal_pieces(
    phi: OrderParameter, model: MixedModel, rule: QuadRule
) -> tuple[float, float]:
    """(int xi'' phi, int 1/phi) over [0, 1]."""
    x, curved = _knots(phi)
    vals = np.asarray(phi.phi(x))
    w = np.diff(x)
    xi0 = np.asarray(eval_model(model, x, 0))
    xi1 = np.asarray(eval_model(model, x, 1))
    slope = np.diff(vals) / w
    lin = xi1[1:] * vals[1:] - xi1[:-1] * vals[:-1] - slope * np.diff(xi0)
    inv = w * logmean_inv(vals[:-1], vals[1:])
    for k in np.flatnonzero(curved):
        u, v = float(x[k]), float(x[k + 1])

        def f_lin(t: Any) -> Any:
            return np.asarray(eval_model(model, t, 2)) * phi.phi(t)

        def f_inv(t: Any) -> Any:
            return 1.0 / phi.phi(t)

        if rule == "adaptive":
            lin[k] = quad(lambda t: float(f_lin(t)), u, v, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
            inv[k] = quad(lambda t: float(f_inv(t)), u, v, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        else:
            lin[k] = _gauss_piece(f_lin, u, v)
            inv[k] = _gauss_piece(f_inv, u, v)
    return float(np.sum(lin)), float(np.sum(inv))


def primal_energy(
    phi: OrderParameter, model: MixedModel, h: float = 0.0, rule: QuadRule = "adaptive"
) -> float:
    """P(phi) = int_0^1 (xi'' phi + 1/phi) dx + h^2 phi(0).

    Args:
        phi: Grid function (integrated as its piecewise-linear interpolant) or ansatz.
        model: The mixture.
        h: External field, >= 0.
        rule: Quadrature on FRSB pieces; linear pieces are always closed form.

    Raises:
        ValidationError: If phi dips below the positivity floor or h < 0.
    """
    if h < 0:
        raise ValidationError("h must be >= 0", invariant="h >= 0")
    check_floor(phi)
    lin, inv = _primal_pieces(phi, model, rule)
    return lin + inv + h * h * float(phi.phi(0.0))


# ---------------------------------------------------------------------------
# Dual certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """The formal conjugate eta of an order parameter, sampled on a grid.

    eta(t) = xi(1) - int_t^1 int_0^s phi^-2 + h^2 (1 - t), so eta'' phi^2 = 1,
    eta(1) = xi(1) and eta'(0) = -h^2 by construction.
    """

    grid: np.ndarray
    eta: np.ndarray
    eta_p: np.ndarray
    eta_pp: np.ndarray
    phi_values: np.ndarray
    phi_slope0: float
    h: float
    model: MixedModel
    dual_value: float
    one_rsb: tuple[float, float] | None = None
    _spline: list[CubicHermiteSpline] = field(default_factory=list, repr=False)

    @property
    def gap_to_obstacle(self) -> np.ndarray:
        """eta - xi on the grid."""
        return self.eta - np.asarray(eval_model(self.model, self.grid, 0))

    @property
    def margin(self) -> float:
        return float(np.min(self.gap_to_obstacle))

    @property
    def argmin(self) -> float:
        return float(self.grid[int(np.argmin(self.gap_to_obstacle))])

    @property
    def feasible_tol(self) -> float:
        return OBSTACLE_TOL * (1.0 + float(eval_model(self.model, 1.0)))

    @property
    def boundary_residuals(self) -> dict[str, float]:
        """Membership and natural boundary residuals, signed."""
        xi = self.model
        return {
            "eta0_minus_xi0": float(self.eta[0] - eval_model(xi, 0.0)),
            "eta1_minus_xi1": float(self.eta[-1] - eval_model(xi, 1.0)),
            "etap0_minus_target": float(self.eta_p[0] - (eval_model(xi, 0.0, 1) - self.h**2)),
            "etap1_minus_xip1": float(self.eta_p[-1] - eval_model(xi, 1.0, 1)),
        }

    def eta_at(self, t: np.ndarray | float) -> np.ndarray:
        """eta off the grid: closed form for 1RSB certificates, Hermite spline otherwise."""
        arr = np.asarray(t, dtype=float)
        if self.one_rsb is not None:
            m, c = self.one_rsb
            xi1 = float(eval_model(self.model, 1.0))
            return xi1 - _one_rsb_tail(1.0 - arr, m, c) + self.h**2 * (1.0 - arr)
        if not self._spline:
            self._spline.append(CubicHermiteSpline(self.grid, self.eta, self.eta_p))
        return np.asarray(self._spline[0](arr))


def _one_rsb_tail(u: np.ndarray, m: float, c: float) -> np.ndarray:
    """R(1 - u) = int_{1-u}^1 int_0^s (c + m (1 - r))^-2 dr ds for the linear order parameter."""
    u = np.asarray(u, dtype=float)
    if m == 0:
        return u * (2.0 - u) / (2.0 * c * c)
    x = m * u / c
    small = np.abs(x) < 1e-3
    xs = np.where(small, x, 0.0)
    series = (u / c) ** 2 * (-0.5 + xs / 3 - xs**2 / 4 + xs**3 / 5)
    exact = (np.log1p(np.where(small, 0.0, x)) - np.where(small, 0.0, x)) / (m * m)
    return np.where(small, series, exact) + u / (c * (c + m))


def _conjugate_on_knots(
    phi: OrderParameter, grid: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """(int_0^t phi^-2, int_t^1 int_0^s phi^-2, int_0^1 1/phi) at the grid points."""
    x, curved = _knots(phi, grid)
    vals = np.asarray(phi.phi(x))
    w = np.diff(x)
    a, b = vals[:-1], vals[1:]
    jj = w / (a * b)
    da, _ = logmean_inv_grad(a, b)
    kk = -(w**2) * da
    inv = w * logmean_inv(a, b)
    if np.any(curved):
        z, wt = gauss_legendre(_GAUSS_NODES)
        for k in np.flatnonzero(curved):
            nodes = x[k] + w[k] * z
            p = np.asarray(phi.phi(nodes))
            jj[k] = w[k] * float(np.dot(wt, p**-2))
            kk[k] = w[k] ** 2 * float(np.dot(wt, (1.0 - z) * p**-2))
            inv[k] = w[k] * float(np.dot(wt, 1.0 / p))
    first = np.concatenate(([0.0], np.cumsum(jj)))
    cell = first[:-1] * w + kk
    second = np.concatenate((np.cumsum(cell[::-1])[::-1], [0.0]))
    idx = np.searchsorted(x, grid)
    return first[idx], second[idx], float(np.sum(inv))


def formal_conjugate(
    phi: OrderParameter, model: MixedModel, h: float = 0.0, G: int = DEFAULT_GRID
) -> DualCertificate:
    """Build the formal conjugate of ``phi``.

    Grid inputs are certified on their own grid; an ansatz is certified on the
    uniform grid with ``G`` cells. A linear order parameter uses the closed form.

    Raises:
        ValidationError: If phi is below the positivity floor or h < 0.
    """
    if h < 0:
        raise ValidationError("h must be >= 0", invariant="h >= 0")
    check_floor(phi)
    xi1 = float(eval_model(model, 1.0))

    if isinstance(phi, GridFunction):
        grid = phi.grid
        slope0 = float(phi.slopes()[0])
    else:
        grid = np.linspace(0.0, 1.0, G + 1)
        slope0 = float(phi.dphi(0.0))
    pv = np.asarray(phi.phi(grid))

    closed: tuple[float, float] | None = None
    if isinstance(phi, OrderParamAnsatz) and not phi.frsb_segments and len(phi.atoms) <= 1 and (
        not phi.atoms or phi.atoms[0][0] == 0.0
    ):
        m = phi.atoms[0][1] if phi.atoms else 0.0
        c = phi.c
        closed = (m, c)
        u = 1.0 - grid
        first = grid / ((c + m * u) * (c + m))
        second = _one_rsb_tail(u, m, c)
        dual = 2.0 * float(logmean_inv(np.array(c + m), np.array(c)))
    else:
        first, second, inv = _conjugate_on_knots(phi, grid)
        dual = 2.0 * inv

    h2 = h * h
    eta = xi1 - second + h2 * (1.0 - grid)
    eta_p = first - h2
    return DualCertificate(
        grid=grid,
        eta=eta,
        eta_p=eta_p,
        eta_pp=pv**-2,
        phi_values=pv,
        phi_slope0=slope0,
        h=h,
        model=model,
        dual_value=dual,
        one_rsb=closed,
    )


def dual_energy(cert: DualCertificate) -> float:
    """D(eta) = 2 int sqrt(eta'') = 2 int 1/phi."""
    return cert.dual_value


def obstacle_check(
    cert: DualCertificate, model: MixedModel | None = None, refine: bool = False
) -> tuple[float, float]:
    """Minimum of eta - xi and where it is attained.

    With ``refine``, a bounded scalar search between the grid neighbours of the
    grid argmin tightens the estimate.
    """
    xi = model or cert.model
    diff = cert.eta - np.asarray(eval_model(xi, cert.grid, 0))
    i = int(np.argmin(diff))
    margin, where = float(diff[i]), float(cert.grid[i])
    if refine:
        lo = float(cert.grid[max(i - 1, 0)])
        hi = float(cert.grid[min(i + 1, len(cert.grid) - 1)])
        res = minimize_scalar(
            lambda t: float(cert.eta_at(t)) - float(eval_model(xi, t)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if res.success and float(res.fun) < margin:
            margin, where = float(res.fun), float(res.x)
    return margin, where


@dataclass(frozen=True)
class BoundaryReport:
    """Natural boundary residuals of a candidate optimizer."""

    eta_prime_one: float
    zero_end: float

    def passed(self, tol: float = BC_TOL) -> bool:
        return self.eta_prime_one <= tol and self.zero_end <= tol

    def to_dict(self) -> dict[str, float]:
        return {"eta_prime_one": self.eta_prime_one, "zero_end": self.zero_end}


def natural_bc_check(
    cert: DualCertificate,
    phi: OrderParameter | None = None,
    model: MixedModel | None = None,
    h: float | None = None,
) -> BoundaryReport:
    """|eta'(1) - xi'(1)| and min(|eta(0) - xi(0)|, |phi'(0)|)."""
    xi = model or cert.model
    slope0 = cert.phi_slope0
    if phi is not None:
        slope0 = float(phi.slopes()[0]) if isinstance(phi, GridFunction) else float(phi.dphi(0.0))
    return BoundaryReport(
        eta_prime_one=abs(float(cert.eta_p[-1]) - float(eval_model(xi, 1.0, 1))),
        zero_end=min(abs(float(cert.eta[0]) - float(eval_model(xi, 0.0))), abs(slope0)),
    )


@dataclass(frozen=True)
class GapReport:
    """Primal and dual values of an order parameter and its formal conjugate."""

    gap: float
    primal: float
    dual: float
    cert: DualCertificate

    @property
    def feasible(self) -> bool:
        return self.cert.margin >= -self.cert.feasible_tol

    def __iter__(self) -> Any:
        return iter((self.gap, self.cert))


def duality_gap(
    phi: OrderParameter, model: MixedModel, h: float = 0.0, G: int = DEFAULT_GRID
) -> GapReport:
    """P(phi) - D(formal conjugate of phi).

    The gap is nonnegative whenever the certificate is feasible; for an
    infeasible conjugate it is reported as computed.
    """
    cert = formal_conjugate(phi, model, h, G)
    primal = primal_energy(phi, model, h)
    dual = dual_energy(cert)
    return GapReport(primal - dual, primal, dual, cert)


def certificate_record(report: GapReport) -> dict[str, Any]:
    """The certificate JSON object."""
    margin, argmin = obstacle_check(report.cert, refine=True)
    bc = natural_bc_check(report.cert)
    return {
        "P": report.primal,
        "D": report.dual,
        "GSE": 0.5 * report.primal,
        "gap": report.gap,
        "obstacle_margin": margin,
        "argmin": argmin,
        "bc_residuals": bc.to_dict(),
        "certified": bool(margin >= -report.cert.feasible_tol),
    }


# ---------------------------------------------------------------------------
# Ground-state functional on measures
# ---------------------------------------------------------------------------


def gs_energy(nu: MeasureA, model: MixedModel, h: float = 0.0) -> float:
    """GS(nu) = int xi''(s) nu[s,1] + 1/nu[s,1] ds + h^2 nu[0,1].

    The first term is integrated against the measure, int xi' dnu, independently
    of the order-parameter path used by :func:`primal_energy`.
    """
    xi1 = float(eval_model(model, 1.0))
    total = nu.c * float(eval_model(model, 1.0, 1))
    for q, mass in nu.atoms:
        total += mass * (xi1 - float(eval_model(model, q)))
    for a, b in nu.frsb_segments:
        val, _ = quad(
            lambda s, a=a, b=b: float(eval_model(model, s, 1)) * nu.m_segment_only(s, a, b),
            a,
            b,
            epsabs=1e-13,
            limit=200,
        )
        total += val + nu.m_segment_only(b, a, b) * (xi1 - float(eval_model(model, b)))
    breaks = nu.breakpoints()
    for u, v in zip(breaks[:-1], breaks[1:], strict=True):
        val, _ = quad(lambda s: 1.0 / float(nu.tail_mass(s)), u, v, epsabs=1e-13, limit=200)
        total += val
    return total + h * h * nu.total_mass


# ---------------------------------------------------------------------------
# Finite temperature
# ---------------------------------------------------------------------------


def graded_grid(G: int) -> np.ndarray:
    """t_i = 1 - (1 - i/G)^2, refined towards 1."""
    s = np.arange(G + 1) / G
    t = 1.0 - (1.0 - s) ** 2
    t[-1] = 1.0
    return t


@dataclass(frozen=True, eq=False)
class FiniteBetaMeasure:
    """A probability measure on the grid nodes, via its cdf.

    ``cdf[i] = mu[0, t_i]``; the cdf is constant on [t_i, t_{i+1}). The last
    node carries no mass, so ``cdf[-2] == 1`` and q* < 1.
    """

    grid: np.ndarray
    cdf: np.ndarray
    beta: float
    h: float = 0.0

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        cdf = np.asarray(self.cdf, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cdf", cdf)
        if grid.shape != cdf.shape or len(grid) < 3:
            raise ValidationError("grid and cdf must have equal length >= 3", invariant="shape")
        if not self.beta > 0:
            raise ValidationError("beta must be positive", invariant="beta > 0")
        if self.h < 0:
            raise ValidationError("h must be >= 0", invariant="h >= 0")
        if np.any(np.diff(cdf) < -1e-12) or cdf[0] < -1e-12:
            raise ValidationError("cdf must be non-decreasing and >= 0", invariant="monotone cdf")
        if abs(cdf[-1] - 1.0) > 1e-12:
            raise ValidationError("cdf must end at 1", invariant="F_G = 1")
        if abs(cdf[-2] - 1.0) > 1e-12:
            raise ValidationError(
                "cdf reaches 1 only at the final grid point", invariant="q* < 1"
            )

    @classmethod
    def point_mass(
        cls, grid: np.ndarray, q: float, beta: float, h: float = 0.0
    ) -> FiniteBetaMeasure:
        """delta_q, with q moved to the nearest node at or below it."""
        cdf = (grid >= grid[np.searchsorted(grid, q, side="right") - 1]).astype(float)
        return cls(grid, cdf, beta, h)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.grid)

    @property
    def cells(self) -> np.ndarray:
        """cdf value on each cell [t_k, t_{k+1})."""
        return self.cdf[:-1]

    @property
    def masses(self) -> np.ndarray:
        """mu({t_i})."""
        return np.diff(np.concatenate(([0.0], self.cdf)))

    def mu_hat(self) -> np.ndarray:
        """mu_hat(t_i) = int_{t_i}^1 mu[0, s] ds at the nodes."""
        parts = self.cells * self.widths
        return np.concatenate((np.cumsum(parts[::-1])[::-1], [0.0]))

    def q_star(self, tol: float = 1e-9) -> float:
        """First node where the cdf reaches 1 (within ``tol``)."""
        return float(self.grid[int(np.argmax(self.cdf >= 1.0 - tol))])

    def mean(self, f: Any) -> float:
        """E f(Y) for Y with law mu."""
        return float(np.dot(self.masses, f(self.grid)))


def _cs_common(mu: FiniteBetaMeasure, model: MixedModel) -> tuple[float, np.ndarray, np.ndarray]:
    xi = np.asarray(eval_model(model, mu.grid, 0))
    linear = float(np.dot(mu.cells, np.diff(xi)))
    return linear, mu.mu_hat(), mu.widths


def cs_energy(mu: FiniteBetaMeasure, model: MixedModel) -> float:
    """The Crisanti-Sommers functional in its q* < 1 form.

    1/2 (beta^2 int xi'' mu_hat + int_0^{q*} 1/mu_hat + log(1 - q*) + h^2 mu_hat(0)),
    integrated exactly for a cdf that is constant on cells.
    """
    linear, mh, w = _cs_common(mu, model)
    inv = float(np.sum(w[:-1] * logmean_inv(mh[:-2], mh[1:-1])))
    tail = math.log(1.0 - mu.grid[-2])
    return 0.5 * (mu.beta**2 * linear + inv + tail + mu.h**2 * mh[0])


def cs_energy_direct(mu: FiniteBetaMeasure, model: MixedModel) -> float:
    """The same functional with the integrand 1/mu_hat - 1/(1 - s) kept cell by cell."""
    linear, mh, w = _cs_common(mu, model)
    ramp = 1.0 - mu.grid
    inv = w[:-1] * logmean_inv(mh[:-2], mh[1:-1]) - w[:-1] * logmean_inv(ramp[:-2], ramp[1:-1])
    return 0.5 * (mu.beta**2 * linear + float(np.sum(inv)) + mu.h**2 * mh[0])


def point_mass_energy(model: MixedModel, q: float, beta: float, h: float = 0.0) -> float:
    """Closed form of the finite-temperature functional at mu = delta_q."""
    xi1, xiq = float(eval_model(model, 1.0)), float(eval_model(model, q))
    return 0.5 * (beta**2 * (xi1 - xiq) + q / (1.0 - q) + math.log1p(-q) + h * h * (1.0 - q))
