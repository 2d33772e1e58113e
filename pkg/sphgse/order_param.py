"""Order parameters: structured ansatz, dense grid function and the measure picture.

A concave non-increasing phi on [0, 1] and a measure nu = m(t) dt + c delta_1
determine each other through phi(t) = nu[t, 1]. The structured form stores the
jumps of m (atoms), stretches where m grows with density -d (FRSB segments) and
the atom c at 1.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy.integrate import quad

from sphgse.config import CONE_TOL, MIN_ANSATZ_GRID, POSITIVITY_FLOOR
from sphgse.errors import ValidationError
from sphgse.model import MixedModel, SignProfile, dfrak, eval_model

Atom = tuple[float, float]
Segment = tuple[float, float]


# ---------------------------------------------------------------------------
# Helpers for FRSB segments: g = (xi'')^(-1/2) and its derivatives
# ---------------------------------------------------------------------------


def frsb_profile(model: MixedModel, t: np.ndarray | float) -> np.ndarray:
    """(xi''(t))^(-1/2), the order parameter on a contact interval."""
    return np.asarray(eval_model(model, t, 2)) ** -0.5


def frsb_slope(model: MixedModel, t: np.ndarray | float) -> np.ndarray:
    """Derivative of :func:`frsb_profile`."""
    x2 = np.asarray(eval_model(model, t, 2))
    x3 = np.asarray(eval_model(model, t, 3))
    return -0.5 * x3 * x2**-1.5


def frsb_curvature(model: MixedModel, t: np.ndarray | float) -> np.ndarray:
    """Second derivative of :func:`frsb_profile`."""
    x2 = np.asarray(eval_model(model, t, 2))
    x3 = np.asarray(eval_model(model, t, 3))
    x4 = np.asarray(eval_model(model, t, 4))
    return -0.5 * x4 * x2**-1.5 + 0.75 * x3 * x3 * x2**-2.5


# ---------------------------------------------------------------------------
# Shared structured representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Structured:
    """Atoms of dm, FRSB segments with density -d, and the atom c at 1."""

    c: float
    atoms: tuple[Atom, ...] = ()
    frsb_segments: tuple[Segment, ...] = ()
    model: MixedModel | None = None

    def __post_init__(self) -> None:
        atoms = tuple((float(q), float(m)) for q, m in self.atoms)
        segments = tuple((float(a), float(b)) for a, b in self.frsb_segments)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "frsb_segments", segments)
        object.__setattr__(self, "c", float(self.c))

        if not math.isfinite(self.c):
            raise ValidationError("c must be finite", invariant="c finite")
        prev = -math.inf
        for q, m in atoms:
            if not 0.0 <= q < 1.0:
                raise ValidationError(
                    f"atom location {q} outside [0, 1)", invariant="atom in [0,1)"
                )
            if not m > 0 or not math.isfinite(m):
                raise ValidationError(f"atom mass {m} must be positive", invariant="atom mass > 0")
            if q <= prev:
                raise ValidationError(
                    "atom locations must be strictly increasing", invariant="atoms increasing"
                )
            prev = q

        if segments and self.model is None:
            raise ValidationError("FRSB segments need a model", invariant="model_ref")
        prev = -math.inf
        for a, b in segments:
            if not 0.0 <= a < b <= 1.0:
                raise ValidationError(
                    f"segment ({a}, {b}) is not inside [0, 1]", invariant="segment"
                )
            if a < prev:
                raise ValidationError("segments must be disjoint and sorted", invariant="disjoint")
            prev = b
            assert self.model is not None
            samples = np.array([a, 0.5 * (a + b), b])
            d = np.asarray(dfrak(self.model, samples))
            if np.any(-d < -1e-9 * (1.0 + np.abs(d))):
                raise ValidationError(
                    f"segment ({a}, {b}) has positive structure function", invariant="-d >= 0"
                )

    # -- segment pieces -------------------------------------------------

    def _segment_terms(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Contributions of all segments to phi(t) and m(t)."""
        phi = np.zeros_like(t)
        dens = np.zeros_like(t)
        if not self.frsb_segments:
            return phi, dens
        assert self.model is not None
        for a, b in self.frsb_segments:
            ga, gb = frsb_profile(self.model, np.array([a, b]))
            sa, sb = frsb_slope(self.model, np.array([a, b]))
            total = sa - sb
            inside = (t >= a) & (t < b)
            tc = np.clip(t, a, b)
            g_t = frsb_profile(self.model, tc)
            s_t = frsb_slope(self.model, tc)
            at_a = sa * (b - a) - (gb - ga) + total * (1.0 - b)
            mid = sa * (b - tc) - (gb - g_t) + total * (1.0 - b)
            phi += np.where(t >= b, total * (1.0 - t), np.where(inside, mid, at_a))
            dens += np.where(t >= b, total, np.where(inside, sa - s_t, 0.0))
        return phi, dens

    # -- evaluation -----------------------------------------------------

    def m_at(self, s: np.ndarray | float) -> np.ndarray:
        """Right-continuous density m(s) = nu-density on [0, 1)."""
        arr = np.asarray(s, dtype=float)
        out = np.zeros_like(arr)
        for q, mass in self.atoms:
            out = out + np.where(arr >= q, mass, 0.0)
        _, dens = self._segment_terms(arr)
        return out + dens

    def phi(self, t: np.ndarray | float) -> np.ndarray:
        """phi(t) = c + int_t^1 m(s) ds, in closed form."""
        arr = np.asarray(t, dtype=float)
        out = np.full_like(arr, self.c)
        for q, mass in self.atoms:
            out = out + mass * (1.0 - np.maximum(q, arr))
        seg, _ = self._segment_terms(arr)
        return out + seg

    def dphi(self, t: np.ndarray | float) -> np.ndarray:
        """Right derivative of phi, i.e. -m(t)."""
        return -self.m_at(t)

    @property
    def total_mass(self) -> float:
        """nu[0, 1] = phi(0)."""
        return float(self.phi(0.0))

    def breakpoints(self) -> np.ndarray:
        """Sorted points in [0, 1] between which phi is linear or a shifted FRSB profile."""
        pts = {0.0, 1.0}
        pts.update(q for q, _ in self.atoms)
        for a, b in self.frsb_segments:
            pts.update((a, b))
        return np.array(sorted(pts))

    def curved_pieces(self, breaks: np.ndarray) -> np.ndarray:
        """Mask over [breaks[k], breaks[k+1]] marking pieces inside an FRSB segment."""
        mids = 0.5 * (breaks[:-1] + breaks[1:])
        mask = np.zeros(len(mids), dtype=bool)
        for a, b in self.frsb_segments:
            mask |= (mids > a) & (mids < b)
        return mask

    def is_one_rsb(self) -> bool:
        """A single atom at 0 and no segments: phi = m (1 - t) + c."""
        return not self.frsb_segments and len(self.atoms) == 1 and self.atoms[0][0] == 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "c": self.c,
            "atoms": [[q, m] for q, m in self.atoms],
            "frsb_segments": [[a, b] for a, b in self.frsb_segments],
        }


@dataclass(frozen=True)
class OrderParamAnsatz(_Structured):
    """Structured order parameter; requires c > 0."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.c > 0:
            raise ValidationError(f"c must be positive, got {self.c}", invariant="c > 0")

    @classmethod
    def one_rsb(cls, m: float, c: float, model: MixedModel | None = None) -> OrderParamAnsatz:
        """phi = m (1 - t) + c; ``m == 0`` gives the constant order parameter."""
        atoms = ((0.0, m),) if m > 0 else ()
        return cls(c=c, atoms=atoms, model=model)

    @classmethod
    def full_frsb(cls, model: MixedModel) -> OrderParamAnsatz:
        """phi = (xi'')^(-1/2) on all of [0, 1], with the atom at 0 that matches it."""
        c = float(frsb_profile(model, 1.0))
        jump = -float(frsb_slope(model, 0.0))
        atoms = ((0.0, jump),) if jump > 0 else ()
        return cls(c=c, atoms=atoms, frsb_segments=((0.0, 1.0),), model=model)

    def check_profile(self, profile: SignProfile, tol: float = 1e-9) -> None:
        """Raise unless every FRSB segment lies inside a negative interval."""
        negatives = profile.negative_set()
        for a, b in self.frsb_segments:
            if not any(lo - tol <= a and b <= hi + tol for lo, hi in negatives):
                raise ValidationError(
                    f"segment ({a}, {b}) is not inside a negative interval",
                    invariant="segment in N",
                )

    @classmethod
    def from_dict(cls, data: dict[str, Any], model: MixedModel | None = None) -> OrderParamAnsatz:
        return cls(
            c=float(data["c"]),
            atoms=tuple((float(q), float(m)) for q, m in data.get("atoms", [])),
            frsb_segments=tuple((float(a), float(b)) for a, b in data.get("frsb_segments", [])),
            model=model,
        )


@dataclass(frozen=True)
class MeasureA(_Structured):
    """nu = m(t) dt + c delta_1 with m non-decreasing; c >= 0."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.c < 0:
            raise ValidationError(f"atom at one must be >= 0, got {self.c}", invariant="c >= 0")
        if self.c == 0 and not self.atoms and not self.frsb_segments:
            raise ValidationError("the zero measure is not admissible", invariant="nu != 0")

    def tail_mass(self, s: np.ndarray | float) -> np.ndarray:
        """nu[s, 1]."""
        return self.phi(s)

    def integrate_derivative(
        self,
        f: Callable[[np.ndarray], np.ndarray],
        df: Callable[[np.ndarray], np.ndarray],
    ) -> float:
        """int f' dnu for a C^1 test function ``f`` with derivative ``df``."""
        total = self.c * float(df(np.array(1.0)))
        for q, mass in self.atoms:
            total += mass * float(f(np.array(1.0)) - f(np.array(q)))
        for a, b in self.frsb_segments:

            def integrand(x: float, a: float = a, b: float = b) -> float:
                return float(df(np.array(x))) * self.m_segment_only(x, a, b)

            val, _ = quad(integrand, a, b, epsabs=1e-13, limit=200)
            total += val + self.m_segment_only(b, a, b) * float(f(np.array(1.0)) - f(np.array(b)))
        return total

    def m_segment_only(self, s: float, a: float, b: float) -> float:
        """Density contributed by the single segment (a, b) at ``s``."""
        assert self.model is not None
        if s < a:
            return 0.0
        sa = float(frsb_slope(self.model, a))
        return sa - float(frsb_slope(self.model, min(s, b)))

    def significant_atoms(self, min_mass: float = 1e-9, merge_gap: float = 0.0) -> list[Atom]:
        """Atoms above ``min_mass`` after merging neighbours closer than ``merge_gap``.

        Merged atoms sit at their mass-weighted location; an atom between two grid
        nodes splits over both nodes and is recovered exactly this way.
        """
        clusters: list[list[Atom]] = []
        for q, mass in self.atoms:
            if clusters and q - clusters[-1][-1][0] <= merge_gap:
                clusters[-1].append((q, mass))
            else:
                clusters.append([(q, mass)])
        out: list[Atom] = []
        for group in clusters:
            total = sum(m for _, m in group)
            if total > min_mass:
                out.append((sum(q * m for q, m in group) / total, total))
        return out


# ---------------------------------------------------------------------------
# Dense grid representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridFunction:
    """phi sampled on 0 = t_0 < ... < t_G = 1, read as its piecewise-linear interpolant."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 2:
            raise ValidationError(
                "grid and values must be 1-d arrays of equal length", invariant="shape"
            )
        if grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must increase from 0 to 1", invariant="grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        """G, the number of cells."""
        return len(self.grid) - 1

    def phi(self, t: np.ndarray | float) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.grid, self.values)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.grid)

    def breakpoints(self) -> np.ndarray:
        return self.grid

    def curved_pieces(self, breaks: np.ndarray) -> np.ndarray:
        return np.zeros(len(breaks) - 1, dtype=bool)

    def to_csv(self) -> str:
        lines = ["t,phi"]
        lines.extend(f"{t:.17g},{v:.17g}" for t, v in zip(self.grid, self.values, strict=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def uniform(cls, values: Sequence[float] | np.ndarray) -> GridFunction:
        vals = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, 1.0, len(vals)), vals)


OrderParameter = OrderParamAnsatz | GridFunction


@dataclass(frozen=True)
class ConeViolation:
    """One failed membership condition of the discretized cone."""

    invariant: str
    index: int
    magnitude: float


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------


def to_grid(ansatz: _Structured, G: int = 2000) -> GridFunction:
    """Sample a structured order parameter on the uniform grid with G cells.

    Raises:
        ValidationError: If G < 100 or some value is not positive.
    """
    if G < MIN_ANSATZ_GRID:
        raise ValidationError(f"G must be >= {MIN_ANSATZ_GRID}", invariant="G")
    grid = np.linspace(0.0, 1.0, G + 1)
    values = np.asarray(ansatz.phi(grid))
    if np.any(values <= 0):
        raise ValidationError("order parameter is not positive on the grid", invariant="phi > 0")
    return GridFunction(grid, values)


def to_measure(phi: OrderParameter) -> MeasureA:
    """The measure nu with nu[t, 1] = phi(t).

    For grids, m is the one-sided slope on each cell and its jumps become atoms.
    """
    if isinstance(phi, _Structured):
        return MeasureA(phi.c, phi.atoms, phi.frsb_segments, phi.model)
    dens = np.maximum(-phi.slopes(), 0.0)
    jumps = np.diff(np.concatenate(([0.0], dens)))
    atoms = tuple(
        (float(q), float(j)) for q, j in zip(phi.grid[:-1], jumps, strict=True) if j > 0
    )
    return MeasureA(float(phi.values[-1]), atoms)


def validate(phi: GridFunction, tol: float = CONE_TOL) -> list[ConeViolation]:
    """List every violated cone condition; an empty list means phi is in the discrete cone."""
    report: list[ConeViolation] = []
    v = phi.values
    rises = np.diff(v)
    for i in np.flatnonzero(rises > tol):
        report.append(ConeViolation("non-increasing", int(i), float(rises[i])))
    h = np.diff(phi.grid)
    slopes = rises / h
    bends = np.diff(slopes) * 0.5 * (h[:-1] + h[1:])
    for i in np.flatnonzero(bends > tol):
        report.append(ConeViolation("concave", int(i) + 1, float(bends[i])))
    if not v[-1] > 0:
        report.append(ConeViolation("positive-end", len(v) - 1, float(v[-1])))
    return report


def check_floor(phi: OrderParameter, floor: float = POSITIVITY_FLOOR) -> None:
    """Raise if phi dips below the positivity floor (phi is smallest at 1)."""
    low = float(phi.values.min()) if isinstance(phi, GridFunction) else float(phi.phi(1.0))
    if low < floor:
        raise ValidationError(
            f"min phi = {low:g} is below the floor {floor:g}", invariant="phi >= floor"
        )


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def read_ansatz(path: Path, model: MixedModel | None = None) -> OrderParamAnsatz:
    """Read and validate an ansatz JSON file."""
    from sphgse.validation import AnsatzSchemaValidator

    result = AnsatzSchemaValidator().validate_file(path)
    if not result.valid:
        raise ValidationError("; ".join(result.errors), invariant="schema")
    return OrderParamAnsatz.from_dict(json.loads(path.read_text(encoding="utf-8")), model)


def merge_atoms(atoms: Iterable[Atom], min_gap: float = 0.0) -> tuple[Atom, ...]:
    """Sort atoms, add masses at coinciding locations and drop empty ones."""
    out: list[list[float]] = []
    for q, m in sorted(atoms):
        if m <= 0:
            continue
        if out and q - out[-1][0] <= min_gap:
            out[-1][1] += m
        else:
            out.append([q, m])
    return tuple((q, m) for q, m in out)


__all__ = [
    "ConeViolation",
    "GridFunction",
    "MeasureA",
    "OrderParamAnsatz",
    "OrderParameter",
    "check_floor",
    "frsb_curvature",
    "frsb_profile",
    "frsb_slope",
    "merge_atoms",
    "read_ansatz",
    "to_grid",
    "to_measure",
    "validate",
]

