"""Mixed p-spin models, the structure function and its sign profile."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from sphgse.config import (
    MAX_ORDER,
    ROOT_REFINE_TOL,
    ROOT_RESOLUTION,
    TRUNCATION_MAX_DEGREE,
    ZERO_SIGN_FLOOR,
)
from sphgse.errors import DomainError, OrderError, SingularityError, ValidationError

logger = logging.getLogger(__name__)

Scalar = float | np.ndarray


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    """One monomial ``beta_sq * t**p`` of the mixture."""

    p: int
    beta_sq: float


@dataclass(frozen=True)
class MixedModel:
    """The mixture xi(t) = sum_p beta_p^2 t^p.

    Terms are stored sorted by degree. Zero weights are allowed so that the
    edges of a two-term family (e.g. the pure p-spin at mu=0) keep their shape.
    """

    terms: tuple[Term, ...]
    label: str = ""
    note: str = ""

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValidationError("model has no terms", invariant="nonempty")
        degrees = [t.p for t in self.terms]
        if len(set(degrees)) != len(degrees):
            raise ValidationError(
                f"degrees must be pairwise distinct, got {degrees}", invariant="distinct-degrees"
            )
        for t in self.terms:
            if int(t.p) != t.p or t.p < 2:
                raise ValidationError(f"degree {t.p} is not an integer >= 2", invariant="degree>=2")
            if not math.isfinite(t.beta_sq) or t.beta_sq < 0:
                raise ValidationError(
                    f"weight of degree {t.p} must be finite and >= 0, got {t.beta_sq}",
                    invariant="weights>=0",
                )
        if not any(t.beta_sq > 0 for t in self.terms):
            raise ValidationError("at least one weight must be positive", invariant="xi(1)>0")
        object.__setattr__(self, "terms", tuple(sorted(self.terms, key=lambda t: t.p)))

    @classmethod
    def from_pairs(cls, pairs: Mapping[int, float], label: str = "", note: str = "") -> MixedModel:
        """Build a model from a ``{degree: weight}`` mapping."""
        return cls(tuple(Term(int(p), float(w)) for p, w in pairs.items()), label, note)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(t.p for t in self.terms)

    @property
    def active_degrees(self) -> tuple[int, ...]:
        """Degrees carrying a positive weight."""
        return tuple(t.p for t in self.terms if t.beta_sq > 0)

    @property
    def max_degree(self) -> int:
        return self.terms[-1].p

    def weight(self, p: int) -> float:
        for t in self.terms:
            if t.p == p:
                return t.beta_sq
        return 0.0

    def __call__(self, t: Scalar, order: int = 0) -> Scalar:
        return eval_model(self, t, order)

    def is_sk(self) -> bool:
        """True for the pure degree-2 model, up to its weight."""
        return self.active_degrees == (2,)

    def scaled(self, factor: float) -> MixedModel:
        """Multiply every weight by ``factor`` (lambda^2 in the scaling law)."""
        if factor <= 0:
            raise ValidationError("scale factor must be positive", invariant="factor>0")
        return MixedModel(
            tuple(Term(t.p, t.beta_sq * factor) for t in self.terms), self.label, self.note
        )

    def normalized(self) -> MixedModel:
        """Return xi / xi(1), so that xi(1) = 1."""
        return self.scaled(1.0 / float(eval_model(self, 1.0)))

    def as_polynomial(self) -> Polynomial:
        """Exact monomial coefficients as a numpy Polynomial."""
        coef = np.zeros(self.max_degree + 1)
        for t in self.terms:
            coef[t.p] = t.beta_sq
        return Polynomial(coef)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {}
        if self.label:
            data["label"] = self.label
        data["terms"] = [{"p": t.p, "beta_sq": t.beta_sq} for t in self.terms]
        if self.note:
            data["note"] = self.note
        return data


def _falling(p: int, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= p - j
    return out


def eval_model(model: MixedModel, t: Scalar, order: int = 0) -> Scalar:
    """Evaluate the ``order``-th derivative of xi at ``t``.

    Args:
        model: The mixture.
        t: Point(s) in [0, 1 + eps]; arrays are evaluated elementwise.
        order: Derivative order in 0..4.

    Returns:
        sum_p beta_p^2 p(p-1)...(p-order+1) t^(p-order), as a float for scalar input.

    Raises:
        OrderError: If ``order`` is outside 0..4.
        DomainError: If any ``t`` is negative.
    """
    if isinstance(order, bool) or order not in range(MAX_ORDER + 1):
        raise OrderError(f"order must be in 0..{MAX_ORDER}, got {order}", invariant="order")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise DomainError("xi is defined on t >= 0", invariant="t>=0")
    out = np.zeros_like(arr)
    for term in model.terms:
        if term.p < order or term.beta_sq == 0:
            continue
        out = out + term.beta_sq * _falling(term.p, order) * arr ** (term.p - order)
    if out.ndim == 0:
        return float(out)
    return out


def dfrak(model: MixedModel, t: Scalar) -> Scalar:
    """Second derivative of (xi'')^(-1/2), in closed form.

    Raises:
        SingularityError: Where xi''(t) = 0, e.g. t = 0 for a pure p-spin with p >= 3.
    """
    x2 = np.asarray(eval_model(model, t, 2))
    if np.any(x2 <= 0):
        raise SingularityError("xi'' vanishes; the structure function is singular there")
    x3 = np.asarray(eval_model(model, t, 3))
    x4 = np.asarray(eval_model(model, t, 4))
    out = 0.75 * x2**-2.5 * x3**2 - 0.5 * x2**-1.5 * x4
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Sign profile
# ---------------------------------------------------------------------------


class Sign(IntEnum):
    """Sign of the structure function on an interval."""

    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class SignInterval:
    left: float
    right: float
    sign: Sign

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.left + self.right)


@dataclass(frozen=True)
class SignProfile:
    """Partition of [0, 1] by the sign of the structure function.

    ``boundaries`` are the interior roots, in increasing order.
    """

    boundaries: tuple[float, ...]
    intervals: tuple[SignInterval, ...]
    resolution: float

    @property
    def signs(self) -> tuple[Sign, ...]:
        return tuple(iv.sign for iv in self.intervals)

    def negative_set(self) -> list[tuple[float, float]]:
        return [(iv.left, iv.right) for iv in self.intervals if iv.sign is Sign.NEGATIVE]

    def positive_set(self) -> list[tuple[float, float]]:
        return [(iv.left, iv.right) for iv in self.intervals if iv.sign is Sign.POSITIVE]

    def sign_at(self, t: float) -> Sign:
        for iv in self.intervals:
            if iv.left <= t <= iv.right:
                return iv.sign
        raise DomainError(f"t={t} outside [0, 1]", invariant="t in [0,1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "boundaries": list(self.boundaries),
            "intervals": [[iv.left, iv.right, iv.sign.label] for iv in self.intervals],
            "resolution": self.resolution,
        }


def _sample_signs(d: np.ndarray, floor: float) -> np.ndarray:
    signs = np.where(d > floor, 1, np.where(d < -floor, -1, 0))
    # Isolated zero samples are roots that landed on the grid; absorb them.
    n = len(signs)
    i = 0
    while i < n:
        if signs[i] != 0:
            i += 1
            continue
        hi = i
        while hi + 1 < n and signs[hi + 1] == 0:
            hi += 1
        if hi == i and n > 1:
            signs[i] = signs[i - 1] if i > 0 else signs[i + 1]
        i = hi + 1
    return signs


def _runs(signs: np.ndarray) -> list[tuple[int, int, int]]:
    runs: list[tuple[int, int, int]] = []
    start = 0
    for i in range(1, len(signs) + 1):
        if i == len(signs) or signs[i] != signs[start]:
            runs.append((int(signs[start]), start, i - 1))
            start = i
    return runs


def sign_intervals(
    model: MixedModel,
    resolution: float = ROOT_RESOLUTION,
    refine_tol: float = ROOT_REFINE_TOL,
) -> SignProfile:
    """Scan the structure function on a uniform grid and refine its roots.

    Args:
        model: The mixture.
        resolution: Scan spacing, at most 1e-3.
        refine_tol: Root tolerance for ``brentq``, at most ``resolution``.

    Returns:
        The SignProfile. Stretches where |d| stays below 1e-12 (1 + max|d|) are
        labelled zero. Tangential roots inside one grid cell are not detected.
    """
    if not 0 < resolution <= 1e-3:
        raise ValidationError("resolution must be in (0, 1e-3]", invariant="resolution")
    if not 0 < refine_tol <= resolution:
        raise ValidationError("refine_tol must be in (0, resolution]", invariant="refine_tol")

    start = 0.0 if eval_model(model, 0.0, 2) > 0 else resolution
    n = int(math.ceil((1.0 - start) / resolution)) + 1
    ts = np.linspace(start, 1.0, n)
    d = np.asarray(dfrak(model, ts))
    floor = ZERO_SIGN_FLOOR * (1.0 + float(np.max(np.abs(d))))
    runs = _runs(_sample_signs(d, floor))

    def f(x: float) -> float:
        return float(dfrak(model, x))

    cuts: list[float] = []
    for (s1, _, e1), (s2, b2, _) in zip(runs, runs[1:], strict=False):
        if s1 != 0 and s2 != 0:
            a, b = float(ts[e1]), float(ts[b2])
            if abs(d[e1]) <= floor:
                cuts.append(a)
            elif abs(d[b2]) <= floor:
                cuts.append(b)
            else:
                cuts.append(float(brentq(f, a, b, xtol=refine_tol)))
        elif s2 == 0:
            cuts.append(float(ts[b2]))
        else:
            cuts.append(float(ts[e1]))

    edges = [0.0, *cuts, 1.0]
    intervals: list[SignInterval] = []
    for (sgn, _, _), left, right in zip(runs, edges, edges[1:], strict=False):
        if intervals and intervals[-1].sign == sgn:
            prev = intervals.pop()
            left = prev.left
        intervals.append(SignInterval(left, right, Sign(sgn)))
    boundaries = tuple(iv.left for iv in intervals[1:])
    logger.debug(
        "sign profile of %s: %s", model.label or "model", [iv.sign.label for iv in intervals]
    )
    return SignProfile(boundaries, tuple(intervals), resolution)


# ---------------------------------------------------------------------------
# Series truncation and named models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesRule:
    """Taylor coefficients a_p (p >= 2) of an analytic model."""

    name: str
    coefficient: Callable[[int], float]
    exact_degrees: tuple[int, ...] = ()
    note: str = ""
    params: dict[str, float] = field(default_factory=dict)


def _inv_factorial(p: int) -> float:
    return math.exp(-math.lgamma(p + 1))


SINH_NOTE = (
    "sinh(t) has a degree-1 Taylor term; this model is sinh(t) - t, "
    "the closest mixture with degrees >= 2"
)


def series_rule(name: str, **params: float) -> SeriesRule:
    """Look up a coefficient rule by name.

    Known rules: ``sinh`` (minus its linear term), ``cosh`` (minus its
    constant), ``exp`` (minus constant and linear terms), ``pure`` (``p``),
    ``two_p`` (``p``, ``mu``: mu t^2 + (1 - mu) t^p).
    """
    if name == "sinh":
        return SeriesRule(name, lambda p: _inv_factorial(p) if p % 2 == 1 else 0.0, note=SINH_NOTE)
    if name == "cosh":
        return SeriesRule(name, lambda p: _inv_factorial(p) if p % 2 == 0 else 0.0)
    if name == "exp":
        return SeriesRule(name, _inv_factorial)
    if name == "pure":
        deg = int(params.get("p", 3))
        return SeriesRule(name, lambda p: 1.0 if p == deg else 0.0, (deg,), params=dict(params))
    if name == "two_p":
        deg = int(params.get("p", 4))
        mu = float(params.get("mu", 0.5))
        if deg <= 2 or not 0.0 <= mu <= 1.0:
            raise ValidationError("two_p needs p > 2 and mu in [0, 1]", invariant="two_p")
        return SeriesRule(
            name,
            lambda p: mu if p == 2 else (1.0 - mu if p == deg else 0.0),
            (2, deg),
            params=dict(params),
        )
    raise ValidationError(f"unknown series rule {name!r}", invariant="rule")


def truncate_series(
    rule: str | SeriesRule,
    tail_bound: float,
    *,
    max_degree: int = TRUNCATION_MAX_DEGREE,
    **params: float,
) -> MixedModel:
    """Truncate an analytic model to the smallest degree whose omitted tail is < ``tail_bound``.

    Raises:
        ValidationError: If ``tail_bound`` cannot be met by degree ``max_degree``.
    """
    if tail_bound <= 0:
        raise ValidationError("tail_bound must be positive", invariant="tail_bound>0")
    srule = rule if isinstance(rule, SeriesRule) else series_rule(rule, **params)
    label = srule.name
    if srule.params:
        label += "(" + ", ".join(f"{k}={v:g}" for k, v in sorted(srule.params.items())) + ")"

    if srule.exact_degrees:
        pairs = {p: srule.coefficient(p) for p in srule.exact_degrees}
        return MixedModel.from_pairs(pairs, label=label, note=srule.note)

    # Coefficients decay factorially; terms past 2 * max_degree do not move the tail.
    coef = np.array([srule.coefficient(p) for p in range(2 * max_degree + 2)])
    coef[:2] = 0.0
    if np.any(coef < 0):
        raise ValidationError("series coefficients must be nonnegative", invariant="weights>=0")
    tail = np.cumsum(coef[::-1])[::-1]  # tail[k] = sum_{p >= k} a_p
    for degree in range(2, max_degree + 1):
        if coef[degree] > 0 and tail[degree + 1] < tail_bound:
            pairs = {p: float(coef[p]) for p in range(2, degree + 1) if coef[p] > 0}
            if srule.note:
                logger.warning("%s: %s", srule.name, srule.note)
            return MixedModel.from_pairs(pairs, label=label, note=srule.note)
    raise ValidationError(
        f"rule {srule.name!r} cannot meet tail bound {tail_bound:g} by degree {max_degree}",
        invariant="max_degree",
    )


EXAMPLE_FOUR_ROOTS = {2: 300 / 601, 4: 200 / 601, 15: 100 / 601, 60: 1 / 601}


def named_model(name: str, **params: float) -> MixedModel:
    """Return one of the worked-example models.

    Names: ``sk``, ``pure`` (``p``), ``two_p`` (``p``, ``mu``), ``four_roots``,
    and any series rule (``sinh``, ``cosh``, ``exp``) with ``tail_bound``.
    """
    if name == "sk":
        return MixedModel.from_pairs({2: 1.0}, label="sk")
    if name in ("pure", "two_p"):
        return truncate_series(name, 1.0, **params)
    if name == "four_roots":
        return MixedModel.from_pairs(EXAMPLE_FOUR_ROOTS, label="four_roots")
    if name in ("sinh", "cosh", "exp"):
        return truncate_series(name, float(params.get("tail_bound", 1e-30)))
    raise ValidationError(f"unknown model {name!r}", invariant="name")


def model_from_dict(data: Mapping[str, Any]) -> MixedModel:
    """Build a model from its JSON form (``terms`` or ``series``)."""
    label = str(data.get("label", ""))
    if "series" in data:
        series = dict(data["series"])
        rule = str(series.pop("rule"))
        tail_bound = float(series.pop("tail_bound", 1e-30))
        max_degree = int(series.pop("max_degree", TRUNCATION_MAX_DEGREE))
        model = truncate_series(rule, tail_bound, max_degree=max_degree, **series)
        if label:
            model = MixedModel(model.terms, label, model.note)
        return model
    try:
        terms = tuple(Term(int(t["p"]), float(t["beta_sq"])) for t in data["terms"])
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed terms: {e}", invariant="schema") from e
    return MixedModel(terms, label)


def read_model(path: Path) -> MixedModel:
    """Read and validate a model JSON file."""
    from sphgse.validation import ModelSchemaValidator

    result = ModelSchemaValidator().validate_file(path)
    if not result.valid:
        raise ValidationError("; ".join(result.errors), invariant="schema")
    data = json.loads(path.read_text(encoding="utf-8"))
    model = model_from_dict(data)
    if not model.label:
        model = MixedModel(model.terms, path.stem, model.note)
    return model
