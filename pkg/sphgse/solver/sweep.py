"""Classification sweep over the 2+p family mu t^2 + (1 - mu) t^p."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from sphgse.config import BOUNDARY_TOL, max_workers
from sphgse.errors import ValidationError
from sphgse.onersb import classify_2p, flag_boundary, two_term

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "mu",
    "y",
    "m",
    "c",
    "replicon",
    "purelike_margin",
    "gse",
    "gap",
    "obstacle_margin",
    "class",
)


@dataclass(frozen=True)
class SweepRow:
    mu: float
    y: float
    m: float
    c: float
    replicon: float | None
    purelike_margin: float | None
    gse: float
    gap: float
    obstacle_margin: float
    cls: str
    replicon_nonneg: bool
    purelike_or_critical: bool

    def as_csv_row(self) -> dict[str, Any]:
        return {
            "mu": self.mu,
            "y": self.y,
            "m": self.m,
            "c": self.c,
            "replicon": self.replicon,
            "purelike_margin": self.purelike_margin,
            "gse": self.gse,
            "gap": self.gap,
            "obstacle_margin": self.obstacle_margin,
            "class": self.cls,
        }


@dataclass(frozen=True)
class SweepTable:
    p: int
    rows: tuple[SweepRow, ...]
    boundaries: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "rows": [row.as_csv_row() for row in self.rows],
            "boundaries": {k: list(v) for k, v in self.boundaries.items()},
        }


def _classify_row(p: int, mu: float) -> SweepRow:
    result = classify_2p(two_term(2, p, mu))
    rep = result.report
    return SweepRow(
        mu=mu,
        y=result.solution.y,
        m=result.solution.m,
        c=result.solution.c,
        replicon=rep.replicon if rep else None,
        purelike_margin=rep.purelike_margin if rep else None,
        gse=result.gse,
        gap=result.gap,
        obstacle_margin=result.obstacle_margin,
        cls=result.cls.value,
        replicon_nonneg=rep.replicon_nonneg if rep else True,
        purelike_or_critical=rep.purelike_or_critical if rep else True,
    )


def _boundaries(p: int, rows: Sequence[SweepRow], tol: float) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {"purelike": [], "replicon": []}
    for a, b in zip(rows[:-1], rows[1:], strict=True):
        if a.purelike_or_critical != b.purelike_or_critical:
            out["purelike"].append(flag_boundary(p, a.mu, b.mu, "purelike", tol))
        if a.replicon_nonneg != b.replicon_nonneg:
            out["replicon"].append(flag_boundary(p, a.mu, b.mu, "replicon", tol))
    return out


def sweep_2p(
    p: int,
    mu_grid: Sequence[float],
    h: float = 0.0,
    *,
    workers: int | None = None,
    tol: float = BOUNDARY_TOL,
) -> SweepTable:
    """Classify every mu of ``mu_grid`` and locate the flag changes between neighbours.

    Rows come back sorted by mu whatever the number of worker processes.

    Raises:
        ValidationError: If p < 3, h != 0 or some mu lies outside [0, 1).
    """
    if p < 3:
        raise ValidationError(f"p must be >= 3, got {p}", invariant="p >= 3")
    if h != 0:
        raise ValidationError("the 2+p classification is defined at zero field", invariant="h = 0")
    mus = sorted({float(mu) for mu in mu_grid})
    if not mus or any(not (0.0 <= mu < 1.0) or not math.isfinite(mu) for mu in mus):
        raise ValidationError("mu values must lie in [0, 1)", invariant="mu in [0,1)")

    n_workers = max_workers() if workers is None else workers
    logger.info("sweeping 2+%d over %d values with %d worker(s)", p, len(mus), n_workers)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_classify_row, [p] * len(mus), mus))
    else:
        rows = [_classify_row(p, mu) for mu in mus]
    return SweepTable(p, tuple(rows), _boundaries(p, rows, tol))
