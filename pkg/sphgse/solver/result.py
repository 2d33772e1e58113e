"""Solver output shared by the grid and ansatz minimizers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from sphgse.config import DEFAULT_GRID
from sphgse.functionals import DualCertificate, GapReport, certificate_record, duality_gap
from sphgse.model import MixedModel, dfrak, eval_model
from sphgse.order_param import GridFunction, OrderParamAnsatz, to_grid


@dataclass(frozen=True, eq=False)
class SolveResult:
    """An optimizer candidate with the certificate built from it.

    ``phi`` is always a grid function; ``ansatz`` is set when the structured
    form produced it, and the certificate is then built from the ansatz.
    """

    phi: GridFunction
    certificate: DualCertificate
    report: GapReport
    h: float
    iterations: int
    method: str
    ansatz: OrderParamAnsatz | None = None

    @classmethod
    def build(
        cls,
        source: GridFunction | OrderParamAnsatz,
        model: MixedModel,
        h: float,
        iterations: int,
        method: str,
        G: int = DEFAULT_GRID,
    ) -> SolveResult:
        report = duality_gap(source, model, h, G)
        if isinstance(source, OrderParamAnsatz):
            return cls(to_grid(source, G), report.cert, report, h, iterations, method, source)
        return cls(source, report.cert, report, h, iterations, method)

    @property
    def model(self) -> MixedModel:
        return self.certificate.model

    @property
    def p_value(self) -> float:
        return self.report.primal

    @property
    def d_value(self) -> float:
        return self.report.dual

    @property
    def gse(self) -> float:
        return 0.5 * self.report.primal

    @property
    def gap(self) -> float:
        return self.report.gap

    @property
    def obstacle_margin(self) -> float:
        return self.certificate.margin

    @property
    def certified(self) -> bool:
        return self.report.feasible

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "model": self.model.to_dict(),
            "h": self.h,
            "method": self.method,
            "iterations": self.iterations,
            "G": self.phi.size,
            "certificate": certificate_record(self.report),
        }
        data["P_value"] = self.p_value
        data["D_value"] = self.d_value
        data["GSE"] = self.gse
        data["gap"] = self.gap
        data["obstacle_margin"] = data["certificate"]["obstacle_margin"]
        data["certified"] = data["certificate"]["certified"]
        data["ansatz"] = self.ansatz.to_dict() if self.ansatz is not None else None
        return data

    def table(self) -> dict[str, np.ndarray]:
        """Columns t, phi, eta, xi, eta - xi and d on the certificate grid."""
        t = self.certificate.grid
        xi = np.asarray(eval_model(self.model, t, 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            x2 = np.asarray(eval_model(self.model, t, 2))
            safe = x2 > 0
            d = np.full_like(t, np.nan)
            if np.any(safe):
                d[safe] = np.asarray(dfrak(self.model, t[safe]))
        return {
            "t": t,
            "phi": self.certificate.phi_values,
            "eta": self.certificate.eta,
            "xi": xi,
            "eta_minus_xi": self.certificate.eta - xi,
            "d": d,
        }
