"""Tests for the finite-temperature minimizer and the zero-temperature limit checks."""

from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from sphgse.errors import ValidationError
from sphgse.functionals import cs_energy, graded_grid, point_mass_energy
from sphgse.model import MixedModel
from sphgse.order_param import MeasureA
from sphgse.solver import finite_beta_minimize, gamma_check, grid_minimize
from sphgse.solver.finite_beta import (
    CsProblem,
    moderate_deviation_report,
    q_threshold,
    recovery_cells,
)

INV_SQRT2 = 1 / math.sqrt(2)


class TestCsProblem:
    def test_gradient_matches_differences(self, four_roots: MixedModel) -> None:
        problem = CsProblem(four_roots, beta=2.0, h=0.3, G=500)
        cells = np.linspace(0.1, 0.9, problem.cells)
        cells[-1] = 1.0
        g = problem.gradient(cells)
        for k in (0, 17, 250, 498):
            e = np.zeros_like(cells)
            e[k] = 1e-5
            up = cs_energy(problem.measure(cells + e), four_roots)
            down = cs_energy(problem.measure(cells - e), four_roots)
            assert g[k] == pytest.approx((up - down) / 2e-5, rel=1e-4, abs=1e-7)

    def test_weight_gradient_matches_differences(self, four_roots: MixedModel) -> None:
        problem = CsProblem(four_roots, beta=3.0, h=0.0, G=500)
        rng = np.random.default_rng(3)
        p = rng.uniform(0.5, 1.5, problem.cells)
        _, g = problem.weight_objective(p)
        for k in (0, 100, 499):
            e = np.zeros_like(p)
            e[k] = 1e-5
            fd = (problem.weight_objective(p + e)[0] - problem.weight_objective(p - e)[0]) / 2e-5
            assert g[k] == pytest.approx(fd, rel=1e-4, abs=1e-7)

    def test_weights_round_trip(self) -> None:
        cells = np.array([0.0, 0.2, 0.2, 0.7, 1.0])
        weights = CsProblem.weights_from_cells(cells)
        assert np.allclose(CsProblem.cells_from_weights(weights), cells)

    def test_project(self, sk: MixedModel) -> None:
        problem = CsProblem(sk, 1.0, 0.0, 500)
        out = problem.project(np.array([0.5, 0.2, 0.9, 1.2, 0.4]))
        assert np.all(np.diff(out) >= 0)
        assert out[-1] == 1.0
        assert out[0] == pytest.approx(0.35)


class TestRecovery:
    def test_q_threshold(self) -> None:
        assert q_threshold(4.0) == pytest.approx(0.5)

    def test_sk_recovery_is_point_mass(self) -> None:
        grid = graded_grid(1000)
        cells = recovery_cells(MeasureA(INV_SQRT2), 8.0, grid)
        q_cut = 1 - INV_SQRT2 / 8.0
        left = grid[:-1]
        assert np.all(cells[left < q_cut] == 0.0)
        assert np.all(cells[left >= q_cut] == 1.0)

    def test_small_beta_puts_mass_at_zero(self) -> None:
        grid = graded_grid(100)
        cells = recovery_cells(MeasureA(INV_SQRT2), 0.5, grid)
        assert np.all(cells == 1.0)


class TestFiniteBetaMinimize:
    def test_rejects_bad_arguments(self, sk: MixedModel) -> None:
        with pytest.raises(ValidationError):
            finite_beta_minimize(sk, 0.0, G=500)
        with pytest.raises(ValidationError):
            finite_beta_minimize(sk, 1.0, h=-1.0, G=500)
        with pytest.raises(ValidationError):
            finite_beta_minimize(sk, 1.0, G=100)
        with pytest.raises(ValidationError):
            finite_beta_minimize(sk, 1.0, G=500, method="newton")  # type: ignore[arg-type]

    @pytest.mark.integration
    def test_sk_point_mass(self, sk: MixedModel) -> None:
        beta = 8.0
        result = finite_beta_minimize(sk, beta, G=1000)
        q_exact = 1 - INV_SQRT2 / beta
        assert result.q_star == pytest.approx(q_exact, abs=2e-3)
        assert beta * (1 - result.q_star) == pytest.approx(INV_SQRT2, abs=2e-2)
        assert result.free_energy == pytest.approx(
            point_mass_energy(sk, q_exact, beta) / beta, abs=1e-4
        )
        assert result.atom_estimate_reliable
        assert result.atom_estimate() == pytest.approx(INV_SQRT2, abs=2e-2)

    @pytest.mark.integration
    def test_apg_agrees_with_lbfgsb(self, sk: MixedModel) -> None:
        lbfgsb = finite_beta_minimize(sk, 4.0, G=500)
        apg = finite_beta_minimize(sk, 4.0, G=500, method="apg")
        assert apg.method == "finite-beta-apg"
        assert apg.value == pytest.approx(lbfgsb.value, abs=1e-5)

    @pytest.mark.integration
    def test_to_dict(self, sk: MixedModel) -> None:
        data = finite_beta_minimize(sk, 4.0, G=500).to_dict()
        assert data["G"] == 500
        assert len(data["grid"]) == 501
        assert data["rescaled_density"][-1] == pytest.approx(4.0)


@pytest.mark.integration
class TestZeroTemperatureLimit:
    def test_moderate_deviation_sk(self, sk: MixedModel) -> None:
        gs = grid_minimize(sk, G=500)
        fb = finite_beta_minimize(sk, 8.0, G=1000)
        report = moderate_deviation_report(fb, gs)
        assert report.rhs == pytest.approx(INV_SQRT2, rel=1e-9)
        assert report.lhs == pytest.approx(INV_SQRT2, abs=2e-2)
        assert report.atom_target == pytest.approx(INV_SQRT2)
        assert report.reliable
        assert report.gse == pytest.approx(math.sqrt(2))

    def test_rejects_non_polynomial(self, sk: MixedModel) -> None:
        gs = grid_minimize(sk, G=500)
        fb = finite_beta_minimize(sk, 4.0, G=500)
        with pytest.raises(ValidationError):
            moderate_deviation_report(fb, gs, np.sin)  # type: ignore[arg-type]

    def test_quadratic_test_function(self, sk: MixedModel) -> None:
        gs = grid_minimize(sk, G=500)
        fb = finite_beta_minimize(sk, 8.0, G=1000)
        report = moderate_deviation_report(fb, gs, Polynomial([0.0, 0.0, 1.0]))
        assert report.rhs == pytest.approx(2 * INV_SQRT2, rel=1e-9)

    def test_gamma_check_free_energy_approaches_gse(self, sk: MixedModel) -> None:
        rows = gamma_check(sk, (4.0, 16.0), G=1000)
        assert [r.beta for r in rows] == [4.0, 16.0]
        errors = [abs(r.free_energy - math.sqrt(2)) for r in rows]
        assert errors[1] < errors[0]

    def test_beta_ladder_on_one_rsb_model(self, pure4: MixedModel) -> None:
        rows = gamma_check(pure4, (8.0, 32.0, 128.0))
        sups = [r.sup_distance for r in rows]
        assert sups[0] > sups[1] > sups[2]
        last = rows[-1]
        assert last.atom_estimate == pytest.approx(last.atom_target, rel=0.1)
