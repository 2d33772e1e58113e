"""Tests for the primal, dual, ground-state and finite-temperature functionals."""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphgse.errors import ValidationError
from sphgse.functionals import (
    FiniteBetaMeasure,
    certificate_record,
    cs_energy,
    cs_energy_direct,
    dual_energy,
    duality_gap,
    formal_conjugate,
    graded_grid,
    gs_energy,
    natural_bc_check,
    obstacle_check,
    point_mass_energy,
    primal_energy,
)
from sphgse.model import MixedModel, eval_model
from sphgse.onersb import solve_master
from sphgse.order_param import OrderParamAnsatz, to_grid, to_measure

SQRT2 = math.sqrt(2.0)


class TestPrimalEnergy:
    def test_sk_constant(self, sk: MixedModel) -> None:
        phi = OrderParamAnsatz.one_rsb(0.0, 1 / SQRT2)
        assert primal_energy(phi, sk) == pytest.approx(2 * SQRT2, rel=1e-14)

    def test_field_term(self, sk: MixedModel) -> None:
        phi = OrderParamAnsatz.one_rsb(0.0, 1.0)
        assert primal_energy(phi, sk, h=0.5) == pytest.approx(3.0 + 0.25)

    def test_grid_matches_ansatz_on_linear_pieces(self, four_roots: MixedModel) -> None:
        phi = OrderParamAnsatz(c=0.3, atoms=((0.0, 0.4), (0.37, 0.2)))
        exact = primal_energy(phi, four_roots)
        assert primal_energy(to_grid(phi, 1000), four_roots) == pytest.approx(exact, rel=1e-4)

    def test_gauss_matches_adaptive(self, two_four: Callable[[float], MixedModel]) -> None:
        model = two_four(14 / 15)
        phi = OrderParamAnsatz.full_frsb(model)
        adaptive = primal_energy(phi, model)
        assert primal_energy(phi, model, rule="gauss") == pytest.approx(adaptive, rel=1e-12)

    def test_rejects_negative_field(self, sk: MixedModel) -> None:
        with pytest.raises(ValidationError):
            primal_energy(OrderParamAnsatz.one_rsb(0.0, 1.0), sk, h=-1.0)

    def test_rejects_phi_below_floor(self, sk: MixedModel) -> None:
        with pytest.raises(ValidationError):
            primal_energy(OrderParamAnsatz.one_rsb(0.5, 1e-10), sk)


class TestGsEnergy:
    @pytest.mark.parametrize("h", [0.0, 0.3])
    def test_agrees_with_primal_for_atoms(self, four_roots: MixedModel, h: float) -> None:
        phi = OrderParamAnsatz(c=0.3, atoms=((0.0, 0.4), (0.37, 0.2), (0.8, 0.5)))
        assert gs_energy(to_measure(phi), four_roots, h) == pytest.approx(
            primal_energy(phi, four_roots, h), rel=1e-10
        )

    def test_agrees_with_primal_for_segments(
        self, two_four: Callable[[float], MixedModel]
    ) -> None:
        model = two_four(14 / 15)
        phi = OrderParamAnsatz.full_frsb(model)
        assert gs_energy(to_measure(phi), model) == pytest.approx(
            primal_energy(phi, model), rel=1e-9
        )


class TestFormalConjugate:
    def test_sk_optimum_touches_obstacle(self, sk: MixedModel) -> None:
        cert = formal_conjugate(OrderParamAnsatz.one_rsb(0.0, 1 / SQRT2), sk)
        assert np.allclose(cert.eta, cert.grid**2, atol=1e-12)
        assert dual_energy(cert) == pytest.approx(2 * SQRT2)

    def test_boundary_values(self, four_roots: MixedModel) -> None:
        h = 0.4
        phi = OrderParamAnsatz(c=0.3, atoms=((0.0, 0.4), (0.37, 0.2)))
        cert = formal_conjugate(phi, four_roots, h)
        assert cert.eta[-1] == pytest.approx(float(eval_model(four_roots, 1.0)))
        assert cert.eta_p[0] == pytest.approx(-(h**2))
        assert np.allclose(cert.eta_pp * cert.phi_values**2, 1.0)

    def test_grid_and_ansatz_certificates_agree(self, four_roots: MixedModel) -> None:
        phi = OrderParamAnsatz(c=0.3, atoms=((0.0, 0.4), (0.375, 0.2)))
        from_ansatz = formal_conjugate(phi, four_roots, G=800)
        from_grid = formal_conjugate(to_grid(phi, 800), four_roots)
        assert np.allclose(from_ansatz.eta, from_grid.eta, atol=1e-10)

    def test_eta_at_matches_grid(self, four_roots: MixedModel) -> None:
        phi = OrderParamAnsatz(c=0.3, atoms=((0.0, 0.4), (0.37, 0.2)))
        cert = formal_conjugate(phi, four_roots, G=400)
        assert np.allclose(cert.eta_at(cert.grid), cert.eta, atol=1e-12)

    def test_obstacle_refine_never_raises_margin(self, four_roots: MixedModel) -> None:
        sol = solve_master(four_roots)
        cert = formal_conjugate(sol.ansatz(four_roots), four_roots, G=200)
        coarse, _ = obstacle_check(cert)
        fine, where = obstacle_check(cert, refine=True)
        assert fine <= coarse
        assert 0.0 <= where <= 1.0


class TestDualityGap:
    def test_sk_optimum_has_zero_gap(self, sk: MixedModel) -> None:
        report = duality_gap(OrderParamAnsatz.one_rsb(0.0, 1 / SQRT2), sk)
        assert report.gap == pytest.approx(0.0, abs=1e-12)
        assert report.feasible

    @pytest.mark.parametrize("h", [0.0, 0.5, 1.0])
    def test_sk_with_field(self, sk: MixedModel, h: float) -> None:
        c = 1.0 / math.sqrt(2.0 + h * h)
        report = duality_gap(OrderParamAnsatz.one_rsb(0.0, c), sk, h)
        assert report.gap == pytest.approx(0.0, abs=1e-12)
        assert report.feasible
        assert 0.5 * report.primal == pytest.approx(math.sqrt(2.0 + h * h))

    @settings(max_examples=25, deadline=None)
    @given(c=st.floats(min_value=0.75, max_value=3.0))
    def test_weak_duality_for_feasible_constants(self, c: float) -> None:
        sk = MixedModel.from_pairs({2: 1.0})
        report = duality_gap(OrderParamAnsatz.one_rsb(0.0, c), sk)
        assert report.feasible
        assert report.gap >= -1e-12
        assert report.dual <= 2 * SQRT2 + 1e-12

    @pytest.mark.integration
    def test_weak_duality_on_random_pairs(self, two_four: Callable[[float], MixedModel]) -> None:
        model = two_four(0.3)
        optimum = solve_master(model).ansatz(model)
        rng = np.random.default_rng(0)
        feasible = 0
        for i in range(1000):
            if i == 0:
                primal_phi, dual_phi = optimum, optimum
            else:
                q = rng.uniform(0.05, 0.95)
                atoms = ((0.0, rng.uniform(0.0, 3.0)), (q, rng.uniform(0.0, 3.0)))
                primal_phi = OrderParamAnsatz(c=rng.uniform(0.1, 2.0), atoms=atoms)
                dual_phi = OrderParamAnsatz.one_rsb(rng.uniform(0.0, 3.0), rng.uniform(0.1, 2.0))
            report = duality_gap(dual_phi, model)
            if not report.feasible:
                continue
            feasible += 1
            primal = primal_energy(primal_phi, model)
            assert primal >= report.dual - 1e-9
            if primal - report.dual < 1e-9:
                assert natural_bc_check(report.cert, dual_phi).passed(1e-6)
        assert feasible >= 100

    def test_small_constant_is_infeasible(self, sk: MixedModel) -> None:
        report = duality_gap(OrderParamAnsatz.one_rsb(0.0, 0.5), sk)
        assert not report.feasible
        assert report.cert.margin == pytest.approx(-1.0, abs=1e-9)

    def test_one_rsb_pure_is_stationary(self, pure4: MixedModel) -> None:
        sol = solve_master(pure4)
        report = duality_gap(sol.ansatz(pure4), pure4)
        assert abs(report.gap) < 1e-9
        assert report.feasible

    def test_natural_boundary(self, sk: MixedModel) -> None:
        _, cert = duality_gap(OrderParamAnsatz.one_rsb(0.0, 1 / SQRT2), sk)
        assert natural_bc_check(cert).passed()

    def test_certificate_record(self, sk: MixedModel) -> None:
        record = certificate_record(duality_gap(OrderParamAnsatz.one_rsb(0.0, 1 / SQRT2), sk))
        assert record["GSE"] == pytest.approx(SQRT2)
        assert record["certified"] is True
        assert set(record) >= {"P", "D", "gap", "obstacle_margin", "argmin", "bc_residuals"}


class TestFiniteBetaFunctional:
    def test_graded_grid(self) -> None:
        grid = graded_grid(100)
        assert grid[0] == 0.0
        assert grid[-1] == 1.0
        assert np.all(np.diff(grid) > 0)
        assert np.diff(grid)[-1] < np.diff(grid)[0]

    @pytest.mark.parametrize("node", [0, 150, 400])
    def test_point_mass_closed_form(self, four_roots: MixedModel, node: int) -> None:
        grid = graded_grid(500)
        q = float(grid[node])
        mu = FiniteBetaMeasure.point_mass(grid, q, beta=4.0, h=0.3)
        expected = point_mass_energy(four_roots, q, 4.0, 0.3)
        assert cs_energy(mu, four_roots) == pytest.approx(expected, rel=1e-10, abs=1e-12)
        assert cs_energy_direct(mu, four_roots) == pytest.approx(expected, rel=1e-8, abs=1e-10)
        assert mu.q_star() == q

    def test_rejects_mass_at_one(self) -> None:
        grid = graded_grid(10)
        cdf = np.zeros(11)
        cdf[-1] = 1.0
        with pytest.raises(ValidationError):
            FiniteBetaMeasure(grid, cdf, beta=1.0)

    def test_rejects_decreasing_cdf(self) -> None:
        grid = graded_grid(10)
        cdf = np.ones(11)
        cdf[3] = 0.5
        cdf[2] = 0.8
        cdf[:2] = 0.9
        with pytest.raises(ValidationError):
            FiniteBetaMeasure(grid, cdf, beta=1.0)

    def test_mean(self) -> None:
        grid = graded_grid(10)
        mu = FiniteBetaMeasure.point_mass(grid, float(grid[5]), beta=1.0)
        assert mu.mean(lambda t: t) == pytest.approx(float(grid[5]))
