"""Tests for the 1RSB closed form, its criteria and the 2+p classification."""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphgse.errors import DomainError, ShapeError, ValidationError
from sphgse.model import MixedModel, eval_model
from sphgse.numerics import sign_changes
from sphgse.onersb import (
    RsbClass,
    a_of_y,
    classify_2p,
    criteria,
    criteria_sweep,
    da_of_y,
    fp1rsb_residuals,
    purelike_boundary,
    rs_check,
    solve_master,
    two_term,
    z_polynomial,
    z_sign_changes,
)


class TestMasterFunction:
    def test_limit_at_one(self) -> None:
        assert a_of_y(1.0 + 1e-9) == pytest.approx(0.5, abs=1e-9)

    def test_domain(self) -> None:
        with pytest.raises(DomainError):
            a_of_y(1.0)
        with pytest.raises(DomainError):
            da_of_y(0.5)

    @pytest.mark.parametrize("y", [1.0499999, 1.04, 1.0500001])
    def test_series_switch_is_continuous(self, y: float) -> None:
        e = y - 1.0
        closed = (y * math.log1p(e) / e - 1.0) / e
        assert a_of_y(y) == pytest.approx(closed, abs=1e-12)

    @given(y=st.floats(min_value=1.001, max_value=500.0))
    def test_decreasing(self, y: float) -> None:
        assert a_of_y(y * 1.01) < a_of_y(y)

    @given(y=st.floats(min_value=1.01, max_value=50.0))
    def test_derivative(self, y: float) -> None:
        step = 1e-6 * y
        fd = (a_of_y(y + step) - a_of_y(y - step)) / (2 * step)
        assert da_of_y(y) == pytest.approx(fd, rel=1e-5, abs=1e-10)


class TestSolveMaster:
    def test_sk(self, sk: MixedModel) -> None:
        sol = solve_master(sk)
        assert sol.is_sk
        assert sol.m == 0.0
        assert sol.c == pytest.approx(1 / math.sqrt(2))

    @pytest.mark.parametrize("p", [3, 4, 10])
    def test_pure_residuals(self, p: int) -> None:
        model = MixedModel.from_pairs({p: 1.0})
        sol = solve_master(model)
        assert sol.converged
        assert a_of_y(sol.y) == pytest.approx(1 / p, abs=1e-13)
        assert sol.m == pytest.approx(sol.c * (sol.y - 1))
        for value in fp1rsb_residuals(model, sol.m, sol.c).values():
            assert abs(value) < 1e-10

    def test_pure_three_root(self) -> None:
        sol = solve_master(MixedModel.from_pairs({3: 1.0}))
        assert sol.converged
        assert sol.y == pytest.approx(2.81696, abs=1e-5)
        assert sol.m > 0

    def test_scaling(self, four_roots: MixedModel) -> None:
        base = solve_master(four_roots)
        scaled = solve_master(four_roots.scaled(4.0))
        assert scaled.y == pytest.approx(base.y, rel=1e-12)
        assert scaled.c == pytest.approx(base.c / 2, rel=1e-12)
        assert scaled.m == pytest.approx(base.m / 2, rel=1e-12)

    def test_to_dict(self, pure4: MixedModel) -> None:
        data = solve_master(pure4).to_dict()
        assert set(data) == {"y", "m", "c", "converged", "is_sk", "residuals"}


class TestCriteria:
    def test_bounds_for_two_four(self, two_four: Callable[[float], MixedModel]) -> None:
        model = two_four(0.7)
        rep = criteria(model, solve_master(model))
        assert rep.y_lower == pytest.approx(5 / 2.6)
        assert rep.y_upper == pytest.approx(2.6 / 1.4)
        assert not rep.both
        assert rep.failing()

    def test_pure_has_no_replicon_bound(self, pure4: MixedModel) -> None:
        rep = criteria(pure4, solve_master(pure4))
        assert rep.y_upper == math.inf
        assert rep.replicon_nonneg
        assert rep.purelike_or_critical
        assert rep.replicon > 0

    def test_aba_needs_normalized_model(self, two_four: Callable[[float], MixedModel]) -> None:
        model = two_four(0.3)
        assert criteria(model, solve_master(model)).aba_value is not None
        scaled = model.scaled(2.0)
        assert criteria(scaled, solve_master(scaled)).aba_value is None

    def test_sk_rejected(self, sk: MixedModel) -> None:
        with pytest.raises(ValidationError):
            criteria(sk, solve_master(sk))


class TestZPolynomial:
    def test_sign_matches_certificate_curvature(
        self, two_four: Callable[[float], MixedModel]
    ) -> None:
        model = two_four(0.3)
        sol = solve_master(model)
        t = np.linspace(0.0, 1.0, 9)
        phi = sol.c + sol.m * (1 - t)
        expected = 1.0 - phi**2 * np.asarray(eval_model(model, t, 2))
        assert np.allclose(z_polynomial(model, sol)(t), expected, atol=1e-12)

    def test_report(self, two_four: Callable[[float], MixedModel]) -> None:
        model = two_four(0.3)
        sol = solve_master(model)
        report = z_sign_changes(model, sol)
        assert report.sign_changes == sign_changes(np.array(report.coefficients))
        z = z_polynomial(model, sol)
        for root in report.roots:
            assert abs(z(root)) < 1e-9

    def test_rejects_other_shapes(self, four_roots: MixedModel) -> None:
        with pytest.raises(ShapeError):
            z_sign_changes(four_roots, solve_master(four_roots))


class TestClassify:
    def test_pure_is_one_rsb(self, two_four: Callable[[float], MixedModel]) -> None:
        result = classify_2p(two_four(0.0))
        assert result.cls is RsbClass.ONE_RSB
        assert result.one_rsb
        assert result.certified
        assert abs(result.gap) < 1e-9

    def test_one_rsb_charges_zero(self, two_four: Callable[[float], MixedModel]) -> None:
        result = classify_2p(two_four(0.3))
        assert result.atom_at_zero
        assert result.to_dict()["atom_at_zero"] is True
        assert not classify_2p(two_term(2, 4, 1.0)).atom_at_zero

    def test_not_one_rsb(self, two_four: Callable[[float], MixedModel]) -> None:
        result = classify_2p(two_four(0.7))
        assert result.cls is RsbClass.NOT_ONE_RSB
        assert result.not_one_rsb

    def test_not_one_rsb_obstacle_fails_inside(
        self, two_four: Callable[[float], MixedModel]
    ) -> None:
        result = classify_2p(two_four(0.7))
        assert -2e-3 < result.obstacle_margin < 0
        assert 0.0 < result.argmin < 0.45
        assert not result.certified

    def test_frsb_candidate(self, two_four: Callable[[float], MixedModel]) -> None:
        result = classify_2p(two_four(14 / 15))
        assert result.cls is RsbClass.FRSB_CANDIDATE
        assert result.not_one_rsb
        assert not result.certified

    def test_sk_endpoint(self) -> None:
        result = classify_2p(two_term(2, 4, 1.0))
        assert result.cls is RsbClass.SK_RS
        assert result.gse == pytest.approx(math.sqrt(2))
        assert result.to_dict()["replicon"] is None

    def test_to_dict_keys(self, two_four: Callable[[float], MixedModel]) -> None:
        data = classify_2p(two_four(0.3)).to_dict()
        assert data["class"] == "ONE_RSB"
        assert {"y", "m", "c", "aba", "failing", "GSE", "gap", "certified"} <= set(data)

    def test_rejects_three_terms(self, four_roots: MixedModel) -> None:
        with pytest.raises(ShapeError):
            classify_2p(four_roots)

    def test_rs_check(self, sk: MixedModel, pure4: MixedModel) -> None:
        assert rs_check(sk)
        assert rs_check(sk.scaled(3.0))
        assert not rs_check(pure4)


class TestSweeps:
    def test_criteria_sweep_rows(self) -> None:
        rows = criteria_sweep(2, 4, [0.0, 0.5, 1.0])
        assert len(rows) == 3
        assert rows[-1]["class"] == "SK_RS"
        assert rows[0]["purelike_or_critical"] is True

    def test_four_thirty_sweep_finds_negative_aba(self) -> None:
        rows = criteria_sweep(4, 30, np.linspace(0.0, 1.0, 41))
        values = [row["aba"] for row in rows if row["aba"] is not None]
        assert len(values) >= 30
        assert min(values) < 0

    @pytest.mark.integration
    def test_purelike_boundary_two_four(self) -> None:
        mu_c = purelike_boundary(4)
        assert mu_c == pytest.approx(0.786444, abs=1e-4)
        model = two_term(2, 4, mu_c - 1e-3)
        assert criteria(model, solve_master(model)).purelike_or_critical
