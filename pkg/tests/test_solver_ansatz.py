"""Tests for the structured-family minimizer."""

from __future__ import annotations

import math
import time
from collections.abc import Callable

import numpy as np
import pytest

from sphgse.errors import ValidationError
from sphgse.functionals import primal_energy
from sphgse.model import MixedModel, Sign, named_model, sign_intervals
from sphgse.onersb import solve_master
from sphgse.order_param import OrderParamAnsatz
from sphgse.solver import ansatz_minimize, grid_minimize
from sphgse.solver.ansatz import AnsatzFamily


class TestAnsatzFamily:
    def test_size_and_bounds(self, four_roots: MixedModel) -> None:
        family = AnsatzFamily(four_roots, sign_intervals(four_roots).intervals)
        assert family.size == 2 + 4 * 5
        assert len(family.bounds()) == family.size

    def test_one_rsb_start_on_positive_profile(self, pure4: MixedModel) -> None:
        family = AnsatzFamily(pure4, sign_intervals(pure4).intervals)
        sol = solve_master(pure4)
        ansatz = family.build(family.one_rsb_start(sol.m, sol.c))
        assert ansatz.is_one_rsb()
        assert family.objective(family.one_rsb_start(sol.m, sol.c)) == pytest.approx(
            primal_energy(sol.ansatz(pure4), pure4), rel=1e-12
        )

    def test_build_places_atoms_in_interval(
        self, two_four: Callable[[float], MixedModel]
    ) -> None:
        model = two_four(0.7)
        profile = sign_intervals(model)
        family = AnsatzFamily(model, profile.intervals)
        x = np.array([0.5, 0.1, 0.0, 0.5, 0.0, 0.2, 0.5, 0.5, 0.1, 0.1])
        ansatz = family.build(x)
        root = profile.boundaries[0]
        assert ansatz.frsb_segments == ((0.0, pytest.approx(0.5 * root)),)
        for q, _ in ansatz.atoms[1:]:
            assert 0.0 < q < 1.0
        ansatz.check_profile(profile)

    def test_parameters_outside_the_box_are_rejected(
        self, two_four: Callable[[float], MixedModel]
    ) -> None:
        model = two_four(0.7)
        family = AnsatzFamily(model, sign_intervals(model).intervals)
        x = np.zeros(family.size)
        with pytest.raises(ValidationError):
            family.objective(x)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_every_box_point_builds(self, four_roots: MixedModel, seed: int) -> None:
        family = AnsatzFamily(four_roots, sign_intervals(four_roots).intervals)
        sol = solve_master(four_roots)
        x = family.random_start(np.random.default_rng(seed), sol.m, sol.c)
        x[2::4] = np.where(np.arange(5) % 2 == 0, 1.0, 0.0)
        assert math.isfinite(family.objective(x))

    @pytest.mark.parametrize("seed", [3, 4])
    def test_gradient_matches_differences(self, four_roots: MixedModel, seed: int) -> None:
        family = AnsatzFamily(four_roots, sign_intervals(four_roots).intervals)
        sol = solve_master(four_roots)
        x = family.random_start(np.random.default_rng(seed), sol.m, sol.c)
        x[2::4] = np.clip(x[2::4], 0.1, 0.9)
        x[3::4] = np.clip(x[3::4], 0.1, 0.9)
        value, grad = family.energy(x)
        assert value == pytest.approx(family.objective(x), rel=1e-14)
        for k in range(family.size):
            step = 1e-6 * max(abs(x[k]), 1e-2)
            e = np.zeros_like(x)
            e[k] = step
            fd = (family.objective(x + e) - family.objective(x - e)) / (2 * step)
            assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-7), k

    def test_grid_start_is_inside_the_box(
        self, two_four: Callable[[float], MixedModel]
    ) -> None:
        model = two_four(0.7)
        family = AnsatzFamily(model, sign_intervals(model).intervals)
        reference = grid_minimize(model, G=500)
        x = family.grid_start(reference.phi)
        assert len(x) == family.size
        assert x[0] == pytest.approx(reference.phi.values[-1])
        assert np.all((x[2::4] >= 0) & (x[2::4] <= 1))
        assert np.all(x[4::4] >= 0) and np.all(x[5::4] >= 0)
        assert math.isfinite(family.objective(x))


class TestAnsatzMinimize:
    def test_sk_short_circuit(self, sk: MixedModel) -> None:
        result = ansatz_minimize(sk, sign_intervals(sk))
        assert result.method == "ansatz-sk"
        assert result.gse == pytest.approx(math.sqrt(2))
        assert result.certified

    def test_one_rsb_short_circuit(self, pure4: MixedModel) -> None:
        result = ansatz_minimize(pure4, sign_intervals(pure4))
        assert result.method == "ansatz-1rsb"
        assert result.ansatz is not None
        assert result.ansatz.is_one_rsb()
        assert result.certified

    def test_full_frsb_short_circuit(self, two_four: Callable[[float], MixedModel]) -> None:
        model = two_four(14 / 15)
        profile = sign_intervals(model)
        assert profile.signs == (Sign.NEGATIVE,)
        result = ansatz_minimize(model, profile)
        assert result.method == "ansatz-frsb"
        assert result.certified
        assert abs(result.gap) < 1e-9
        expected = 0.5 * primal_energy(OrderParamAnsatz.full_frsb(model), model)
        assert result.gse == pytest.approx(expected, rel=1e-12)

    def test_rejects_field(self, pure4: MixedModel) -> None:
        with pytest.raises(ValidationError):
            ansatz_minimize(pure4, sign_intervals(pure4), h=0.1)

    @pytest.mark.integration
    @pytest.mark.parametrize("name", ["two_four_0.7", "four_roots"])
    def test_agrees_with_grid(self, name: str, two_four: Callable[[float], MixedModel]) -> None:
        model = two_four(0.7) if name == "two_four_0.7" else named_model("four_roots")
        profile = sign_intervals(model)
        reference = grid_minimize(model, G=2000)
        started = time.perf_counter()
        result = ansatz_minimize(model, profile)
        assert time.perf_counter() - started < 120
        assert result.method == "ansatz-family"
        assert result.ansatz is not None
        result.ansatz.check_profile(profile)
        assert result.gse == pytest.approx(reference.gse, abs=1e-5)
        assert result.gse <= reference.gse + 1e-8

    def test_sinh_takes_the_one_rsb_path(self) -> None:
        model = named_model("sinh")
        profile = sign_intervals(model)
        assert all(iv.sign is Sign.POSITIVE for iv in profile.intervals)
        sol = solve_master(model)
        result = ansatz_minimize(model, profile)
        assert result.method == "ansatz-1rsb"
        assert result.certified
        assert abs(result.gap) < 1e-7
        assert result.ansatz is not None
        assert result.ansatz.atoms == ((0.0, pytest.approx(sol.m, abs=1e-8)),)
        assert result.ansatz.c == pytest.approx(sol.c, abs=1e-8)
        assert sol.m == pytest.approx(1.5812, abs=1e-4)
        assert sol.c == pytest.approx(0.7799, abs=1e-4)
