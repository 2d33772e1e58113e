"""Tests for the shared numerical kernels."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphgse.numerics import gauss_legendre, logmean_inv, logmean_inv_grad, sign_changes

positive = st.floats(min_value=0.05, max_value=20.0)


class TestLogmeanInv:
    def test_equal_arguments(self) -> None:
        assert logmean_inv(np.array(2.0), np.array(2.0)) == pytest.approx(0.5)

    def test_matches_closed_form(self) -> None:
        a, b = 1.0, 3.0
        assert logmean_inv(np.array(a), np.array(b)) == pytest.approx(math.log(b / a) / (b - a))

    @pytest.mark.parametrize("x", [0.99e-4, 1.01e-4, -0.99e-4, -1.01e-4])
    def test_continuous_across_series_switch(self, x: float) -> None:
        a = 1.0
        b = a + x
        d = b - a
        expected = math.log1p(d / a) / d
        assert float(logmean_inv(np.array(a), np.array(b))) == pytest.approx(expected, rel=1e-13)

    @given(a=positive, b=positive)
    def test_is_mean_of_reciprocal(self, a: float, b: float) -> None:
        value = float(logmean_inv(np.array(a), np.array(b)))
        assert min(1 / a, 1 / b) * (1 - 1e-12) <= value <= max(1 / a, 1 / b) * (1 + 1e-12)

    @given(a=positive, b=positive)
    def test_gradient_matches_differences(self, a: float, b: float) -> None:
        def lm(x: float, y: float) -> float:
            return float(logmean_inv(np.array(x), np.array(y)))

        da, db = logmean_inv_grad(np.array(a), np.array(b))
        sa, sb = 1e-6 * a, 1e-6 * b
        fd_a = (lm(a + sa, b) - lm(a - sa, b)) / (2 * sa)
        fd_b = (lm(a, b + sb) - lm(a, b - sb)) / (2 * sb)
        assert float(da) == pytest.approx(fd_a, rel=1e-4, abs=1e-8)
        assert float(db) == pytest.approx(fd_b, rel=1e-4, abs=1e-8)


class TestGaussLegendre:
    def test_integrates_polynomials(self) -> None:
        x, w = gauss_legendre(8)
        assert float(np.dot(w, x**7)) == pytest.approx(1 / 8, rel=1e-12)
        assert float(np.sum(w)) == pytest.approx(1.0)


class TestSignChanges:
    def test_counts_changes(self) -> None:
        assert sign_changes(np.array([1.0, -1.0, 1.0])) == 2

    def test_skips_zeros(self) -> None:
        assert sign_changes(np.array([1.0, 0.0, 0.0, -2.0])) == 1

    def test_relative_noise_is_zero(self) -> None:
        assert sign_changes(np.array([1.0, -1e-20, 1.0])) == 0
