"""Special-function primitives: Gaussian Q, Marcum Q1, entropy helpers."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from polarcap.specfun import binary_entropy, gaussian_q, marcum_q1, xlogx

# high-precision reference values, frozen from independent evaluation of the
# defining integrals (40-digit arithmetic)
GAUSSIAN_Q_AT_1 = 0.15865525393145705
MARCUM_GRID = [
    (0.0, 0.0, 1.0),
    (0.0, 1.0, 0.60653065971263342),
    (0.5, 0.5, 0.89550858106985968),
    (1.0, 1.0, 0.73287980379682022),
    (1.0, 2.0, 0.26901206003591),
    (2.0, 1.0, 0.918107696369406),
    (3.0, 3.0, 0.56747976229086151),
    (5.0, 2.0, 0.99919927036288579),
    (2.0, 5.0, 0.0022208297371346981),
    (10.0, 9.0, 0.85377900567702856),
    (10.0, 11.0, 0.17047921351305235),
    (0.1, 8.0, 1.4767605751266492e-14),
    (8.0, 0.1, 0.99999999999999993),
    (4.0, 4.0, 0.55027206368062601),
    (6.0, 7.5, 0.077028283676060953),
]
BINARY_ENTROPY_AT_011 = 0.499915958164528


class TestGaussianQ:
    def test_zero(self):
        assert gaussian_q(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_reflection(self):
        assert gaussian_q(1.3) == pytest.approx(1.0 - gaussian_q(-1.3), abs=1e-15)

    def test_reference_value(self):
        assert gaussian_q(1.0) == pytest.approx(GAUSSIAN_Q_AT_1, abs=1e-15)

    def test_monotone_decreasing(self):
        xs = np.linspace(-6.0, 6.0, 200)
        qs = [gaussian_q(x) for x in xs]
        assert all(a > b for a, b in zip(qs, qs[1:]))


class TestMarcumQ1:
    def test_threshold_zero(self):
        for a in (0.0, 0.7, 3.0, 12.0):
            assert marcum_q1(a, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_rayleigh_reduction(self):
        for b in (0.1, 1.0, 2.5, 6.0):
            assert marcum_q1(0.0, b) == pytest.approx(
                math.exp(-b * b / 2.0), rel=1e-13
            )

    @pytest.mark.parametrize("a,b,expect", MARCUM_GRID)
    def test_reference_grid(self, a, b, expect):
        assert marcum_q1(a, b) == pytest.approx(expect, abs=1e-9)

    def test_monotone_in_b(self):
        for a in (0.0, 0.5, 1.0, 2.0, 5.0):
            bs = np.linspace(0.0, 12.0, 60)
            vals = [marcum_q1(a, b) for b in bs]
            assert all(x >= y - 1e-14 for x, y in zip(vals, vals[1:]))

    def test_monotone_in_a(self):
        for b in (0.5, 1.0, 3.0):
            vals = [marcum_q1(a, b) for a in np.linspace(0.0, 8.0, 40)]
            assert all(x <= y + 1e-14 for x, y in zip(vals, vals[1:]))

    def test_far_tail_vanishes(self):
        for a in (0.0, 1.0, 5.0):
            assert marcum_q1(a, 40.0) < 1e-12

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            marcum_q1(-0.1, 1.0)
        with pytest.raises(ValueError):
            marcum_q1(1.0, -0.1)

    @given(st.floats(0.0, 20.0), st.floats(0.0, 30.0))
    def test_is_probability(self, a, b):
        v = marcum_q1(a, b)
        assert 0.0 <= v <= 1.0


class TestEntropyHelpers:
    def test_xlogx_conventions(self):
        assert xlogx(0.0) == 0.0
        assert xlogx(1.0) == 0.0
        assert xlogx(0.5) == pytest.approx(-0.5, abs=1e-15)

    def test_binary_entropy_values(self):
        assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(0.11) == pytest.approx(
            BINARY_ENTROPY_AT_011, abs=1e-14
        )

    @given(st.floats(0.0, 1.0))
    def test_binary_entropy_symmetry(self, p):
        q = 1.0 - p
        assume(1.0 - q == p)  # complement exactly representable
        assert binary_entropy(p) == binary_entropy(q)
