import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantorevt import DomainError, Params
from cantorevt.marginal import (
    DigitStream,
    cdf,
    cdf_array,
    cdf_modulus,
    fixed_point_residual,
    nu,
    psi,
    quantile,
    quantile_exact,
    sample_digits,
    sample_stationary,
    scaling_check,
    symmetry_check,
)
from cantorevt.simulate import ks_distance
from oracles import bracket_at, fixed_point_bracket

CANTOR = Params(1 / 3, 0.5)

betas = st.fractions(min_value=Fraction(1, 100), max_value=Fraction(1, 2), max_denominator=1000)
probs = st.floats(min_value=0.02, max_value=0.98)


class TestParams:
    def test_rejects_out_of_range(self):
        for beta, p in ((0.6, 0.5), (0.0, 0.5), (0.3, 0.0), (0.3, 1.0), (-0.1, 0.4)):
            with pytest.raises(DomainError):
                Params(beta, p)

    def test_degenerate_flag_and_q(self):
        assert Params(0.5, 0.5).degenerate
        assert not CANTOR.degenerate
        assert Params(0.3, 0.25).q_exact == 1 - Fraction(0.25)

    def test_float_third_snaps_to_exact_third(self):
        assert CANTOR.beta_exact == Fraction(1, 3)
        assert Params(0.4, 0.5).beta_exact == Fraction(2, 5)


class TestCdf:
    def test_cantor_third_is_half_exactly(self):
        v = cdf(CANTOR, 1 / 3)
        assert v.value == 0.5 and v.exact

    @pytest.mark.parametrize("params", [CANTOR, Params(0.3, 0.25), Params(0.5, 0.9)])
    def test_left_of_support(self, params):
        v = cdf(params, -0.2)
        assert v.value == 0.0 and v.exact

    def test_first_gap_plateau(self):
        v = cdf(Params(0.3, 0.25), 0.5)
        assert v.value == 0.25 and v.exact

    def test_quarter_against_fixed_point_iteration(self):
        _, lo, hi = fixed_point_bracket(1 / 3, 0.5)
        L, U = bracket_at(lo, hi, 0.25)
        v = cdf(CANTOR, 0.25).value
        assert abs(v - 1 / 3) <= 1e-12
        assert L - 0.5 ** 60 <= v <= U + 0.5 ** 60

    def test_error_bound_is_certified(self):
        v = cdf(Params(0.37, 0.61), 0.4321, depth=12)
        ref = cdf(Params(0.37, 0.61), 0.4321, depth=200).value
        assert v.lower <= ref <= v.upper
        assert v.error_bound <= cdf_modulus(Params(0.37, 0.61), 12)

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            cdf(CANTOR, float("nan"))

    def test_array_matches_scalar(self):
        P = Params(0.4, 0.3)
        xs = np.linspace(-0.1, 1.1, 301)
        vals, bound = cdf_array(P, xs)
        ref = np.array([cdf(P, float(x)).value for x in xs])
        assert np.all(np.abs(vals - ref) <= np.maximum(bound, 1e-12))

    @settings(max_examples=60, deadline=None)
    @given(beta=betas, p=probs, x=st.floats(0, 1), y=st.floats(0, 1))
    def test_monotone(self, beta, p, x, y):
        P = Params(beta, p)
        lo, hi = sorted((x, y))
        assert cdf(P, lo).value <= cdf(P, hi).value

    @settings(max_examples=60, deadline=None)
    @given(beta=betas, p=probs, x=st.floats(-0.5, 1.5))
    def test_functional_equation(self, beta, p, x):
        residual, bound = fixed_point_residual(Params(beta, p), x)
        assert residual <= bound + 1e-15


class TestModulus:
    def test_examples(self):
        assert cdf_modulus(CANTOR, 0) == 1
        assert cdf_modulus(CANTOR, 3) == 1 / 8
        assert cdf_modulus(Params(0.3, 0.75), 2) == 0.5625


class TestNu:
    def test_zero(self):
        for P in (CANTOR, Params(0.4, 0.2), Params(0.5, 0.8)):
            assert nu(P, 0.0) == 1.0

    def test_uniform_case_is_constant(self):
        P = Params(0.5, 0.5)
        assert all(nu(P, t) == 1.0 for t in np.linspace(-3, 0, 41))

    def test_periodicity_example(self):
        assert abs(nu(CANTOR, -0.4) - nu(CANTOR, -0.4 - math.log(3))) <= 1e-10

    def test_positive_and_bounded(self):
        P = Params(0.5, 0.25)
        vals = [nu(P, t) for t in np.linspace(math.log(0.5), 0, 200)]
        assert min(vals) > 0 and max(vals) < 10


class TestPsi:
    def test_examples(self):
        assert psi(CANTOR, -1.0) == 1.0
        assert psi(CANTOR, -1 / 3) == 0.5
        swapped = Params(1 / 3, 0.5)
        lhs = 0.5 * psi(CANTOR, -0.7)
        rhs = cdf(swapped, Fraction(7, 30)).value
        assert abs(lhs - rhs) <= 1e-10

    def test_self_similarity(self):
        P = Params(0.4, 0.25)
        for x in (-0.3, -1.0, -2.7):
            scaled = P.beta_exact * Fraction(x)
            assert abs(psi(P, scaled) - P.q * psi(P, x)) <= 1e-10

    def test_rejects_nonnegative(self):
        with pytest.raises(DomainError):
            psi(CANTOR, 0.0)


class TestQuantile:
    def test_endpoints(self):
        assert quantile(CANTOR, 0.0) == 0.0
        assert quantile(CANTOR, 1.0) == 1.0

    def test_median_against_grid_search(self):
        q = quantile(CANTOR, 0.5)
        assert abs(q - 1 / 3) <= (1 / 3) ** 64 + 1e-16
        grid = np.arange(330_000, 336_000) * 1e-6
        first = next(x for x in grid if cdf(CANTOR, x).value >= 0.5)
        assert first - 1e-6 < q <= first

    def test_float_result_round_trips(self):
        # 0.1 lands within ulps of 1/30, which sits just below the true quantile
        for P in (CANTOR, Params(0.4, 0.3)):
            for alpha in (0.1, 0.3, 0.9, 0.123):
                assert cdf(P, quantile(P, alpha)).value >= alpha

    def test_rejects_bad_alpha(self):
        with pytest.raises(DomainError):
            quantile(CANTOR, 1.5)

    @settings(max_examples=40, deadline=None)
    @given(beta=betas, p=probs, alpha=st.floats(0.001, 0.999))
    def test_generalised_inverse(self, beta, p, alpha):
        P = Params(beta, p)
        x = quantile_exact(P, alpha)
        assert cdf(P, x).upper >= alpha - 1e-12
        below = x - Fraction(P.beta_exact) ** 40
        assert cdf(P, below).lower <= alpha + 1e-12


class TestSampling:
    def test_extreme_digit_words(self):
        zeros = DigitStream((0,) * 64, Fraction(1, 3))
        ones = DigitStream((1,) * 200, Fraction(1, 3))
        assert float(zeros) == 0.0
        assert abs(float(ones) - 1.0) < 1e-15

    def test_ks_against_cdf(self):
        P = Params(0.4, 0.3)
        xs = sample_stationary(P, np.random.default_rng(1), size=100_000)
        assert ks_distance(P, xs) <= 0.01

    def test_digits_are_bernoulli_q(self):
        P = Params(0.4, 0.3)
        d = sample_digits(P, np.random.default_rng(2), depth=64, size=2000)
        assert abs(d.mean() - 0.7) < 0.005


class TestIdentities:
    def test_symmetry_examples(self):
        P = Params(0.4, 0.3)
        assert symmetry_check(P, [0.0]) == 0.0
        assert symmetry_check(P, [1.0]) == 0.0
        grid = np.linspace(0, 1, 1000)
        assert symmetry_check(P, grid) <= 2 * max(P.p, P.q) ** 64

    def test_scaling(self):
        assert scaling_check(Params(0.4, 0.3), np.linspace(0, 1, 200)) <= 1e-10
