import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import genextreme

from cantorevt import DomainError, InvalidLawError, Params
from cantorevt.evt import (
    MssLaw,
    limit_law_dependent,
    limit_law_iid,
    mss_representation,
    msstable_general,
    norming_ratio_defect,
    norming_sequences,
    same_type_exponent,
    same_type_q,
)
from cantorevt.marginal import psi
from cantorevt.simulate import MonteCarloConfig, empirical_max_law

CANTOR = Params(Fraction(1, 3), 0.5)


def one(_):
    return 1.0


class TestLimitLaws:
    def test_values_at_minus_one(self):
        assert abs(limit_law_iid(CANTOR, -1.0) - 0.367879) < 1e-6
        assert abs(limit_law_dependent(CANTOR, -1.0) - 0.606531) < 1e-6

    def test_tails(self):
        assert limit_law_iid(CANTOR, -math.inf) == 0.0
        assert limit_law_iid(CANTOR, -1e300) == 0.0
        assert limit_law_iid(CANTOR, -1e-300) == 1.0
        assert limit_law_iid(CANTOR, -1e-12) > 1 - 1e-6

    def test_domain(self):
        with pytest.raises(DomainError):
            limit_law_iid(CANTOR, 0.0)
        with pytest.raises(DomainError):
            limit_law_dependent(Params(0.5, 0.5), -1.0)

    def test_self_similarity(self):
        for P in (CANTOR, Params(0.4, 0.25), Params(0.5, 0.75)):
            for x in np.linspace(-3, -0.1, 25):
                scaled = P.beta_exact * Fraction(float(x))
                assert abs(psi(P, scaled) - P.q * psi(P, float(x))) <= 1e-10
                lhs = limit_law_dependent(P, scaled)
                rhs = limit_law_dependent(P, float(x)) ** P.q
                assert abs(lhs - rhs) <= 1e-10

    def test_extremal_index_identity(self):
        P = Params(0.4, 0.25)
        worst = max(abs(limit_law_dependent(P, x) - limit_law_iid(P, x) ** P.p)
                    for x in np.linspace(-5, -0.01, 100))
        assert worst <= 1e-12

    def test_monotone_and_sandwiched(self):
        P = Params(0.4, 0.25)
        xs = np.linspace(-4, -0.01, 200)
        dep = [limit_law_dependent(P, x) for x in xs]
        iid = [limit_law_iid(P, x) for x in xs]
        assert np.all(np.diff(dep) >= 0) and np.all(np.diff(iid) >= 0)
        assert all(a <= b for a, b in zip(iid, dep))

    def test_small_p_limit_against_simulation(self):
        # With beta = 0.4 and p = 0.25 the level n = 8 gives only k_8 = 9 observations;
        # the limit is checked against the empirical law at the stated tolerance.
        P = Params(0.4, 0.25)
        law = empirical_max_law(P, [-0.5], 8, MonteCarloConfig(seed=31, replications=100_000))
        assert abs(law.estimates[0] - limit_law_dependent(P, -0.5)) <= 0.02


class TestMssFamily:
    def test_gumbel_and_frechet_at_zero(self):
        assert abs(msstable_general(MssLaw(0.0, one, 2.0), 0.0) - math.exp(-1)) < 1e-15
        assert abs(msstable_general(MssLaw(1.0, one, 2.0), 0.0) - math.exp(-1)) < 1e-15

    def test_reference_gev(self):
        pts = [-1.7, -0.9, -0.3, 0.0, 0.2, 0.8, 1.5, 2.2, 3.1, 4.0]
        for xi in (-0.6, -0.2, 0.0, 0.3, 1.0):
            law = MssLaw(xi, one, 3.0)
            for x in pts:
                assert abs(msstable_general(law, x) - genextreme.cdf(x, -xi)) <= 1e-14

    def test_outside_support(self):
        assert msstable_general(MssLaw(0.5, one, 2.0), -3.0) == 0.0
        assert msstable_general(MssLaw(-0.5, one, 2.0), 3.0) == 1.0

    def test_invalid_nu(self):
        with pytest.raises(InvalidLawError):
            MssLaw(0.2, lambda s: -1.0, 2.0)
        with pytest.raises(InvalidLawError):
            MssLaw(0.2, lambda s: 1.0 + s * s, 2.0)
        with pytest.raises(InvalidLawError):
            MssLaw(0.2, one, 1.0)

    @pytest.mark.parametrize("beta,p", [(Fraction(1, 3), 0.5), (Fraction(2, 5), 0.25), (Fraction(1, 2), 0.75)])
    def test_representation(self, beta, p):
        P = Params(beta, p)
        expected_xi = -math.log(float(beta)) / math.log(P.q)
        for dependent in (False, True):
            rep = mss_representation(P, dependent=dependent)
            assert abs(rep.measured_xi - expected_xi) <= 1e-12
            assert rep.grid_defect <= 1e-12
            assert abs(rep.law.c - 1 / P.q) <= 1e-15


class TestSameType:
    def test_roots(self):
        assert same_type_q(1) == 0.5
        assert abs(same_type_q(2) - (math.sqrt(5) - 1) / 2) <= 1e-12
        assert abs(same_type_q(3) - 0.68232780382802) <= 1e-13
        for m in (1, 2, 3, 7):
            q = same_type_q(m)
            assert abs(q ** m + q - 1) <= 1e-14

    def test_same_type_laws_differ_by_scaling(self):
        q = same_type_q(2)
        P = Params(Fraction(3, 10), 1 - q)
        assert same_type_exponent(P) == 2
        for x in (-2.0, -1.3, -0.4):
            scaled = P.beta_exact ** 2 * Fraction(x)
            assert abs(limit_law_dependent(P, x) - limit_law_iid(P, scaled)) <= 1e-12
        assert same_type_exponent(Params(0.3, 0.3)) is None

    def test_bad_m(self):
        with pytest.raises(ValueError):
            same_type_q(0)


class TestNorming:
    def test_examples(self):
        s = norming_sequences(Params(0.5, 0.5), 5)
        assert (s.a_n, s.b_n, s.k_n, s.c) == (32.0, 1.0, 32, 2.0)
        assert norming_sequences(Params(0.3, 0.5), 5).a_n == pytest.approx(0.3 ** -5)
        assert norming_sequences(Params(0.5, 0.25), 3).k_n == 2

    def test_ratio(self):
        assert norming_ratio_defect(Params(0.5, 0.3), range(10, 40)) <= 0.10
