import math
from fractions import Fraction

import numpy as np
import pytest

from cantorevt import DomainError, Params
from cantorevt.exactlaw import make_levels, run_automaton_law
from cantorevt.marginal import cdf
from cantorevt.simulate import (
    CHUNK,
    MonteCarloConfig,
    check_conjugacy,
    check_invariance,
    decluster_runs,
    doa_convergence,
    empirical_max_law,
    estimate_extremal_index,
    iterate_map,
    ks_distance,
    lyapunov,
    simulate_ar,
    trajectories,
    wilson_interval,
)

CANTOR = Params(Fraction(1, 3), 0.5)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            MonteCarloConfig(seed=-1, replications=10)
        with pytest.raises(ValueError):
            MonteCarloConfig(seed=1, replications=0)

    def test_chunks_cover_replications(self):
        cfg = MonteCarloConfig(seed=1, replications=2 * CHUNK + 5)
        assert [s for _, s in cfg.chunks()] == [CHUNK, CHUNK, 5]

    def test_wilson_contains_estimate(self):
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi


class TestSimulateAr:
    def test_zero_path(self):
        tr = simulate_ar(CANTOR, MonteCarloConfig(0, 1), 20, x0_digits=[0] * 64, innovation_bits=[0] * 20)
        assert np.all(tr.values == 0.0)

    def test_all_ones_contracts_to_one(self):
        P = Params(0.4, 0.3)
        digits = [0, 1] * 10
        tr = simulate_ar(P, MonteCarloConfig(0, 1), 12, x0_digits=digits, innovation_bits=[1] * 12)
        x0 = tr.exact_value(0)
        for m in range(13):
            assert tr.exact_value(m) - 1 == P.beta_exact ** m * (x0 - 1)
            assert abs(abs(tr.values[m] - 1) - 0.4 ** m * abs(float(x0) - 1)) <= 1e-15

    def test_float_path_tracks_exact_path(self):
        tr = simulate_ar(Params(0.4, 0.3), MonteCarloConfig(9, 1), 300)
        err = max(abs(tr.values[k] - float(tr.exact_value(k))) for k in range(0, 301, 30))
        assert err <= 1e-14

    def test_stationary_marginal(self):
        P = Params(0.4, 0.3)
        X = trajectories(P, MonteCarloConfig(seed=3, replications=100_000), 6)
        assert ks_distance(P, X[:, 5]) <= 0.01

    def test_conjugacy(self):
        tr = simulate_ar(CANTOR, MonteCarloConfig(5, 1), 2000)
        assert check_conjugacy(tr) == 0
        assert tr.digits(3).shift() == tr.digits(2)

    def test_conjugacy_in_fractions(self):
        P = Params(Fraction(2, 5), 0.3)
        tr = simulate_ar(P, MonteCarloConfig(6, 1), 40, x0_digits=[1, 0, 1, 1, 0, 0, 1])
        b = Fraction(2, 5)
        for k in range(40):
            y = tr.exact_value(k + 1)
            image = y / b if y < 1 - b else y / b + 1 - 1 / b
            assert image == tr.exact_value(k)


class TestMaxLaw:
    def test_small_n_matches_automaton(self):
        law = empirical_max_law(CANTOR, [-1.0], 2, MonteCarloConfig(seed=2, replications=100_000))
        exact = run_automaton_law(CANTOR, 2, 4)
        assert abs(law.estimates[0] - exact) <= 3 * law.ci_halfwidths[0]
        assert law.lower[0] <= law.estimates[0] <= law.upper[0]

    def test_limit_and_iid_gap(self):
        cfg = MonteCarloConfig(seed=12, replications=100_000)
        dep = empirical_max_law(CANTOR, [-1.0], 8, cfg)
        iid = empirical_max_law(CANTOR, [-1.0], 8, cfg, mode="iid")
        assert abs(dep.estimates[0] - math.exp(-0.5)) <= 0.02
        assert abs(iid.estimates[0] - math.exp(-1.0)) <= 0.02

    def test_iid_mode_matches_exact_power(self):
        cfg = MonteCarloConfig(seed=13, replications=100_000)
        law = empirical_max_law(Params(0.4, 0.25), [-1.0, -0.5], 6, cfg, mode="iid")
        for x, est, ci in zip(law.x_grid, law.estimates, law.ci_halfwidths):
            lv = make_levels(Params(0.4, 0.25), x, 6)
            exact = cdf(Params(0.4, 0.25), lv.u_n).value ** lv.k_n
            assert abs(est - exact) <= 3 * ci

    def test_grid_is_monotone(self):
        law = empirical_max_law(CANTOR, [-2.0, -1.0, -0.5, -0.25], 5, MonteCarloConfig(1, 20_000))
        assert np.all(np.diff(law.estimates) >= 0)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            empirical_max_law(CANTOR, [-1.0], 3, MonteCarloConfig(1, 10), mode="other")


class TestExtremalIndex:
    def test_cantor_runs(self):
        e = estimate_extremal_index(CANTOR, 8, MonteCarloConfig(seed=21, replications=100_000))
        assert 0.45 <= e.estimate <= 0.55
        assert e.ci_low <= e.estimate <= e.ci_high

    def test_small_p_runs(self):
        e = estimate_extremal_index(Params(0.4, 0.25), 8, MonteCarloConfig(seed=22, replications=100_000))
        assert 0.20 <= e.estimate <= 0.30

    def test_iid_control(self):
        cfg = MonteCarloConfig(seed=23, replications=100_000)
        for method in ("runs", "ratio"):
            e = estimate_extremal_index(CANTOR, 8, cfg, method=method, control="iid")
            assert abs(e.estimate - 1.0) <= 0.05

    def test_mean_exceedance_count_is_exact(self):
        # stationarity: E[#{k < k_n : X_k > u_n}] = k_n (1 - F(u_n)) = k_n q**n at x = -1
        P = Params(0.4, 0.25)
        cfg = MonteCarloConfig(seed=24, replications=100_000)
        e = estimate_extremal_index(P, 6, cfg, n_boot=10)
        k = make_levels(P, -1.0, 6).k_n
        mean = k * 0.75 ** 6
        assert abs(e.n_exceedances / cfg.replications - mean) <= 4 * math.sqrt(k * mean / cfg.replications) + 0.01

    def test_event_sampler_matches_path_simulation(self):
        # direct simulation of paths of length j_n + k_n, clusters counted in the last k_n
        # positions with the first j_n positions as look-back
        n = 5
        lv = make_levels(CANTOR, -1.0, n)
        cfg = MonteCarloConfig(seed=25, replications=40_000)
        X = trajectories(CANTOR, cfg, lv.j_n + lv.k_n)
        exceed = X > lv.u_float
        window = exceed[:, lv.j_n:]
        starts = window & ~np.hstack([exceed[:, lv.j_n - 1:lv.j_n], window[:, :-1]])
        direct = starts.sum() / window.sum()
        event = estimate_extremal_index(CANTOR, n, cfg, n_boot=50)
        assert abs(direct - event.estimate) <= 3 * (event.ci_high - event.ci_low) / 2 + 0.01

    def test_rejects_degenerate(self):
        with pytest.raises(DomainError):
            estimate_extremal_index(Params(0.5, 0.5), 4, MonteCarloConfig(1, 10))


class TestDecluster:
    def test_runs(self):
        rows = np.array([[0, 1, 1, 0, 0, 1, 0, 1],
                         [0, 0, 0, 0, 0, 0, 0, 0]], dtype=bool)
        clusters, counts = decluster_runs(rows, 2)
        assert clusters.tolist() == [2, 0]
        assert counts.tolist() == [4, 0]
        clusters, _ = decluster_runs(rows, 1)
        assert clusters.tolist() == [3, 0]


class TestDynamics:
    def test_fixed_points(self):
        assert set(iterate_map(CANTOR, 0.0, 20).points) == {0.0}
        assert set(iterate_map(CANTOR, 1.0, 20).points) == {1.0}
        assert set(iterate_map(CANTOR, Fraction(1), 20).points) == {Fraction(1)}

    def test_gap_points_escape(self):
        orbit = iterate_map(CANTOR, Fraction(1, 2), 5)
        assert orbit.escape_index == 1

    def test_invariance_examples(self):
        assert check_invariance(CANTOR, [(0, 1)]) == 0.0
        assert check_invariance(CANTOR, [(0, Fraction(1, 3))]) <= 4 * 2.0 ** -64
        rng = np.random.default_rng(0)
        ends = np.sort(rng.random((1000, 2)), axis=1)
        assert check_invariance(Params(0.4, 0.7), ends) <= 1e-10

    def test_invariance_rejects_bad_interval(self):
        with pytest.raises(DomainError):
            check_invariance(CANTOR, [(0.5, 0.2)])

    def test_lyapunov(self):
        assert lyapunov(0.5) == math.log(2)
        assert abs(lyapunov(1 / 3) - 1.098612) < 1e-6
        assert abs(lyapunov(0.4) - 0.916291) < 1e-6
        assert lyapunov(Fraction(1, 3)) == -math.log(1 / 3)


class TestDoa:
    def test_identity_and_decay(self):
        rows = doa_convergence(CANTOR, -1.0, range(2, 11))
        assert all(r.identity_defect <= 1e-10 for r in rows)
        assert rows[-1].gap <= 2e-4
        for r in rows:
            assert abs(r.value - (1 - 2.0 ** -r.n) ** (2 ** r.n)) <= 1e-12

    def test_general_identity(self):
        rows = doa_convergence(Params(0.4, 0.25), -0.7, range(1, 12))
        assert all(r.identity_defect <= 1e-10 for r in rows)
