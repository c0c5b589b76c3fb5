"""Invariant suites behind ``cantorevt verify``.

Each suite returns a list of :class:`Check` records: what was measured,
the threshold it is held to, and whether it passed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from ._validation import Params
from .evt import same_type_q
from .exactlaw import (
    check_conditional_bound,
    check_product_bound,
    closed_form_law,
    enumerate_atoms,
    make_levels,
    p_recursion,
    run_automaton_law,
)
from .marginal import fixed_point_residual, nu, scaling_check, symmetry_check
from .simulate import (
    MonteCarloConfig,
    check_conjugacy,
    check_invariance,
    iterate_map,
    lyapunov,
    orbit_lyapunov,
    simulate_ar,
)

SUITES = ("marginal", "exactlaw", "dynamics", "association")
PAIRS = ((Fraction(1, 3), 0.5), (0.4, 0.25), (0.5, 0.75))


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool

    @classmethod
    def at_most(cls, suite, name, value, threshold):
        value = float(value)
        return cls(suite, name, value, float(threshold), bool(value <= threshold))


def suite_marginal(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    checks = []
    for beta, p in PAIRS:
        P = Params(beta, p)
        tag = f"beta={float(beta):.6g},p={p}"
        grid = rng.random(1000)
        checks.append(Check.at_most("marginal", f"symmetry[{tag}]", symmetry_check(P, grid), 1e-10))
        checks.append(Check.at_most("marginal", f"scaling[{tag}]", scaling_check(P, grid), 1e-10))
        period = -math.log(P.beta)
        ts = -period * rng.random(100)
        nu_defect = max(abs(nu(P, t) - nu(P, t - period)) for t in ts)
        checks.append(Check.at_most("marginal", f"nu_periodicity[{tag}]", nu_defect, 1e-10))
        fp = max(fixed_point_residual(P, x)[0] for x in grid[:100])
        checks.append(Check.at_most("marginal", f"fixed_point[{tag}]", fp, 1e-10))
    for m in (1, 2, 3):
        q = same_type_q(m)
        checks.append(Check.at_most("marginal", f"same_type_residual[m={m}]", abs(q ** m + q - 1), 1e-14))
    return checks


def suite_exactlaw(seed: int = 0) -> list:
    checks = []
    worst = 0.0
    contained = True
    for beta, p, x, n in itertools.product((Fraction(1, 3), 0.4, 0.5), (0.25, 0.5, 0.75),
                                           (-0.5, -1.0, -1.5), (3, 4)):
        if beta == 0.5 and p == 0.5:
            continue
        P = Params(beta, p)
        lv = make_levels(P, x, n)
        table = enumerate_atoms(P, 16, lv.j_n)
        for s in range(2, lv.j_n + 2):
            r, c = p_recursion(P, lv, s), closed_form_law(P, lv, s)
            worst = max(worst, abs(r - c))
            lo, _, hi = table.bracket([range(s)], lv.u_float)
            contained &= lo <= r <= hi and lo <= c <= hi
    checks.append(Check.at_most("exactlaw", "recursion_vs_closed_form", worst, 1e-12))
    checks.append(Check("exactlaw", "enumeration_bracket_contains", float(contained), 1.0, contained))
    auto = 0.0
    for p in (0.25, 0.5, 0.75):
        P = Params(Fraction(1, 3), p)
        for n in range(2, 8):
            lv = make_levels(P, -1.0, n)
            for s in range(2, lv.j_n + 2):
                auto = max(auto, abs(run_automaton_law(P, n, s) - closed_form_law(P, lv, s)))
    checks.append(Check.at_most("exactlaw", "automaton_vs_closed_form", auto, 1e-12))
    P = Params(Fraction(1, 3), 0.5)
    anchor = closed_form_law(P, make_levels(P, -1.0, 4), 3)
    checks.append(Check.at_most("exactlaw", "anchor_0.875", abs(anchor - 0.875), 1e-12))
    checks.append(Check.at_most("exactlaw", "anchor_0.625", abs(run_automaton_law(P, 2, 2) - 0.625), 1e-12))
    return checks


def suite_dynamics(seed: int = 0, n_intervals: int = 1000, steps: int = 10_000) -> list:
    rng = np.random.default_rng(seed)
    checks = []
    for beta, p in PAIRS:
        P = Params(beta, p)
        tag = f"beta={float(beta):.6g},p={p}"
        ends = np.sort(rng.random((n_intervals, 2)), axis=1)
        checks.append(Check.at_most("dynamics", f"invariance[{tag}]", check_invariance(P, ends), 1e-10))
        path = simulate_ar(P, MonteCarloConfig(seed, 1), steps)
        checks.append(Check.at_most("dynamics", f"conjugacy_mismatches[{tag}]", check_conjugacy(path), 0))
        lam = lyapunov(P)
        checks.append(Check.at_most("dynamics", f"lyapunov[{tag}]", abs(lam - (-math.log(P.beta))), 0.0))
        orbit = iterate_map(P, Fraction(0), 50)
        checks.append(Check.at_most("dynamics", f"orbit_lyapunov[{tag}]",
                                    abs(orbit_lyapunov(P, orbit) - lam), 1e-12))
    return checks


def random_interval_config(rng, max_span: int):
    """Disjoint index blocks I_1 < I_2 < ... inside 0..max_span."""
    while True:
        r = int(rng.integers(2, 4))
        sets, start = [], int(rng.integers(0, 2))
        for _ in range(r):
            length = int(rng.integers(1, 3))
            sets.append(list(range(start, start + length)))
            start += length + int(rng.integers(0, 3))
        if sets[-1][-1] <= max_span:
            return sets


def suite_association(seed: int = 0, configs: int = 50, bits: int = 20) -> list:
    rng = np.random.default_rng(seed)
    slack_min = math.inf
    cond_margin = math.inf
    absolute_ok = True
    for _ in range(configs):
        beta, p = PAIRS[int(rng.integers(len(PAIRS)))]
        P = Params(beta, p)
        m = int(rng.integers(4, 9))
        K = bits - m
        sets = random_interval_config(rng, m)
        x = float(rng.choice([-0.5, -1.0, -1.5]))
        n = int(rng.integers(2, 5))
        u = make_levels(P, x, n).u_float
        table = enumerate_atoms(P, K, m)
        pb = check_product_bound(P, sets, u, K, atoms=table)
        slack_min = min(slack_min, pb.slack)
        cb = check_conditional_bound(P, sets, u, K, atoms=table)
        cond_margin = min(cond_margin, min(t + cb.bracket_error for t in cb.terms))
        absolute_ok &= cb.absolute_holds
    return [
        Check("association", "min_product_slack", slack_min, -1e-12, bool(slack_min >= -1e-12)),
        Check("association", "min_conditional_term_plus_bracket", cond_margin, 0.0, bool(cond_margin >= 0)),
        Check("association", "absolute_bound", float(absolute_ok), 1.0, bool(absolute_ok)),
    ]


_RUNNERS = {
    "marginal": suite_marginal,
    "exactlaw": suite_exactlaw,
    "dynamics": suite_dynamics,
    "association": suite_association,
}


def run_suites(names, seed: int = 0) -> dict:
    """Run the named suites; ``"all"`` expands to every suite."""
    names = list(SUITES) if "all" in names else list(names)
    unknown = [n for n in names if n not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    checks = [c for n in names for c in _RUNNERS[n](seed)]
    return {
        "suites": names,
        "seed": seed,
        "passed": all(c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }
