"""Exact finite-horizon laws of the running maximum M_s = max(X_0, ..., X_{s-1}).

Levels are ``u_n = 1 + beta**n x`` for fixed x < 0.  Four independent routes
to P(M_s <= u_n) live here:

* the two-index recursion for P(M_s <= u_n, X_{s-1} <= u_{n-i}),
* its closed form ``1 - (p (s - 1) + 1) q**n psi(x)`` for 2 <= s <= j_n + 1,
* a run-length automaton on the digit stream (x = -1 only, any s),
* exhaustive enumeration of digit words with monotone bracketing.

The enumeration also drives the association (product and conditional)
inequality checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ._validation import (
    DEFAULT_DEPTH,
    DomainError,
    LevelError,
    Params,
    PreconditionError,
    ResourceError,
    as_rational,
    check_negative,
    check_params,
)
from .marginal import cdf, psi

__all__ = [
    "LevelSet",
    "MaxLawTable",
    "AtomTable",
    "YLaw",
    "ProductBound",
    "ConditionalBound",
    "BlockingGap",
    "make_levels",
    "p_recursion",
    "closed_form_law",
    "run_automaton_law",
    "enumerate_atoms",
    "check_product_bound",
    "check_conditional_bound",
    "blocking_gap",
    "default_ell",
]

MAX_ATOM_BITS = 32
MAX_DENSE_BITS = 24
# Floating-point error budget for one probability computed from a table
# (cumulative weights in extended precision, fsum over words, one division).
ROUNDING_ALLOWANCE = 64 * 2.0 ** -52


@dataclass(frozen=True)
class LevelSet:
    """Levels and norming constants attached to a point x < 0 and index n."""

    x: float
    n: int
    u_n: Fraction
    j_n: int
    k_n: int
    a_n: float
    b_n: float
    psi: float
    beta: Fraction = field(repr=False)

    def u(self, i: int) -> Fraction:
        """Exact level u_{n-i} = 1 + beta**(n-i) x."""
        return 1 + self.beta ** (self.n - i) * as_rational(self.x)

    @property
    def u_float(self) -> float:
        return float(self.u_n)


def make_levels(params: Params, x, n: int, depth: int = DEFAULT_DEPTH) -> LevelSet:
    """Build the LevelSet for (x, n).

    Raises
    ------
    LevelError
        If u_n is not in (0, 1) or j_n < 1 ("n too small for this x").

    Examples
    --------
    >>> lv = make_levels(Params(1/3, 0.5), -1.0, 4)
    >>> lv.u_n, lv.j_n, lv.k_n
    (Fraction(80, 81), 3, 16)
    """
    params = check_params(params)
    check_negative(x)
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    beta = params.beta_exact
    xr = as_rational(x)
    u_n = 1 + beta ** n * xr
    if not 0 < u_n < 1:
        raise LevelError(f"n too small for this x: u_{n} = {float(u_n)} is not in (0, 1)")
    j = 0
    while 1 + beta ** (n - j - 1) * xr > 0:
        j += 1
    if j < 1:
        raise LevelError(f"n too small for this x: j_{n} = {j} < 1")
    q = params.q_exact
    k_n = math.floor(1 / q ** n)
    return LevelSet(
        x=float(x),
        n=n,
        u_n=u_n,
        j_n=j,
        k_n=k_n,
        a_n=float(1 / beta ** n),
        b_n=1.0,
        psi=psi(params, x, depth),
        beta=beta,
    )


@dataclass
class MaxLawTable:
    """Memo of P_{s,i} = P(M_s <= u_n, X_{s-1} <= u_{n-i}) with provenance."""

    params: Params
    levels: LevelSet
    depth: int = DEFAULT_DEPTH
    entries: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def base(self, i: int) -> float:
        key = (1, i)
        if key not in self.entries:
            self.entries[key] = cdf(self.params, self.levels.u(i), self.depth).value
            self.provenance[key] = "recursion"
        return self.entries[key]

    def get(self, s: int, i: int) -> float:
        j_n = self.levels.j_n
        if s < 1 or not 0 <= i <= j_n:
            raise PreconditionError(f"P[{s}][{i}] requires s >= 1 and 0 <= i <= j_n = {j_n}")
        if s == 1:
            return self.base(i)
        if i + s - 1 > j_n:
            raise PreconditionError(
                f"P[{s}][{i}] needs the recursion at index {i + s - 2} > j_n - 1 = {j_n - 1}"
            )
        key = (s, i)
        if key not in self.entries:
            p, q = self.params.p, self.params.q
            # the recursion only ever moves to larger i, so it is safe to
            # fill the needed entries bottom-up
            for level in range(2, s + 1):
                for idx in range(0, i + s - level + 1):
                    k = (level, idx)
                    if k in self.entries:
                        continue
                    prev0 = self.base(0) if level == 2 else self.entries[(level - 1, 0)]
                    prev1 = self.base(idx + 1) if level == 2 else self.entries[(level - 1, idx + 1)]
                    self.entries[k] = p * prev0 + q * prev1
                    self.provenance[k] = "recursion"
        return self.entries[key]


def p_recursion(params: Params, levels: LevelSet, s: int, i: int = 0,
                table: MaxLawTable | None = None) -> float:
    """P(M_s <= u_n, X_{s-1} <= u_{n-i}) from the two-index recursion.

    Base case ``P_{1,i} = F(u_{n-i})``; for s >= 2 the step
    ``P_{s,i} = p P_{s-1,0} + q P_{s-1,i+1}`` is valid while the inner index
    stays at most j_n - 1, i.e. for ``i + s - 1 <= j_n``.
    """
    params = check_params(params)
    if table is None:
        table = MaxLawTable(params, levels)
    return table.get(s, i)


def closed_form_law(params: Params, levels: LevelSet, s: int) -> float:
    """P(M_s <= u_n) = 1 - (p (s - 1) + 1) q**n psi(x), for 2 <= s <= j_n + 1."""
    params = check_params(params)
    if not 2 <= s <= levels.j_n + 1:
        raise PreconditionError(
            f"closed form holds for 2 <= s <= j_n + 1 = {levels.j_n + 1}, got s = {s}; "
            "use p_recursion for s = 1 or run_automaton_law (x = -1) for larger s"
        )
    return 1.0 - (params.p * (s - 1) + 1.0) * params.q ** levels.n * levels.psi


def run_automaton_law(params: Params, n: int, s: int) -> float:
    """Exact P(M_s <= 1 - beta**n) for any horizon s (the level at x = -1).

    X_k exceeds 1 - beta**n exactly when its n leading digits, the n most
    recent innovations, are all ones (up to a null set).  The probability
    that no run of n ones ends inside positions 0..s-1 of an i.i.d.
    Bernoulli(q) stream is computed by dynamic programming over the current
    run length 0..n-1.
    """
    params = check_params(params)
    if n < 2:
        raise DomainError("run_automaton_law needs n >= 2")
    if s < 1:
        raise DomainError("s must be >= 1")
    p, q = params.p, params.q
    state = np.zeros(n)
    state[0] = 1.0
    # a run of n ones cannot end before position 0 within the n - 1
    # preceding digits, so all s + n - 1 digits are treated alike
    for _ in range(s + n - 1):
        nxt = np.empty_like(state)
        nxt[0] = p * math.fsum(state)
        nxt[1:] = q * state[:-1]
        state = nxt
    return math.fsum(state)


@dataclass(frozen=True)
class YLaw:
    """Law of Y_i = X_{k+i} - beta**i X_k: atom q**i at its maximum 1 - beta**i."""

    i: int
    top: float
    top_mass: float


class AtomTable:
    """Weighted enumeration of all 2**(K+m) digit words (X_0 prefix, innovations).

    Atom ``(a, w)`` has X_0 = (1 - beta) sum_{j<K} bit_j(a) beta**j and
    innovation eps_i = (1 - beta) bit_{i-1}(w), so

        X_k = beta**k X_0 + sum_{i<=k} beta**(k-i) eps_i.

    The table is stored factorised: 2**K prefix values of X_0 with their
    cumulative weights, and 2**m innovation words.  For a fixed word every
    event {X_k <= u for k in I} is an upper threshold on X_0, so an event
    probability is the exact sum over all atoms, grouped by word.

    The true X_0 exceeds its K-digit prefix by less than beta**K, hence every
    event {M(I) <= u} is bracketed by the same event at the thresholds
    u - beta**K and u + beta**K.
    """

    def __init__(self, params: Params, K: int, m: int):
        params = check_params(params)
        if K < 0 or m < 0:
            raise ValueError("K and m must be nonnegative")
        if K + m > MAX_ATOM_BITS:
            raise ResourceError(f"K + m = {K + m} exceeds {MAX_ATOM_BITS} (2**{K + m} atoms)")
        self.params = params
        self.K = K
        self.m = m
        beta, p, q = params.beta, params.p, params.q
        x0 = np.zeros(1)
        w0 = np.ones(1)
        for j in range(K):
            x0 = np.concatenate([x0, x0 + (1 - beta) * beta ** j])
            w0 = np.concatenate([w0 * p, w0 * q])
        self.x0 = x0
        self.x0_weights = w0
        order = np.argsort(x0, kind="stable")
        self._x0_sorted = x0[order]
        cum = np.cumsum(w0[order].astype(np.longdouble))
        self._x0_cum = np.concatenate([[np.longdouble(0)], cum])
        words = np.arange(1 << m, dtype=np.int64)
        self.innovation_bits = ((words[:, None] >> np.arange(m)) & 1).astype(np.uint8)
        ones = self.innovation_bits.sum(axis=1)
        self.innovation_weights = p ** (m - ones) * q ** ones
        self._partial = [np.zeros(1 << m)]
        for k in range(1, m + 1):
            self._partial.append(beta * self._partial[-1] + (1 - beta) * self.innovation_bits[:, k - 1])

    @property
    def n_atoms(self) -> int:
        return 1 << (self.K + self.m)

    @property
    def truncation(self) -> float:
        return self.params.beta ** self.K

    def _check_index(self, k: int):
        if not 0 <= k <= self.m:
            raise PreconditionError(f"index {k} outside horizon 0..{self.m}")

    def _dense(self):
        if self.K + self.m > MAX_DENSE_BITS:
            raise ResourceError(f"dense view needs K + m <= {MAX_DENSE_BITS}")

    @property
    def weights(self) -> np.ndarray:
        """Atom weights as a (2**K, 2**m) array (small tables only)."""
        self._dense()
        return np.outer(self.x0_weights, self.innovation_weights)

    def values(self, k: int) -> np.ndarray:
        """X_k for every atom, shape (2**K, 2**m) (small tables only)."""
        self._check_index(k)
        self._dense()
        return self.params.beta ** k * self.x0[:, None] + self._partial[k][None, :]

    def probability(self, mask: np.ndarray) -> float:
        """Weight of the atoms in a dense boolean ``mask``, summed smallest first."""
        return math.fsum(np.sort(self.weights[mask]))

    def total_weight(self) -> float:
        return float(self._x0_cum[-1]) * math.fsum(np.sort(self.innovation_weights))

    def max_le(self, index_set: Sequence[int], u: float) -> np.ndarray:
        """Dense mask of atoms with X_k <= u for all k in ``index_set``."""
        mask = np.ones((1 << self.K, 1 << self.m), dtype=bool)
        for k in index_set:
            mask &= self.values(k) <= u
        return mask

    def x0_limit(self, index_sets: Sequence[Sequence[int]], u: float) -> np.ndarray:
        """Per innovation word, the largest X_0 for which every X_k (k in the sets) is <= u."""
        limit = np.full(1 << self.m, np.inf)
        beta = self.params.beta
        for I in index_sets:
            for k in I:
                self._check_index(k)
                np.minimum(limit, (u - self._partial[k]) / beta ** k, out=limit)
        return limit

    def event_probability(self, index_sets: Sequence[Sequence[int]], u: float) -> float:
        """P(X_k <= u for every k in the union of ``index_sets``) in the truncated model."""
        limit = self.x0_limit(index_sets, u)
        idx = np.searchsorted(self._x0_sorted, limit, side="right")
        x0_mass = self._x0_cum[idx].astype(float)
        return math.fsum(self.innovation_weights * x0_mass)

    def bracket(self, index_sets: Sequence[Sequence[int]], u: float):
        """(lower, nominal, upper) for P(M(I) <= u for every I in index_sets)."""
        t = self.truncation
        return tuple(self.event_probability(index_sets, thr) for thr in (u - t, u, u + t))

    def y_law(self, i: int) -> YLaw:
        """Y_i read off the innovation words; its top value has mass q**i."""
        if not 1 <= i <= self.m:
            raise PreconditionError(f"Y_{i} needs 1 <= i <= m = {self.m}")
        top = 1 - self.params.beta ** i
        hit = self._partial[i] >= top - 1e-12
        mass = math.fsum(np.sort(self.innovation_weights[hit]))
        return YLaw(i, top, mass)


def enumerate_atoms(params: Params, K: int, m: int) -> AtomTable:
    """Exhaustive weighted enumeration with X_0 truncated to K digits."""
    return AtomTable(params, K, m)


def _as_index_sets(intervals) -> list:
    sets = [sorted(int(k) for k in I) for I in intervals]
    if not sets or any(len(I) == 0 for I in sets):
        raise ValueError("intervals must be a nonempty list of nonempty index sets")
    return sets


def _atoms_for(params, intervals, K, m, atoms):
    top = max(max(I) for I in intervals)
    if atoms is not None:
        if top > atoms.m:
            raise PreconditionError(f"index {top} exceeds the table horizon {atoms.m}")
        return atoms
    m = top if m is None else m
    if top > m:
        raise PreconditionError(f"index {top} exceeds the horizon m = {m}")
    return enumerate_atoms(params, K, m)


@dataclass(frozen=True)
class ProductBound:
    """P(all blocks below u) against the product of the block probabilities."""

    lhs: float
    rhs: float
    slack: float
    bracket_error: float
    lhs_bracket: tuple
    rhs_bracket: tuple

    @property
    def holds(self) -> bool:
        return self.slack >= -self.bracket_error


def check_product_bound(params: Params, intervals, u: float, K: int, m: int | None = None,
                        atoms: AtomTable | None = None) -> ProductBound:
    """Association product bound for the events {M(I_s) <= u}.

    ``lhs`` and ``rhs`` are evaluated on the K-digit atom table at the
    threshold u; ``bracket_error`` is the combined width of their monotone
    brackets plus ``ROUNDING_ALLOWANCE`` for floating-point summation, so
    the untruncated slack is at least ``slack - bracket_error``.
    """
    params = check_params(params)
    sets = _as_index_sets(intervals)
    table = _atoms_for(params, sets, K, m, atoms)
    lhs_br = table.bracket(sets, u)
    singles = [table.bracket([I], u) for I in sets]
    rhs_lo = math.prod(b[0] for b in singles)
    rhs_nom = math.prod(b[1] for b in singles)
    rhs_hi = math.prod(b[2] for b in singles)
    err = (lhs_br[2] - lhs_br[0]) + (rhs_hi - rhs_lo) + ROUNDING_ALLOWANCE
    return ProductBound(
        lhs=lhs_br[1],
        rhs=rhs_nom,
        slack=lhs_br[1] - rhs_nom,
        bracket_error=err,
        lhs_bracket=(lhs_br[0], lhs_br[2]),
        rhs_bracket=(rhs_lo, rhs_hi),
    )


@dataclass(frozen=True)
class ConditionalBound:
    """Terms P(A_s | A_1 ... A_{s-1}) - P(A_s) and the gap they control."""

    terms: tuple
    gap: float
    bracket_error: float

    @property
    def terms_nonnegative(self) -> bool:
        return all(t >= -self.bracket_error for t in self.terms)

    @property
    def chain_holds(self) -> bool:
        """0 <= gap <= sum of terms, up to bracketing error."""
        e = self.bracket_error
        return -e <= self.gap <= math.fsum(self.terms) + e

    @property
    def absolute_holds(self) -> bool:
        """|gap| <= sum of |terms|, the general inequality for any events."""
        return abs(self.gap) <= math.fsum(abs(t) for t in self.terms) + self.bracket_error


def check_conditional_bound(params: Params, intervals, u: float, K: int, m: int | None = None,
                            atoms: AtomTable | None = None) -> ConditionalBound:
    """Per-block conditional increments for the events A_s = {M(I_s) <= u}.

    Raises
    ------
    DomainError
        If some conditioning event A_1 ... A_{s-1} has zero probability.
    """
    params = check_params(params)
    sets = _as_index_sets(intervals)
    table = _atoms_for(params, sets, K, m, atoms)
    marginals = [table.event_probability([I], u) for I in sets]
    joint = [table.event_probability(sets[: s + 1], u) for s in range(len(sets))]
    terms = []
    for s in range(1, len(sets)):
        if joint[s - 1] <= 0.0:
            raise DomainError(f"conditioning event for block {s + 1} has zero probability")
        terms.append(joint[s] / joint[s - 1] - marginals[s])
    gap = joint[-1] - math.prod(marginals)
    # bracketing error: width of the joint and product brackets
    pb = check_product_bound(params, sets, u, K, atoms=table)
    return ConditionalBound(tuple(terms), gap, pb.bracket_error)


def default_ell(j_n: int) -> int:
    """Gap length l_n = ceil(sqrt(j_n)) between blocks."""
    return max(1, math.ceil(math.sqrt(j_n)))


@dataclass(frozen=True)
class BlockingGap:
    """|P(M_{k_n} <= u_n) - P(M_{j_n+1} <= u_n)**r_n| with its bound terms."""

    gap: float
    ci_halfwidth: float
    empirical: float
    exact_power: float
    r_n: int
    ell_n: int
    t1_bound: float
    t2_bound: float
    t4_bound: float

    @property
    def total_bound(self) -> float:
        return self.t1_bound + self.t2_bound + self.t4_bound


def blocking_gap(params: Params, x, n: int, ell_rule: Callable[[int], int] | None = None,
                 mc=None, depth: int = DEFAULT_DEPTH) -> BlockingGap:
    """Monte Carlo check that the block-power approximation closes.

    ``P(M_{k_n} <= u_n)`` is estimated by simulation, the power
    ``P(M_{j_n+1} <= u_n)**floor(k_n/j_n)`` is exact.  The analytic terms
    ``j_n q**n psi``, ``r_n l_n q**n psi`` and ``r_n (l_n + 1) q**n psi`` are
    returned for comparison.
    """
    from .simulate import MonteCarloConfig, empirical_max_law

    params = check_params(params, allow_degenerate=False)
    levels = make_levels(params, x, n, depth)
    mc = MonteCarloConfig(seed=0, replications=10_000) if mc is None else mc
    ell = (ell_rule or default_ell)(levels.j_n)
    if not 1 <= ell < levels.j_n:
        raise PreconditionError(f"l_n = {ell} must lie in [1, j_n) with j_n = {levels.j_n}")
    r = levels.k_n // levels.j_n
    law = empirical_max_law(params, [x], n, mc)
    est = float(law.estimates[0])
    power = closed_form_law(params, levels, levels.j_n + 1) ** r
    tail = params.q ** n * levels.psi
    return BlockingGap(
        gap=abs(est - power),
        ci_halfwidth=float(law.ci_halfwidths[0]),
        empirical=est,
        exact_power=power,
        r_n=r,
        ell_n=ell,
        t1_bound=levels.j_n * tail,
        t2_bound=r * ell * tail,
        t4_bound=r * (ell + 1) * tail,
    )
