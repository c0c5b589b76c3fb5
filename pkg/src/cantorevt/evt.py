"""Limit laws for maxima: the i.i.d. and dependent laws and the max-semistable family."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from ._validation import (
    DEFAULT_DEPTH,
    DomainError,
    InvalidLawError,
    Params,
    check_params,
    snap_rational,
)
from .marginal import nu, psi

__all__ = [
    "MssLaw",
    "limit_law_iid",
    "limit_law_dependent",
    "msstable_general",
    "same_type_q",
    "same_type_exponent",
    "NormingSequences",
    "norming_sequences",
    "norming_ratio_defect",
    "MssRepresentation",
    "mss_representation",
]


def _check_x(x):
    if isinstance(x, float) and math.isnan(x):
        raise DomainError("x must not be NaN")
    if x >= 0:
        raise DomainError(f"limit laws are supported on x < 0, got {x!r}")


def _tail(params: Params, x, depth: int) -> float:
    if x == -math.inf:
        return math.inf
    return psi(params, x, depth)


def limit_law_iid(params: Params, x, depth: int = DEFAULT_DEPTH) -> float:
    """Limit of F(1 + beta**n x)**k_n: exp(-psi(x)).

    >>> round(limit_law_iid(Params(1/3, 0.5), -1.0), 6)
    0.367879
    """
    params = check_params(params, allow_degenerate=False)
    _check_x(x)
    return math.exp(-_tail(params, x, depth))


def limit_law_dependent(params: Params, x, depth: int = DEFAULT_DEPTH) -> float:
    """Limit law of the normalised maximum of the autoregression: exp(-p psi(x)).

    The extremal index is p, so this equals ``limit_law_iid(x) ** p``.
    """
    params = check_params(params, allow_degenerate=False)
    _check_x(x)
    return math.exp(-params.p * _tail(params, x, depth))


@dataclass(frozen=True)
class MssLaw:
    """Max-semistable law with tail index ``xi``, log-periodic ``nu_fn`` and ratio ``c``.

    The constructor checks positivity, boundedness and periodicity of
    ``nu_fn`` on a grid covering one period log(c).
    """

    xi: float
    nu_fn: Callable[[float], float]
    c: float
    grid_points: int = 65
    rtol: float = 1e-9

    def __post_init__(self):
        if not (math.isfinite(self.xi) and math.isfinite(self.c)):
            raise InvalidLawError("xi and c must be finite")
        if self.c <= 1:
            raise InvalidLawError("c must exceed 1")
        period = math.log(self.c)
        grid = np.linspace(-period, 0.0, self.grid_points)
        values = np.array([float(self.nu_fn(s)) for s in grid])
        shifted = np.array([float(self.nu_fn(s + period)) for s in grid])
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(shifted)):
            raise InvalidLawError("nu must be bounded")
        if np.any(values <= 0):
            raise InvalidLawError("nu must be positive")
        if np.max(np.abs(values - shifted) / values) > self.rtol:
            raise InvalidLawError("nu is not periodic with period log(c)")

    @property
    def period(self) -> float:
        return math.log(self.c)

    def cdf(self, x) -> float:
        return msstable_general(self, x)


def msstable_general(law: MssLaw, x: float) -> float:
    """Evaluate the max-semistable family at x.

    For xi != 0 with 1 + xi x > 0 this is exp{-z nu(log z)}, z = (1 + xi x)**(-1/xi);
    for xi = 0 it is exp{-e**(-x) nu(x)}.  Outside the support the value is
    0 (left endpoint, xi > 0) or 1 (right endpoint, xi < 0).

    >>> round(msstable_general(MssLaw(0.0, lambda s: 1.0, 2.0), 0.0), 6)
    0.367879
    """
    x = float(x)
    if math.isnan(x):
        raise DomainError("x must not be NaN")
    xi = law.xi
    if xi == 0.0:
        if x == math.inf:
            return 1.0
        if x == -math.inf:
            return 0.0
        return math.exp(-math.exp(-x) * law.nu_fn(x))
    arg = xi * x
    if not 1 + arg > 0:
        return 0.0 if xi > 0 else 1.0
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    log_z = -math.log1p(arg) / xi
    return math.exp(-math.exp(log_z) * law.nu_fn(log_z))


def same_type_q(m: int, tol: float = 1e-15) -> float:
    """Unique q in (0, 1) with q**m + q - 1 = 0, by bisection.

    For these q the i.i.d. and dependent limit laws are of the same type.

    >>> same_type_q(1)
    0.5
    """
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    m = int(m)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid ** m + mid - 1 > 0:
            hi = mid
        else:
            lo = mid
        if mid in (lo, hi) and hi - lo <= 2 * math.ulp(mid):
            break
    # pick the endpoint with the smaller residual
    return min((lo, hi), key=lambda q: abs(q ** m + q - 1))


def same_type_exponent(params: Params, tol: float = 1e-12):
    """Integer m with p = q**m if one exists, else None.

    When it exists, G_dep(x) = G_iid(beta**m x): the two laws differ by a
    rescaling of x.
    """
    params = check_params(params, allow_degenerate=False)
    m = math.log(params.p) / math.log(params.q)
    r = round(m)
    if r >= 1 and abs(params.q ** r - params.p) <= tol:
        return int(r)
    return None


@dataclass(frozen=True)
class NormingSequences:
    n: int
    a_n: float
    b_n: float
    k_n: int
    c: float


def norming_sequences(params: Params, n: int) -> NormingSequences:
    """a_n = beta**-n, b_n = 1, k_n = floor(q**-n) (exact), c = 1/q."""
    params = check_params(params)
    if n < 1:
        raise ValueError("n must be >= 1")
    k = math.floor(1 / params.q_exact ** n)
    return NormingSequences(n, float(params.beta_exact ** -n), 1.0, int(k), 1 / params.q)


def norming_ratio_defect(params: Params, n_range: Iterable[int]) -> float:
    """Largest relative deviation of k_{n+1}/k_n from 1/q over ``n_range``."""
    params = check_params(params)
    worst = 0.0
    c = 1 / params.q_exact
    for n in n_range:
        k0 = norming_sequences(params, n).k_n
        k1 = norming_sequences(params, n + 1).k_n
        worst = max(worst, float(abs(Fraction(k1, k0) / c - 1)))
    return worst


@dataclass(frozen=True)
class MssRepresentation:
    """Affine link x = location + scale * y between a limit law in x and ``law`` in y."""

    law: MssLaw
    scale: float
    location: float
    measured_xi: float
    grid_defect: float

    def to_canonical(self, x: float) -> float:
        return (x - self.location) / self.scale


def mss_representation(params: Params, dependent: bool = False, depth: int = DEFAULT_DEPTH,
                       grid: Iterable[float] | None = None) -> MssRepresentation:
    """Express a limit law in the canonical max-semistable form.

    The tail index is measured from psi(beta x) / psi(x) rather than
    assumed, the affine map that turns 1 + xi y into -x is derived from it,
    and the representation is checked on ``grid`` (the largest absolute
    difference is stored in ``grid_defect``).
    """
    params = check_params(params, allow_degenerate=False)
    swapped = params.swapped()
    beta = params.beta_exact
    ratio = psi(params, -beta, depth) / psi(params, Fraction(-1), depth)
    alpha = math.log(ratio) / math.log(float(beta))  # = log q / log beta
    xi = -1.0 / alpha
    weight = params.p if dependent else 1.0

    def nu_fn(s: float) -> float:
        return weight * nu(swapped, s / alpha, depth)

    law = MssLaw(xi, nu_fn, 1 / params.q)
    # 1 + xi * y = -x  <=>  x = -1 - xi * y
    scale, location = -xi, -1.0
    target = limit_law_dependent if dependent else limit_law_iid
    pts = list(grid) if grid is not None else list(np.linspace(-3.0, -0.05, 60))
    defect = 0.0
    for x in pts:
        y = (x - location) / scale
        defect = max(defect, abs(msstable_general(law, y) - target(params, x, depth)))
    return MssRepresentation(law, scale, location, xi, defect)
