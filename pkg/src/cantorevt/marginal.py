"""Stationary marginal law F of the Cantor-type autoregression.

F is the unique distribution function solving

    F(x) = p F(x / beta) + q F(x / beta + 1 - 1 / beta),

supported on [0, 1].  It is evaluated by descending the binary digit tree
of the two contractions ``x -> beta x`` and ``x -> beta x + 1 - beta``.  The
descent runs in exact rational arithmetic on the input (floats are dyadic
rationals), so plateau and endpoint values come out exact and every other
value carries the certified bound ``max(p, q) ** depth``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from ._validation import (
    DEFAULT_DEPTH,
    DomainError,
    Params,
    as_rational,
    check_depth,
    check_finite,
    check_negative,
    check_params,
    snap_rational,
)

__all__ = [
    "CdfValue",
    "DigitStream",
    "cdf",
    "cdf_array",
    "cdf_modulus",
    "nu",
    "psi",
    "quantile",
    "sample_stationary",
    "sample_digits",
    "symmetry_check",
    "scaling_check",
    "fixed_point_residual",
]


@dataclass(frozen=True)
class CdfValue:
    """Value of F together with a certified absolute error bound."""

    value: float
    error_bound: float

    @property
    def exact(self) -> bool:
        return self.error_bound == 0.0

    @property
    def lower(self) -> float:
        return max(0.0, self.value - self.error_bound)

    @property
    def upper(self) -> float:
        return min(1.0, self.value + self.error_bound)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class DigitStream:
    """Finite digit expansion x = (1 - beta) * sum_j b_j beta**j.

    ``digits[0]`` is the most significant digit; in the autoregression it is
    the most recent innovation.
    """

    digits: tuple
    beta: Fraction

    @property
    def depth(self) -> int:
        return len(self.digits)

    def exact_value(self) -> Fraction:
        beta = self.beta
        total = Fraction(0)
        power = Fraction(1)
        for b in self.digits:
            if b:
                total += power
            power *= beta
        return (1 - beta) * total

    def __float__(self) -> float:
        return float(self.exact_value())

    def shift(self) -> "DigitStream":
        """Drop the leading digit; this is the action of f_beta."""
        return DigitStream(self.digits[1:], self.beta)

    def push(self, digit: int) -> "DigitStream":
        """Prepend a digit; this is one step of the autoregression."""
        return DigitStream((int(digit),) + self.digits, self.beta)


def _descend(x: Fraction, beta: Fraction, p: float, q: float, depth: int):
    """Digit descent for F at rational x; returns (value, error_bound)."""
    num, den = x.numerator, x.denominator
    a, b = beta.numerator, beta.denominator
    gap = b - a  # (1 - beta) = gap / b
    acc = 0.0
    factor = 1.0
    for _ in range(depth):
        if num <= 0:
            return acc, 0.0
        if num >= den:
            return acc + factor, 0.0
        scaled = num * b
        if scaled <= a * den:
            # x <= beta: left branch, x <- x / beta
            factor *= p
            num, den = scaled, den * a
        elif scaled >= gap * den:
            # x >= 1 - beta: right branch, x <- x / beta + 1 - 1 / beta
            acc += factor * p
            factor *= q
            num, den = scaled - gap * den, den * a
        else:
            # strictly inside the middle gap: F is constant there
            return acc + factor * p, 0.0
    if num <= 0:
        return acc, 0.0
    if num >= den:
        return acc + factor, 0.0
    half = 0.5 * factor
    return acc + half, half


def cdf(params: Params, x, depth: int = DEFAULT_DEPTH) -> CdfValue:
    """Evaluate the stationary distribution function F_{beta,p} at ``x``.

    Parameters
    ----------
    params : Params
        The pair (beta, p).  The degenerate pair (1/2, 1/2) is allowed and
        gives the uniform law.
    x : float, int or Fraction
        Evaluation point.  Rational inputs are used exactly; a float within
        a few ulps of a simple rational (such as ``1/3``) means that
        rational.
    depth : int
        Maximum number of descent steps.

    Returns
    -------
    CdfValue
        ``error_bound`` is 0 when the descent terminates on a plateau or at
        an endpoint and at most ``max(p, q) ** depth`` otherwise.

    Examples
    --------
    >>> cdf(Params(1/3, 0.5), 1/3).value
    0.5
    >>> cdf(Params(0.3, 0.25), 0.5)
    CdfValue(value=0.25, error_bound=0.0)
    """
    params = check_params(params)
    depth = check_depth(depth)
    check_finite(x)
    value, bound = _descend(snap_rational(x), params.beta_exact, params.p, params.q, depth)
    return CdfValue(value, bound)


# Floating-point descents lose all information after about 50 binary digits
# of the rescaled position; the vectorised evaluator stops there.
_FLOAT_DIGITS = 50


def cdf_array(params: Params, x, depth: int = DEFAULT_DEPTH):
    """Vectorised floating-point counterpart of :func:`cdf`.

    Intended for bulk statistics (Kolmogorov-Smirnov distances, transforms).
    The descent runs in float arithmetic and stops once ``beta**k`` falls
    below ``2**-50``, so the returned bound is ``max(p, q)**k`` for that
    effective depth; positions within rounding distance of a branch boundary
    are not certified.  Use :func:`cdf` when exactness matters.

    Returns
    -------
    values, bounds : ndarray
    """
    params = check_params(params)
    depth = check_depth(depth)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    beta, p, q = params.beta, params.p, params.q
    steps = min(depth, max(1, int(_FLOAT_DIGITS * math.log(2) / -math.log(beta))))
    pos = x.astype(float).copy()
    acc = np.zeros_like(pos)
    factor = np.ones_like(pos)
    done = np.zeros(pos.shape, dtype=bool)
    bound = np.zeros_like(pos)

    low = pos <= 0
    high = pos >= 1
    done |= low | high
    acc[high] = 1.0
    for _ in range(steps):
        active = ~done
        if not active.any():
            break
        left = active & (pos <= beta)
        right = active & ~left & (pos >= 1 - beta)
        middle = active & ~left & ~right
        acc[middle] += factor[middle] * p
        done |= middle
        pos[left] /= beta
        factor[left] *= p
        acc[right] += factor[right] * p
        factor[right] *= q
        pos[right] = pos[right] / beta + 1 - 1 / beta
        moved = left | right
        hit_low = moved & (pos <= 0)
        hit_high = moved & (pos >= 1)
        acc[hit_high] += factor[hit_high]
        done |= hit_low | hit_high
    rest = ~done
    bound[rest] = 0.5 * factor[rest]
    acc[rest] += bound[rest]
    return acc, bound


def cdf_modulus(params: Params, k: int) -> float:
    """Bound on the increase of F over any interval of length beta**k."""
    params = check_params(params)
    if k < 0:
        raise ValueError("k must be nonnegative")
    return params.tau ** k


def _reduce_log(t: float, period: float) -> float:
    """Representative of t modulo ``period`` in (-period, 0]."""
    r = t - period * math.ceil(t / period)
    if r > 0:
        r -= period
    if r <= -period:
        r += period
    return r


def nu(params: Params, t: float, depth: int = DEFAULT_DEPTH) -> float:
    """Log-periodic component nu_{beta,p}(t) of F, period |log beta|.

    ``F(e**t) = e**(t log p / log beta) * nu(t)`` for t <= 0.

    >>> nu(Params(1/3, 0.5), 0.0)
    1.0
    """
    params = check_params(params)
    check_finite(t, "t")
    period = -math.log(params.beta)
    tr = _reduce_log(float(t), period)
    if tr == 0.0:
        return 1.0
    power = math.log(params.p) / math.log(params.beta)
    value = cdf(params, math.exp(tr), depth).value
    return value / math.exp(tr * power)


def psi(params: Params, x, depth: int = DEFAULT_DEPTH) -> float:
    """Tail function psi_{beta,q}(x) = (-x)**(log q/log beta) nu_{beta,q}(log(-x)).

    Evaluated exactly as ``F_{beta,q}(beta**m (-x)) / q**m`` with the integer
    m that brings ``beta**m (-x)`` into (beta, 1]; this satisfies
    ``F_{beta,p}(1 + beta**n x) = 1 - q**n psi(x)`` whenever
    ``0 < -beta**n x <= 1``.
    """
    params = check_params(params)
    check_negative(x)
    beta = params.beta_exact
    y = -snap_rational(x)
    m = 0
    while y > 1:
        y *= beta
        m += 1
    while y <= beta:
        y /= beta
        m -= 1
    tail = cdf(params.swapped(), y, depth).value
    return tail / params.q ** m


def quantile_exact(params: Params, alpha, depth: int = DEFAULT_DEPTH) -> Fraction:
    """Generalised inverse inf{x : F(x) >= alpha} as an exact rational.

    The result is the right end of the depth-``depth`` cylinder that holds
    the quantile, or its left end when the descent lands exactly on a
    cylinder boundary, so ``F(result) >= alpha`` always.
    """
    params = check_params(params)
    depth = check_depth(depth)
    a = as_rational(alpha)
    if not 0 <= a <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha!r}")
    if a == 0:
        return Fraction(0)
    if a == 1:
        return Fraction(1)
    beta = params.beta_exact
    p = Fraction(params.p)
    q = 1 - p
    step = 1 - beta
    x = Fraction(0)
    scale = Fraction(1)
    for _ in range(depth):
        if a <= p:
            a = a / p
        else:
            x += step * scale
            a = (a - p) / q
        scale *= beta
        if a == 0:
            return x
    return x + scale if a > 0 else x


def quantile(params: Params, alpha, depth: int = DEFAULT_DEPTH) -> float:
    """Generalised inverse of F, rounded up to the next float.

    Reconstruction error is at most ``beta**depth`` plus a few ulps, and
    ``F(quantile(alpha)) >= alpha`` holds for the returned float.

    >>> quantile(Params(1/3, 0.5), 1.0)
    1.0
    """
    exact = quantile_exact(params, alpha, depth)
    value = float(exact)
    # Float inputs near small-denominator rationals are read as those rationals,
    # so step up until that reading no longer falls below the quantile.
    while snap_rational(value) < exact:
        value = math.nextafter(value, math.inf)
    return value


def sample_digits(params: Params, rng: np.random.Generator, depth: int = DEFAULT_DEPTH, size=None):
    """Draw i.i.d. Bernoulli(q) digits of the stationary series.

    Returns an array of shape ``size + (depth,)`` with dtype uint8.
    """
    params = check_params(params)
    depth = check_depth(depth)
    shape = (depth,) if size is None else tuple(np.atleast_1d(size)) + (depth,)
    return (rng.random(shape) < params.q).astype(np.uint8)


def digits_to_value(params: Params, digits) -> np.ndarray:
    """x = (1 - beta) * sum_j b_j beta**j along the last axis of ``digits``."""
    digits = np.asarray(digits)
    weights = (1 - params.beta) * params.beta ** np.arange(digits.shape[-1])
    return digits @ weights


def sample_stationary(params: Params, rng: np.random.Generator, depth: int = DEFAULT_DEPTH, size=None):
    """Sample the stationary law by truncating its digit series.

    Each sample is ``(1 - beta) * sum_{j < depth} b_j beta**j`` with b_j
    i.i.d. Bernoulli(q); it lies at most ``beta**depth`` below an exact
    draw from F.  Deterministic for a seeded generator.
    """
    digits = sample_digits(params, rng, depth, size)
    values = digits_to_value(params, digits)
    return float(values) if size is None else values


def symmetry_check(params: Params, x_grid: Iterable, depth: int = DEFAULT_DEPTH) -> float:
    """Max over the grid of |1 - F_{beta,p}(1 - x) - F_{beta,q}(x)|."""
    params = check_params(params)
    swapped = params.swapped()
    worst = 0.0
    for x in x_grid:
        xr = snap_rational(x)
        lhs = 1.0 - cdf(params, 1 - xr, depth).value
        rhs = cdf(swapped, xr, depth).value
        worst = max(worst, abs(lhs - rhs))
    return worst


def scaling_check(params: Params, x_grid: Iterable, depth: int = DEFAULT_DEPTH) -> float:
    """Max over the grid of |F(beta x) - p F(x)|, with beta x formed exactly."""
    params = check_params(params)
    beta = params.beta_exact
    worst = 0.0
    for x in x_grid:
        xr = snap_rational(x)
        lhs = cdf(params, beta * xr, depth).value
        worst = max(worst, abs(lhs - params.p * cdf(params, xr, depth).value))
    return worst


def fixed_point_residual(params: Params, x, depth: int = DEFAULT_DEPTH):
    """Residual of the functional equation at x and the combined error bound."""
    params = check_params(params)
    xr = snap_rational(x)
    beta = params.beta_exact
    here = cdf(params, xr, depth)
    left = cdf(params, xr / beta, depth)
    right = cdf(params, xr / beta + 1 - 1 / beta, depth)
    residual = here.value - params.p * left.value - params.q * right.value
    bound = here.error_bound + params.p * left.error_bound + params.q * right.error_bound
    return abs(residual), bound
