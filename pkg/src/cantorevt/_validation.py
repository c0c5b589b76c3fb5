"""Parameter containers, exceptions and input checks shared by all modules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real

DEFAULT_DEPTH = 64

# Largest denominator considered when recognising a float beta as a simple
# rational such as 1/3 or 2/5.
_MAX_SNAP_DENOMINATOR = 1 << 16


class DomainError(ValueError):
    """An input lies outside the domain of the requested function."""


class LevelError(DomainError):
    """The level index n is too small for the requested x."""


class PreconditionError(ValueError):
    """A recursion or formula was requested outside its range of validity."""


class ResourceError(RuntimeError):
    """An exhaustive enumeration would exceed the supported size."""


class InvalidLawError(ValueError):
    """A max-semistable law was built from an invalid periodic component."""


def as_rational(value) -> Fraction:
    """Convert a float, integer, string or rational to an exact ``Fraction``.

    Floats are converted exactly (they are dyadic rationals), so no rounding
    is introduced.  Strings such as ``"1/3"`` are parsed exactly.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Rational):
        return Fraction(value)
    v = float(value)
    if not math.isfinite(v):
        raise DomainError(f"expected a finite number, got {value!r}")
    return Fraction(v)


def snap_rational(value) -> Fraction:
    """Exact rational meant by ``value`` for digit arithmetic.

    A float within a few ulps of a rational with denominator at most 2**16
    (for instance ``1/3`` or ``0.4``) is taken to mean that rational; any
    other float is used at its exact binary value.  Rational and string
    inputs are used as given.
    """
    if isinstance(value, (Fraction, str)) or isinstance(value, Rational):
        return as_rational(value)
    b = float(value)
    if not math.isfinite(b):
        raise DomainError(f"expected a finite number, got {value!r}")
    exact = Fraction(b)
    if b == 0.0:
        return exact
    snapped = exact.limit_denominator(_MAX_SNAP_DENOMINATOR)
    if abs(float(snapped) - b) <= 4 * math.ulp(b):
        return snapped
    return exact


@dataclass(frozen=True)
class Params:
    """The pair (beta, p) that defines the process and its marginal law.

    ``beta`` accepts floats, strings like ``"1/3"`` and ``Fraction``; the
    exact rational actually used by the digit arithmetic is ``beta_exact``.

    Examples
    --------
    >>> Params(1/3, 0.5).q
    0.5
    >>> Params("1/3", 0.5).beta_exact
    Fraction(1, 3)
    """

    beta: float
    p: float
    beta_exact: Fraction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        exact = snap_rational(self.beta)
        p = float(as_rational(self.p)) if isinstance(self.p, str) else float(self.p)
        if not (0 < exact <= Fraction(1, 2)):
            raise DomainError(f"beta must lie in (0, 1/2], got {self.beta!r}")
        if not (0.0 < p < 1.0):
            raise DomainError(f"p must lie in (0, 1), got {self.p!r}")
        object.__setattr__(self, "beta", float(exact))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "beta_exact", exact)

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def q_exact(self) -> Fraction:
        return 1 - Fraction(self.p)

    @property
    def tau(self) -> float:
        """max{p, q}, the contraction factor of the functional equation."""
        return max(self.p, self.q)

    @property
    def degenerate(self) -> bool:
        return self.beta_exact == Fraction(1, 2) and self.p == 0.5

    @property
    def tail_exponent(self) -> float:
        """log q / log beta, the power of the upper tail."""
        return math.log(self.q) / math.log(self.beta)

    def swapped(self) -> "Params":
        """Same beta with the roles of p and q interchanged."""
        return Params(self.beta_exact, self.q)


def check_params(params, *, allow_degenerate: bool = True) -> Params:
    if isinstance(params, tuple):
        params = Params(*params)
    if not isinstance(params, Params):
        raise TypeError(f"expected Params, got {type(params).__name__}")
    if params.degenerate and not allow_degenerate:
        raise DomainError("beta = p = 1/2 is excluded from the extreme value limit laws")
    return params


def check_depth(depth) -> int:
    if isinstance(depth, bool) or not isinstance(depth, int):
        raise ValueError(f"depth must be a positive integer, got {depth!r}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    return depth


def check_finite(x, name: str = "x"):
    if isinstance(x, Rational):
        return x
    if not isinstance(x, Real) or not math.isfinite(float(x)):
        raise DomainError(f"{name} must be a finite real number, got {x!r}")
    return x


def check_negative(x, name: str = "x"):
    check_finite(x, name)
    if not x < 0:
        raise DomainError(f"{name} must be negative, got {x!r}")
    return x
