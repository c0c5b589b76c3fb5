"""Seeded Monte Carlo for the autoregression and orbits of the map f_beta.

Randomness is organised in fixed chunks of ``CHUNK`` replications.  Chunk c
of a run with seed s draws from a Philox stream keyed by (s, purpose) with
its counter starting at ``c << 192``, so results do not depend on whether
chunks are processed serially or on a thread pool (``CANTOREVT_THREADS``).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from ._validation import (
    DEFAULT_DEPTH,
    DomainError,
    Params,
    PreconditionError,
    as_rational,
    check_depth,
    check_negative,
    check_params,
    snap_rational,
)
from .exactlaw import LevelSet, make_levels
from .marginal import DigitStream, cdf, cdf_array, digits_to_value, psi, sample_digits

__all__ = [
    "CHUNK",
    "MonteCarloConfig",
    "Trajectory",
    "Orbit",
    "EmpiricalLaw",
    "ExtremalIndexEstimate",
    "simulate_ar",
    "trajectories",
    "empirical_max_law",
    "exceedance_counts",
    "estimate_extremal_index",
    "decluster_runs",
    "f_beta",
    "iterate_map",
    "check_conjugacy",
    "check_invariance",
    "lyapunov",
    "orbit_lyapunov",
    "doa_convergence",
    "ks_distance",
    "wilson_interval",
]

CHUNK = 4096
THREADS_ENV = "CANTOREVT_THREADS"

_STREAM_X0 = 1
_STREAM_INNOVATIONS = 2
_STREAM_IID = 3
_STREAM_EVENTS = 4
_STREAM_BOOTSTRAP = 5


@dataclass(frozen=True)
class MonteCarloConfig:
    """Seed, replication count, X_0 digit depth and optional horizon."""

    seed: int
    replications: int
    depth: int = DEFAULT_DEPTH
    horizon: int | None = None

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        check_depth(self.depth)

    def chunks(self):
        """(index, size) of every replication chunk, in order."""
        full, rest = divmod(self.replications, CHUNK)
        out = [(c, CHUNK) for c in range(full)]
        if rest:
            out.append((full, rest))
        return out


def _generator(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) + (stream << 64), counter=chunk << 192))


def _map_chunks(func, chunks):
    threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, chunks))
    return [func(c) for c in chunks]


def wilson_interval(successes, trials, level: float = 0.95):
    """Wilson score interval for a binomial proportion (vectorised)."""
    successes = np.asarray(successes, dtype=float)
    z = stats.norm.ppf(0.5 + level / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z / denom * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return centre - half, centre + half


# ---------------------------------------------------------------- trajectories


@dataclass
class Trajectory:
    """One path X_0..X_m with the digits that generated it.

    ``values`` follow the recursion in float arithmetic; ``exact_value``
    and ``digits`` give the same path in exact digit arithmetic.
    """

    params: Params
    x0_digits: np.ndarray
    innovation_bits: np.ndarray
    values: np.ndarray

    @property
    def m(self) -> int:
        return len(self.innovation_bits)

    @property
    def innovations(self) -> np.ndarray:
        return (1 - self.params.beta) * self.innovation_bits

    def digits(self, k: int) -> DigitStream:
        """Digit expansion of X_k: eps_k, eps_{k-1}, ..., eps_1, then X_0's digits."""
        recent = self.innovation_bits[:k][::-1]
        word = tuple(int(b) for b in recent) + tuple(int(b) for b in self.x0_digits)
        return DigitStream(word, self.params.beta_exact)

    def exact_value(self, k: int) -> Fraction:
        return self.digits(k).exact_value()


def simulate_ar(params: Params, cfg: MonteCarloConfig, m: int, *, x0_digits=None,
                innovation_bits=None) -> Trajectory:
    """Simulate X_0..X_m with X_0 from the stationary law.

    X_0 uses ``cfg.depth`` digits and innovations are 0 with probability p
    and 1 - beta otherwise.  Digits may be supplied explicitly to replay a
    given path.
    """
    params = check_params(params)
    if m < 0:
        raise ValueError("m must be >= 0")
    if x0_digits is None:
        x0_digits = sample_digits(params, _generator(cfg.seed, _STREAM_X0, 0), cfg.depth)
    if innovation_bits is None:
        rng = _generator(cfg.seed, _STREAM_INNOVATIONS, 0)
        innovation_bits = (rng.random(m) < params.q).astype(np.uint8)
    x0_digits = np.asarray(x0_digits, dtype=np.uint8)
    innovation_bits = np.asarray(innovation_bits, dtype=np.uint8)
    if len(innovation_bits) != m:
        raise ValueError("innovation_bits must have length m")
    beta = params.beta
    eps = (1 - beta) * innovation_bits
    values = np.empty(m + 1)
    values[0] = float(DigitStream(tuple(int(b) for b in x0_digits), params.beta_exact))
    for k in range(m):
        values[k + 1] = beta * values[k] + eps[k]
    return Trajectory(params, x0_digits, innovation_bits, values)


def _chunk_paths(params: Params, cfg: MonteCarloConfig, chunk: int, size: int, length: int):
    """Yield (k, X_k) for k = 0..length-1 over one chunk of replications."""
    beta, q = params.beta, params.q
    x = digits_to_value(params, sample_digits(params, _generator(cfg.seed, _STREAM_X0, chunk), cfg.depth, size))
    yield 0, x
    rng = _generator(cfg.seed, _STREAM_INNOVATIONS, chunk)
    step = 1 - beta
    k = 1
    block = 512
    while k < length:
        width = min(block, length - k)
        bits = rng.random((width, size)) < q
        for row in bits:
            x = beta * x + step * row
            yield k, x
            k += 1


def trajectories(params: Params, cfg: MonteCarloConfig, length: int) -> np.ndarray:
    """Array of shape (replications, length) holding X_0..X_{length-1}."""
    params = check_params(params)
    out = np.empty((cfg.replications, length))
    start = 0
    for chunk, size in cfg.chunks():
        for k, x in _chunk_paths(params, cfg, chunk, size, length):
            out[start:start + size, k] = x
        start += size
    return out


def _chunk_max(params, cfg, length, thresholds, item):
    chunk, size = item
    running = np.full(size, -np.inf)
    counts = np.zeros((len(thresholds), size), dtype=np.int64)
    for _, x in _chunk_paths(params, cfg, chunk, size, length):
        np.maximum(running, x, out=running)
        counts += x[None, :] > thresholds[:, None]
    return running, counts


# ------------------------------------------------------------------ max laws


@dataclass(frozen=True)
class EmpiricalLaw:
    """Monte Carlo estimates of P(M_{k_n} <= u_n(x)) on a grid of x.

    ``lower``/``upper`` bracket the estimate against digit truncation of
    X_0 (paths within beta**depth of the level are counted both ways).
    """

    x_grid: np.ndarray
    n: int
    mode: str
    replications: int
    estimates: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def ci_halfwidths(self) -> np.ndarray:
        return 0.5 * (self.ci_high - self.ci_low)


def empirical_max_law(params: Params, x_grid: Sequence[float], n: int, cfg: MonteCarloConfig,
                      mode: str = "dep") -> EmpiricalLaw:
    """Estimate P(a_n (M_{k_n} - b_n) <= x) = P(M_{k_n} <= u_n) for each grid x.

    ``mode="dep"`` simulates the autoregression; ``mode="iid"`` is the
    control with independent draws from F, sampled through the law of
    F(M) = U**(1/k_n) of the maximum of k_n i.i.d. uniforms.  A set
    ``cfg.horizon`` replaces k_n as the number of observations.
    """
    params = check_params(params)
    if mode not in ("dep", "iid"):
        raise ValueError("mode must be 'dep' or 'iid'")
    grid = np.asarray(sorted(float(x) for x in x_grid))
    levels = [make_levels(params, x, n, cfg.depth) for x in grid]
    k = cfg.horizon if cfg.horizon is not None else levels[0].k_n
    R = cfg.replications
    if mode == "dep":
        thresholds = np.array([lv.u_float for lv in levels])
        tol = params.beta ** cfg.depth + 16 * np.finfo(float).eps
        parts = _map_chunks(lambda it: _chunk_max(params, cfg, k, thresholds, it), cfg.chunks())
        maxima = np.concatenate([pt[0] for pt in parts])
        nominal = np.array([(maxima <= u).sum() for u in thresholds])
        sure = np.array([(maxima <= u - tol).sum() for u in thresholds])
        maybe = np.array([(maxima <= u + tol).sum() for u in thresholds])
    else:
        tails = []
        for lv in levels:
            t = cdf(params.swapped(), 1 - lv.u_n, cfg.depth)
            tails.append((t.value, t.error_bound))

        def draw(item):
            chunk, size = item
            u = _generator(cfg.seed, _STREAM_IID, chunk).random(size)
            # 1 - U**(1/k) without cancellation
            return -np.expm1(np.log1p(-u) / k)

        tail_max = np.concatenate(_map_chunks(draw, cfg.chunks()))
        # M <= u  <=>  F(M) <= F(u)  <=>  1 - F(M) >= 1 - F(u)
        nominal = np.array([(tail_max >= t).sum() for t, _ in tails])
        sure = np.array([(tail_max >= t + e).sum() for t, e in tails])
        maybe = np.array([(tail_max >= t - e).sum() for t, e in tails])
    est = nominal / R
    lo, hi = wilson_interval(nominal, R)
    return EmpiricalLaw(grid, n, mode, R, est, lo, hi, sure / R, maybe / R)


def exceedance_counts(params: Params, x: float, n: int, cfg: MonteCarloConfig) -> np.ndarray:
    """Per-replication number of k with X_k > u_n, 0 <= k < k_n."""
    params = check_params(params)
    lv = make_levels(params, x, n, cfg.depth)
    thr = np.array([lv.u_float])
    parts = _map_chunks(lambda it: _chunk_max(params, cfg, lv.k_n, thr, it), cfg.chunks())
    return np.concatenate([pt[1][0] for pt in parts])


# ------------------------------------------------------------ extremal index


def decluster_runs(exceed: np.ndarray, gap: int):
    """Runs declustering of boolean exceedance rows.

    An exceedance opens a new cluster when at least ``gap`` non-exceedances
    separate it from the previous exceedance in the same row (the first
    exceedance of a row always opens one).  Returns per-row (clusters,
    exceedances).
    """
    exceed = np.atleast_2d(np.asarray(exceed, dtype=bool))
    clusters = np.zeros(exceed.shape[0], dtype=np.int64)
    for r, row in enumerate(exceed):
        idx = np.flatnonzero(row)
        if idx.size:
            clusters[r] = 1 + int(np.count_nonzero(np.diff(idx) - 1 >= gap))
    return clusters, exceed.sum(axis=1)


@dataclass(frozen=True)
class ExtremalIndexEstimate:
    """Point estimate of the extremal index with a bootstrap interval."""

    method: str
    control: str
    estimate: float
    ci_low: float
    ci_high: float
    n_exceedances: int
    n_clusters: int
    replications: int

    @property
    def defined(self) -> bool:
        return math.isfinite(self.estimate)


def _hitting_cdf(q: float, n: int, horizon: int) -> np.ndarray:
    """cdf[r, t-1] = P(run of n ones first completes within t digits | run r now)."""
    p = 1 - q
    dist = np.eye(n)
    absorbed = np.zeros(n)
    out = np.empty((n, horizon))
    for t in range(horizon):
        absorbed = absorbed + q * dist[:, n - 1]
        nxt = np.empty_like(dist)
        nxt[:, 0] = p * dist.sum(axis=1)
        nxt[:, 1:] = q * dist[:, :-1]
        dist = nxt
        out[:, t] = absorbed
    return out


def _geometric_count(rng, ratio: float, size):
    """C with P(C >= c) = ratio**c."""
    u = 1.0 - rng.random(size)
    return np.floor(np.log(u) / math.log(ratio)).astype(np.int64)


def _dependent_events(q: float, n: int, k: int, hit: np.ndarray, rng, size: int):
    """Exceedance counts of one chunk of stationary chains at the level x = -1.

    X_t > 1 - beta**n exactly when the digits at positions t-n+1..t are all
    ones, so exceedances come in clusters equal to runs of ones, separated
    by at least n non-exceedances.  The run length at position -1 is drawn
    from its stationary law, then the sampler alternates between cluster
    continuations (geometric) and waiting times for the next run of n ones
    (inverse cdf of the run automaton).
    """
    horizon = hit.shape[1]
    pos = np.full(size, -1, dtype=np.int64)
    state = np.minimum(_geometric_count(rng, q, size), n)
    in_cluster = state == n
    n_exc = np.zeros(size, dtype=np.int64)
    n_clu = np.zeros(size, dtype=np.int64)
    active = np.ones(size, dtype=bool)
    while active.any():
        sel = np.flatnonzero(active & in_cluster)
        if sel.size:
            extra = _geometric_count(rng, q, sel.size)
            first = np.maximum(pos[sel] + 1, 0)
            last = np.minimum(pos[sel] + extra, k - 1)
            n_exc[sel] += np.maximum(last - first + 1, 0)
            pos[sel] += extra + 1
            state[sel] = 0
            in_cluster[sel] = False
            active[sel] = pos[sel] <= k - 1
        sel = np.flatnonzero(active & ~in_cluster)
        if sel.size:
            u = rng.random(sel.size)
            steps = np.empty(sel.size, dtype=np.int64)
            st = state[sel]
            for r in np.unique(st):
                mask = st == r
                steps[mask] = np.searchsorted(hit[r], u[mask], side="right") + 1
            start = pos[sel] + steps
            ok = (steps <= horizon) & (start <= k - 1)
            done = sel[~ok]
            active[done] = False
            go = sel[ok]
            n_exc[go] += 1
            n_clu[go] += 1
            pos[go] = start[ok]
            in_cluster[go] = True
    return n_clu, n_exc


def _iid_events(pi: float, j: int, k: int, rng, size: int):
    """Exceedance counts for i.i.d. Bernoulli(pi) exceedances, runs gap j.

    Exceedances before position 0 (back to -j) are simulated so that the
    gap rule can be applied to the first in-window exceedance.
    """
    log_keep = math.log1p(-pi)
    prev = np.full(size, -j - 1, dtype=np.int64)
    n_exc = np.zeros(size, dtype=np.int64)
    n_clu = np.zeros(size, dtype=np.int64)

    def gaps(m):
        u = 1.0 - rng.random(m)
        return np.floor(np.log(u) / log_keep).astype(np.int64) + 1

    t = prev + gaps(size)
    active = t <= k - 1
    while active.any():
        sel = np.flatnonzero(active)
        inside = t[sel] >= 0
        n_exc[sel[inside]] += 1
        opens = inside & (t[sel] - prev[sel] - 1 >= j)
        n_clu[sel[opens]] += 1
        prev[sel] = t[sel]
        t[sel] = prev[sel] + gaps(sel.size)
        active[sel] = t[sel] <= k - 1
    return n_clu, n_exc


def estimate_extremal_index(params: Params, n: int, cfg: MonteCarloConfig, method: str = "runs",
                            control: str = "dependent", n_boot: int = 400,
                            level: float = 0.95) -> ExtremalIndexEstimate:
    """Estimate the extremal index at the levels u_n with x = -1.

    ``runs``: clusters / exceedances, a cluster opening at an exceedance
    preceded by at least j_n non-exceedances.  The look-back window extends
    before time 0 (the past of a stationary chain is encoded in the digits
    of X_0), so no cluster is cut at the start of the window.

    ``ratio``: log P(M_{k_n} <= u_n) / (k_n log F(u_n)) with the certified
    marginal.

    ``control="iid"`` replaces the chain by independent draws from F, for
    which the extremal index is 1.  The interval is a percentile bootstrap
    over replications.
    """
    params = check_params(params, allow_degenerate=False)
    if method not in ("runs", "ratio"):
        raise ValueError("method must be 'runs' or 'ratio'")
    if control not in ("dependent", "iid"):
        raise ValueError("control must be 'dependent' or 'iid'")
    lv = make_levels(params, -1.0, n, cfg.depth)
    k, j = lv.k_n, lv.j_n
    tail = cdf(params.swapped(), 1 - lv.u_n, cfg.depth).value  # 1 - F(u_n)
    log_f = math.log1p(-tail)
    if control == "dependent":
        hit = _hitting_cdf(params.q, n, k + 1)

        def run(item):
            chunk, size = item
            return _dependent_events(params.q, n, k, hit, _generator(cfg.seed, _STREAM_EVENTS, chunk), size)
    else:
        def run(item):
            chunk, size = item
            return _iid_events(tail, j, k, _generator(cfg.seed, _STREAM_EVENTS, chunk), size)

    parts = _map_chunks(run, cfg.chunks())
    clusters = np.concatenate([pt[0] for pt in parts])
    exceed = np.concatenate([pt[1] for pt in parts])

    def statistic(c, e):
        if method == "runs":
            total = e.sum()
            return c.sum() / total if total else math.nan
        none = np.mean(e == 0)
        if none <= 0.0 or none >= 1.0:
            return math.nan
        return math.log(none) / (k * log_f)

    est = statistic(clusters, exceed)
    rng = _generator(cfg.seed, _STREAM_BOOTSTRAP, 0)
    R = len(exceed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, R, R)
        boot[b] = statistic(clusters[idx], exceed[idx])
    boot = boot[np.isfinite(boot)]
    alpha = (1 - level) / 2
    if math.isfinite(est) and boot.size:
        lo, hi = np.quantile(boot, [alpha, 1 - alpha])
    else:
        lo = hi = math.nan
    return ExtremalIndexEstimate(method, control, float(est), float(lo), float(hi),
                                 int(exceed.sum()), int(clusters.sum()), R)


# ------------------------------------------------------------------ dynamics


def _beta_of(beta) -> Fraction:
    if isinstance(beta, Params):
        return beta.beta_exact
    b = snap_rational(beta)
    if not 0 < b <= Fraction(1, 2):
        raise DomainError(f"beta must lie in (0, 1/2], got {beta!r}")
    return b


def f_beta(beta, x):
    """One step of the expanding map; exact for rational input."""
    b = _beta_of(beta)
    if isinstance(x, Fraction):
        return x / b if x < 1 - b else x / b + 1 - 1 / b
    bf = float(b)
    return x / bf if x < 1 - bf else x / bf + 1 - 1 / bf


@dataclass(frozen=True)
class Orbit:
    """Orbit x_0, f(x_0), ...; ``escape_index`` marks the first point outside [0, 1]."""

    points: tuple
    escape_index: int | None = None


def iterate_map(beta, x0, steps: int) -> Orbit:
    """Iterate f_beta from x0, stopping when the orbit leaves [0, 1].

    Points of the middle gap are sent above 1 and escape.  Rational x0
    (``Fraction``) is iterated exactly.

    >>> iterate_map(1/3, 0.0, 3).points
    (0.0, 0.0, 0.0, 0.0)
    """
    b = _beta_of(beta)
    if isinstance(x0, Fraction):
        x = x0
    else:
        x = float(x0)
        if not math.isfinite(x):
            raise DomainError("x0 must be finite")
    if not 0 <= x <= 1:
        raise DomainError(f"x0 must lie in [0, 1], got {x0!r}")
    pts = [x]
    for i in range(steps):
        x = f_beta(b, x)
        pts.append(x)
        if not 0 <= x <= 1:
            return Orbit(tuple(pts), i + 1)
    return Orbit(tuple(pts))


def check_conjugacy(trajectory: Trajectory) -> int:
    """Count indices k with f_beta(X_{k+1}) != X_k in exact arithmetic.

    Values are kept as integers N_k over b**(depth + k) for beta = a/b, so a
    10**4-step path is checked without rational normalisation.
    """
    beta = trajectory.params.beta_exact
    a, b = beta.numerator, beta.denominator
    digits = [int(d) for d in trajectory.x0_digits]
    L = len(digits)
    # X_0 = (b - a) * sum_j d_j a**j b**(L-1-j) / b**L
    num = sum(d * a ** j * b ** (L - 1 - j) for j, d in enumerate(digits)) * (b - a)
    scale = b ** L
    mismatches = 0
    for bit in trajectory.innovation_bits:
        # X_{k+1} = beta X_k + (1 - beta) bit, over denominator b * scale
        nxt = a * num + (b - a) * int(bit) * scale
        nscale = scale * b
        # f_beta(y) = y / beta or y / beta + 1 - 1 / beta, y = nxt / nscale
        if nxt * b < (b - a) * nscale:  # y < 1 - beta
            img_num, img_den = nxt * b, nscale * a
        else:
            img_num, img_den = nxt * b + (a - b) * nscale, nscale * a
        if img_num * scale != num * img_den:
            mismatches += 1
        num, scale = nxt, nscale
    return mismatches


def check_invariance(params: Params, intervals: Iterable, depth: int = DEFAULT_DEPTH) -> float:
    """Max over (a, b] of |mu(f^-1 (a, b]) - mu((a, b])| computed through F."""
    params = check_params(params)
    beta = params.beta_exact
    worst = 0.0
    for a, b in intervals:
        ar, br = snap_rational(a), snap_rational(b)
        if not 0 <= ar <= br <= 1:
            raise DomainError(f"malformed interval ({a}, {b}]")

        def F(y):
            return cdf(params, y, depth).value

        left = F(beta * br) - F(beta * ar)
        right = F(beta * br + 1 - beta) - F(beta * ar + 1 - beta)
        worst = max(worst, abs(left + right - (F(br) - F(ar))))
    return worst


def lyapunov(beta) -> float:
    """Lyapunov exponent -log(beta) of f_beta (its slope is 1/beta everywhere)."""
    b = _beta_of(beta)
    return -math.log(b)


def orbit_lyapunov(beta, orbit: Orbit) -> float:
    """Orbit average of log|f_beta'| over the points that stay in [0, 1]."""
    b = float(_beta_of(beta))
    pts = orbit.points[: orbit.escape_index] if orbit.escape_index else orbit.points[:-1]
    if not pts:
        raise ValueError("orbit too short")
    slopes = [math.log(1 / b) for _ in pts]
    return math.fsum(slopes) / len(slopes)


@dataclass(frozen=True)
class DoaRow:
    n: int
    value: float
    gap: float
    identity_defect: float


def doa_convergence(params: Params, x, n_range: Iterable[int], depth: int = DEFAULT_DEPTH) -> list:
    """F(1 + beta**n x)**k_n against its limit exp(-psi(x)) for each n.

    ``identity_defect`` is |F(1 + beta**n x) - (1 - q**n psi(x))|.
    """
    params = check_params(params)
    check_negative(x)
    limit_psi = psi(params, x, depth)
    limit = math.exp(-limit_psi)
    rows = []
    for n in n_range:
        lv = make_levels(params, x, n, depth)
        val = cdf(params, lv.u_n, depth).value
        power = val ** lv.k_n
        defect = abs(val - (1 - params.q ** n * limit_psi))
        rows.append(DoaRow(int(n), power, abs(power - limit), defect))
    return rows


def ks_distance(params: Params, samples) -> float:
    """Kolmogorov-Smirnov distance between samples and F."""
    params = check_params(params)
    xs = np.sort(np.asarray(samples, dtype=float))
    F, _ = cdf_array(params, xs)
    N = len(xs)
    upper = np.arange(1, N + 1) / N - F
    lower = F - np.arange(0, N) / N
    return float(max(upper.max(), lower.max()))
