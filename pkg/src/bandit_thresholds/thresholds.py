"""Exploration-exploitation decision thresholds.

Pure numerical routines answering one question: given the mean of the
current-best arm, a hypothesized margin ``delta`` by which a challenger
might beat it, the belief probability ``p_i`` of that event, and a reward
horizon (geometric discounting or a finite window), is it worth committing
to the challenger for a step before returning to greedy play?

Everything here is a pure function of its arguments; rewards are assumed
non-negative after shifting by the lower bound ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

GEOMETRIC = "geometric"
UNIFORM_FINITE = "uniform-finite"


class BracketError(ValueError):
    """Root bracket does not enclose a sign change."""


@dataclass(frozen=True)
class DiscountSpec:
    """Weighting g(k) over future steps k = 0, 1, ... and its horizon.

    Two kinds are supported:

    * ``geometric``: g(k) = gamma**k with gamma in [0, 1), infinite horizon.
      Total mass 1 / (1 - gamma).
    * ``uniform-finite``: g(k) = 1 for k <= n, zero after. Total mass n + 1.
    """

    kind: str
    gamma: float | None = None
    n: int | None = None

    def __post_init__(self) -> None:
        if self.kind == GEOMETRIC:
            if self.gamma is None or not 0.0 <= self.gamma < 1.0:
                raise ValueError(
                    f"geometric discount needs gamma in [0, 1), got {self.gamma!r}"
                )
        elif self.kind == UNIFORM_FINITE:
            if self.n is None or self.n < 0:
                raise ValueError(
                    f"uniform-finite discount needs horizon n >= 0, got {self.n!r}"
                )
        else:
            raise ValueError(f"unknown discount kind {self.kind!r}")

    @classmethod
    def geometric(cls, gamma: float) -> "DiscountSpec":
        return cls(kind=GEOMETRIC, gamma=float(gamma))

    @classmethod
    def uniform_finite(cls, n: int) -> "DiscountSpec":
        return cls(kind=UNIFORM_FINITE, n=int(n))

    def weight(self, k: int) -> float:
        """g(k), the weight of the reward k steps ahead."""
        if k < 0:
            raise ValueError("k must be non-negative")
        if self.kind == GEOMETRIC:
            return self.gamma**k
        return 1.0 if k <= self.n else 0.0

    def total_mass(self) -> float:
        """Sum of g(k) over the whole horizon."""
        if self.kind == GEOMETRIC:
            return 1.0 / (1.0 - self.gamma)
        return float(self.n + 1)

    def head_mass(self, t: int) -> float:
        """Sum of g(k) for k = 0 .. t-1 (the committed exploration window)."""
        if t < 0:
            raise ValueError("t must be non-negative")
        if self.kind == GEOMETRIC:
            if self.gamma == 0.0:
                return 0.0 if t == 0 else 1.0
            return (1.0 - self.gamma**t) / (1.0 - self.gamma)
        return float(min(t, self.n + 1))

    def tail_mass(self, t: int) -> float:
        """Sum of g(k) for k = t .. horizon (the greedy continuation)."""
        if t < 0:
            raise ValueError("t must be non-negative")
        if self.kind == GEOMETRIC:
            return self.gamma**t / (1.0 - self.gamma)
        return float(max(0, self.n + 1 - t))


@dataclass(frozen=True)
class ThresholdQuery:
    """Inputs of one explore-or-exploit decision.

    ``q_bar_j`` is the mean estimate of the current-best arm, ``delta`` the
    margin by which the challenger is hypothesized to beat it, ``p_i`` the
    belief probability of that event, ``b`` the reward lower bound, and
    ``t`` the number of steps the challenger would be committed to.
    """

    q_bar_j: float
    delta: float
    p_i: float
    b: float
    t: int
    discount: DiscountSpec

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_i <= 1.0:
            raise ValueError(f"p_i must be in [0, 1], got {self.p_i}")
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if self.q_bar_j < self.b:
            raise ValueError(
                f"q_bar_j ({self.q_bar_j}) must be >= the reward lower bound b ({self.b})"
            )


def exploration_utility(query: ThresholdQuery) -> float:
    """Lower bound on the return of exploring for ``t`` steps, then playing greedily.

    The two-outcome model: with probability p_i the challenger is at least
    delta better and every step pays q_bar_j + delta. Otherwise the t
    committed steps pay at least b and the greedy continuation pays q_bar_j.
    Geometric tails are evaluated in closed form.
    """
    q, d, p, b = query.q_bar_j, query.delta, query.p_i, query.b
    upside = (q + d) * p
    tail = query.discount.tail_mass(query.t)
    head = query.discount.head_mass(query.t)
    return tail * (upside + q * (1.0 - p)) + head * (upside + b * (1.0 - p))


def greedy_utility(q_bar_j: float, discount: DiscountSpec) -> float:
    """Return of playing the current-best arm for the whole horizon."""
    return q_bar_j * discount.total_mass()


def should_explore_geometric(
    q_bar_j: float, delta: float, p_i: float, gamma: float
) -> bool:
    """Explore-or-exploit rule for the geometric (infinite) horizon, b = 0.

    Explores iff a one-step commitment to the challenger has a strictly
    higher bounded return than staying greedy, i.e. iff

        (q_bar_j - (q_bar_j + delta) * p_i) / ((1 - p_i) * q_bar_j) < gamma.

    Degenerate denominators resolve by the underlying utility comparison:
    p_i = 1 always explores (the numerator is -delta < 0), and q_bar_j = 0
    explores iff p_i > 0 (greedy return is zero, exploring return is
    delta * p_i * mass). Ties never explore.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if not 0.0 <= p_i <= 1.0:
        raise ValueError(f"p_i must be in [0, 1], got {p_i}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if q_bar_j < 0.0:
        raise ValueError(f"q_bar_j must be >= 0 under the b = 0 normalization, got {q_bar_j}")
    if p_i == 1.0:
        return True
    if q_bar_j == 0.0:
        return p_i > 0.0
    lhs = (q_bar_j - (q_bar_j + delta) * p_i) / ((1.0 - p_i) * q_bar_j)
    return lhs < gamma


def median_gamma_threshold(q_bar_j: float, delta_median: float) -> float:
    """Discount threshold when the challenger's margin belief is at its median.

    ``delta_median`` is the margin for which p_i = 1/2. Exploration pays
    iff gamma exceeds the returned value (q_bar_j - delta) / q_bar_j.
    """
    if q_bar_j <= 0.0:
        raise ValueError(
            "q_bar_j must be > 0; at q_bar_j = 0 exploration pays for any "
            "positive margin, no threshold exists"
        )
    return (q_bar_j - delta_median) / q_bar_j


def should_explore_finite(q_bar_j: float, delta: float, p_i: float, n: int) -> bool:
    """Explore-or-exploit rule for an undiscounted window of n future steps, b = 0.

    Explores iff n * delta * p_i > q_bar_j - (q_bar_j + delta) * p_i.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if not 0.0 <= p_i <= 1.0:
        raise ValueError(f"p_i must be in [0, 1], got {p_i}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if q_bar_j < 0.0:
        raise ValueError(f"q_bar_j must be >= 0 under the b = 0 normalization, got {q_bar_j}")
    return n * delta * p_i > q_bar_j - (q_bar_j + delta) * p_i


def gamma_dist_condition(f_max: float, q_bar_j: float, gamma: float) -> bool:
    """Distribution-level exploration condition.

    ``f_max`` is the supremum over delta > 0 of delta * p(delta) / (1 - p(delta))
    for the belief at hand. Exploration must be performed iff
    f_max - (1 - gamma) * q_bar_j > 0.
    """
    return f_max - (1.0 - gamma) * q_bar_j > 0.0


@dataclass(frozen=True)
class ExponentialBelief:
    """Shifted-exponential belief over the challenger's margin.

    Tail P(X > delta) = exp(-beta * (delta - mu)) for delta > mu, else 1.
    """

    beta: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        if self.beta <= 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")

    def tail(self, delta: float) -> float:
        if delta <= self.mu:
            return 1.0
        return math.exp(-self.beta * (delta - self.mu))


class DeltaStarResult(NamedTuple):
    delta_star: float
    f_at_star: float
    degenerate: bool


def _margin_gain(delta: float, beta: float, c: float) -> float:
    """f(delta) = delta / (exp(beta * (c + delta)) - 1), the weighted-margin gain."""
    return delta / math.expm1(beta * (c + delta))


def exponential_delta_star(belief: ExponentialBelief, q_bar_j: float) -> DeltaStarResult:
    """Maximizer of the margin gain f(delta) under an exponential belief.

    With c = q_bar_j - mu >= 0, f(delta) = delta / (exp(beta*(c+delta)) - 1)
    is maximized where exp(beta*(c+delta)) * (1 - beta*delta) = 1. The root
    always lies in (0, 1/beta) for c > 0 and is found by bracketed Newton
    iteration on the log of that stationarity residual (no overflow for
    large beta*c), with midpoint fallback when a Newton step leaves the
    bracket. At c = 0 the gain is decreasing with supremum 1/beta at 0+,
    reported with the degenerate flag set.
    """
    beta = belief.beta
    c = q_bar_j - belief.mu
    if c < 0.0:
        raise ValueError(
            f"q_bar_j ({q_bar_j}) must be >= the belief location mu ({belief.mu})"
        )
    if c == 0.0:
        return DeltaStarResult(0.0, 1.0 / beta, True)

    # Log-form residual r(x) = beta*(c+x) + log(1 - beta*x): strictly
    # decreasing on (0, 1/beta), positive at 0+, -inf at 1/beta.
    def residual(x: float) -> float:
        return beta * (c + x) + math.log1p(-beta * x)

    lo, hi = 0.0, 1.0 / beta
    x = 0.5 * hi
    for _ in range(200):
        r = residual(x)
        if abs(r) <= 1e-12:
            break
        if r > 0.0:
            lo = x
        else:
            hi = x
        # dr/dx = -beta**2 * x / (1 - beta * x)
        slope = -beta * beta * x / (1.0 - beta * x)
        candidate = x - r / slope
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if candidate == x:
            break
        x = candidate
    return DeltaStarResult(x, _margin_gain(x, beta, c), False)


def solve_scalar_root(
    fn: Callable[[float], float], lo: float, hi: float, tol: float
) -> float:
    """Bisection root solve on [lo, hi].

    Returns x with |fn(x)| <= tol or bracket width <= tol. Deterministic.
    Raises BracketError when fn(lo) and fn(hi) do not straddle zero.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    f_lo = fn(lo)
    f_hi = fn(hi)
    if abs(f_lo) <= tol:
        return lo
    if abs(f_hi) <= tol:
        return hi
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:  # bracket at float resolution
            break
        f_mid = fn(mid)
        if abs(f_mid) <= tol:
            return mid
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
