"""Beliefs over per-arm expected rewards.

Two representations:

* ``BeliefEnsemble``: a population of K point estimates per arm, kept
  diverse by randomly masked constant-step updates (an online bootstrap).
  Sampling a uniformly chosen member stands in for sampling the posterior.
* ``BetaPosterior``: exact conjugate pseudo-counts for Bernoulli rewards,
  used as a ground-truth oracle in tests.

Single point estimates are plain floats / float arrays; their update rule
lives with the policies that own them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

PriorSampler = Callable[[np.random.Generator, tuple[int, int]], np.ndarray]

BERNOULLI_MASK = "bernoulli"
EXPONENTIAL_MASK = "exponential"


def uniform_prior(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    """Default prior: member estimates drawn i.i.d. uniform on [0, 1]."""
    return rng.uniform(0.0, 1.0, size=shape)


@dataclass
class BeliefEnsemble:
    """Per-arm population of point estimates approximating a posterior.

    ``members[i, k]`` is the k-th estimate of arm i's expected reward.
    On each observed reward, every member of the played arm is updated
    with probability ``mask_prob`` (independent Bernoulli masks) by the
    convex step q <- q + step_size * (reward - q); unmasked members keep
    their value, which is what preserves population spread.

    ``mask_dist`` selects the mask family: "bernoulli" (the default) or
    "exponential", where the effective step is step_size * nu with
    nu ~ Exp(1), clamped to at most 1 so estimates stay convex
    combinations of past values and rewards.
    """

    members: np.ndarray
    step_size: float
    mask_prob: float = 0.5
    mask_dist: str = BERNOULLI_MASK

    def __post_init__(self) -> None:
        self.members = np.asarray(self.members, dtype=np.float64)
        if self.members.ndim != 2 or self.members.shape[0] < 1 or self.members.shape[1] < 1:
            raise ValueError(
                f"members must have shape (num_arms >= 1, K >= 1), got {self.members.shape}"
            )
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError(f"step_size must be in (0, 1], got {self.step_size}")
        if not 0.0 < self.mask_prob <= 1.0:
            raise ValueError(f"mask_prob must be in (0, 1], got {self.mask_prob}")
        if self.mask_dist not in (BERNOULLI_MASK, EXPONENTIAL_MASK):
            raise ValueError(f"unknown mask_dist {self.mask_dist!r}")

    @classmethod
    def from_prior(
        cls,
        num_arms: int,
        num_members: int,
        rng: np.random.Generator,
        prior_sampler: PriorSampler = uniform_prior,
        step_size: float = 0.01,
        mask_prob: float = 0.5,
        mask_dist: str = BERNOULLI_MASK,
    ) -> "BeliefEnsemble":
        """Initialize every member as an independent draw from the prior."""
        if num_arms < 1:
            raise ValueError(f"num_arms must be >= 1, got {num_arms}")
        if num_members < 1:
            raise ValueError(f"num_members must be >= 1, got {num_members}")
        members = np.asarray(prior_sampler(rng, (num_arms, num_members)), dtype=np.float64)
        if members.shape != (num_arms, num_members):
            raise ValueError(
                f"prior_sampler returned shape {members.shape}, "
                f"expected {(num_arms, num_members)}"
            )
        return cls(members=members, step_size=step_size, mask_prob=mask_prob, mask_dist=mask_dist)

    @property
    def num_arms(self) -> int:
        return self.members.shape[0]

    @property
    def num_members(self) -> int:
        return self.members.shape[1]

    def _check_arm(self, arm: int) -> None:
        if not 0 <= arm < self.num_arms:
            raise ValueError(f"arm index {arm} out of range [0, {self.num_arms})")

    def update(self, arm: int, member: int, reward: float, rng: np.random.Generator) -> None:
        """Apply one masked bootstrap update to the played arm.

        ``member`` is the index whose estimate acted this step; it is
        range-checked but the mask alone decides which members move.
        """
        self._check_arm(arm)
        if not 0 <= member < self.num_members:
            raise ValueError(f"member index {member} out of range [0, {self.num_members})")
        if self.mask_dist == BERNOULLI_MASK:
            nu = rng.random(self.num_members) < self.mask_prob
            step = self.step_size * nu
        else:
            nu = rng.exponential(1.0, size=self.num_members)
            step = np.minimum(self.step_size * nu, 1.0)
        row = self.members[arm]
        row += step * (reward - row)

    def sample_member_index(self, arm: int, rng: np.random.Generator) -> int:
        """Uniformly chosen member index for one arm."""
        self._check_arm(arm)
        return int(rng.integers(0, self.num_members))

    def sample(self, arm: int, rng: np.random.Generator) -> float:
        """Value of a uniformly chosen member of the arm."""
        return float(self.members[arm, self.sample_member_index(arm, rng)])

    def sample_all(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """One uniformly chosen member per arm: (indices, values)."""
        idx = rng.integers(0, self.num_members, size=self.num_arms)
        return idx, self.members[np.arange(self.num_arms), idx]

    def mean(self, arm: int) -> float:
        """Arithmetic mean of the arm's members."""
        self._check_arm(arm)
        return float(self.members[arm].mean())

    def means(self) -> np.ndarray:
        return self.members.mean(axis=1)

    def prob_exceeds(self, arm: int, threshold: float) -> float:
        """Fraction of the arm's members with value >= threshold."""
        self._check_arm(arm)
        return float(np.mean(self.members[arm] >= threshold))

    def fraction_at_least(self, thresholds: np.ndarray) -> np.ndarray:
        """Per-arm fraction of members >= the arm's own threshold."""
        thresholds = np.asarray(thresholds, dtype=np.float64)
        if thresholds.shape != (self.num_arms,):
            raise ValueError(
                f"thresholds must have shape ({self.num_arms},), got {thresholds.shape}"
            )
        return (self.members >= thresholds[:, None]).mean(axis=1)

    def copy(self) -> "BeliefEnsemble":
        return BeliefEnsemble(
            members=self.members.copy(),
            step_size=self.step_size,
            mask_prob=self.mask_prob,
            mask_dist=self.mask_dist,
        )


@dataclass(frozen=True)
class BetaPosterior:
    """Per-arm Beta(a, b) pseudo-counts, the exact posterior for Bernoulli rewards."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", np.asarray(self.a, dtype=np.float64))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("a and b must be 1-d arrays of equal length")
        if np.any(self.a <= 0.0) or np.any(self.b <= 0.0):
            raise ValueError("pseudo-counts must be positive")

    @classmethod
    def uniform(cls, num_arms: int) -> "BetaPosterior":
        """Beta(1, 1) on every arm."""
        return cls(a=np.ones(num_arms), b=np.ones(num_arms))

    @property
    def num_arms(self) -> int:
        return self.a.shape[0]

    def update(self, arm: int, reward: int) -> "BetaPosterior":
        """Posterior after one Bernoulli observation (success bumps a, failure b)."""
        if reward not in (0, 1):
            raise ValueError(f"reward must be 0 or 1, got {reward!r}")
        if not 0 <= arm < self.num_arms:
            raise ValueError(f"arm index {arm} out of range [0, {self.num_arms})")
        a = self.a.copy()
        b = self.b.copy()
        if reward == 1:
            a[arm] += 1.0
        else:
            b[arm] += 1.0
        return BetaPosterior(a=a, b=b)

    def prob_exceeds(self, arm_i: int, arm_j: int) -> float:
        """P(X > Y) for independent X ~ Beta(a_i, b_i), Y ~ Beta(a_j, b_j).

        Evaluated as E_X[F_Y(X)] by adaptive quadrature; absolute accuracy
        around 1e-8, far below any tolerance asserted against it.
        """
        for arm in (arm_i, arm_j):
            if not 0 <= arm < self.num_arms:
                raise ValueError(f"arm index {arm} out of range [0, {self.num_arms})")
        ai, bi = self.a[arm_i], self.b[arm_i]
        aj, bj = self.a[arm_j], self.b[arm_j]

        def integrand(x: float) -> float:
            return stats.beta.pdf(x, ai, bi) * stats.beta.cdf(x, aj, bj)

        value, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10)
        return float(value)
