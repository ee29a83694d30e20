"""Action-selection policies.

Selection rules over belief state: epsilon-greedy on point estimates,
Thompson sampling and two optimistic horizon-aware rules on bootstrap
ensembles, plus value-of-perfect-information and explore-then-commit
baselines. Functional one-shot selectors live alongside small stateful
wrappers that own the belief state across an episode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .beliefs import BERNOULLI_MASK, BeliefEnsemble
from .thresholds import DiscountSpec, greedy_utility

EPSILON_GREEDY = "epsilon-greedy"
THOMPSON = "thompson"
OPTIMISTIC_STOCHASTIC = "optimistic-stochastic"
OPTIMISTIC_EXISTS_DELTA = "optimistic-exists-delta"
VPI = "vpi"
EXPLORE_THEN_COMMIT = "explore-then-commit"
ORACLE = "oracle"  # diagnostic: plays the true best arm, bypasses learning

POLICY_KINDS = (
    EPSILON_GREEDY,
    THOMPSON,
    OPTIMISTIC_STOCHASTIC,
    OPTIMISTIC_EXISTS_DELTA,
    VPI,
    EXPLORE_THEN_COMMIT,
    ORACLE,
)

_ENSEMBLE_KINDS = (THOMPSON, OPTIMISTIC_STOCHASTIC, OPTIMISTIC_EXISTS_DELTA, VPI)
_DISCOUNT_KINDS = (OPTIMISTIC_STOCHASTIC, OPTIMISTIC_EXISTS_DELTA)


def argmax_with_ties(values: np.ndarray, rng: Optional[np.random.Generator] = None) -> int:
    """Index of the maximum; ties broken uniformly when an rng is given."""
    values = np.asarray(values)
    top = np.flatnonzero(values == values.max())
    if len(top) == 1 or rng is None:
        return int(top[0])
    return int(top[rng.integers(0, len(top))])


@dataclass(frozen=True)
class PolicyConfig:
    """Parameters of one policy in an experiment roster."""

    kind: str
    epsilon: float = 0.01
    alpha: float = 0.01
    gamma: float | None = None
    horizon_n: int | None = None
    b: float = 0.0
    num_members: int = 16
    mask_prob: float = 0.5
    mask_dist: str = BERNOULLI_MASK
    commit_budget: int = 16
    delta_grid_step: float = 1e-3
    label: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.num_members < 1:
            raise ValueError(f"K (ensemble size) must be >= 1, got {self.num_members}")
        if self.commit_budget < 1:
            raise ValueError(f"commit_budget must be >= 1, got {self.commit_budget}")
        if self.delta_grid_step <= 0.0:
            raise ValueError(f"delta_grid_step must be > 0, got {self.delta_grid_step}")
        if self.kind in _DISCOUNT_KINDS:
            if self.gamma is None and self.horizon_n is None:
                raise ValueError(f"{self.kind} needs gamma or a finite horizon N")
            if self.gamma is not None and self.horizon_n is not None:
                raise ValueError(f"{self.kind} takes gamma or N, not both")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.horizon_n is not None and self.horizon_n < 0:
            raise ValueError(f"N must be >= 0, got {self.horizon_n}")

    def discount(self) -> DiscountSpec:
        if self.horizon_n is not None:
            return DiscountSpec.uniform_finite(self.horizon_n)
        return DiscountSpec.geometric(self.gamma)

    @property
    def display_label(self) -> str:
        if self.label is not None:
            return self.label
        if self.kind == EPSILON_GREEDY:
            return f"e-greedy({self.epsilon:g})"
        if self.kind == THOMPSON:
            return "thompson"
        if self.kind == OPTIMISTIC_STOCHASTIC:
            return f"opt(N={self.horizon_n})" if self.horizon_n is not None else f"opt(gamma={self.gamma:g})"
        if self.kind == OPTIMISTIC_EXISTS_DELTA:
            return (
                f"opt-exists(N={self.horizon_n})"
                if self.horizon_n is not None
                else f"opt-exists(gamma={self.gamma:g})"
            )
        if self.kind == VPI:
            return "vpi"
        if self.kind == EXPLORE_THEN_COMMIT:
            return f"etc({self.commit_budget})"
        return "oracle"


@dataclass(frozen=True)
class SelectionTrace:
    """Full record of one optimistic stochastic selection.

    ``scores`` holds the commit utility per arm, with the greedy arm's slot
    carrying its whole-horizon greedy utility; ``sampled_deltas`` the margin
    x - q_bar_j implied by each arm's sampled member (NaN for the greedy
    arm, whose draw is unused); ``sampled_members`` the member index drawn
    per arm.
    """

    chosen_arm: int
    greedy_arm: int
    scores: np.ndarray
    sampled_deltas: np.ndarray
    sampled_members: np.ndarray


def epsilon_greedy_select(
    estimates: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Uniform arm with probability epsilon, else the argmax estimate."""
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.size < 1:
        raise ValueError("need at least one arm")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(0, estimates.size))
    return argmax_with_ties(estimates, rng)


def point_update(estimate: float, reward: float, alpha: float) -> float:
    """Constant-step estimate update q <- q + alpha * (reward - q)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return estimate + alpha * (reward - estimate)


def thompson_select(beliefs: BeliefEnsemble, rng: np.random.Generator) -> int:
    """Argmax over one sampled member value per arm.

    Repeated calls choose each arm with (empirical) probability that its
    expected reward is the highest under the ensemble distribution.
    """
    _, values = beliefs.sample_all(rng)
    return argmax_with_ties(values, rng)


def _commit_one_utility(
    q_bar_j: float,
    delta: np.ndarray,
    p_i: np.ndarray,
    b: float,
    discount: DiscountSpec,
) -> np.ndarray:
    """Vectorized lower bound on the return of a one-step commitment.

    Matches exploration_utility with t = 1 over aligned arrays of margins
    and exceedance probabilities.
    """
    upside = (q_bar_j + delta) * p_i
    tail = discount.tail_mass(1)
    head = discount.head_mass(1)
    return tail * (upside + q_bar_j * (1.0 - p_i)) + head * (upside + b * (1.0 - p_i))


def optimistic_stochastic_select(
    beliefs: BeliefEnsemble,
    discount: DiscountSpec,
    b: float,
    rng: np.random.Generator,
) -> SelectionTrace:
    """Horizon-aware exploration scored from one posterior sample per arm.

    Takes the greedy arm j by ensemble mean, hypothesizes for every other
    arm the margin delta = x - q_bar_j implied by its sampled member x,
    estimates the exceedance probability from the member population, and
    plays the arm whose one-step-commit utility beats the rest (the greedy
    arm competing with its full-horizon greedy utility).
    """
    means = beliefs.means()
    j = argmax_with_ties(means, rng)
    q_j = float(means[j])
    idx, x = beliefs.sample_all(rng)
    deltas = x - q_j
    p = beliefs.fraction_at_least(x)
    scores = _commit_one_utility(q_j, deltas, p, b, discount)
    scores[j] = greedy_utility(q_j, discount)
    deltas[j] = np.nan
    chosen = argmax_with_ties(scores, rng)
    return SelectionTrace(
        chosen_arm=chosen,
        greedy_arm=j,
        scores=scores,
        sampled_deltas=deltas,
        sampled_members=idx,
    )


def optimistic_exists_delta_select(
    beliefs: BeliefEnsemble,
    discount: DiscountSpec,
    b: float,
    delta_grid_step: float = 1e-3,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """First arm for which some margin makes a one-step commitment beat greedy.

    Scans margins over the grid {step, 2*step, ..., 1} with exceedance
    probabilities read off the member population; falls back to the greedy
    arm when no arm qualifies.
    """
    if delta_grid_step <= 0.0:
        raise ValueError(f"delta_grid_step must be > 0, got {delta_grid_step}")
    means = beliefs.means()
    j = argmax_with_ties(means, rng)
    q_j = float(means[j])
    baseline = greedy_utility(q_j, discount)
    grid = np.arange(delta_grid_step, 1.0 + 0.5 * delta_grid_step, delta_grid_step)
    for i in range(beliefs.num_arms):
        if i == j:
            continue
        p = (beliefs.members[i][None, :] >= (q_j + grid)[:, None]).mean(axis=1)
        u = _commit_one_utility(q_j, grid, p, b, discount)
        if np.any(u > baseline):
            return i
    return j


def vpi_scores(beliefs: BeliefEnsemble, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Mean estimate plus expected gain of learning each arm's true value.

    The incumbent's gain is how much it stands to lose to the runner-up
    (members below the runner-up mean); a challenger's gain is how much it
    stands to beat the incumbent by (members above the incumbent mean).
    """
    if beliefs.num_arms < 2:
        raise ValueError("VPI needs at least two arms")
    means = beliefs.means()
    best = argmax_with_ties(means, rng)
    q_best = float(means[best])
    runner_up = float(np.max(np.delete(means, best)))
    gains = np.maximum(0.0, beliefs.members - q_best).mean(axis=1)
    gains[best] = np.maximum(0.0, runner_up - beliefs.members[best]).mean()
    return means + gains


def vpi_select(beliefs: BeliefEnsemble, rng: Optional[np.random.Generator] = None) -> int:
    """Argmax of mean-plus-information-gain scores."""
    return argmax_with_ties(vpi_scores(beliefs, rng), rng)


@dataclass
class EtcState:
    """Pull counts, reward sums, and the frozen commitment of explore-then-commit."""

    pull_counts: np.ndarray
    reward_sums: np.ndarray
    committed_arm: int | None = None

    @classmethod
    def fresh(cls, num_arms: int) -> "EtcState":
        return cls(
            pull_counts=np.zeros(num_arms, dtype=np.int64),
            reward_sums=np.zeros(num_arms, dtype=np.float64),
        )


def explore_then_commit_select(
    state: EtcState, commit_budget: int, rng: Optional[np.random.Generator] = None
) -> int:
    """Round-robin over under-budget arms, then the empirical best forever.

    The commitment is frozen into the state on the first call after every
    arm has reached the budget.
    """
    if commit_budget < 1:
        raise ValueError(f"commit_budget must be >= 1, got {commit_budget}")
    if state.committed_arm is not None:
        return state.committed_arm
    under = np.flatnonzero(state.pull_counts < commit_budget)
    if under.size > 0:
        return int(under[np.argmin(state.pull_counts[under])])
    means = state.reward_sums / state.pull_counts
    state.committed_arm = argmax_with_ties(means, rng)
    return state.committed_arm


# ---------------------------------------------------------------------------
# Stateful wrappers used by the episode loop. Each owns its belief state;
# select/update are never invoked concurrently on one instance.
# ---------------------------------------------------------------------------


class EpsilonGreedyPolicy:
    def __init__(self, estimates: np.ndarray, epsilon: float, alpha: float) -> None:
        self.estimates = np.asarray(estimates, dtype=np.float64)
        self.epsilon = epsilon
        self.alpha = alpha

    def select(self, rng: np.random.Generator) -> int:
        return epsilon_greedy_select(self.estimates, self.epsilon, rng)

    def update(self, arm: int, reward: float, rng: np.random.Generator) -> None:
        self.estimates[arm] = point_update(self.estimates[arm], reward, self.alpha)


class _EnsemblePolicy:
    """Shared bootstrap-ensemble plumbing: masked update of the played arm."""

    def __init__(self, ensemble: BeliefEnsemble) -> None:
        self.ensemble = ensemble
        self._last_member: int | None = None

    def update(self, arm: int, reward: float, rng: np.random.Generator) -> None:
        member = self._last_member
        if member is None:
            member = self.ensemble.sample_member_index(arm, rng)
        self.ensemble.update(arm, member, reward, rng)
        self._last_member = None


class ThompsonPolicy(_EnsemblePolicy):
    def select(self, rng: np.random.Generator) -> int:
        idx, values = self.ensemble.sample_all(rng)
        arm = argmax_with_ties(values, rng)
        self._last_member = int(idx[arm])
        return arm


class OptimisticStochasticPolicy(_EnsemblePolicy):
    def __init__(self, ensemble: BeliefEnsemble, discount: DiscountSpec, b: float) -> None:
        super().__init__(ensemble)
        self.discount = discount
        self.b = b

    def select(self, rng: np.random.Generator) -> int:
        trace = optimistic_stochastic_select(self.ensemble, self.discount, self.b, rng)
        self._last_member = int(trace.sampled_members[trace.chosen_arm])
        return trace.chosen_arm


class OptimisticExistsDeltaPolicy(_EnsemblePolicy):
    def __init__(
        self, ensemble: BeliefEnsemble, discount: DiscountSpec, b: float, grid_step: float
    ) -> None:
        super().__init__(ensemble)
        self.discount = discount
        self.b = b
        self.grid_step = grid_step

    def select(self, rng: np.random.Generator) -> int:
        return optimistic_exists_delta_select(
            self.ensemble, self.discount, self.b, self.grid_step, rng
        )


class VpiPolicy(_EnsemblePolicy):
    def select(self, rng: np.random.Generator) -> int:
        return vpi_select(self.ensemble, rng)


class ExploreThenCommitPolicy:
    def __init__(self, num_arms: int, commit_budget: int) -> None:
        self.state = EtcState.fresh(num_arms)
        self.commit_budget = commit_budget

    def select(self, rng: np.random.Generator) -> int:
        return explore_then_commit_select(self.state, self.commit_budget, rng)

    def update(self, arm: int, reward: float, rng: np.random.Generator) -> None:
        self.state.pull_counts[arm] += 1
        self.state.reward_sums[arm] += reward


class OraclePolicy:
    """Plays the arm with the highest true mean. Diagnostic upper bound."""

    def __init__(self, best_arm: int) -> None:
        self.best_arm = best_arm

    def select(self, rng: np.random.Generator) -> int:
        return self.best_arm

    def update(self, arm: int, reward: float, rng: np.random.Generator) -> None:
        pass


def make_policy(
    config: PolicyConfig,
    num_arms: int,
    rng: np.random.Generator,
    arm_means: Optional[np.ndarray] = None,
):
    """Build the stateful policy for one episode, drawing its initial beliefs.

    ``arm_means`` is supplied by the simulator and consumed only by the
    oracle kind; learning policies never see it.
    """
    if num_arms < 1:
        raise ValueError(f"num_arms must be >= 1, got {num_arms}")
    if config.kind == EPSILON_GREEDY:
        return EpsilonGreedyPolicy(
            rng.uniform(0.0, 1.0, size=num_arms), config.epsilon, config.alpha
        )
    if config.kind in _ENSEMBLE_KINDS:
        ensemble = BeliefEnsemble.from_prior(
            num_arms,
            config.num_members,
            rng,
            step_size=config.alpha,
            mask_prob=config.mask_prob,
            mask_dist=config.mask_dist,
        )
        if config.kind == THOMPSON:
            return ThompsonPolicy(ensemble)
        if config.kind == OPTIMISTIC_STOCHASTIC:
            return OptimisticStochasticPolicy(ensemble, config.discount(), config.b)
        if config.kind == OPTIMISTIC_EXISTS_DELTA:
            return OptimisticExistsDeltaPolicy(
                ensemble, config.discount(), config.b, config.delta_grid_step
            )
        return VpiPolicy(ensemble)
    if config.kind == EXPLORE_THEN_COMMIT:
        return ExploreThenCommitPolicy(num_arms, config.commit_budget)
    if arm_means is None:
        raise ValueError("oracle policy needs the environment's true arm means")
    return OraclePolicy(int(np.argmax(arm_means)))
