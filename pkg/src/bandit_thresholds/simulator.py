"""Bernoulli bandit environments and the multi-run experiment protocol.

Each run samples a fresh instance (arm means i.i.d. uniform on [0, 1]),
executes every policy of the roster on that same instance with its own
derived seed, and aggregates per-step reward across runs. Runs are
independent units of parallelism; aggregation is order-independent, so
serial and parallel execution produce identical curves.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Iterable, Optional

import numpy as np

from .policies import PolicyConfig, make_policy


def mix_seed(*parts: int) -> int:
    """Deterministic 64-bit mix of integer components into one seed."""
    for part in parts:
        if part < 0:
            raise ValueError(f"seed components must be non-negative, got {part}")
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class BanditInstance:
    """Hidden expected rewards of one Bernoulli bandit task."""

    arm_means: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "arm_means", np.asarray(self.arm_means, dtype=np.float64))
        if self.arm_means.ndim != 1 or self.arm_means.size < 1:
            raise ValueError("arm_means must be a non-empty 1-d array")
        if np.any(self.arm_means < 0.0) or np.any(self.arm_means > 1.0):
            raise ValueError("arm means must lie in [0, 1]")

    @property
    def num_arms(self) -> int:
        return self.arm_means.size

    def pull(self, arm: int, rng: np.random.Generator) -> int:
        """Bernoulli reward: 1 with probability arm_means[arm]."""
        if not 0 <= arm < self.num_arms:
            raise ValueError(f"arm index {arm} out of range [0, {self.num_arms})")
        return int(rng.random() < self.arm_means[arm])


def sample_instance(num_arms: int, rng: np.random.Generator) -> BanditInstance:
    """Instance with arm means drawn i.i.d. uniform on [0, 1]."""
    if num_arms < 1:
        raise ValueError(f"num_arms must be >= 1, got {num_arms}")
    return BanditInstance(arm_means=rng.uniform(0.0, 1.0, size=num_arms))


@dataclass(frozen=True)
class ExperimentConfig:
    """Roster-level description of one benchmark experiment."""

    num_arms: int
    num_runs: int
    horizon: int
    master_seed: int
    policies: tuple[PolicyConfig, ...]
    smoothing_window: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "policies", tuple(self.policies))
        if self.num_arms < 1:
            raise ValueError(f"num_arms must be >= 1, got {self.num_arms}")
        if self.num_runs < 1:
            raise ValueError(f"num_runs must be >= 1, got {self.num_runs}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be non-negative, got {self.master_seed}")
        if not 1 <= self.smoothing_window <= self.horizon:
            raise ValueError(
                f"smoothing_window must be in [1, horizon], got {self.smoothing_window}"
            )
        if not self.policies:
            raise ValueError("need at least one policy")
        labels = [p.display_label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"policy labels must be unique, got {labels}")


@dataclass
class RewardCurve:
    """Per-step reward of one policy aggregated across runs."""

    policy_label: str
    mean_reward: np.ndarray
    stderr: np.ndarray
    smoothed_mean: np.ndarray
    num_runs: int
    run_rewards: np.ndarray | None = None  # (num_runs, horizon), kept on request


def moving_average(series: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the warm-up prefix averages what is available.

    Output has the input's length: out[t] = mean(series[max(0, t-window+1) .. t]).
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    series = np.asarray(series, dtype=np.float64)
    if window == 1:
        return series.copy()
    csum = np.cumsum(series)
    out = np.empty_like(csum)
    head = min(window, series.size)
    out[:head] = csum[:head] / np.arange(1, head + 1)
    if series.size > window:
        out[window:] = (csum[window:] - csum[:-window]) / window
    return out


def run_episode(
    env, policy_config: PolicyConfig, horizon: int, run_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """One seeded episode: returns (reward series, chosen-arm series).

    ``env`` needs ``num_arms`` and ``pull(arm, rng)``; the policy and the
    environment consume independent streams derived from run_seed, so the
    whole trajectory is a deterministic function of (env, config, seed).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    policy_ss, env_ss = np.random.SeedSequence(run_seed).spawn(2)
    policy_rng = np.random.default_rng(policy_ss)
    env_rng = np.random.default_rng(env_ss)
    policy = make_policy(
        policy_config, env.num_arms, policy_rng, arm_means=getattr(env, "arm_means", None)
    )
    rewards = np.empty(horizon, dtype=np.float64)
    arms = np.empty(horizon, dtype=np.int64)
    for t in range(horizon):
        arm = policy.select(policy_rng)
        reward = env.pull(arm, env_rng)
        policy.update(arm, reward, policy_rng)
        rewards[t] = reward
        arms[t] = arm
    return rewards, arms


def _run_single(config: ExperimentConfig, run_index: int) -> np.ndarray:
    """All policies of the roster on the run's shared instance: (P, horizon)."""
    run_seed = mix_seed(config.master_seed, run_index)
    instance = sample_instance(config.num_arms, np.random.default_rng(run_seed))
    out = np.empty((len(config.policies), config.horizon), dtype=np.float32)
    for p_idx, policy_config in enumerate(config.policies):
        rewards, _ = run_episode(
            instance, policy_config, config.horizon, mix_seed(run_seed, p_idx)
        )
        out[p_idx] = rewards
    return out


def run_experiment(
    config: ExperimentConfig, jobs: int = 1, keep_runs: bool = False
) -> list[RewardCurve]:
    """Execute the full protocol and aggregate one RewardCurve per policy.

    ``jobs > 1`` distributes runs over processes; results are folded in run
    order either way, so the curves are bit-identical to a serial pass.
    ``keep_runs`` retains the per-run reward matrix on each curve (needed
    for windowed across-run statistics).
    """
    num_policies = len(config.policies)
    sums = np.zeros((num_policies, config.horizon), dtype=np.float64)
    sumsq = np.zeros((num_policies, config.horizon), dtype=np.float64)
    kept = (
        np.empty((num_policies, config.num_runs, config.horizon), dtype=np.float32)
        if keep_runs
        else None
    )

    runner = partial(_run_single, config)
    run_indices = range(config.num_runs)
    if jobs > 1:
        executor = ProcessPoolExecutor(max_workers=jobs)
        chunk = max(1, config.num_runs // (jobs * 8))
        results: Iterable[np.ndarray] = executor.map(runner, run_indices, chunksize=chunk)
    else:
        executor = None
        results = map(runner, run_indices)
    try:
        for run_index, block in zip(run_indices, results):
            block64 = block.astype(np.float64)
            sums += block64
            sumsq += block64**2
            if kept is not None:
                kept[:, run_index, :] = block
    finally:
        if executor is not None:
            executor.shutdown()

    n = config.num_runs
    means = sums / n
    if n > 1:
        variance = np.maximum(sumsq - n * means**2, 0.0) / (n - 1)
        stderr = np.sqrt(variance / n)
    else:
        stderr = np.zeros_like(means)

    curves = []
    for p_idx, policy_config in enumerate(config.policies):
        curves.append(
            RewardCurve(
                policy_label=policy_config.display_label,
                mean_reward=means[p_idx],
                stderr=stderr[p_idx],
                smoothed_mean=moving_average(means[p_idx], config.smoothing_window),
                num_runs=n,
                run_rewards=kept[p_idx] if kept is not None else None,
            )
        )
    return curves


def window_run_stats(
    curve: RewardCurve, start: int, stop: Optional[int] = None
) -> tuple[float, float]:
    """Across-run mean and standard error of the per-run mean reward on [start, stop).

    Requires the curve to have been produced with keep_runs=True; the
    per-step stderr series cannot stand in because steps within a run are
    correlated.
    """
    if curve.run_rewards is None:
        raise ValueError("curve was aggregated without keep_runs=True")
    window = curve.run_rewards[:, start:stop]
    if window.shape[1] < 1:
        raise ValueError(f"empty window [{start}, {stop})")
    per_run = window.mean(axis=1, dtype=np.float64)
    mean = float(per_run.mean())
    if per_run.size > 1:
        se = float(per_run.std(ddof=1) / np.sqrt(per_run.size))
    else:
        se = 0.0
    return mean, se
