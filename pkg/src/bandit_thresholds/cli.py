"""Command-line benchmark harness.

Subcommands:

* ``run``: execute one experiment described by flags and/or a TOML config.
* ``reproduce-fig1``: the 16- and 128-arm benchmark preset (e-greedy,
  Thompson, optimistic selection at three discount levels).
* ``reproduce-fig2``: the 256-arm preset (Thompson, optimistic selection,
  VPI and explore-then-commit baselines).
* ``thresholds``: evaluate one explore-or-exploit decision interactively.

Experiments write plot-ready ``curves.csv`` and ``summary.csv`` files;
nothing is rendered. Exit codes: 0 success, 1 config error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import policies as pol
from . import thresholds as th
from .simulator import ExperimentConfig, RewardCurve, moving_average, run_experiment

ENV_SEED_VAR = "BANDIT_THRESHOLDS_SEED"
DEFAULT_SEED = 0
DEFAULT_OUTPUT = "results"

CURVES_HEADER = ["policy", "step", "mean_reward", "stderr", "smoothed_mean"]
SUMMARY_HEADER = ["metric", "policy", "other_policy", "value"]

KIND_ALIASES = {
    "e-greedy": pol.EPSILON_GREEDY,
    "egreedy": pol.EPSILON_GREEDY,
    "epsilon-greedy": pol.EPSILON_GREEDY,
    "thompson": pol.THOMPSON,
    "sampling": pol.THOMPSON,
    "opt": pol.OPTIMISTIC_STOCHASTIC,
    "optimistic-stochastic": pol.OPTIMISTIC_STOCHASTIC,
    "opt-exists": pol.OPTIMISTIC_EXISTS_DELTA,
    "optimistic-exists-delta": pol.OPTIMISTIC_EXISTS_DELTA,
    "vpi": pol.VPI,
    "etc": pol.EXPLORE_THEN_COMMIT,
    "e3": pol.EXPLORE_THEN_COMMIT,
    "explore-then-commit": pol.EXPLORE_THEN_COMMIT,
    "oracle": pol.ORACLE,
}

# TOML policy-table key -> PolicyConfig field
_POLICY_KEYS = {
    "kind": "kind",
    "epsilon": "epsilon",
    "alpha": "alpha",
    "gamma": "gamma",
    "N": "horizon_n",
    "K": "num_members",
    "mask_prob": "mask_prob",
    "mask_dist": "mask_dist",
    "b": "b",
    "commit_budget": "commit_budget",
    "delta_grid_step": "delta_grid_step",
    "label": "label",
}

_EXPERIMENT_KEYS = ("arms", "runs", "horizon", "seed", "window")


class ConfigError(Exception):
    """Invalid, incomplete, or contradictory configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); we map to exit 1
        raise ConfigError(message)


def _resolve_kind(name: str) -> str:
    kind = KIND_ALIASES.get(name.strip().lower())
    if kind is None:
        raise ConfigError(f"unknown policy kind {name!r} (known: {sorted(KIND_ALIASES)})")
    return kind


def _build_policy(fields: Mapping[str, object], source: str) -> pol.PolicyConfig:
    kwargs = dict(fields)
    kind = kwargs.pop("kind", None)
    if kind is None:
        raise ConfigError(f"{source}: policy entry is missing 'kind'")
    try:
        return pol.PolicyConfig(kind=_resolve_kind(str(kind)), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_config(
    path: str | Path | None = None,
    overrides: Mapping[str, object] | None = None,
    policy_overrides: Sequence[Mapping[str, object]] | None = None,
) -> ExperimentConfig:
    """Merge a TOML config file with flag values into a validated config.

    Flag values override file values; a roster given via repeated --policy
    flags replaces the file's [[policy]] tables wholesale. Unknown keys and
    out-of-range values raise ConfigError naming the offender.
    """
    overrides = dict(overrides or {})
    file_values: dict[str, object] = {}
    file_policies: list[Mapping[str, object]] = []

    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for key, value in data.items():
            if key == "policy":
                if not isinstance(value, list):
                    raise ConfigError(f"{path}: 'policy' must be an array of tables")
                file_policies = value
            elif key in _EXPERIMENT_KEYS:
                file_values[key] = value
            else:
                raise ConfigError(f"{path}: unknown config key {key!r}")
        for i, table in enumerate(file_policies):
            for key in table:
                if key not in _POLICY_KEYS:
                    raise ConfigError(f"{path}: policy #{i + 1}: unknown key {key!r}")

    def setting(key: str, default):
        if overrides.get(key) is not None:
            return overrides[key]
        if key in file_values:
            return file_values[key]
        return default

    seed = setting("seed", None)
    if seed is None:
        env_seed = os.environ.get(ENV_SEED_VAR)
        if env_seed is not None:
            try:
                seed = int(env_seed)
            except ValueError as exc:
                raise ConfigError(f"{ENV_SEED_VAR} must be an integer, got {env_seed!r}") from exc
        else:
            seed = DEFAULT_SEED

    if policy_overrides:
        roster = [_build_policy(fields, "flags") for fields in policy_overrides]
    elif file_policies:
        roster = [
            _build_policy({_POLICY_KEYS[k]: v for k, v in table.items()}, f"{path}: policy #{i + 1}")
            for i, table in enumerate(file_policies)
        ]
    else:
        raise ConfigError("no policies configured (use --policy or [[policy]] tables)")

    try:
        return ExperimentConfig(
            num_arms=int(setting("arms", 16)),
            num_runs=int(setting("runs", 200)),
            horizon=int(setting("horizon", 5000)),
            master_seed=int(seed),
            policies=tuple(roster),
            smoothing_window=int(setting("window", 10)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def emit_curves_csv(curves: Sequence[RewardCurve], path: str | Path) -> None:
    """Write the per-step curves, rows sorted by (policy, step), 10 significant digits."""
    if not curves:
        raise ValueError("no curves to emit")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVES_HEADER)
        for curve in sorted(curves, key=lambda c: c.policy_label):
            for step in range(curve.mean_reward.size):
                writer.writerow(
                    [
                        curve.policy_label,
                        step,
                        _fmt(curve.mean_reward[step]),
                        _fmt(curve.stderr[step]),
                        _fmt(curve.smoothed_mean[step]),
                    ]
                )


def load_curves_csv(path: str | Path) -> dict[str, dict[str, np.ndarray]]:
    """Parse an emitted curves.csv back into per-policy series."""
    series: dict[str, dict[str, list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CURVES_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            entry = series.setdefault(
                row["policy"], {"mean_reward": [], "stderr": [], "smoothed_mean": []}
            )
            for column in ("mean_reward", "stderr", "smoothed_mean"):
                entry[column].append(float(row[column]))
    return {
        label: {column: np.asarray(vals) for column, vals in entry.items()}
        for label, entry in series.items()
    }


@dataclass(frozen=True)
class SummaryTable:
    """Scalar digest of an experiment's curves."""

    final_window: int
    final_window_means: dict[str, float]
    overall_means: dict[str, float]
    overtake_steps: dict[tuple[str, str], int]  # (a, b) -> first step a's smoothed curve > b's


def summarize(curves: Sequence[RewardCurve], smoothing_window: int) -> SummaryTable:
    """Final-window means, overall means, and pairwise first-overtake steps.

    The final window is the last 500 steps, shrunk to horizon/10 for short
    experiments. Overtakes compare curves smoothed at ``smoothing_window``;
    -1 records that one curve never exceeds the other.
    """
    horizon = curves[0].mean_reward.size
    window = 500 if horizon >= 500 else max(1, horizon // 10)
    smoothed = {
        c.policy_label: moving_average(c.mean_reward, smoothing_window) for c in curves
    }
    final_means = {c.policy_label: float(c.mean_reward[-window:].mean()) for c in curves}
    overall = {c.policy_label: float(c.mean_reward.mean()) for c in curves}
    overtakes: dict[tuple[str, str], int] = {}
    for a in sorted(smoothed):
        for b in sorted(smoothed):
            if a == b:
                continue
            above = np.flatnonzero(smoothed[a] > smoothed[b])
            overtakes[(a, b)] = int(above[0]) if above.size else -1
    return SummaryTable(window, final_means, overall, overtakes)


def emit_summary(
    curves: Sequence[RewardCurve],
    smoothing_window: int,
    csv_path: str | Path | None = None,
    out=sys.stdout,
) -> SummaryTable:
    """Print the summary table and optionally write it as tidy CSV."""
    table = summarize(curves, smoothing_window)
    labels = sorted(table.final_window_means)
    width = max(len(label) for label in labels)
    print(f"{'policy':<{width}}  final-{table.final_window} mean  overall mean", file=out)
    for label in labels:
        print(
            f"{label:<{width}}  {table.final_window_means[label]:>15.6f}"
            f"  {table.overall_means[label]:>12.6f}",
            file=out,
        )
    print("first overtake steps (smoothed; -1 = never):", file=out)
    for (a, b), step in table.overtake_steps.items():
        print(f"  {a} > {b}: {step}", file=out)

    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_HEADER)
            for label in labels:
                writer.writerow(
                    ["final_window_mean", label, "", _fmt(table.final_window_means[label])]
                )
            for label in labels:
                writer.writerow(["overall_mean", label, "", _fmt(table.overall_means[label])])
            for (a, b), step in table.overtake_steps.items():
                writer.writerow(["overtake_step", a, b, str(step)])
    return table


def _preset_policies(name: str) -> list[pol.PolicyConfig]:
    if name == "fig1":
        return [
            pol.PolicyConfig(kind=pol.EPSILON_GREEDY, epsilon=0.01, alpha=0.01),
            pol.PolicyConfig(kind=pol.THOMPSON, num_members=16, alpha=0.01),
            pol.PolicyConfig(kind=pol.OPTIMISTIC_STOCHASTIC, gamma=0.5, num_members=16, alpha=0.01, b=0.0),
            pol.PolicyConfig(kind=pol.OPTIMISTIC_STOCHASTIC, gamma=0.9, num_members=16, alpha=0.01, b=0.0),
            pol.PolicyConfig(kind=pol.OPTIMISTIC_STOCHASTIC, gamma=0.99, num_members=16, alpha=0.01, b=0.0),
        ]
    return [
        pol.PolicyConfig(kind=pol.THOMPSON, num_members=16, alpha=0.01),
        pol.PolicyConfig(kind=pol.OPTIMISTIC_STOCHASTIC, gamma=0.99, num_members=16, alpha=0.01, b=0.0),
        pol.PolicyConfig(kind=pol.VPI, num_members=16, alpha=0.01),
        pol.PolicyConfig(kind=pol.EXPLORE_THEN_COMMIT, commit_budget=16),
    ]


def _preset_scale(scale: str) -> tuple[int, int]:
    """(runs, horizon) for a preset scale."""
    if scale == "desk":
        return 200, 2000
    return 1000, 5000


def _run_and_emit(config: ExperimentConfig, outdir: Path, jobs: int) -> None:
    outdir.mkdir(parents=True, exist_ok=True)  # fail on unwritable output up front
    curves = run_experiment(config, jobs=jobs)
    emit_curves_csv(curves, outdir / "curves.csv")
    print(f"== {outdir} (arms={config.num_arms}, runs={config.num_runs}, "
          f"horizon={config.horizon}, seed={config.master_seed})")
    emit_summary(curves, config.smoothing_window, outdir / "summary.csv")


def _policy_fields_from_flags(args: argparse.Namespace) -> list[dict[str, object]]:
    shared: dict[str, object] = {}
    for flag, field in (
        ("epsilon", "epsilon"),
        ("alpha", "alpha"),
        ("gamma", "gamma"),
        ("N", "horizon_n"),
        ("K", "num_members"),
        ("mask_prob", "mask_prob"),
        ("b", "b"),
        ("commit_budget", "commit_budget"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            shared[field] = value
    return [dict(shared, kind=name) for name in args.policy or []]


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "arms": args.arms,
        "runs": args.runs,
        "horizon": args.horizon,
        "seed": args.seed,
        "window": args.window,
    }
    config = parse_config(args.config, overrides, _policy_fields_from_flags(args))
    _run_and_emit(config, Path(args.output), args.jobs)
    return 0


def cmd_reproduce(name: str, arms_list: tuple[int, ...], args: argparse.Namespace) -> int:
    runs, horizon = _preset_scale(args.scale)
    if args.runs is not None:
        runs = args.runs
    if args.horizon is not None:
        horizon = args.horizon
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get(ENV_SEED_VAR, DEFAULT_SEED))
    for arms in arms_list:
        try:
            config = ExperimentConfig(
                num_arms=arms,
                num_runs=runs,
                horizon=horizon,
                master_seed=seed,
                policies=tuple(_preset_policies(name)),
                smoothing_window=args.window if args.window is not None else 10,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        _run_and_emit(config, Path(args.output) / f"{name}_arms{arms}", args.jobs)
    return 0


def cmd_thresholds(args: argparse.Namespace) -> int:
    if (args.gamma is None) == (args.N is None):
        raise ConfigError("give exactly one of --gamma or --N")
    q_shifted = args.qbar - args.b  # decision rules take b = 0 normalized rewards
    try:
        if args.gamma is not None:
            discount = th.DiscountSpec.geometric(args.gamma)
            explore = th.should_explore_geometric(q_shifted, args.delta, args.p, args.gamma)
        else:
            discount = th.DiscountSpec.uniform_finite(args.N)
            explore = th.should_explore_finite(q_shifted, args.delta, args.p, args.N)
        query = th.ThresholdQuery(
            q_bar_j=args.qbar, delta=args.delta, p_i=args.p, b=args.b, t=1, discount=discount
        )
        utility = th.exploration_utility(query)
        baseline = th.greedy_utility(args.qbar, discount)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    print(f"decision: {'explore' if explore else 'exploit'}")
    if args.gamma is not None:
        if args.p < 1.0 and q_shifted > 0.0:
            lhs = (q_shifted - (q_shifted + args.delta) * args.p) / ((1.0 - args.p) * q_shifted)
            print(f"gamma threshold: {_fmt(lhs)} {'<' if explore else '>='} gamma = {_fmt(args.gamma)}")
        else:
            print("gamma threshold: degenerate (exploring dominates for any gamma)")
    else:
        lhs = args.N * args.delta * args.p
        rhs = q_shifted - (q_shifted + args.delta) * args.p
        print(f"window gain: {_fmt(lhs)} {'>' if explore else '<='} holdback = {_fmt(rhs)}")
    print(f"one-step-commit utility U(T=1): {_fmt(utility)}")
    print(f"greedy utility: {_fmt(baseline)}")
    return 0


def _add_experiment_flags(parser: argparse.ArgumentParser, with_policies: bool) -> None:
    parser.add_argument("--arms", type=int, help="number of arms")
    parser.add_argument("--runs", type=int, help="number of independent runs")
    parser.add_argument("--horizon", type=int, help="steps per run")
    parser.add_argument("--seed", type=int, help=f"master seed (falls back to ${ENV_SEED_VAR}, then {DEFAULT_SEED})")
    parser.add_argument("--window", type=int, help="smoothing window for reported curves")
    parser.add_argument("--output", default=DEFAULT_OUTPUT, help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for runs")
    if with_policies:
        parser.add_argument(
            "--policy",
            action="append",
            metavar="KIND",
            help="policy to run (repeatable): e-greedy, thompson, opt, opt-exists, vpi, etc, oracle",
        )
        parser.add_argument("--epsilon", type=float, help="exploration probability (e-greedy)")
        parser.add_argument("--alpha", type=float, help="estimate step size")
        parser.add_argument("--gamma", type=float, help="geometric discount (opt kinds)")
        parser.add_argument("--N", type=int, help="finite horizon (opt kinds)")
        parser.add_argument("--K", type=int, help="ensemble size")
        parser.add_argument("--mask-prob", dest="mask_prob", type=float, help="bootstrap update-mask probability")
        parser.add_argument("--b", type=float, help="reward lower bound")
        parser.add_argument("--commit-budget", dest="commit_budget", type=int, help="pulls per arm before committing (etc)")
        parser.add_argument("--config", help="TOML config file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bandit-thresholds", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run_p = sub.add_parser("run", help="run one configured experiment")
    _add_experiment_flags(run_p, with_policies=True)
    run_p.set_defaults(func=cmd_run)

    for name, arms in (("reproduce-fig1", (16, 128)), ("reproduce-fig2", (256,))):
        preset = name.removeprefix("reproduce-")
        p = sub.add_parser(name, help=f"{preset} benchmark preset ({', '.join(map(str, arms))} arms)")
        _add_experiment_flags(p, with_policies=False)
        p.add_argument("--scale", choices=("full", "desk"), default="full",
                       help="full = 1000 runs x 5000 steps; desk = 200 x 2000")
        p.set_defaults(func=lambda a, _n=preset, _arms=arms: cmd_reproduce(_n, _arms, a))

    th_p = sub.add_parser("thresholds", help="evaluate one explore-or-exploit decision")
    th_p.add_argument("--qbar", type=float, required=True, help="mean of the current-best arm")
    th_p.add_argument("--delta", type=float, required=True, help="hypothesized challenger margin")
    th_p.add_argument("--p", type=float, required=True, help="belief probability of the margin")
    th_p.add_argument("--gamma", type=float, help="geometric discount")
    th_p.add_argument("--N", type=int, help="finite horizon")
    th_p.add_argument("--b", type=float, default=0.0, help="reward lower bound")
    th_p.set_defaults(func=cmd_thresholds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
