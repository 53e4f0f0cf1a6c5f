"""Four-phase experiment pipeline.

Phase 1 collects expert demonstrations and trains the imitation policy.
Phase 2 watches a synthetic operator (softmax choices from the ground-truth
value gap) manage a small fleet and logs the choices. The two learned scorers
are fit to those choices. Phase 3 runs large-fleet trials with each scoring
variant switching the operator automatically, on paired seeds. Phase 4
retrains the imitation policy on each trial's operator demonstrations and
evaluates it autonomously.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fleet as fleet_mod
from .fleet import FleetConfig, MODE_ARGMAX, MODE_LUCE, choice_records_from_trace, run_fleet_trial
from .gridnav import EnvConfig, Episode
from .imitation import (
    DemoDataset,
    TAG_PHASE1,
    TAG_PHASE3_BASE,
    TAG_PHASE3_GT,
    TAG_PHASE3_LUCE,
    nn_policy,
)
from .rng import make_rng
from .scorers import (
    ChoiceDataset,
    KIND_BASELINE,
    KIND_GT,
    KIND_LUCE,
    Scorer,
    gt_scorer,
    top_one_agreement,
    train_baseline_scorer,
    train_luce_scorer,
)
from .synthexpert import build_expert, evaluate_policy_td, expert_policy_fn
from .tinynet import TrainConfig

# Seed-stream bases: each pipeline stage draws from its own block so stages
# never share random streams.
PHASE1_STREAM = 10_000
TD_EXPERT_STREAM = 20_000
TD_ROBOT_STREAM = 30_000
PHASE2_SEED_BASE = 40_000
HOLDOUT_SEED_BASE = 50_000
PHASE3_SEED_BASE = 60_000
PHASE4_STREAM = 70_000

DEMO_TAG_FOR_KIND = {
    KIND_GT: TAG_PHASE3_GT,
    KIND_LUCE: TAG_PHASE3_LUCE,
    KIND_BASELINE: TAG_PHASE3_BASE,
}


@dataclass(frozen=True)
class ExperimentPlan:
    phase1_episodes: int = 10
    phase2_fleet_size: int = 4
    phase2_trials: int = 50
    phase2_dwell: int = 1
    phase3_fleet_size: int = 12
    phase3_trials: int = 250
    phase3_dwell: int = 15
    phase4_dwell: int = 1
    phase4_eval_episodes: int = 8
    phase4_eval_seeds: int = 100
    trial_horizon: int = 300
    td_episodes: int = 8000
    holdout_fleets: int = 2000
    scorer_variants: tuple = (KIND_GT, KIND_LUCE, KIND_BASELINE)
    train: TrainConfig = TrainConfig()
    seed: int = 0

    def validate(self) -> None:
        for name in (
            "phase1_episodes",
            "phase2_fleet_size",
            "phase2_trials",
            "phase3_fleet_size",
            "phase3_trials",
            "phase4_dwell",
            "phase4_eval_episodes",
            "phase4_eval_seeds",
            "trial_horizon",
            "td_episodes",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        unknown = set(self.scorer_variants) - {KIND_GT, KIND_LUCE, KIND_BASELINE}
        if unknown:
            raise ValueError(f"unknown scorer variants: {sorted(unknown)}")

    def at_scale(self, scale: str) -> "ExperimentPlan":
        """'small' shrinks phase 3 to 25 trials for CI-sized runs."""
        if scale == "full":
            return self
        if scale == "small":
            return replace(self, phase3_trials=min(self.phase3_trials, 25))
        raise ValueError(f"unknown scale: {scale}")


def plan_from_toml(text: str) -> ExperimentPlan:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    raw = tomllib.loads(text)
    train_raw = raw.pop("train", {})
    kwargs = {}
    for key, value in raw.items():
        if key == "scorer_variants":
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    if train_raw:
        kwargs["train"] = TrainConfig(**train_raw)
    plan = ExperimentPlan(**kwargs)
    plan.validate()
    return plan


def load_plan(path) -> ExperimentPlan:
    with open(path) as f:
        return plan_from_toml(f.read())


# ---------------------------------------------------------------------------
# Phases


def run_phase1(plan: ExperimentPlan, env: EnvConfig, expert_fn) -> DemoDataset:
    """Expert rollouts recorded as (state, action) demonstration pairs."""
    plan.validate()
    pairs = []
    for i in range(plan.phase1_episodes):
        ep = Episode(env, make_rng(plan.seed, PHASE1_STREAM + i))
        while not ep.terminal:
            action = expert_fn(ep.state, ep.packs)
            pairs.append((ep.state, action))
            ep.step(action)
    return DemoDataset.from_pairs(pairs, TAG_PHASE1)


def fit_value_tables(plan: ExperimentPlan, env: EnvConfig, expert_fn, demos: DemoDataset):
    """TD(0) value tables for the expert and the imitation policy."""
    v_h = evaluate_policy_td(
        expert_fn, env, plan.td_episodes, seed=plan.seed, rng_stream=TD_EXPERT_STREAM
    )
    v_r = evaluate_policy_td(
        nn_policy(demos), env, plan.td_episodes, seed=plan.seed, rng_stream=TD_ROBOT_STREAM
    )
    return v_h, v_r


def run_phase2(
    plan: ExperimentPlan, env: EnvConfig, expert_fn, autonomy: DemoDataset, gt: Scorer
) -> ChoiceDataset:
    """Small-fleet trials with softmax-sampled choices from the ground-truth
    scorer; one choice record per switch decision."""
    records = []
    for i in range(plan.phase2_trials):
        cfg = FleetConfig(
            n=plan.phase2_fleet_size,
            dwell_period=plan.phase2_dwell,
            choice_mode=MODE_LUCE,
            horizon=plan.trial_horizon,
            seed=plan.seed + PHASE2_SEED_BASE + i,
        )
        trace = run_fleet_trial(env, cfg, gt, expert_fn, autonomy)
        records.extend(choice_records_from_trace(trace))
    return ChoiceDataset(tuple(records), plan.phase2_fleet_size)


def train_scorers(plan: ExperimentPlan, env: EnvConfig, choices: ChoiceDataset) -> dict:
    out = {}
    if KIND_LUCE in plan.scorer_variants:
        out[KIND_LUCE], _ = train_luce_scorer(choices, plan.train, env)
    if KIND_BASELINE in plan.scorer_variants:
        out[KIND_BASELINE], _ = train_baseline_scorer(choices, plan.train, env)
    return out


def make_holdout_fleets(
    plan: ExperimentPlan, env: EnvConfig, expert_fn, autonomy: DemoDataset, gt: Scorer
):
    """Held-out large-fleet snapshots for predictive-accuracy evaluation.

    States are pooled from trials on seeds disjoint from every other stage,
    then resampled into fleets whose robots occupy pairwise-distinct value
    cells. Consecutive raw snapshots put several robots in the same cell
    (identical tabular scores), which would grade scorers on index tie-breaks
    rather than ranking quality.
    """
    from .synthexpert import Discretization

    disc = Discretization()
    snapshot_trials = max(1, -(-plan.holdout_fleets // plan.trial_horizon))
    pool = []
    for trial in range(snapshot_trials):
        cfg = FleetConfig(
            n=plan.phase3_fleet_size,
            # dwell 1 regardless of the trial protocol: re-deciding every step
            # maximizes snapshot diversity in the pooled evaluation states
            dwell_period=1,
            choice_mode=MODE_ARGMAX,
            horizon=plan.trial_horizon,
            seed=plan.seed + HOLDOUT_SEED_BASE + trial,
        )
        trace = run_fleet_trial(env, cfg, gt, expert_fn, autonomy)
        for s in trace.steps:
            pool.extend(s.states)
    rng = make_rng(plan.seed, HOLDOUT_SEED_BASE)
    fleets = []
    while len(fleets) < plan.holdout_fleets:
        seen, fleet = set(), []
        while len(fleet) < plan.phase3_fleet_size:
            state = pool[int(rng.integers(len(pool)))]
            cell = disc.cell(env, state)
            if cell not in seen:
                seen.add(cell)
                fleet.append(state)
        fleets.append(tuple(fleet))
    return fleets


def run_phase3(
    plan: ExperimentPlan, env: EnvConfig, expert_fn, autonomy: DemoDataset, scorer: Scorer
):
    """Large-fleet argmax trials on the plan's paired seed set.

    Returns (traces, per-trial operator demo lists).
    """
    traces, demo_lists = [], []
    for i in range(plan.phase3_trials):
        cfg = FleetConfig(
            n=plan.phase3_fleet_size,
            dwell_period=plan.phase3_dwell,
            choice_mode=MODE_ARGMAX,
            horizon=plan.trial_horizon,
            seed=plan.seed + PHASE3_SEED_BASE + i,
        )
        trace = run_fleet_trial(env, cfg, scorer, expert_fn, autonomy)
        traces.append(trace)
        demo_lists.append(fleet_mod.extract_operator_demos(trace))
    return traces, demo_lists


def run_phase4_demo_trials(
    plan: ExperimentPlan, env: EnvConfig, expert_fn, autonomy: DemoDataset, scorer: Scorer
):
    """Demo-collection trials for the data-impact evaluation.

    Same paired seed set as the team-reward trials, but at the demo-collection
    dwell (default 1): re-deciding the allocation every step spreads operator
    demonstrations across exactly the states each scorer prioritizes, which is
    the quantity phase 4 measures. Long dwell windows instead fill the demo
    set with wherever the expert happened to drive, washing out the
    allocation signal. Returns per-trial operator demo lists.
    """
    _, demo_lists = run_phase3(replace(plan, phase3_dwell=plan.phase4_dwell), env,
                               expert_fn, autonomy, scorer)
    return demo_lists


def evaluate_policy_reward(
    policy, env: EnvConfig, episodes: int, seed: int, rng_stream: int
) -> float:
    """Mean episodic reward of a policy running autonomously."""
    totals = []
    for e in range(episodes):
        ep = Episode(env, make_rng(seed, rng_stream + e))
        total = 0.0
        while not ep.terminal:
            total += ep.step(policy(ep.state, ep.packs)).reward
        totals.append(total)
    return float(np.mean(totals))


def run_phase4(
    plan: ExperimentPlan,
    env: EnvConfig,
    base_demos: DemoDataset,
    demo_lists,
    tag: str,
):
    """Pool every trial's operator demos, retrain the imitation policy once on
    base + pooled demos, and evaluate it autonomously on paired evaluation
    seeds. Returns one mean episodic reward per evaluation seed.

    Pooling (rather than per-trial retraining) isolates the quantity of
    interest — which states received demonstrations — from per-trial demo
    sampling noise."""
    pooled = []
    for new_demos in demo_lists:
        pooled.extend(new_demos)
    data = base_demos.append(pooled, tag)
    policy = nn_policy(data)
    return [
        evaluate_policy_reward(
            policy, env, plan.phase4_eval_episodes, plan.seed, PHASE4_STREAM + i * 1000
        )
        for i in range(plan.phase4_eval_seeds)
    ]


# ---------------------------------------------------------------------------
# Statistics


def bootstrap_ci(values, resamples: int = 1000, level: float = 0.95, seed: int = 0):
    """Percentile bootstrap CI for the mean."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no values to bootstrap")
    rng = make_rng(seed, 999)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    lo = float(np.quantile(means, (1 - level) / 2))
    hi = float(np.quantile(means, 1 - (1 - level) / 2))
    return lo, hi


@dataclass(frozen=True)
class PipelineResult:
    plan: "ExperimentPlan"
    env: EnvConfig
    demos: DemoDataset
    choices: ChoiceDataset
    scorers: dict  # kind -> Scorer (includes the ground truth)
    holdout: list
    team_rewards: dict  # kind -> per-trial team rewards
    phase4_rewards: dict  # kind -> per-trial retrained-policy rewards
    rows: tuple  # ReportRow per scorer variant


def run_all(plan: ExperimentPlan, env: EnvConfig, log=None, trace_sink=None) -> PipelineResult:
    """The whole experiment: phases 1-4 for every scorer variant, plus the
    held-out predictive-accuracy evaluation. Deterministic per plan.

    trace_sink(kind, trial_index, trace), when given, receives every phase-3
    trace as it is produced.
    """
    plan.validate()
    env.validate()
    say = log or (lambda msg: None)
    expert_fn = expert_policy_fn(build_expert(env), env)
    say("phase 1: expert demonstrations")
    demos = run_phase1(plan, env, expert_fn)
    say("fitting value tables")
    v_h, v_r = fit_value_tables(plan, env, expert_fn, demos)
    gt = gt_scorer(v_h, v_r, env)
    say("phase 2: choice collection")
    choices = run_phase2(plan, env, expert_fn, demos, gt)
    say("training scorers")
    scorers = train_scorers(plan, env, choices)
    scorers[KIND_GT] = gt
    say("building held-out fleets")
    holdout = make_holdout_fleets(plan, env, expert_fn, demos, gt)
    team_rewards, phase4_rewards, rows = {}, {}, []
    for kind in plan.scorer_variants:
        scorer = scorers[kind]
        say(f"phase 3: {kind}")
        traces, _ = run_phase3(plan, env, expert_fn, demos, scorer)
        if trace_sink is not None:
            for i, trace in enumerate(traces):
                trace_sink(kind, i, trace)
        team_rewards[kind] = [fleet_mod.team_reward(t) for t in traces]
        say(f"phase 4: {kind}")
        demo_lists = run_phase4_demo_trials(plan, env, expert_fn, demos, scorer)
        phase4_rewards[kind] = run_phase4(plan, env, demos, demo_lists, DEMO_TAG_FOR_KIND[kind])
        t_lo, t_hi = bootstrap_ci(team_rewards[kind], seed=plan.seed)
        p_lo, p_hi = bootstrap_ci(phase4_rewards[kind], seed=plan.seed)
        rows.append(
            ReportRow(
                kind,
                float(np.mean(team_rewards[kind])), t_lo, t_hi,
                top_one_agreement(scorer, gt, holdout),
                float(np.mean(phase4_rewards[kind])), p_lo, p_hi,
            )
        )
    return PipelineResult(
        plan, env, demos, choices, scorers, holdout, team_rewards, phase4_rewards, tuple(rows)
    )


@dataclass(frozen=True)
class ReportRow:
    scorer_kind: str
    team_reward_mean: float
    team_reward_lo: float
    team_reward_hi: float
    top1_vs_gt: float
    phase4_reward_mean: float
    phase4_reward_lo: float
    phase4_reward_hi: float
