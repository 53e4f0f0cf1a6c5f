"""Multi-robot control loop.

Runs n independent environment instances, switches one operator among them
every K steps (sampled softmax choice, argmax, or externally driven), mixes
operator and autonomy actions, and logs everything to an immutable trace.
Robots that finish an episode reset immediately so the fleet keeps running for
the whole trial horizon.
"""
from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field

import numpy as np

from .gridnav import Action, EnvConfig, Episode, RobotState, config_to_toml, config_from_toml
from .imitation import DemoDataset, nearest_neighbor_action
from .rng import make_rng

MODE_LUCE = "luce"
MODE_ARGMAX = "argmax"
MODE_MANUAL = "manual"

SOURCE_OPERATOR = "operator"
SOURCE_AUTONOMY = "autonomy"

# RNG stream layout inside a trial: stream 0 drives choices, stream 1+i drives
# robot i's episode resets.
CHOICE_STREAM = 0


@dataclass(frozen=True)
class FleetConfig:
    n: int = 12
    dwell_period: int = 1  # K steps between switch decisions
    choice_mode: str = MODE_ARGMAX
    horizon: int = 300  # trial length in timesteps
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.dwell_period < 1:
            raise ValueError("fleet size and dwell period must be >= 1")
        if self.choice_mode not in (MODE_LUCE, MODE_ARGMAX, MODE_MANUAL):
            raise ValueError(f"unknown choice mode: {self.choice_mode}")


@dataclass(frozen=True)
class TraceStep:
    t: int
    states: tuple  # states scored/acted on at this step, one per robot
    chosen: int
    actions: tuple  # Action per robot
    sources: tuple  # SOURCE_* per robot
    rewards: tuple
    episode_end: tuple  # True where the robot's episode terminated this step
    scores: tuple | None  # scorer outputs when a switch decision happened


@dataclass(frozen=True)
class FleetTrace:
    fleet: FleetConfig
    env_toml: str
    scorer_kind: str
    steps: tuple


def softmax_probs(scores) -> np.ndarray:
    z = np.asarray(scores, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def luce_choose(scores, rng: np.random.Generator) -> int:
    """Sample index i with probability exp(score_i) / sum_j exp(score_j)."""
    p = softmax_probs(scores)
    return int(rng.choice(len(p), p=p))


def argmax_choose(scores) -> int:
    """Lowest index attaining the maximum score."""
    return int(np.argmax(np.asarray(scores, dtype=float)))


def run_fleet_trial(
    env: EnvConfig,
    fleet_cfg: FleetConfig,
    scorer,
    operator,
    autonomy: DemoDataset,
) -> FleetTrace:
    """One fleet trial.

    Every dwell_period steps, all robots' states are scored and the controlled
    robot re-chosen per choice_mode. Each timestep the controlled robot takes
    the operator's action and the rest take the imitation policy's. Terminal
    robots reset in place to a fresh episode.
    """
    from .scorers import score_batch  # local import: scorers depends on env types

    if fleet_cfg.choice_mode == MODE_MANUAL:
        raise ValueError("manual choice is driven by the session server, not trials")
    env.validate()
    choice_rng = make_rng(fleet_cfg.seed, CHOICE_STREAM)
    robot_rngs = [make_rng(fleet_cfg.seed, 1 + i) for i in range(fleet_cfg.n)]
    episodes = [Episode(env, robot_rngs[i]) for i in range(fleet_cfg.n)]

    chosen = 0
    steps = []
    for t in range(fleet_cfg.horizon):
        states = tuple(ep.state for ep in episodes)
        scores = None
        if t % fleet_cfg.dwell_period == 0:
            scores = tuple(float(v) for v in score_batch(scorer, states))
            if fleet_cfg.choice_mode == MODE_LUCE:
                chosen = luce_choose(scores, choice_rng)
            else:
                chosen = argmax_choose(scores)

        actions, sources, rewards, ends = [], [], [], []
        for i, ep in enumerate(episodes):
            if i == chosen:
                action = operator(ep.state, ep.packs)
                sources.append(SOURCE_OPERATOR)
            else:
                action = nearest_neighbor_action(ep.state, autonomy)
                sources.append(SOURCE_AUTONOMY)
            result = ep.step(action)
            actions.append(action)
            rewards.append(result.reward)
            ends.append(result.terminal)
            if result.terminal:
                episodes[i] = Episode(env, robot_rngs[i])
        steps.append(
            TraceStep(t, states, chosen, tuple(actions), tuple(sources), tuple(rewards), tuple(ends), scores)
        )
    return FleetTrace(fleet_cfg, config_to_toml(env), getattr(scorer, "kind", "external"), tuple(steps))


def team_reward(trace: FleetTrace) -> float:
    """Cumulative reward summed over all robots and timesteps."""
    return float(sum(sum(s.rewards) for s in trace.steps))


def extract_operator_demos(trace: FleetTrace):
    """The operator-tagged (state, action) pairs, in timestep order."""
    demos = []
    for s in trace.steps:
        i = s.chosen
        demos.append((s.states[i], s.actions[i]))
    return demos


def choice_records_from_trace(trace: FleetTrace):
    """One (states, chosen, timestep) record per switch decision in the trace."""
    from .scorers import ChoiceRecord

    return [
        ChoiceRecord(s.states, s.chosen, s.t)
        for s in trace.steps
        if s.t % trace.fleet.dwell_period == 0
    ]


# ---------------------------------------------------------------------------
# Persistence: gzip JSONL, header line then one line per timestep. The gzip
# mtime is pinned to 0 so identical traces serialize byte-identically.


def _state_obj(s: RobotState) -> dict:
    return {"x": s.x, "y": s.y, "heading": s.heading, "health": s.health}


def save_trace(trace: FleetTrace, path) -> None:
    # filename omitted and mtime pinned so equal traces give equal bytes
    with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
        header = {
            "fleet": {
                "n": trace.fleet.n,
                "dwell_period": trace.fleet.dwell_period,
                "choice_mode": trace.fleet.choice_mode,
                "horizon": trace.fleet.horizon,
                "seed": trace.fleet.seed,
            },
            "env_toml": trace.env_toml,
            "scorer_kind": trace.scorer_kind,
        }
        gz.write((json.dumps(header) + "\n").encode())
        for s in trace.steps:
            row = {
                "t": s.t,
                "states": [_state_obj(st) for st in s.states],
                "chosen": s.chosen,
                "actions": [a.value for a in s.actions],
                "sources": list(s.sources),
                "rewards": list(s.rewards),
                "episode_end": list(s.episode_end),
                "scores": list(s.scores) if s.scores is not None else None,
            }
            gz.write((json.dumps(row) + "\n").encode())


def load_trace(path) -> FleetTrace:
    with gzip.open(path, "rt") as f:
        header = json.loads(f.readline())
        steps = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            steps.append(
                TraceStep(
                    row["t"],
                    tuple(RobotState(**st) for st in row["states"]),
                    row["chosen"],
                    tuple(Action(a) for a in row["actions"]),
                    tuple(row["sources"]),
                    tuple(row["rewards"]),
                    tuple(row["episode_end"]),
                    tuple(row["scores"]) if row["scores"] is not None else None,
                )
            )
    fc = header["fleet"]
    return FleetTrace(
        FleetConfig(fc["n"], fc["dwell_period"], fc["choice_mode"], fc["horizon"], fc["seed"]),
        header["env_toml"],
        header["scorer_kind"],
        tuple(steps),
    )
