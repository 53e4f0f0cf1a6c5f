"""Three-room 2D navigation environment.

Continuous planar world: an axis-aligned arena split into rooms by thin walls
with door gaps, a hazard region that drains health, one-shot health packs, and
a circular goal. Observations are (x, y, heading, health); actions are the four
discrete moves. Dynamics are deterministic pure functions; the only randomness
is the initial state drawn at reset.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi


class Action(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    TURN_LEFT = "left"
    TURN_RIGHT = "right"


ACTIONS = (Action.FORWARD, Action.BACKWARD, Action.TURN_LEFT, Action.TURN_RIGHT)


class TerminalReason(enum.Enum):
    GOAL = "goal"
    DEAD = "dead"
    HORIZON = "horizon"
    NONE = "none"


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float  # radians in [0, 2pi)
    health: float  # in [0, 100]

    def features(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading, self.health])


@dataclass(frozen=True)
class Goal:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class HealthPack:
    x: float
    y: float
    heal: float


def _default_walls() -> tuple:
    # Interior walls at x=10 and x=20, door gap y in [4, 6].
    return (
        (10.0, 0.0, 10.0, 4.0),
        (10.0, 6.0, 10.0, 10.0),
        (20.0, 0.0, 20.0, 4.0),
        (20.0, 6.0, 20.0, 10.0),
    )


@dataclass(frozen=True)
class EnvConfig:
    arena: tuple = (0.0, 0.0, 30.0, 10.0)  # xmin, ymin, xmax, ymax
    walls: tuple = field(default_factory=_default_walls)  # axis-aligned segments
    hazard_regions: tuple = ((12.0, 0.0, 18.0, 4.0),)
    health_packs: tuple = (
        HealthPack(5.0, 8.0, 25.0),
        HealthPack(15.0, 8.0, 25.0),
        HealthPack(25.0, 2.0, 25.0),
    )
    pack_radius: float = 0.75
    goal: Goal = Goal(28.0, 5.0, 1.0)
    start_region: tuple = (0.0, 0.0, 10.0, 10.0)  # room 1
    move_step: float = 0.5
    turn_step: float = math.pi / 6.0
    hazard_drain_per_step: float = 2.0
    horizon: int = 300
    reward_weights: tuple = (1.0, 0.1, 100.0)  # progress, health, goal bonus
    discount: float = 0.99

    def validate(self) -> None:
        xmin, ymin, xmax, ymax = self.arena
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError("arena must have positive area")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        sx0, sy0, sx1, sy1 = self.start_region
        if not (sx1 > sx0 and sy1 > sy0):
            raise ConfigError("start region must have positive area")
        for wx0, wy0, wx1, wy1 in self.walls:
            if wx0 != wx1 and wy0 != wy1:
                raise ConfigError("walls must be axis-aligned segments")
        for p in (self.goal, *self.health_packs):
            if not self._inside_arena(p.x, p.y):
                raise ConfigError("goal and health packs must lie inside the arena")
        if self.move_step <= 0 or self.turn_step <= 0:
            raise ConfigError("move and turn steps must be positive")
        if self.hazard_drain_per_step < 0:
            raise ConfigError("hazard drain must be non-negative")
        if not (0.0 < self.discount <= 1.0):
            raise ConfigError("discount must be in (0, 1]")

    def _inside_arena(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.arena
        return xmin <= x <= xmax and ymin <= y <= ymax


class ConfigError(ValueError):
    pass


class UsageError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepResult:
    next_state: RobotState
    packs: tuple  # availability flags after the step
    reward: float
    terminal: bool
    reason: TerminalReason


def _segments_cross(p0, p1, q0, q1) -> bool:
    """True when segment p0-p1 intersects segment q0-q1 (endpoints included)."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    d1 = orient(q0, q1, p0)
    d2 = orient(q0, q1, p1)
    d3 = orient(p0, p1, q0)
    d4 = orient(p0, p1, q1)
    if d1 != d2 and d3 != d4:
        return True
    if d1 == 0 and on_seg(q0, q1, p0):
        return True
    if d2 == 0 and on_seg(q0, q1, p1):
        return True
    if d3 == 0 and on_seg(p0, p1, q0):
        return True
    if d4 == 0 and on_seg(p0, p1, q1):
        return True
    return False


def move_blocked(config: EnvConfig, x0, y0, x1, y1) -> bool:
    """A translation is blocked if it leaves the arena or crosses any wall."""
    xmin, ymin, xmax, ymax = config.arena
    if not (xmin <= x1 <= xmax and ymin <= y1 <= ymax):
        return True
    for wx0, wy0, wx1, wy1 in config.walls:
        if _segments_cross((x0, y0), (x1, y1), (wx0, wy0), (wx1, wy1)):
            return True
    return False


def in_hazard(config: EnvConfig, x: float, y: float) -> bool:
    for hx0, hy0, hx1, hy1 in config.hazard_regions:
        if hx0 <= x <= hx1 and hy0 <= y <= hy1:
            return True
    return False


def goal_distance(config: EnvConfig, x: float, y: float) -> float:
    return math.hypot(x - config.goal.x, y - config.goal.y)


def at_goal(config: EnvConfig, state: RobotState) -> bool:
    return goal_distance(config, state.x, state.y) <= config.goal.radius


def all_packs_available(config: EnvConfig) -> tuple:
    return (True,) * len(config.health_packs)


def reset(config: EnvConfig, rng: np.random.Generator) -> tuple[RobotState, tuple]:
    """Fresh episode: uniform position in the start region, uniform heading,
    full health, all packs available."""
    config.validate()
    sx0, sy0, sx1, sy1 = config.start_region
    for _ in range(10_000):
        x = rng.uniform(sx0, sx1)
        y = rng.uniform(sy0, sy1)
        # rejection sample: keep positions strictly in free space, away from walls
        if _clear_of_walls(config, x, y):
            heading = rng.uniform(0.0, TWO_PI)
            return RobotState(x, y, heading, 100.0), all_packs_available(config)
    raise ConfigError("start region has no free space")


def _clear_of_walls(config: EnvConfig, x: float, y: float, margin: float = 1e-9) -> bool:
    for wx0, wy0, wx1, wy1 in config.walls:
        if wx0 == wx1:  # vertical
            if abs(x - wx0) <= margin and min(wy0, wy1) <= y <= max(wy0, wy1):
                return False
        else:
            if abs(y - wy0) <= margin and min(wx0, wx1) <= x <= max(wx0, wx1):
                return False
    return True


def step(
    state: RobotState,
    action: Action,
    config: EnvConfig,
    packs: tuple,
    t: int,
) -> StepResult:
    """One deterministic step.

    Blocked translations are a no-op (no sliding). Hazard drain applies at the
    post-move position, then pack pickups, then clamping to [0, 100]. Reward is
    progress toward the goal plus health change plus the goal bonus.
    """
    if state.health <= 0.0:
        raise UsageError("cannot step a dead robot")
    if at_goal(config, state):
        raise UsageError("cannot step a robot already at the goal")
    if t >= config.horizon:
        raise UsageError("cannot step past the episode horizon")

    x, y, heading = state.x, state.y, state.heading
    if action in (Action.FORWARD, Action.BACKWARD):
        sign = 1.0 if action is Action.FORWARD else -1.0
        nx = x + sign * config.move_step * math.cos(heading)
        ny = y + sign * config.move_step * math.sin(heading)
        if not move_blocked(config, x, y, nx, ny):
            x, y = nx, ny
    elif action is Action.TURN_LEFT:
        heading = (heading + config.turn_step) % TWO_PI
    else:
        heading = (heading - config.turn_step) % TWO_PI

    health = state.health
    if in_hazard(config, x, y):
        health -= config.hazard_drain_per_step
    new_packs = list(packs)
    for i, pack in enumerate(config.health_packs):
        if new_packs[i] and math.hypot(x - pack.x, y - pack.y) <= config.pack_radius:
            new_packs[i] = False
            health += pack.heal
    health = min(100.0, max(0.0, health))

    next_state = RobotState(x, y, heading, health)
    dist_prev = goal_distance(config, state.x, state.y)
    dist_cur = goal_distance(config, x, y)
    reached = dist_cur <= config.goal.radius
    w_prog, w_health, goal_bonus = config.reward_weights
    reward = (
        w_prog * (dist_prev - dist_cur)
        + w_health * (health - state.health)
        + (goal_bonus if reached else 0.0)
    )

    if reached:
        reason = TerminalReason.GOAL
    elif health <= 0.0:
        reason = TerminalReason.DEAD
    elif t + 1 >= config.horizon:
        reason = TerminalReason.HORIZON
    else:
        reason = TerminalReason.NONE
    return StepResult(next_state, tuple(new_packs), reward, reason is not TerminalReason.NONE, reason)


class Episode:
    """Mutable convenience wrapper around reset/step for rollouts."""

    def __init__(self, config: EnvConfig, rng: np.random.Generator):
        self.config = config
        self.state, self.packs = reset(config, rng)
        self.t = 0
        self.terminal = False
        self.reason = TerminalReason.NONE

    def step(self, action: Action) -> StepResult:
        result = step(self.state, action, self.config, self.packs, self.t)
        self.state = result.next_state
        self.packs = result.packs
        self.t += 1
        self.terminal = result.terminal
        self.reason = result.reason
        return result


# ---------------------------------------------------------------------------
# TOML serialization. Field names in the file are the config's public names.

_TOML_KEYS = {
    "arena": "arena",
    "walls": "walls",
    "hazardRegions": "hazard_regions",
    "healthPacks": "health_packs",
    "packRadius": "pack_radius",
    "goal": "goal",
    "startRegion": "start_region",
    "moveStep": "move_step",
    "turnStep": "turn_step",
    "hazardDrainPerStep": "hazard_drain_per_step",
    "horizon": "horizon",
    "rewardWeights": "reward_weights",
    "discount": "discount",
}


def config_to_toml(config: EnvConfig) -> str:
    def fmt(v):
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = []
    for key, attr in _TOML_KEYS.items():
        v = getattr(config, attr)
        if key == "goal":
            v = (v.x, v.y, v.radius)
        elif key == "healthPacks":
            v = [(p.x, p.y, p.heal) for p in v]
        lines.append(f"{key} = {fmt(v)}")
    return "\n".join(lines) + "\n"


def config_from_toml(text: str) -> EnvConfig:
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    raw = tomllib.loads(text)
    kwargs = {}
    for key, attr in _TOML_KEYS.items():
        if key not in raw:
            continue
        v = raw[key]
        if key == "goal":
            v = Goal(*[float(a) for a in v])
        elif key == "healthPacks":
            v = tuple(HealthPack(*[float(a) for a in p]) for p in v)
        elif key in ("walls", "hazardRegions"):
            v = tuple(tuple(float(a) for a in seg) for seg in v)
        elif key in ("arena", "startRegion", "rewardWeights"):
            v = tuple(float(a) for a in v)
        elif key == "horizon":
            v = int(v)
        else:
            v = float(v)
        kwargs[attr] = v
    config = EnvConfig(**kwargs)
    config.validate()
    return config


def load_env_config(path) -> EnvConfig:
    with open(path, "r") as f:
        config = config_from_toml(f.read())
    config.validate()
    return config


def save_env_config(config: EnvConfig, path) -> None:
    with open(path, "w") as f:
        f.write(config_to_toml(config))
