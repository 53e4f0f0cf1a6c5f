"""Synthetic operator: scripted near-optimal policy and tabular value estimates.

The expert plans on a discretized free-space graph (Dijkstra distance fields to
the goal and to each health pack) and greedily aligns its heading with the next
waypoint. Value functions for the ground-truth intervention score are estimated
with tabular TD(0) or first-visit Monte Carlo over a coarse state
discretization.

Policies everywhere in this package are callables (state, packs) -> Action,
where packs is the episode's health-pack availability tuple.
"""
from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .gridnav import (
    Action,
    EnvConfig,
    Episode,
    RobotState,
    TWO_PI,
    move_blocked,
    in_hazard,
)
from .rng import make_rng

log = logging.getLogger(__name__)

# Extra Dijkstra cost per hazard cell; steers the planned path around hazards
# when a detour exists.
HAZARD_EDGE_PENALTY = 4.0


@dataclass(frozen=True)
class Discretization:
    cell_size: float = 0.5
    heading_buckets: int = 8
    health_buckets: int = 4

    def cell(self, config: EnvConfig, state: RobotState) -> tuple:
        xmin, ymin, _, _ = config.arena
        cx = int((state.x - xmin) / self.cell_size)
        cy = int((state.y - ymin) / self.cell_size)
        hb = int(state.heading / TWO_PI * self.heading_buckets) % self.heading_buckets
        lb = min(int(state.health / 100.0 * self.health_buckets), self.health_buckets - 1)
        return (cx, cy, hb, lb)


@dataclass
class ValueEstimate:
    kind: str  # "td0" or "mc"
    discretization: Discretization
    gamma: float
    table: dict = field(default_factory=dict)  # cell tuple -> value
    visits: dict = field(default_factory=dict)

    def value(self, config: EnvConfig, state: RobotState) -> float:
        return self.table.get(self.discretization.cell(config, state), 0.0)


def value_gap_score(state: RobotState, v_h: ValueEstimate, v_r: ValueEstimate, config: EnvConfig) -> float:
    """Ground-truth intervention priority: expert value minus autonomy value.

    Unvisited cells contribute 0 (neutral default, logged at debug level).
    """
    if v_h.discretization != v_r.discretization:
        raise ValueError("value estimates must share a discretization")
    cell = v_h.discretization.cell(config, state)
    if cell not in v_h.table or cell not in v_r.table:
        log.debug("low-confidence value gap at unvisited cell %s", cell)
    return v_h.table.get(cell, 0.0) - v_r.table.get(cell, 0.0)


VTAB_FORMAT_VERSION = 1


def save_value_estimate(est: ValueEstimate, path) -> None:
    obj = {
        "format_version": VTAB_FORMAT_VERSION,
        "kind": est.kind,
        "gamma": est.gamma,
        "discretization": {
            "cell_size": est.discretization.cell_size,
            "heading_buckets": est.discretization.heading_buckets,
            "health_buckets": est.discretization.health_buckets,
        },
        "cells": [[list(c), v, est.visits.get(c, 0)] for c, v in sorted(est.table.items())],
    }
    with open(path, "w") as f:
        json.dump(obj, f)


def load_value_estimate(path) -> ValueEstimate:
    with open(path) as f:
        obj = json.load(f)
    if obj.get("format_version") != VTAB_FORMAT_VERSION:
        raise ValueError(f"unsupported value-table format: {obj.get('format_version')}")
    d = obj["discretization"]
    disc = Discretization(d["cell_size"], d["heading_buckets"], d["health_buckets"])
    table = {tuple(c): v for c, v, _ in obj["cells"]}
    visits = {tuple(c): n for c, _, n in obj["cells"]}
    return ValueEstimate(obj["kind"], disc, obj["gamma"], table, visits)


# ---------------------------------------------------------------------------
# Planner graph


class PlannerGraph:
    """Free-space grid of cell centers with Dijkstra distance fields."""

    def __init__(self, config: EnvConfig, cell_size: float = 0.5):
        self.config = config
        self.cell_size = cell_size
        xmin, ymin, xmax, ymax = config.arena
        self.nx = int(round((xmax - xmin) / cell_size))
        self.ny = int(round((ymax - ymin) / cell_size))
        self.xmin, self.ymin = xmin, ymin
        self._adjacency = self._build_adjacency()
        self._fields: dict = {}

    def cell_of(self, x: float, y: float) -> tuple:
        cx = min(max(int((x - self.xmin) / self.cell_size), 0), self.nx - 1)
        cy = min(max(int((y - self.ymin) / self.cell_size), 0), self.ny - 1)
        return (cx, cy)

    def center(self, cell: tuple) -> tuple:
        return (
            self.xmin + (cell[0] + 0.5) * self.cell_size,
            self.ymin + (cell[1] + 0.5) * self.cell_size,
        )

    def _build_adjacency(self) -> dict:
        adj = {}
        for cx in range(self.nx):
            for cy in range(self.ny):
                here = (cx, cy)
                x0, y0 = self.center(here)
                edges = []
                for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    nb = (cx + dx, cy + dy)
                    if not (0 <= nb[0] < self.nx and 0 <= nb[1] < self.ny):
                        continue
                    x1, y1 = self.center(nb)
                    if move_blocked(self.config, x0, y0, x1, y1):
                        continue
                    cost = 1.0
                    if in_hazard(self.config, x1, y1):
                        cost += HAZARD_EDGE_PENALTY
                    edges.append((nb, cost))
                adj[here] = edges
        return adj

    def distance_field(self, target_xy: tuple) -> dict:
        """Dijkstra costs from every cell to the cell containing target_xy."""
        key = (round(target_xy[0], 9), round(target_xy[1], 9))
        if key in self._fields:
            return self._fields[key]
        source = self.cell_of(*target_xy)
        dist = {source: 0.0}
        pq = [(0.0, source)]
        while pq:
            d, cell = heapq.heappop(pq)
            if d > dist.get(cell, math.inf):
                continue
            for nb, cost in self._adjacency[cell]:
                nd = d + cost
                if nd < dist.get(nb, math.inf):
                    dist[nb] = nd
                    heapq.heappush(pq, (nd, nb))
        self._fields[key] = dist
        return dist


@dataclass
class ExpertPolicy:
    graph: PlannerGraph
    health_seek_threshold: float = 50.0
    waypoint_tolerance: float = 0.25
    lookahead: int = 2


def build_expert(config: EnvConfig, cell_size: float = 0.5, **kwargs) -> ExpertPolicy:
    policy = ExpertPolicy(PlannerGraph(config, cell_size), **kwargs)
    # warm the goal field; pack fields build on demand
    policy.graph.distance_field((config.goal.x, config.goal.y))
    return policy


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = (a + math.pi) % TWO_PI - math.pi
    return math.pi if a == -math.pi else a


def _select_target(state: RobotState, policy: ExpertPolicy, config: EnvConfig, packs) -> tuple:
    """Target point: goal, or the graph-nearest available pack when low."""
    if state.health < policy.health_seek_threshold:
        here = policy.graph.cell_of(state.x, state.y)
        best, best_d = None, math.inf
        for available, pack in zip(packs, config.health_packs):
            if not available:
                continue
            d = policy.graph.distance_field((pack.x, pack.y)).get(here, math.inf)
            if d < best_d:
                best, best_d = (pack.x, pack.y), d
        if best is not None and math.isfinite(best_d):
            return best
    return (config.goal.x, config.goal.y)


def expert_action(state: RobotState, policy: ExpertPolicy, config: EnvConfig, packs=None) -> Action:
    """Greedy waypoint following: align heading with the next waypoint on the
    planned path, move forward when aligned, otherwise turn toward it.
    Deterministic in (state, packs)."""
    if packs is None:
        packs = (True,) * len(config.health_packs)
    graph = policy.graph
    target = _select_target(state, policy, config, packs)
    field_ = graph.distance_field(target)
    here = graph.cell_of(state.x, state.y)
    if here not in field_:
        # current cell disconnected from target: fall back to the goal field
        field_ = graph.distance_field((config.goal.x, config.goal.y))
        if here not in field_:
            log.warning("planner: cell %s unreachable from goal; defaulting to Forward", here)
            return Action.FORWARD

    # walk downhill up to `lookahead` cells; prefer the farthest cell with line
    # of sight from the robot's actual position (no corner cutting)
    cell = here
    first_downhill = None
    visible = None
    for _ in range(policy.lookahead):
        nxt = min(
            (nb for nb, _ in graph._adjacency[cell]),
            key=lambda nb: field_.get(nb, math.inf),
            default=None,
        )
        if nxt is None or field_.get(nxt, math.inf) >= field_.get(cell, math.inf):
            break
        cell = nxt
        center = graph.center(cell)
        if first_downhill is None:
            first_downhill = center
        if move_blocked(config, state.x, state.y, center[0], center[1]):
            break
        visible = center
    candidates = []
    for wp in (visible, first_downhill, target):
        if wp is not None and wp not in candidates:
            if math.hypot(wp[0] - state.x, wp[1] - state.y) >= policy.waypoint_tolerance:
                candidates.append(wp)
    if not candidates:
        candidates = [target]

    # headings are quantized to the turn lattice: head for the first waypoint
    # whose nearest achievable bearing admits an unblocked forward step
    for wp in candidates:
        desired = math.atan2(wp[1] - state.y, wp[0] - state.x)
        k = round(_wrap_angle(desired - state.heading) / config.turn_step)
        bearing = state.heading + k * config.turn_step
        nx = state.x + config.move_step * math.cos(bearing)
        ny = state.y + config.move_step * math.sin(bearing)
        if move_blocked(config, state.x, state.y, nx, ny):
            continue
        if k == 0:
            return Action.FORWARD
        return Action.TURN_LEFT if k > 0 else Action.TURN_RIGHT
    # boxed in at every candidate bearing: rotate until something opens up
    return Action.TURN_LEFT


def expert_policy_fn(policy: ExpertPolicy, config: EnvConfig):
    def fn(state: RobotState, packs=None) -> Action:
        return expert_action(state, policy, config, packs)

    return fn


# ---------------------------------------------------------------------------
# Policy evaluation


def td0_backup(table: dict, visits: dict, cell, reward: float, v_next: float, gamma: float, learning_rate: float) -> None:
    """One tabular TD(0) update with per-cell decaying step size."""
    n = visits.get(cell, 0)
    alpha = learning_rate / (1.0 + n / 100.0)
    v = table.get(cell, 0.0)
    table[cell] = v + alpha * (reward + gamma * v_next - v)
    visits[cell] = n + 1


def evaluate_policy_td(
    policy,
    config: EnvConfig,
    episodes: int,
    learning_rate: float = 1.0,
    discretization: Discretization = Discretization(),
    seed: int = 0,
    rng_stream: int = 1000,
) -> ValueEstimate:
    """Tabular TD(0) over discretized cells: v(c) += a * (r + g*v(c') - v(c)).

    The step size decays per cell as learning_rate / (1 + visits/100).
    Terminal successors bootstrap with value 0.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if not (0.0 < learning_rate <= 1.0):
        raise ValueError("learning rate must be in (0, 1]")
    if discretization.cell_size <= 0:
        raise ValueError("discretization cell size must be positive")
    gamma = config.discount
    est = ValueEstimate("td0", discretization, gamma)
    for ep in range(episodes):
        episode = Episode(config, make_rng(seed, rng_stream + ep))
        transitions = []
        while not episode.terminal:
            state = episode.state
            action = policy(state, episode.packs)
            result = episode.step(action)
            transitions.append(
                (
                    discretization.cell(config, state),
                    result.reward,
                    discretization.cell(config, result.next_state),
                    result.terminal,
                )
            )
        # backups run in reverse trajectory order so terminal credit reaches
        # the start of a long path within a single episode
        for c, reward, c_next, terminal in reversed(transitions):
            v_next = 0.0 if terminal else est.table.get(c_next, 0.0)
            td0_backup(est.table, est.visits, c, reward, v_next, gamma, learning_rate)
    return est


def evaluate_policy_mc(
    policy,
    config: EnvConfig,
    episodes: int,
    discretization: Discretization = Discretization(),
    seed: int = 0,
    rng_stream: int = 1000,
) -> ValueEstimate:
    """First-visit Monte Carlo estimate of the discounted return per cell."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    gamma = config.discount
    sums: dict = {}
    counts: dict = {}
    for ep in range(episodes):
        episode = Episode(config, make_rng(seed, rng_stream + ep))
        cells, rewards = [], []
        while not episode.terminal:
            state = episode.state
            action = policy(state, episode.packs)
            result = episode.step(action)
            cells.append(discretization.cell(config, state))
            rewards.append(result.reward)
        g = 0.0
        returns = [0.0] * len(rewards)
        for i in range(len(rewards) - 1, -1, -1):
            g = rewards[i] + gamma * g
            returns[i] = g
        first = {}
        for i, c in enumerate(cells):
            if c not in first:
                first[c] = returns[i]
        for c, g0 in first.items():
            sums[c] = sums.get(c, 0.0) + g0
            counts[c] = counts.get(c, 0) + 1
    table = {c: sums[c] / counts[c] for c in sums}
    return ValueEstimate("mc", discretization, gamma, table, dict(counts))
