"""Imitation policy: 1-nearest-neighbor over demonstrated state-action pairs.

The demo dataset is an append-only value type. Distances are scaled Euclidean
over (x, y, sin heading, cos heading, health); the heading enters as its
(sin, cos) pair so the 0/2pi seam does not distort neighborhoods. Ties go to
the earliest-stored pair.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .gridnav import Action, RobotState

# Scales for (x, y, heading-pair, health). Position dominates; health is
# down-weighted because it ranges over [0, 100].
DEFAULT_FEATURE_SCALES = (1.0, 1.0, 2.0, 0.05)

# Provenance tags for demo pairs.
TAG_PHASE1 = "phase1"
TAG_PHASE3_GT = "phase3-gt"
TAG_PHASE3_LUCE = "phase3-luce"
TAG_PHASE3_BASE = "phase3-base"
TAG_PHASE3_MANUAL = "phase3-manual"


def _scaled_features(states: np.ndarray, scales) -> np.ndarray:
    """(N, 4) raw state rows -> (N, 5) scaled rows used for distance."""
    sx, sy, sh, sp = scales
    out = np.empty((states.shape[0], 5))
    out[:, 0] = sx * states[:, 0]
    out[:, 1] = sy * states[:, 1]
    out[:, 2] = sh * np.sin(states[:, 2])
    out[:, 3] = sh * np.cos(states[:, 2])
    out[:, 4] = sp * states[:, 3]
    return out


@dataclass(frozen=True)
class DemoDataset:
    states: np.ndarray  # (N, 4) rows of (x, y, heading, health)
    actions: tuple  # N Action values, index-aligned
    tags: tuple  # N provenance strings
    feature_scales: tuple = DEFAULT_FEATURE_SCALES

    def __post_init__(self):
        if any(s <= 0 for s in self.feature_scales):
            raise ValueError("feature scales must be strictly positive")
        object.__setattr__(self, "_scaled", _scaled_features(self.states, self.feature_scales))

    def __len__(self) -> int:
        return self.states.shape[0]

    @staticmethod
    def empty(feature_scales=DEFAULT_FEATURE_SCALES) -> "DemoDataset":
        return DemoDataset(np.zeros((0, 4)), (), (), feature_scales)

    @staticmethod
    def from_pairs(pairs, tag: str, feature_scales=DEFAULT_FEATURE_SCALES) -> "DemoDataset":
        return DemoDataset.empty(feature_scales).append(pairs, tag)

    def append(self, pairs, tag: str) -> "DemoDataset":
        """New dataset with (state, action) pairs appended in order."""
        if not pairs:
            return self
        rows = np.array([[s.x, s.y, s.heading, s.health] for s, _ in pairs])
        return DemoDataset(
            np.vstack([self.states, rows]),
            self.actions + tuple(a for _, a in pairs),
            self.tags + (tag,) * len(pairs),
            self.feature_scales,
        )


def nearest_neighbor_action(query: RobotState, data: DemoDataset) -> Action:
    """Action of the closest demo pair; ties break to the lowest index."""
    if len(data) == 0:
        raise ValueError("demo dataset is empty")
    sx, sy, sh, sp = data.feature_scales
    q = np.array(
        [sx * query.x, sy * query.y, sh * math.sin(query.heading), sh * math.cos(query.heading), sp * query.health]
    )
    d = data._scaled - q
    idx = int(np.argmin(np.einsum("ij,ij->i", d, d)))
    return data.actions[idx]


def nn_policy(data: DemoDataset):
    """Bind a dataset into a state -> action policy callable."""

    def policy(state: RobotState, packs=None) -> Action:
        return nearest_neighbor_action(state, data)

    return policy


def save_demos(data: DemoDataset, path) -> None:
    """JSONL, one pair per line; file order defines tie-break order."""
    with open(path, "w") as f:
        for i in range(len(data)):
            x, y, heading, health = data.states[i]
            f.write(
                json.dumps(
                    {
                        "x": x,
                        "y": y,
                        "heading": heading,
                        "health": health,
                        "action": data.actions[i].value,
                        "tag": data.tags[i],
                    }
                )
                + "\n"
            )


def load_demos(path, feature_scales=DEFAULT_FEATURE_SCALES) -> DemoDataset:
    states, actions, tags = [], [], []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            states.append([obj["x"], obj["y"], obj["heading"], obj["health"]])
            actions.append(Action(obj["action"]))
            tags.append(obj["tag"])
    rows = np.array(states) if states else np.zeros((0, 4))
    return DemoDataset(rows, tuple(actions), tuple(tags), feature_scales)
