"""Scoring functions behind one interface.

Three variants map a robot state to a real intervention priority: the
ground-truth value gap, an MLP fit by choice-model maximum likelihood, and an
MLP fit as a sigmoid intervened/not-intervened classifier. The two learned
variants share architecture, normalization, optimizer, and seed policy; the
loss is the only difference between them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import tinynet
from .gridnav import EnvConfig, RobotState, config_from_toml, config_to_toml
from .synthexpert import (
    ValueEstimate,
    load_value_estimate,
    save_value_estimate,
    value_gap_score,
)

KIND_GT = "GroundTruthGap"
KIND_LUCE = "LuceMlp"
KIND_BASELINE = "BaselineMlp"


@dataclass(frozen=True)
class ChoiceRecord:
    states: tuple  # n RobotState
    chosen: int
    timestep: int

    def __post_init__(self):
        if not (0 <= self.chosen < len(self.states)):
            raise ValueError("chosen index out of range")


@dataclass(frozen=True)
class ChoiceDataset:
    records: tuple
    fleet_size: int

    def __post_init__(self):
        for r in self.records:
            if len(r.states) != self.fleet_size:
                raise ValueError("every record must have exactly fleet_size states")

    def __len__(self) -> int:
        return len(self.records)


def save_choices(data: ChoiceDataset, path) -> None:
    with open(path, "w") as f:
        for r in data.records:
            f.write(
                json.dumps(
                    {
                        "timestep": r.timestep,
                        "chosen": r.chosen,
                        "states": [
                            {"x": s.x, "y": s.y, "heading": s.heading, "health": s.health}
                            for s in r.states
                        ],
                    }
                )
                + "\n"
            )


def load_choices(path) -> ChoiceDataset:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            states = tuple(
                RobotState(s["x"], s["y"], s["heading"], s["health"]) for s in obj["states"]
            )
            records.append(ChoiceRecord(states, obj["chosen"], obj["timestep"]))
    if not records:
        raise ValueError(f"no choice records in {path}")
    return ChoiceDataset(tuple(records), len(records[0].states))


@dataclass(frozen=True)
class Scorer:
    kind: str
    # GroundTruthGap payload
    v_h: ValueEstimate | None = None
    v_r: ValueEstimate | None = None
    env: EnvConfig | None = None
    # Mlp payload
    params: tinynet.MlpParams | None = None
    normalizer: tinynet.Normalizer | None = None

    def __post_init__(self):
        if self.kind == KIND_GT:
            if self.v_h is None or self.v_r is None or self.env is None:
                raise ValueError("GroundTruthGap scorer needs both value tables and the env")
        elif self.kind in (KIND_LUCE, KIND_BASELINE):
            if self.params is None or self.normalizer is None:
                raise ValueError(f"{self.kind} scorer needs params and a normalizer")
        else:
            raise ValueError(f"unknown scorer kind: {self.kind}")


def gt_scorer(v_h: ValueEstimate, v_r: ValueEstimate, env: EnvConfig) -> Scorer:
    return Scorer(KIND_GT, v_h=v_h, v_r=v_r, env=env)


def score(scorer: Scorer, state: RobotState) -> float:
    return float(score_batch(scorer, [state])[0])


def score_batch(scorer: Scorer, states) -> np.ndarray:
    if scorer.kind == KIND_GT:
        return np.array(
            [value_gap_score(s, scorer.v_h, scorer.v_r, scorer.env) for s in states]
        )
    X = np.array([[s.x, s.y, s.heading, s.health] for s in states])
    return tinynet.forward_batch(scorer.params, scorer.normalizer.apply(X))


def _choice_items(records: ChoiceDataset, normalizer: tinynet.Normalizer):
    items = []
    for r in records.records:
        X = np.array([[s.x, s.y, s.heading, s.health] for s in r.states])
        items.append((normalizer.apply(X), r.chosen))
    return items


def train_luce_scorer(
    records: ChoiceDataset, cfg: tinynet.TrainConfig, env: EnvConfig
) -> tuple[Scorer, list]:
    """Maximum-likelihood fit of the softmax choice model."""
    normalizer = tinynet.env_normalizer(env)
    params, losses = tinynet.train_choice_scorer(_choice_items(records, normalizer), cfg)
    return Scorer(KIND_LUCE, params=params, normalizer=normalizer), losses


def binary_examples(records: ChoiceDataset, normalizer: tinynet.Normalizer):
    """Intervened/not-intervened labels: the chosen state of each record is a
    positive, every non-chosen state a negative (unweighted)."""
    examples = []
    for r in records.records:
        X = normalizer.apply(np.array([[s.x, s.y, s.heading, s.health] for s in r.states]))
        for i in range(len(r.states)):
            examples.append((X[i : i + 1], 1.0 if i == r.chosen else 0.0))
    return examples


def train_baseline_scorer(
    records: ChoiceDataset, cfg: tinynet.TrainConfig, env: EnvConfig
) -> tuple[Scorer, list]:
    """Binary-classifier fit over the intervened/not-intervened examples with
    sigmoid cross-entropy; same architecture and optimizer as the choice fit."""
    normalizer = tinynet.env_normalizer(env)
    params, losses = tinynet.train_binary_scorer(
        binary_examples(records, normalizer),
        cfg,
        batch_rows=cfg.batch_size * records.fleet_size,  # same records per update as the choice fit
    )
    return Scorer(KIND_BASELINE, params=params, normalizer=normalizer), losses


def top_one_agreement(a: Scorer, b: Scorer, fleets) -> float:
    """Fraction of fleet snapshots where both scorers pick the same robot
    (argmax, ties to the lowest index)."""
    if not fleets:
        raise ValueError("fleets must be nonempty")
    hits = 0
    for states in fleets:
        ia = int(np.argmax(score_batch(a, states)))
        ib = int(np.argmax(score_batch(b, states)))
        hits += ia == ib
    return hits / len(fleets)


# ---------------------------------------------------------------------------
# Persistence: JSON envelope {kind, payload}


def save_scorer(scorer: Scorer, path) -> None:
    if scorer.kind == KIND_GT:
        payload = {
            "env_toml": config_to_toml(scorer.env),
            "v_h": _vtab_obj(scorer.v_h),
            "v_r": _vtab_obj(scorer.v_r),
        }
    else:
        payload = {
            "layer_sizes": list(scorer.params.layer_sizes),
            "weights": [w.tolist() for w in scorer.params.weights],
            "biases": [b.tolist() for b in scorer.params.biases],
            "normalizer": {
                "offset": list(scorer.normalizer.offset),
                "scale": list(scorer.normalizer.scale),
            },
        }
    with open(path, "w") as f:
        json.dump({"kind": scorer.kind, "payload": payload}, f)


def _vtab_obj(est: ValueEstimate) -> dict:
    return {
        "kind": est.kind,
        "gamma": est.gamma,
        "discretization": {
            "cell_size": est.discretization.cell_size,
            "heading_buckets": est.discretization.heading_buckets,
            "health_buckets": est.discretization.health_buckets,
        },
        "cells": [[list(c), v, est.visits.get(c, 0)] for c, v in sorted(est.table.items())],
    }


def _vtab_from_obj(obj: dict) -> ValueEstimate:
    from .synthexpert import Discretization

    d = obj["discretization"]
    disc = Discretization(d["cell_size"], d["heading_buckets"], d["health_buckets"])
    return ValueEstimate(
        obj["kind"],
        disc,
        obj["gamma"],
        {tuple(c): v for c, v, _ in obj["cells"]},
        {tuple(c): n for c, _, n in obj["cells"]},
    )


def load_scorer(path) -> Scorer:
    with open(path) as f:
        obj = json.load(f)
    kind = obj["kind"]
    payload = obj["payload"]
    if kind == KIND_GT:
        return Scorer(
            KIND_GT,
            v_h=_vtab_from_obj(payload["v_h"]),
            v_r=_vtab_from_obj(payload["v_r"]),
            env=config_from_toml(payload["env_toml"]),
        )
    params = tinynet.MlpParams(
        tuple(payload["layer_sizes"]),
        tuple(np.array(w) for w in payload["weights"]),
        tuple(np.array(b) for b in payload["biases"]),
    )
    normalizer = tinynet.Normalizer(
        tuple(payload["normalizer"]["offset"]), tuple(payload["normalizer"]["scale"])
    )
    return Scorer(kind, params=params, normalizer=normalizer)
