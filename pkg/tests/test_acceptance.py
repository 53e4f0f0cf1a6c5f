"""Release acceptance suite.

One test per release criterion; each prints a single PASS/FAIL line with the
measured values. The expensive criteria (scorer recovery, team-performance
ordering, data-impact ordering) share one seeded experiment run via
module-scoped fixtures, mirroring how the comparisons share artifacts in the
real pipeline.
"""
import json
import math
import time

import numpy as np
import pytest

from fleetassist import pipeline, tinynet
from fleetassist.fleet import load_trace, luce_choose, softmax_probs, team_reward
from fleetassist.gridnav import Action, EnvConfig, RobotState
from fleetassist.imitation import DemoDataset, nearest_neighbor_action
from fleetassist.pipeline import ExperimentPlan, bootstrap_ci
from fleetassist.rng import make_rng
from fleetassist.scorers import (
    KIND_BASELINE,
    KIND_GT,
    KIND_LUCE,
    top_one_agreement,
)
from fleetassist.synthexpert import (
    evaluate_policy_mc,
    evaluate_policy_td,
    td0_backup,
)
from fleetassist.tinynet import MlpParams, TrainConfig, choice_loss_and_grad

ENV = EnvConfig()

# One shared experiment at the committed defaults: 100 paired phase-3 trials
# satisfies the ordering criteria's trial floor.
ACCEPTANCE_PLAN = ExperimentPlan(phase3_trials=100, seed=0)


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{name}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Criterion: gradient oracle


def _rand_params(rng, sizes=(4, 8, 8, 1)):
    weights = tuple(rng.normal(0, 0.5, (a, b)) for a, b in zip(sizes[:-1], sizes[1:]))
    biases = tuple(rng.normal(0, 0.5, b) for b in sizes[1:])
    return MlpParams(sizes, weights, biases)


def _flat(gW, gb):
    return np.concatenate([g.ravel() for g in (*gW, *gb)])


def _perturbed(params, delta):
    out_w, out_b = [], []
    off = 0
    for w in params.weights:
        out_w.append(w + delta[off : off + w.size].reshape(w.shape))
        off += w.size
    for b in params.biases:
        out_b.append(b + delta[off : off + b.size].reshape(b.shape))
        off += b.size
    return MlpParams(params.layer_sizes, tuple(out_w), tuple(out_b))


def test_gradient_oracle():
    started = time.time()
    h = 1e-5
    worst = 0.0
    for case in range(100):
        rng = make_rng(case, 17)
        params = _rand_params(rng)
        batch = []
        for _ in range(3):
            n = int(rng.integers(1, 5))
            batch.append((rng.normal(size=(n, 4)), int(rng.integers(n))))
        _, gW, gb = choice_loss_and_grad(params, batch, l2=1e-4)
        analytic = _flat(gW, gb)
        dim = analytic.size
        numeric = np.zeros(dim)
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            numeric[i] = (
                choice_loss_and_grad(_perturbed(params, e), batch, l2=1e-4)[0]
                - choice_loss_and_grad(_perturbed(params, -e), batch, l2=1e-4)[0]
            ) / (2 * h)
        denom = np.maximum(np.abs(numeric), 1e-6)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    elapsed = time.time() - started
    verdict(
        "gradient-oracle",
        worst <= 1e-4 and elapsed < 60,
        f"max relative error {worst:.2e} over 100 instances in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# Criterion: choice-model laws


def test_choice_model_laws():
    rng = make_rng(42, 23)
    worst_sum = 0.0
    worst_shift = 0.0
    argmax_ok = True
    single_ok = True
    for _ in range(10_000):
        n = int(rng.integers(1, 13))
        scores = rng.normal(0, 5, n)
        p = softmax_probs(scores)
        worst_sum = max(worst_sum, abs(float(p.sum()) - 1.0))
        shifted = softmax_probs(scores + float(rng.normal(0, 10)))
        worst_shift = max(worst_shift, float(np.max(np.abs(p - shifted))))
        # strictly increasing transform: 2x + 1 preserves argmax
        argmax_ok &= int(np.argmax(scores)) == int(np.argmax(2.0 * scores + 1.0))
        if n == 1:
            single_ok &= luce_choose(scores, rng) == 0
    ok = worst_sum <= 1e-12 and worst_shift <= 1e-12 and argmax_ok and single_ok
    verdict(
        "choice-model-laws",
        ok,
        f"prob sum error {worst_sum:.1e}, shift error {worst_shift:.1e}, "
        f"argmax invariant {argmax_ok}, n=1 choice {single_ok} over 10k cases",
    )


# ---------------------------------------------------------------------------
# Criterion: imitation oracle


def test_imitation_oracle():
    rng = make_rng(7, 31)
    states = rng.uniform([0, 0, 0, 0], [30, 10, 2 * math.pi, 100], size=(400, 4))
    actions = tuple(list(Action)[int(rng.integers(4))] for _ in range(400))
    data = DemoDataset(states, actions, ("phase1",) * 400)
    scaled = data._scaled
    hits = 0
    for _ in range(1000):
        q = RobotState(*(float(v) for v in rng.uniform([0, 0, 0, 0], [30, 10, 2 * math.pi, 100])))
        fast = nearest_neighbor_action(q, data)
        qv = np.array(
            [q.x * 1.0, q.y * 1.0, math.sin(q.heading) * 2.0, math.cos(q.heading) * 2.0, q.health * 0.05]
        )
        dists = [float(np.sum((row - qv) ** 2)) for row in scaled]
        best = min(range(len(dists)), key=lambda i: (dists[i], i))
        hits += fast == actions[best]
    verdict("imitation-oracle", hits == 1000, f"{hits}/1000 queries match the linear-scan oracle")


# ---------------------------------------------------------------------------
# Criterion: value-estimation oracle


def test_value_estimation_oracle(expert_fn):
    # two-state chain A -> B -> terminal, rewards 1 then 0, discount 0.5:
    # v(B) = 0, v(A) = 1
    table, visits = {}, {}
    for _ in range(3000):
        td0_backup(table, visits, "A", 1.0, table.get("B", 0.0), 0.5, 0.1)
        td0_backup(table, visits, "B", 0.0, 0.0, 0.5, 0.1)
    chain_err = max(abs(table["A"] - 1.0), abs(table["B"] - 0.0))

    td = evaluate_policy_td(expert_fn, ENV, episodes=2000, seed=3)
    mc = evaluate_policy_mc(expert_fn, ENV, episodes=2000, seed=3)
    common = [c for c in mc.table if c in td.table and mc.visits[c] >= 10]
    mc_vals = np.array([mc.table[c] for c in common])
    mean_diff = float(np.mean(np.abs(np.array([td.table[c] for c in common]) - mc_vals)))
    bound = 0.10 * float(mc_vals.max() - mc_vals.min())
    verdict(
        "value-estimation-oracle",
        chain_err <= 1e-3 and mean_diff <= bound,
        f"chain error {chain_err:.2e}; TD-vs-MC mean |diff| {mean_diff:.2f} "
        f"vs bound {bound:.2f} over {len(common)} cells",
    )


# ---------------------------------------------------------------------------
# Shared experiment for the recovery / ordering criteria


@pytest.fixture(scope="module")
def expert_fn():
    from fleetassist.synthexpert import build_expert, expert_policy_fn

    return expert_policy_fn(build_expert(ENV), ENV)


@pytest.fixture(scope="module")
def experiment(expert_fn):
    """Phases 1-2, scorer training, and the held-out fleets, timed per stage."""
    from fleetassist.scorers import gt_scorer

    plan = ACCEPTANCE_PLAN
    timings = {}
    t0 = time.time()
    demos = pipeline.run_phase1(plan, ENV, expert_fn)
    v_h, v_r = pipeline.fit_value_tables(plan, ENV, expert_fn, demos)
    gt = gt_scorer(v_h, v_r, ENV)
    timings["setup"] = time.time() - t0

    t0 = time.time()
    choices = pipeline.run_phase2(plan, ENV, expert_fn, demos, gt)
    scorers = pipeline.train_scorers(plan, ENV, choices)
    scorers[KIND_GT] = gt
    holdout = pipeline.make_holdout_fleets(plan, ENV, expert_fn, demos, gt)
    agreement = {k: top_one_agreement(scorers[k], gt, holdout) for k in (KIND_LUCE, KIND_BASELINE)}
    timings["recovery"] = time.time() - t0
    return {
        "plan": plan,
        "demos": demos,
        "scorers": scorers,
        "agreement": agreement,
        "timings": timings,
    }


@pytest.fixture(scope="module")
def phase3_results(experiment, expert_fn):
    plan = experiment["plan"]
    started = time.time()
    team, demo_lists = {}, {}
    for kind in plan.scorer_variants:
        traces, demos_per_trial = pipeline.run_phase3(
            plan, ENV, expert_fn, experiment["demos"], experiment["scorers"][kind]
        )
        team[kind] = [team_reward(t) for t in traces]
        demo_lists[kind] = demos_per_trial
    return {"team": team, "demo_lists": demo_lists, "elapsed": time.time() - started}


def test_scorer_recovery(experiment):
    luce = experiment["agreement"][KIND_LUCE]
    base = experiment["agreement"][KIND_BASELINE]
    elapsed = experiment["timings"]["recovery"]
    ok = luce >= 0.70 and (luce - base) >= 0.15 and elapsed <= 300
    verdict(
        "scorer-recovery",
        ok,
        f"top-1 luce {luce:.4f} (need >= 0.70), baseline {base:.4f}, "
        f"gap {luce - base:.4f} (need >= 0.15), {elapsed:.0f}s (budget 300s)",
    )


def test_team_performance_ordering(phase3_results, experiment):
    team = phase3_results["team"]
    means = {k: float(np.mean(v)) for k, v in team.items()}
    cis = {k: bootstrap_ci(v, seed=experiment["plan"].seed) for k, v in team.items()}
    ordered = means[KIND_GT] >= means[KIND_LUCE] >= means[KIND_BASELINE]
    separated = cis[KIND_GT][0] > cis[KIND_BASELINE][1]
    elapsed = phase3_results["elapsed"]
    ok = ordered and separated and len(team[KIND_GT]) >= 100 and elapsed <= 900
    verdict(
        "team-performance-ordering",
        ok,
        f"mean team reward GT {means[KIND_GT]:.0f} >= Luce {means[KIND_LUCE]:.0f} "
        f">= Base {means[KIND_BASELINE]:.0f}; GT CI low {cis[KIND_GT][0]:.0f} vs "
        f"Base CI high {cis[KIND_BASELINE][1]:.0f} over {len(team[KIND_GT])} paired trials "
        f"in {elapsed:.0f}s",
    )


def test_data_impact_ordering(experiment, expert_fn):
    plan = experiment["plan"]
    rewards = {}
    for kind in plan.scorer_variants:
        demo_lists = pipeline.run_phase4_demo_trials(
            plan, ENV, expert_fn, experiment["demos"], experiment["scorers"][kind]
        )
        rewards[kind] = pipeline.run_phase4(
            plan,
            ENV,
            experiment["demos"],
            demo_lists,
            pipeline.DEMO_TAG_FOR_KIND[kind],
        )
    means = {k: float(np.mean(v)) for k, v in rewards.items()}
    cis = {k: bootstrap_ci(v, seed=plan.seed) for k, v in rewards.items()}
    ordered = means[KIND_GT] >= means[KIND_LUCE] >= means[KIND_BASELINE]
    separated = cis[KIND_GT][0] > cis[KIND_BASELINE][1]
    verdict(
        "data-impact-ordering",
        ordered and separated and len(rewards[KIND_GT]) >= 100,
        f"retrained-policy reward GT {means[KIND_GT]:.1f} >= Luce {means[KIND_LUCE]:.1f} "
        f">= Base {means[KIND_BASELINE]:.1f}; GT CI low {cis[KIND_GT][0]:.1f} vs "
        f"Base CI high {cis[KIND_BASELINE][1]:.1f} over {len(rewards[KIND_GT])} paired seeds",
    )


# ---------------------------------------------------------------------------
# Criterion: end-to-end determinism


DETERMINISM_PLAN = """\
phase1_episodes = 2
phase2_trials = 1
phase3_fleet_size = 4
phase3_trials = 2
phase4_eval_episodes = 1
phase4_eval_seeds = 2
trial_horizon = 25
td_episodes = 30
holdout_fleets = 5

[train]
epochs = 2
"""


def test_run_all_determinism(tmp_path):
    from fleetassist.cli import main

    plan_file = tmp_path / "plan.toml"
    plan_file.write_text(DETERMINISM_PLAN)
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["--out-dir", str(out), "--seed", "1", "run-all", "--plan", str(plan_file)]) == 0
    report_a = (outs[0] / "report.csv").read_bytes()
    report_b = (outs[1] / "report.csv").read_bytes()
    traces_a = sorted(p.relative_to(outs[0]) for p in outs[0].glob("phase3-*/trial-*.trace.gz"))
    traces_b = sorted(p.relative_to(outs[1]) for p in outs[1].glob("phase3-*/trial-*.trace.gz"))
    same_traces = traces_a == traces_b and all(
        (outs[0] / p).read_bytes() == (outs[1] / p).read_bytes() for p in traces_a
    )
    verdict(
        "run-all-determinism",
        report_a == report_b and same_traces and len(traces_a) == 6,
        f"report.csv identical: {report_a == report_b}; "
        f"{len(traces_a)} trace files byte-identical: {same_traces}",
    )


# ---------------------------------------------------------------------------
# Criterion: interactive session contract (scripted WebSocket client)


def test_interactive_session_contract(tmp_path):
    from starlette.testclient import TestClient

    from fleetassist import opserver
    from fleetassist.fleet import SOURCE_OPERATOR
    from fleetassist.imitation import DemoDataset
    from fleetassist.scorers import Scorer
    from fleetassist.tinynet import env_normalizer, init_params

    autonomy = DemoDataset.from_pairs(
        [(RobotState(1.0, 1.0, 0.0, 100.0), Action.FORWARD)], "phase1"
    )
    # an arbitrary fixed MLP: scores vary across states, so assisted switching
    # actually moves between robots
    scorer = Scorer("LuceMlp", params=init_params(seed=7), normalizer=env_normalizer(ENV))
    session = opserver.SessionState(
        ENV,
        autonomy,
        n=12,
        dwell_period=15,
        phase=opserver.PHASE_FLEET3,
        mode=opserver.MODE_ASSISTED,
        scorer=scorer,
        seed=3,
    )
    app = opserver.build_app(session, tick_seconds=0.0005)

    states, reject_codes = [], []
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            sent_select = False
            while True:
                frame = json.loads(ws.receive_text())
                if frame["type"] == "state":
                    states.append(frame)
                elif frame["type"] == "error":
                    reject_codes.append(frame["code"])
                if len(states) == 20 and not sent_select:
                    ws.send_text('{"type": "select", "robot": 2}')
                    sent_select = True
                if len(states) >= 60 and reject_codes:
                    ws.send_text('{"type": "end"}')
                    break

    trace = opserver.session_trace(session)
    one_operator_per_tick = all(
        step.sources.count(SOURCE_OPERATOR) == 1 and 0 <= step.chosen < 12
        for step in trace.steps
    )
    switch_ticks = [
        b["tick"]
        for a, b in zip(states, states[1:])
        if b["controlled"] != a["controlled"] and b["tick"] == a["tick"] + 1
    ]
    boundary_only = all(t % 15 == 0 for t in switch_ticks)
    replayed = opserver.replay_session(
        ENV,
        autonomy,
        session.message_log,
        n=12,
        dwell_period=15,
        phase=opserver.PHASE_FLEET3,
        mode=opserver.MODE_ASSISTED,
        scorer=scorer,
        seed=3,
        ticks=session.tick_count,
    )
    replay_exact = replayed.steps == trace.steps
    verdict(
        "interactive-contract",
        session.ended
        and one_operator_per_tick
        and boundary_only
        and "manual_select_forbidden" in reject_codes
        and replay_exact,
        f"{len(trace.steps)} ticks, one operator-controlled robot per tick: "
        f"{one_operator_per_tick}; {len(switch_ticks)} switches all on dwell "
        f"boundaries: {boundary_only}; select rejected in assisted: "
        f"{'manual_select_forbidden' in reject_codes}; offline replay of the "
        f"message log reproduces the trace: {replay_exact}",
    )
