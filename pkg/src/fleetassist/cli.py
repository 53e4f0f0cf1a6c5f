"""Command-line entry point.

Subcommands mirror the experiment phases; every artifact lives under
--out-dir with a fixed name so later phases can find earlier outputs:

    demos.jsonl       phase-1 expert demonstrations
    v_h.vtab.json     expert value table
    v_r.vtab.json     imitation-policy value table
    gt.json           ground-truth gap scorer
    choices.jsonl     phase-2 operator choice records
    luce.json         choice-model-trained scorer
    baseline.json     classifier-trained scorer
    phase3-<kind>/    phase-3 traces + team rewards
    phase4-<kind>.json  retrained-policy rewards per evaluation seed
    report.csv, summary.txt, *.png

Exit codes: 0 success, 2 validation/usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fleet as fleet_mod
from . import pipeline, report
from .gridnav import ConfigError, EnvConfig, UsageError, load_env_config
from .imitation import load_demos, nn_policy, save_demos
from .scorers import (
    KIND_BASELINE,
    KIND_GT,
    KIND_LUCE,
    load_choices,
    load_scorer,
    save_choices,
    save_scorer,
)
from .synthexpert import build_expert, expert_policy_fn

EXIT_VALIDATION = 2

SCORER_FILES = {KIND_GT: "gt.json", KIND_LUCE: "luce.json", KIND_BASELINE: "baseline.json"}


def _load_plan(args) -> pipeline.ExperimentPlan:
    plan = pipeline.load_plan(args.plan) if getattr(args, "plan", None) else pipeline.ExperimentPlan()
    if args.seed is not None:
        from dataclasses import replace

        plan = replace(plan, seed=args.seed)
    if getattr(args, "scale", None):
        plan = plan.at_scale(args.scale)
    plan.validate()
    return plan


def _load_env(args) -> EnvConfig:
    if args.env_config:
        return load_env_config(args.env_config)
    env = EnvConfig()
    env.validate()
    return env


def _expert(env: EnvConfig):
    return expert_policy_fn(build_expert(env), env)


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise UsageError(f"missing {path}; run `{hint}` first or pass the right --out-dir")
    return path


def cmd_phase1(args) -> int:
    plan, env, out = _load_plan(args), _load_env(args), _out(args)
    demos = pipeline.run_phase1(plan, env, _expert(env))
    save_demos(demos, out / "demos.jsonl")
    print(f"wrote {out / 'demos.jsonl'} ({len(demos)} pairs)")
    return 0


def cmd_phase2(args) -> int:
    from .scorers import gt_scorer
    from .synthexpert import save_value_estimate

    plan, env, out = _load_plan(args), _load_env(args), _out(args)
    demos = load_demos(_require(out / "demos.jsonl", "fleetassist phase1"))
    expert_fn = _expert(env)
    v_h, v_r = pipeline.fit_value_tables(plan, env, expert_fn, demos)
    save_value_estimate(v_h, out / "v_h.vtab.json")
    save_value_estimate(v_r, out / "v_r.vtab.json")
    gt = gt_scorer(v_h, v_r, env)
    save_scorer(gt, out / SCORER_FILES[KIND_GT])
    choices = pipeline.run_phase2(plan, env, expert_fn, demos, gt)
    save_choices(choices, out / "choices.jsonl")
    print(f"wrote {out / 'choices.jsonl'} ({len(choices)} records)")
    return 0


def cmd_train_scorer(args) -> int:
    from .scorers import train_baseline_scorer, train_luce_scorer

    plan, env, out = _load_plan(args), _load_env(args), _out(args)
    choices = load_choices(_require(out / "choices.jsonl", "fleetassist phase2"))
    if args.loss == "luce":
        scorer, losses = train_luce_scorer(choices, plan.train, env)
        path = out / SCORER_FILES[KIND_LUCE]
    else:
        scorer, losses = train_baseline_scorer(choices, plan.train, env)
        path = out / SCORER_FILES[KIND_BASELINE]
    save_scorer(scorer, path)
    print(f"wrote {path} (final loss {losses[-1]:.4f})")
    return 0


def _resolve_scorer(arg: str, out: Path):
    if arg == "gt":
        path = _require(out / SCORER_FILES[KIND_GT], "fleetassist phase2")
    else:
        path = _require(Path(arg), "fleetassist train-scorer")
    return load_scorer(path)


def cmd_phase3(args) -> int:
    plan, env, out = _load_plan(args), _load_env(args), _out(args)
    demos = load_demos(_require(out / "demos.jsonl", "fleetassist phase1"))
    scorer = _resolve_scorer(args.scorer, out)
    traces, _ = pipeline.run_phase3(plan, env, _expert(env), demos, scorer)
    trace_dir = out / f"phase3-{scorer.kind}"
    trace_dir.mkdir(exist_ok=True)
    rewards = []
    for i, trace in enumerate(traces):
        fleet_mod.save_trace(trace, trace_dir / f"trial-{i:04d}.trace.gz")
        rewards.append(fleet_mod.team_reward(trace))
    (trace_dir / "team_rewards.json").write_text(json.dumps(rewards))
    print(f"wrote {len(traces)} traces to {trace_dir} (mean team reward {np.mean(rewards):.1f})")
    return 0


def cmd_phase4(args) -> int:
    plan, env, out = _load_plan(args), _load_env(args), _out(args)
    demos = load_demos(_require(out / "demos.jsonl", "fleetassist phase1"))
    scorer = _resolve_scorer(args.scorer, out)
    demo_lists = pipeline.run_phase4_demo_trials(plan, env, _expert(env), demos, scorer)
    rewards = pipeline.run_phase4(
        plan, env, demos, demo_lists, pipeline.DEMO_TAG_FOR_KIND[scorer.kind]
    )
    path = out / f"phase4-{scorer.kind}.json"
    path.write_text(json.dumps(rewards))
    print(f"wrote {path} (mean retrained reward {np.mean(rewards):.1f})")
    return 0


def cmd_report(args) -> int:
    plan, env, out = _load_plan(args), _load_env(args), _out(args)
    demos = load_demos(_require(out / "demos.jsonl", "fleetassist phase1"))
    gt = _resolve_scorer("gt", out)
    holdout = pipeline.make_holdout_fleets(plan, env, _expert(env), demos, gt)
    rows = []
    for kind in plan.scorer_variants:
        scorer = load_scorer(_require(out / SCORER_FILES[kind], "fleetassist train-scorer")) if kind != KIND_GT else gt
        trace_dir = _require(out / f"phase3-{kind}", "fleetassist phase3")
        team = json.loads((trace_dir / "team_rewards.json").read_text())
        phase4 = json.loads(_require(out / f"phase4-{kind}.json", "fleetassist phase4").read_text())
        t_lo, t_hi = pipeline.bootstrap_ci(team, seed=plan.seed)
        p_lo, p_hi = pipeline.bootstrap_ci(phase4, seed=plan.seed)
        from .scorers import top_one_agreement

        rows.append(
            pipeline.ReportRow(
                kind,
                float(np.mean(team)), t_lo, t_hi,
                top_one_agreement(scorer, gt, holdout),
                float(np.mean(phase4)), p_lo, p_hi,
            )
        )
    paths = report.write_report(rows, out)
    print("\n".join(str(p) for p in paths.values()))
    return 0


def cmd_run_all(args) -> int:
    plan, env, out = _load_plan(args), _load_env(args), _out(args)

    def sink(kind, i, trace):
        trace_dir = out / f"phase3-{kind}"
        trace_dir.mkdir(exist_ok=True)
        fleet_mod.save_trace(trace, trace_dir / f"trial-{i:04d}.trace.gz")

    result = pipeline.run_all(plan, env, log=lambda m: print(m, flush=True), trace_sink=sink)
    save_demos(result.demos, out / "demos.jsonl")
    save_choices(result.choices, out / "choices.jsonl")
    for kind, scorer in result.scorers.items():
        save_scorer(scorer, out / SCORER_FILES[kind])
    for kind, rewards in result.phase4_rewards.items():
        (out / f"phase4-{kind}.json").write_text(json.dumps(rewards))
    for kind, rewards in result.team_rewards.items():
        (out / f"phase3-{kind}").mkdir(exist_ok=True)
        (out / f"phase3-{kind}" / "team_rewards.json").write_text(json.dumps(rewards))
    paths = report.write_report(result.rows, out)
    print(report.summary_text(result.rows))
    print("\n".join(str(p) for p in paths.values()))
    return 0


def cmd_serve(args) -> int:
    from . import opserver

    return opserver.serve(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fleetassist", description=__doc__.split("\n")[0])
    parser.add_argument("--seed", type=int, default=None, help="override the plan seed")
    parser.add_argument("--env-config", default=None, help="environment TOML file")
    parser.add_argument("--out-dir", default="out", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--plan", default=None, help="experiment plan TOML")
        p.set_defaults(fn=fn)
        return p

    add("phase1", cmd_phase1, help="collect expert demonstrations")
    add("phase2", cmd_phase2, help="fit value tables and collect operator choices")
    p = add("train-scorer", cmd_train_scorer, help="fit a learned scorer to the choice data")
    p.add_argument("--loss", choices=("luce", "baseline"), required=True)
    p = add("phase3", cmd_phase3, help="large-fleet assisted trials")
    p.add_argument("--scorer", required=True, help="scorer file path, or 'gt'")
    p = add("phase4", cmd_phase4, help="retrain the imitation policy on trial demos")
    p.add_argument("--scorer", required=True, help="scorer file path, or 'gt'")
    add("report", cmd_report, help="write the comparison report from existing artifacts")
    p = add("run-all", cmd_run_all, help="run every phase for every scorer variant")
    p.add_argument("--scale", choices=("small", "full"), default=None)
    p = sub.add_parser("serve", help="interactive session server")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--phase", choices=("demo1", "choice2", "fleet3"), default="fleet3")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--dwell", type=int, default=15)
    p.add_argument("--scorer", default=None, help="scorer file for assisted mode")
    p.add_argument("--log-dir", default=None)
    p.set_defaults(fn=cmd_serve, plan=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ConfigError, UsageError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
