"""Experiment report artifacts.

Turns per-scorer result rows into a delimited table, a human-readable
summary, and bar-chart figures (team reward and retrained-policy reward with
bootstrap confidence intervals). All outputs are deterministic functions of
the rows.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .pipeline import ReportRow

CSV_FIELDS = (
    "scorer_kind",
    "team_reward_mean",
    "team_reward_lo",
    "team_reward_hi",
    "top1_vs_gt",
    "phase4_reward_mean",
    "phase4_reward_lo",
    "phase4_reward_hi",
)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        writer.writerow([repr(getattr(r, f)) if f != "scorer_kind" else r.scorer_kind for f in CSV_FIELDS])
    return buf.getvalue()


def rows_from_csv(text: str):
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        rows.append(
            ReportRow(
                rec["scorer_kind"],
                *(float(rec[f]) for f in CSV_FIELDS[1:]),
            )
        )
    return rows


def summary_text(rows) -> str:
    lines = ["scorer comparison (95% bootstrap CIs)", ""]
    for r in rows:
        lines.append(
            f"{r.scorer_kind}:\n"
            f"  team reward      {r.team_reward_mean:.2f}  [{r.team_reward_lo:.2f}, {r.team_reward_hi:.2f}]\n"
            f"  top-1 vs GT      {r.top1_vs_gt:.4f}\n"
            f"  retrained reward {r.phase4_reward_mean:.2f}  [{r.phase4_reward_lo:.2f}, {r.phase4_reward_hi:.2f}]"
        )
    return "\n".join(lines) + "\n"


def _bar_figure(rows, mean_field: str, lo_field: str, hi_field: str, title: str, path):
    kinds = [r.scorer_kind for r in rows]
    means = [getattr(r, mean_field) for r in rows]
    lo = [getattr(r, mean_field) - getattr(r, lo_field) for r in rows]
    hi = [getattr(r, hi_field) - getattr(r, mean_field) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(kinds, means, yerr=[lo, hi], capsize=4, color=["#4c72b0", "#dd8452", "#55a868"][: len(kinds)])
    ax.set_title(title)
    ax.set_ylabel("mean reward")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(rows, out_dir) -> dict:
    """Write report.csv, summary.txt, and figures into out_dir.

    Returns a map of artifact name -> path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "report.csv",
        "summary": out / "summary.txt",
        "team_reward_fig": out / "team_reward.png",
        "data_impact_fig": out / "data_impact.png",
    }
    paths["csv"].write_text(rows_to_csv(rows))
    paths["summary"].write_text(summary_text(rows))
    if rows:
        _bar_figure(
            rows, "team_reward_mean", "team_reward_lo", "team_reward_hi",
            "Team reward by scorer", paths["team_reward_fig"],
        )
        _bar_figure(
            rows, "phase4_reward_mean", "phase4_reward_lo", "phase4_reward_hi",
            "Retrained-policy reward by scorer", paths["data_impact_fig"],
        )
    return paths
