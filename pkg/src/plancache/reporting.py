"""Report files: versioned JSON + CSV tables and rendered figures.

The delimited output is the machine contract; figures are rendered
next to it for quick inspection (success/latency/token/cost overview,
cache growth, plan-execution accuracy, hit/miss breakdown, fallback
latencies, locality heatmap).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import GROWTH_CHECKPOINTS, EpisodeReport, aggregate

REPORT_FORMAT = "PREPORT v1"
CSV_TAG = "#PCSV v1"

EPISODE_COLUMNS = [
    "strategy",
    "scenario",
    "episode",
    "seed",
    "success",
    "ticks",
    "stall_ticks",
    "miss_stall_ticks",
    "oracle_queries",
    "tokens_in",
    "tokens_out",
    "cost",
    "cache_hits",
    "cache_misses",
    "confirmations",
    "corrections",
    "preemptions",
    "plans",
    "plan_failures",
    "replans",
    "perturbations",
]

AGGREGATE_COLUMNS = [
    "strategy",
    "scenario",
    "episodes",
    "success_rate",
    "total_ticks",
    "stall_ticks",
    "oracle_queries",
    "tokens_total",
    "cost",
    "hit_rate",
    "mean_fallback_latency",
    "corrections",
    "preemptions",
]


def run_payload(run_meta: dict, reports: list) -> dict:
    return {
        "format": REPORT_FORMAT,
        "run": run_meta,
        "episodes": [r.to_payload() for r in reports],
        "aggregate": aggregate(reports),
    }


def write_report_json(path, run_meta: dict, reports: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(run_payload(run_meta, reports), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path}: expected format {REPORT_FORMAT!r}")
    return payload


def reports_from_payload(payload: dict) -> list:
    return [EpisodeReport.from_payload(p) for p in payload["episodes"]]


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_TAG + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)


def write_episodes_csv(path, payloads: list) -> None:
    rows = []
    for payload in payloads:
        for ep in payload["episodes"]:
            rows.append([ep.get(c) for c in EPISODE_COLUMNS])
    _write_csv(path, EPISODE_COLUMNS, rows)


def write_aggregate_csv(path, payloads: list) -> None:
    rows = []
    for payload in payloads:
        agg = payload["aggregate"]
        rows.append([agg.get(c) for c in AGGREGATE_COLUMNS])
    _write_csv(path, AGGREGATE_COLUMNS, rows)


def write_growth_csv(path, payloads: list) -> None:
    columns = ["strategy", "scenario"] + [f"N@{t}" for t in GROWTH_CHECKPOINTS]
    rows = []
    for payload in payloads:
        agg = payload["aggregate"]
        growth = agg.get("growth_entries")
        if growth is None:
            continue
        rows.append(
            [agg.get("strategy"), agg.get("scenario")]
            + [round(v, 2) for v in growth]
        )
    _write_csv(path, columns, rows)


def write_locality_csv(path, verbs, table) -> None:
    columns = ["from"] + list(verbs)
    rows = []
    for prev in sorted(table):
        rows.append([prev] + [round(table[prev].get(v, 0.0), 4) for v in verbs])
    _write_csv(path, columns, rows)


# ----------------------------------------------------------------------
# figures
# ----------------------------------------------------------------------


def _save(fig, out_dir: Path, name: str) -> Path:
    out = out_dir / name
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_overview(out_dir: Path, payloads: list) -> Path:
    labels = [p["aggregate"].get("strategy", "?") for p in payloads]
    metrics = [
        ("success_rate", "success rate"),
        ("stall_ticks", "stall ticks"),
        ("tokens_total", "tokens"),
        ("cost", "cost"),
    ]
    fig, axes = plt.subplots(1, len(metrics), figsize=(3.2 * len(metrics), 3.2))
    for ax, (key, title) in zip(axes, metrics):
        values = [p["aggregate"].get(key) or 0 for p in payloads]
        ax.bar(range(len(labels)), values, color="tab:blue")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_title(title, fontsize=10)
    return _save(fig, out_dir, "overview.png")


def render_growth(out_dir: Path, payloads: list) -> Path | None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    drew = False
    for payload in payloads:
        agg = payload["aggregate"]
        growth = agg.get("growth_entries")
        if growth is None:
            continue
        ax.plot(GROWTH_CHECKPOINTS, growth, marker="o", label=agg.get("strategy"))
        drew = True
    if not drew:
        plt.close(fig)
        return None
    ax.set_xlabel("episode steps")
    ax.set_ylabel("stored transitions N")
    ax.legend(fontsize=8)
    return _save(fig, out_dir, "growth.png")


def render_accuracy(out_dir: Path, payloads: list) -> Path | None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    drew = False
    for payload in payloads:
        label = payload["aggregate"].get("strategy")
        for ep in payload["episodes"]:
            series = ep.get("accuracy_series") or []
            if series:
                ax.plot(range(1, len(series) + 1), series, alpha=0.6, label=label)
                label = None  # one legend entry per payload
                drew = True
    if not drew:
        plt.close(fig)
        return None
    ax.set_xlabel("frame")
    ax.set_ylabel("plan execution accuracy")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(fontsize=8)
    return _save(fig, out_dir, "accuracy.png")


def render_hit_miss(out_dir: Path, payloads: list) -> Path | None:
    rows = [
        (p["aggregate"].get("strategy"), p["aggregate"])
        for p in payloads
        if (p["aggregate"].get("cache_hits") or 0)
        + (p["aggregate"].get("cache_misses") or 0)
        > 0
    ]
    if not rows:
        return None
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    labels = [r[0] for r in rows]
    hits = [r[1]["cache_hits"] for r in rows]
    misses = [r[1]["cache_misses"] for r in rows]
    ax.bar(range(len(rows)), hits, label="hits", color="tab:green")
    ax.bar(range(len(rows)), misses, bottom=hits, label="misses", color="tab:red")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("cache queries")
    ax.legend(fontsize=8)
    return _save(fig, out_dir, "hit_miss.png")


def render_fallback(out_dir: Path, payloads: list) -> Path | None:
    samples = []
    for payload in payloads:
        for ep in payload["episodes"]:
            samples.extend(ep.get("fallback_latencies") or [])
    if not samples:
        return None
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.hist(samples, bins=min(20, max(3, len(set(samples)))), color="tab:orange")
    ax.set_xlabel("fallback latency (ticks)")
    ax.set_ylabel("misses")
    return _save(fig, out_dir, "fallback.png")


def render_locality(out_dir: Path, verbs, table) -> Path:
    grid = [[table.get(p, {}).get(q, 0.0) for q in verbs] for p in verbs]
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = ax.imshow(grid, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(verbs)))
    ax.set_xticklabels(verbs, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(verbs)))
    ax.set_yticklabels(verbs, fontsize=8)
    ax.set_xlabel("next plan")
    ax.set_ylabel("previous plan")
    fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, out_dir, "locality.png")


def render_report_figures(out_dir, payloads: list) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    produced = [render_overview(out_dir, payloads)]
    for renderer in (render_growth, render_accuracy, render_hit_miss, render_fallback):
        path = renderer(out_dir, payloads)
        if path is not None:
            produced.append(path)
    return produced
