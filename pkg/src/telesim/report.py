"""Rendering of latency measurements: console tables, delimited output,
and figures.

The ``write_report_artifacts`` path drops everything a run produced into
one directory: the report as JSON, per-turn stage durations as CSV, and
two PNG figures (mean stage breakdown, stacked per-turn totals).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .pipeline import REPORT_STAGES, LatencyReport, TurnResult
from .session import Turn

STAGE_COLORS = {
    "transcribing": "#7aa6c2",
    "thinking": "#4c72b0",
    "synthesizing": "#dd8452",
    "rendering": "#c44e52",
}

CSV_COLUMNS = (
    "turn",
    "transcribe_ms",
    "dialogue_ms",
    "synthesize_ms",
    "render_ms",
    "render_skipped",
    "total_ms",
    "overhead_ms",
    "cache_hit",
)


def format_latency_table(report: LatencyReport) -> str:
    """Fixed-width stage table, one row per stage plus a totals row."""
    header = f"{'stage':<14}{'mean':>10}{'p50':>10}{'p95':>10}{'max':>10}{'n':>5}"
    lines = [header, "-" * len(header)]
    rows = list(report.stages.items()) + [("total", report.total)]
    for name, stats in rows:
        lines.append(
            f"{name:<14}"
            f"{stats.mean_ms:>10.1f}"
            f"{stats.p50_ms:>10.1f}"
            f"{stats.p95_ms:>10.1f}"
            f"{stats.max_ms:>10.1f}"
            f"{stats.samples:>5d}"
        )
    lines.append("")
    lines.append(
        f"turns: {report.turn_count}   "
        f"mean total: {report.mean_total_ms:.1f} ms   "
        f"dominant stage: {report.dominant_stage}"
    )
    return "\n".join(lines)


def format_transcript(turns: list[Turn]) -> str:
    """Operator-facing transcript: one exchange per turn with timings."""
    lines = []
    for turn in turns:
        lines.append(f"[{turn.index}] learner: {turn.user_text}")
        if turn.status == "ok":
            lines.append(f"    patient: {turn.patient_text}")
            t = turn.timings
            cached = " (cached)" if t.render_skipped else ""
            lines.append(
                f"    timings: dialogue {t.dialogue_ms:.0f} ms, "
                f"synthesize {t.synthesize_ms:.0f} ms, "
                f"render {t.render_ms:.0f} ms{cached}, "
                f"total {t.total_ms:.0f} ms"
            )
        else:
            lines.append(f"    FAILED: {turn.cause}")
    return "\n".join(lines)


def turn_rows(results: list[TurnResult]) -> list[dict]:
    rows = []
    for i, result in enumerate(results):
        t = result.timings
        rows.append(
            {
                "turn": i,
                "transcribe_ms": "" if t.transcribe_ms is None else round(t.transcribe_ms, 3),
                "dialogue_ms": round(t.dialogue_ms, 3),
                "synthesize_ms": round(t.synthesize_ms, 3),
                "render_ms": round(t.render_ms, 3),
                "render_skipped": t.render_skipped,
                "total_ms": round(t.total_ms, 3),
                "overhead_ms": round(t.overhead_ms, 3),
                "cache_hit": result.cache_hit,
            }
        )
    return rows


def write_report_artifacts(
    report: LatencyReport, results: list[TurnResult], out_dir: str | Path
) -> list[Path]:
    """Write JSON + CSV + figures for a run; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / "latency_report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    written.append(json_path)

    csv_path = out / "turns.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(turn_rows(results))
    written.append(csv_path)

    written.extend(_write_figures(report, results, out))
    return written


def _write_figures(report: LatencyReport, results: list[TurnResult], out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    names = list(REPORT_STAGES)
    means = [report.stages[n].mean_ms for n in names]
    p95s = [report.stages[n].p95_ms for n in names]
    x = range(len(names))
    ax.bar(x, means, width=0.55, color=[STAGE_COLORS[n] for n in names], label="mean")
    ax.plot(x, p95s, "k_", markersize=22, label="p95")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names)
    ax.set_ylabel("duration (ms)")
    ax.set_title(f"Mean stage duration over {report.turn_count} turns")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = out / "stage_breakdown.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    turns = list(range(len(results)))
    bottom = [0.0] * len(results)
    for name in REPORT_STAGES:
        heights = []
        for result in results:
            value = result.timings.by_report_stage()[name]
            heights.append(0.0 if value is None else value)
        ax.bar(turns, heights, bottom=bottom, color=STAGE_COLORS[name], label=name)
        bottom = [b + h for b, h in zip(bottom, heights)]
    ax.set_xlabel("turn")
    ax.set_ylabel("duration (ms)")
    ax.set_title("Per-turn stage durations")
    ax.set_xticks(turns)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = out / "turn_totals.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    return written
