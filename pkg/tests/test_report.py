import csv
import json

from telesim.pipeline import latency_report
from telesim.report import format_latency_table, format_transcript, write_report_artifacts
from telesim.session import Turn

from test_pipeline import result_with, timings


def results_fixture():
    return [
        result_with(timings(render=100.0, dialogue=5.0, synth=2.0)),
        result_with(timings(render=120.0, dialogue=6.0, synth=3.0)),
        result_with(timings(render=80.0, dialogue=4.0, synth=2.5, transcribe=9.0)),
    ]


def test_table_contains_all_stages_and_dominant():
    report = latency_report(results_fixture())
    table = format_latency_table(report)
    for name in ("transcribing", "thinking", "synthesizing", "rendering", "total"):
        assert name in table
    assert "dominant stage: rendering" in table


def test_artifacts_written_and_loadable(tmp_path):
    results = results_fixture()
    report = latency_report(results)
    paths = write_report_artifacts(report, results, tmp_path / "out")
    names = {p.name for p in paths}
    assert names == {"latency_report.json", "turns.csv", "stage_breakdown.png", "turn_totals.png"}

    loaded = json.loads((tmp_path / "out" / "latency_report.json").read_text())
    assert loaded["dominant_stage"] == "rendering"
    assert loaded["turn_count"] == 3

    with open(tmp_path / "out" / "turns.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3
    assert float(rows[0]["render_ms"]) == 100.0
    assert rows[2]["transcribe_ms"] == "9.0"

    for png in ("stage_breakdown.png", "turn_totals.png"):
        data = (tmp_path / "out" / png).read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"


def test_transcript_formatting_handles_failures():
    turns = [
        Turn(index=0, status="ok", user_text="q", patient_text="a", clip_id="c",
             timings=timings()),
        Turn(index=1, status="failed", user_text="q2", cause="provider_timeout"),
    ]
    text = format_transcript(turns)
    assert "[0] learner: q" in text
    assert "FAILED: provider_timeout" in text
