"""Operator command line: validate personas, manage assets, run offline
demos, benchmark latency, and serve the gateway.

Exit codes are uniform across commands: 0 success, 1 domain failure,
2 usage or parse failure. Every command takes ``--json`` for
machine-readable output with a stable shape.
"""

from __future__ import annotations

import json
import logging
import sys
import tempfile
from pathlib import Path

import click

from . import __version__
from .config import AppConfig, load_config
from .errors import (
    EmptyInput,
    ProfileParseError,
    ProfileValidationError,
    TelesimError,
)
from .persona import (
    assemble_prompt,
    default_instructions,
    load_instructions,
    load_profile,
    parse_profile,
)
from .pipeline import latency_report
from .providers import ProviderSet
from .providers.simulated import SimulatedLipsync
from .report import format_latency_table, format_transcript, turn_rows, write_report_artifacts
from .runtime import build_platform, materialize_fixtures

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def echo_json(payload: dict):
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
@click.version_option(__version__)
@click.option("--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


# -- persona ---------------------------------------------------------------------


@main.group()
def persona():
    """Author-side persona tooling."""


@persona.command("validate")
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable report.")
def persona_validate(file: Path, as_json: bool):
    """Check a persona document; prints one issue per line."""
    try:
        _, report = parse_profile(file.read_bytes())
    except ProfileParseError as exc:
        if as_json:
            echo_json({"ok": False, "parse_error": str(exc), "issues": []})
        else:
            click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    if as_json:
        echo_json(
            {
                "ok": report.ok,
                "issues": [
                    {"severity": i.severity, "field_path": i.field_path, "message": i.message}
                    for i in report.issues
                ],
            }
        )
    else:
        for issue in report.issues:
            click.echo(f"{issue.severity} {issue.field_path} {issue.message}")
    sys.exit(EXIT_OK if report.ok else EXIT_DOMAIN)


@persona.command("render-prompt")
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--hash", "hash_only", is_flag=True, help="Print only the content hash.")
@click.option(
    "--instructions", "instructions_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Instruction set to combine with the profile (default: packaged set).",
)
@click.option("--json", "as_json", is_flag=True)
def persona_render_prompt(file: Path, hash_only: bool,
                          instructions_file: Path | None, as_json: bool):
    """Render the dialogue system prompt for a persona; byte-stable."""
    try:
        profile = load_profile(file.read_bytes())
    except ProfileParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except ProfileValidationError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_DOMAIN)
    instructions = (
        load_instructions(instructions_file.read_bytes())
        if instructions_file
        else default_instructions()
    )
    bundle = assemble_prompt(profile, instructions)
    if as_json:
        echo_json(
            {
                "profile_id": bundle.profile_id,
                "instructions_version": bundle.instructions_version,
                "content_hash": bundle.content_hash,
                "system_text": bundle.system_text,
            }
        )
    elif hash_only:
        click.echo(bundle.content_hash)
    else:
        click.echo(bundle.system_text, nl=False)
    sys.exit(EXIT_OK)


# -- demo ---------------------------------------------------------------------------


def _fixture_platform(tmp_dir: str, providers: ProviderSet | None = None):
    config = materialize_fixtures(Path(tmp_dir))
    platform = build_platform(config)
    if providers is not None:
        platform.providers = providers
        platform.sessions.providers = providers
        platform.sessions.pipeline.providers = providers
    return platform


@main.command()
@click.option("--offline", is_flag=True, help="Force deterministic offline providers.")
@click.option("--persona", "persona_id", required=True, help="Persona id to converse with.")
@click.option(
    "--script", "script_file", required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="One learner utterance per line.",
)
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
@click.option("--report-dir", type=click.Path(file_okay=False, path_type=Path))
def demo(offline, persona_id, script_file, config_file, as_json, report_dir):
    """Run a scripted offline encounter; prints the transcript and timings."""
    lines = [l.strip() for l in script_file.read_text(encoding="utf-8").splitlines()]
    lines = [l for l in lines if l]
    if not lines:
        click.echo("error: script has no utterances (empty_input)", err=True)
        sys.exit(EXIT_DOMAIN)

    with tempfile.TemporaryDirectory(prefix="telesim-demo-") as tmp:
        try:
            if config_file:
                platform = build_platform(load_config(config_file))
                if offline:
                    providers = ProviderSet.offline()
                    platform.providers = providers
                    platform.sessions.providers = providers
                    platform.sessions.pipeline.providers = providers
            else:
                platform = _fixture_platform(tmp, ProviderSet.offline() if offline else None)
            manager = platform.sessions
            session = manager.create_session(persona_id)
            results = []
            failure = None
            for line in lines:
                job_id = manager.submit_turn(session.session_id, text=line)
                try:
                    results.append(manager.wait_for_turn(session.session_id, job_id))
                except TelesimError as exc:
                    failure = exc
                    break
            turns = manager.get_transcript(session.session_id)
            frames = manager.hub.events(session.session_id)
        except TelesimError as exc:
            if as_json:
                echo_json({"ok": False, "error": exc.code, "message": str(exc)})
            else:
                click.echo(f"error: {exc} ({exc.code})", err=True)
            sys.exit(EXIT_DOMAIN)

        report = latency_report(results) if results else None
        stages_by_turn = {}
        for frame in frames:
            stages_by_turn.setdefault(frame.turn_index, []).append(frame.stage)

        if as_json:
            echo_json(
                {
                    "ok": failure is None,
                    "persona": persona_id,
                    "turns": [
                        {**t.to_dict(), "stages": stages_by_turn.get(t.index, [])}
                        for t in turns
                    ],
                    "report": report.to_dict() if report else None,
                    "error": failure.code if failure else None,
                }
            )
        else:
            click.echo(format_transcript(turns))
            if report:
                click.echo("")
                click.echo(format_latency_table(report))
            if failure is not None:
                click.echo(f"turn failed: {failure} ({failure.code})", err=True)

        if report_dir and report:
            write_report_artifacts(report, results, report_dir)

    sys.exit(EXIT_OK if failure is None else EXIT_DOMAIN)


# -- bench -----------------------------------------------------------------------------


def _parse_delay_range(value: str | None) -> tuple[int, int] | None:
    if value is None:
        return None
    try:
        lo_s, _, hi_s = value.partition(":")
        lo, hi = int(lo_s), int(hi_s)
    except ValueError:
        raise click.BadParameter("expected lo:hi in milliseconds", param_hint="--render-delay-ms")
    if lo < 0 or lo > hi:
        raise click.BadParameter("need 0 <= lo <= hi", param_hint="--render-delay-ms")
    return lo, hi


@main.command()
@click.option("--turns", type=int, required=True, help="Number of turns to run (>= 1).")
@click.option(
    "--render-delay-ms", "delay_spec", default=None,
    help="Simulated lip-sync delay range, lo:hi in ms (omit for fully offline).",
)
@click.option("--seed", type=int, default=None, help="Seed for the simulated delay RNG.")
@click.option("--json", "as_json", is_flag=True)
@click.option("--report-dir", type=click.Path(file_okay=False, path_type=Path))
def bench(turns, delay_spec, seed, as_json, report_dir):
    """Benchmark pipeline latency over simulated turns."""
    if turns < 1:
        raise click.BadParameter("need at least one turn", param_hint="--turns")
    delay = _parse_delay_range(delay_spec)

    providers = ProviderSet.offline()
    if delay is not None:
        import random

        rng = random.Random(seed) if seed is not None else None
        providers.lipsync = SimulatedLipsync(delay, rng=rng)

    with tempfile.TemporaryDirectory(prefix="telesim-bench-") as tmp:
        platform = _fixture_platform(tmp, providers)
        manager = platform.sessions
        session = manager.create_session("maria-gonzalez")
        results = []
        for i in range(turns):
            # distinct questions so every turn renders instead of hitting the cache
            job_id = manager.submit_turn(
                session.session_id, text=f"bench question {i + 1} of {turns}"
            )
            results.append(manager.wait_for_turn(session.session_id, job_id, timeout_s=120.0))

        report = latency_report(results)
        if as_json:
            echo_json({"ok": True, "report": report.to_dict(), "turns": turn_rows(results)})
        else:
            click.echo(format_latency_table(report))
        if report_dir:
            paths = write_report_artifacts(report, results, report_dir)
            if not as_json:
                for path in paths:
                    click.echo(f"wrote {path}")
    sys.exit(EXIT_OK)


# -- assets ------------------------------------------------------------------------------


@main.group()
def assets():
    """Inspect and maintain the content-addressed asset store."""


def _store_from_options(store_dir: Path | None, config_file: Path | None):
    from .assets import AssetStore

    if store_dir is not None:
        return AssetStore(store_dir)
    if config_file is not None:
        return AssetStore(load_config(config_file).store_root)
    return AssetStore(Path("data") / "store")


@assets.command("fsck")
@click.option("--store", "store_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
def assets_fsck(store_dir, config_file, as_json):
    """Verify every stored asset against its recorded checksum."""
    store = _store_from_options(store_dir, config_file)
    report = store.fsck()
    if as_json:
        echo_json(
            {
                "ok": report.ok,
                "checked": report.checked,
                "problems": [
                    {"kind": p.kind, "id": p.asset_id, "problem": p.problem}
                    for p in report.problems
                ],
            }
        )
    else:
        for problem in report.problems:
            click.echo(f"{problem.problem} {problem.kind} {problem.asset_id}")
        click.echo(f"checked {report.checked} assets, {len(report.problems)} problem(s)")
    sys.exit(EXIT_OK if report.ok else EXIT_DOMAIN)


@assets.command("register")
@click.argument("kind", type=click.Choice(["base_video", "voice"]))
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--id", "asset_id", default=None, help="Declared asset id (base videos).")
@click.option("--duration-ms", type=float, default=0.0)
@click.option("--loopable", is_flag=True, help="Registrar asserts first/last frames match.")
@click.option("--content-type", default="application/octet-stream")
@click.option("--store", "store_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
def assets_register(kind, file, asset_id, duration_ms, loopable, content_type,
                    store_dir, config_file, as_json):
    """Register a base video file or voice JSON document."""
    store = _store_from_options(store_dir, config_file)
    if content_type == "application/octet-stream":
        import mimetypes

        guessed, _ = mimetypes.guess_type(file.name)
        if guessed:
            content_type = guessed
    metadata = {
        "id": asset_id,
        "duration_ms": duration_ms,
        "loopable": loopable,
        "content_type": content_type,
    }
    try:
        registered = store.register_asset(kind, file, metadata)
    except TelesimError as exc:
        if as_json:
            echo_json({"ok": False, "error": exc.code, "message": str(exc)})
        else:
            click.echo(f"error: {exc} ({exc.code})", err=True)
        sys.exit(EXIT_DOMAIN)
    if as_json:
        echo_json({"ok": True, "kind": kind, "id": registered})
    else:
        click.echo(registered)
    sys.exit(EXIT_OK)


# -- serve --------------------------------------------------------------------------------


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path))
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--fixtures", is_flag=True,
              help="Serve the packaged fixture workspace (demo mode, offline providers).")
def serve(config_file, host, port, fixtures):
    """Host the gateway (HTTP + WebSocket) for consoles to connect to."""
    import uvicorn

    from .gateway import create_app

    if fixtures and config_file:
        raise click.UsageError("--fixtures and --config are mutually exclusive")

    if fixtures:
        tmp = tempfile.mkdtemp(prefix="telesim-serve-")
        config = materialize_fixtures(Path(tmp))
    elif config_file:
        config = load_config(config_file)
    else:
        config = AppConfig(data_root=Path("data"), personas_dir=Path("personas"))
    platform = build_platform(config, load_persisted=True)
    app = create_app(platform)
    uvicorn.run(app, host=host or config.host, port=port or config.port, log_level="info")


if __name__ == "__main__":
    main()
