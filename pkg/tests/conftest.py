import logging

import pytest

from telesim.persona import default_instructions, load_profile
from telesim.runtime import build_platform, materialize_fixtures

# Collected by acceptance tests; printed as a summary block at the end of
# the run so every criterion shows one pass/fail line.
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def record_criterion(name: str, detail: str = ""):
    ACCEPTANCE_RESULTS.append((name, "PASS", detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in ACCEPTANCE_RESULTS:
        line = f"{status}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def instructions():
    return default_instructions()


@pytest.fixture
def maria_profile():
    from importlib import resources

    data = (
        resources.files("telesim")
        .joinpath("data/fixtures/personas/maria-gonzalez.json")
        .read_bytes()
    )
    return load_profile(data)


@pytest.fixture
def workspace_config(tmp_path):
    return materialize_fixtures(tmp_path / "ws")


@pytest.fixture
def platform(workspace_config):
    return build_platform(workspace_config)


@pytest.fixture(autouse=True)
def _quiet_noise(caplog):
    caplog.set_level(logging.INFO)
