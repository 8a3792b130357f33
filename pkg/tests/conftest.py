"""Shared fixtures: full-resolution trajectories, computed once per session."""

import functools

import pytest

from krflab.cohomology import KahlerClass
from krflab.integrator import FlowConfig, run_flow

# name -> (m, h, e, validation)
RUNS = {
    "pm2": (2, 1.0, 0.0, True),
    "pm3": (3, 1.0, 0.0, True),
    "collapse": (2, 3.0, 1.0, False),
    "contract": (2, 3.0, 0.5, False),
}

_acceptance_lines = []


def run_config(name: str, refined: bool = False) -> FlowConfig:
    m, h, e, validation = RUNS[name]
    cfg = FlowConfig(KahlerClass(m, h, e), validation=validation)
    return cfg.refined() if refined else cfg


@functools.lru_cache(maxsize=None)
def _trajectory(name: str, refined: bool):
    return run_flow(run_config(name, refined))


@pytest.fixture(scope="session")
def trajectory():
    """``trajectory(name, refined=False)``: cached default-grid runs."""
    def get(name, refined=False):
        return _trajectory(name, bool(refined))
    return get


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)
