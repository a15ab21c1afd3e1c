"""Shared fixtures: channel scenarios and session-scoped MI tables.

The large tables take tens of seconds to sample, so they are built once
per session and shared between the unit tests and the acceptance suite.
"""

import pytest
from fractions import Fraction

from mimoarq import ChannelConfig, build_mi_table, db_to_linear

_ACCEPTANCE_LINES = []


def record_criterion(line: str):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def criterion_log():
    """Collector for the one-line-per-criterion acceptance report."""
    return record_criterion


@pytest.fixture(scope="session")
def siso_channel():
    """Single-antenna 16-QAM scenario, two blocks, R=3.5, L=2, K=4."""
    return ChannelConfig(n_t=1, n_r=1, b=2, constellation="qam16",
                         rate=Fraction(7, 2), delay=2, feedback_levels=4)


@pytest.fixture(scope="session")
def siso_k3_channel():
    return ChannelConfig(n_t=1, n_r=1, b=2, constellation="qam16",
                         rate=Fraction(7, 2), delay=2, feedback_levels=3)


@pytest.fixture(scope="session")
def mimo_channel():
    """2x1 16-QAM scenario, one block, R=7.5, L=2, K=3."""
    return ChannelConfig(n_t=2, n_r=1, b=1, constellation="qam16",
                         rate=Fraction(15, 2), delay=2, feedback_levels=3)


@pytest.fixture(scope="session")
def siso_table_small(siso_channel):
    """Quick table for unit tests; too noisy for acceptance comparisons."""
    grid = [db_to_linear(d) for d in range(0, 34, 2)]
    return build_mi_table(siso_channel, grid, 4000, seed=1001,
                          noise_draws=16)


@pytest.fixture(scope="session")
def siso_table(siso_channel):
    """Acceptance-grade SISO table: 20k samples per point, 0..32 dB."""
    grid = [db_to_linear(d) for d in range(0, 34, 2)]
    return build_mi_table(siso_channel, grid, 20000, seed=1001,
                          noise_draws=32)


@pytest.fixture(scope="session")
def mimo_table(mimo_channel):
    """2x1 table; joint alphabet has 256 points, so sampling is costly."""
    grid = [db_to_linear(d) for d in range(8, 32, 2)]
    return build_mi_table(mimo_channel, grid, 3000, seed=1002,
                          noise_draws=8)
