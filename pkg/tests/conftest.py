from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from phoenixtr.sim import DAY, SimConfig, generate_topology, run_simulation

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_topology():
    return generate_topology("uniform-random", 8, 120.0, seed=4)


@pytest.fixture(scope="session")
def small_trace(small_topology):
    cfg = SimConfig(duration=8 * DAY, seed=11, segment_model="lognormal:median=172800:sigma=1.0")
    return run_simulation(cfg, small_topology)


@pytest.fixture(scope="session")
def noiseless_trace(small_topology):
    cfg = SimConfig(duration=8 * DAY, seed=5, comm_delay_range=(0.0, 0.0), exact_timestamps=True,
                    segment_model="lognormal:median=172800:sigma=1.0")
    return run_simulation(cfg, small_topology)


VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        VERDICTS.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
