"""Shared fixtures and the acceptance-criterion summary hook."""

import numpy as np
import pytest

from prefsim import GridSpec, ScenarioSpec, make_dataset

# nodeid -> (criterion number, short title), filled at collection
_CRITERIA: dict[str, tuple[int, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(num, title): marks a test as one acceptance criterion",
    )


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _CRITERIA[item.nodeid] = (int(mark.args[0]), str(mark.args[1]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    outcome: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", None)
            if nodeid in _CRITERIA and getattr(rep, "when", "call") in ("call", "setup"):
                if status == "passed" and rep.when != "call":
                    continue
                outcome[nodeid] = "PASS" if status == "passed" else "FAIL"
    for rep in terminalreporter.stats.get("skipped", []):
        nodeid = getattr(rep, "nodeid", None)
        if nodeid in _CRITERIA:
            outcome.setdefault(nodeid, "SKIP")
    ran = {nid: res for nid, res in outcome.items()}
    if not ran:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid, (num, title) in sorted(_CRITERIA.items(), key=lambda kv: kv[1][0]):
        if nodeid in ran:
            terminalreporter.write_line(f"criterion {num}: {ran[nodeid]:4s} {title}")


@pytest.fixture(scope="session")
def small_dataset():
    """A small mixed-design dataset on an 8x8 grid, reused across tests."""
    grid = GridSpec(8, 8)
    spec = ScenarioSpec(
        spatial_range=0.4, prop_random=0.4, n_total=40, replicate=0, grid=grid
    )
    return make_dataset(spec, master_seed=424242), grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
