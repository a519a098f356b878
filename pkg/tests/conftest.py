from __future__ import annotations

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qmera import mera

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def net8() -> mera.MeraNetwork:
    cfg = mera.MeraConfig(L=8, chi=2)
    return mera.build_mera(cfg, mera.random_params(cfg, 11))


@pytest.fixture(scope="session")
def net16() -> mera.MeraNetwork:
    cfg = mera.MeraConfig(L=16, chi=2)
    return mera.build_mera(cfg, mera.random_params(cfg, 12))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)


CRITERIA: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None or rep.when != "call" and not (rep.when == "setup" and rep.outcome != "passed"):
        return
    status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
    case = f" [{item.callspec.id}]" if hasattr(item, "callspec") else ""
    line = f"[{status}] criterion {crit.args[0]}{case}: {crit.args[1]}"
    print("\n" + line)
    CRITERIA.append((crit.args[0], line))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in CRITERIA:
        terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion reported in the summary")
