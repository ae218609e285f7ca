from __future__ import annotations

import pytest

from codereward.gridworld import make_env
from codereward.rewardlang import oracle
from codereward.verifier import collect

# criterion number -> (title, passed); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def doorkey():
    return make_env("DoorKey-8x8")


@pytest.fixture(scope="session")
def doorkey_experts(doorkey):
    return collect(doorkey, "expert", 2, 0)


@pytest.fixture(scope="session")
def doorkey_randoms(doorkey):
    return collect(doorkey, "random", 100, 1000)


@pytest.fixture(scope="session")
def push_env():
    return make_env("BlockPush")


@pytest.fixture(scope="session")
def doorkey_checkers():
    return [oracle.load(n) for n in ("key_check", "door_check", "goal_check")]
