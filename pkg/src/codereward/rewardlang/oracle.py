"""Known-correct programs shipped with the package (valid for tile_px >= 12).

They serve as the oracle backend's answers and as test fixtures.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .parser import parse
from .syntax import Program

NAMES = (
    "agent_identify", "key_identify", "door_identify", "goal_identify",
    "key_check", "door_check", "goal_check", "key_proximity_check",
    "block_identify", "target_identify", "pusher_identify", "push_goal_check", "push_reward",
)


def source(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"no shipped program named {name!r}")
    return resources.files(__package__).joinpath("programs", f"{name}.rwd").read_text("utf-8")


@lru_cache(maxsize=None)
def load(name: str) -> Program:
    return parse(source(name))
