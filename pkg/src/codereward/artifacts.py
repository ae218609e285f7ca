"""The bundle of programs produced by a generation run."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .rewardlang import Kind, Program, format_program


def program_digest(p: Program) -> str:
    return hashlib.sha256(format_program(p).encode("utf-8")).hexdigest()


@dataclass
class GeneratedArtifacts:
    env_id: str
    task: str
    subtasks: list[str]
    checkers: list[Program]
    goal: Program | None = None
    reward: Program | None = None  # optional incremental reward (robotic pipeline)
    identifiers: dict[str, Program] = field(default_factory=dict)
    subtask_objects: list[list[str]] = field(default_factory=list)
    goal_is_last_task: bool = False
    failures: dict[str, int] = field(default_factory=dict)
    session_log: str | None = None

    def __post_init__(self):
        if len(self.checkers) != len(self.subtasks):
            raise ValueError("one checker per sub-task description is required")
        for p in self.checkers:
            if p.kind is not Kind.CHECK:
                raise ValueError("checkers must be check programs")
        if self.reward is not None and self.reward.kind is not Kind.REWARD:
            raise ValueError("reward must be a reward program")

    @property
    def n(self) -> int:
        return len(self.checkers)
