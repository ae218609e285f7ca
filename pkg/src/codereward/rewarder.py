"""Dense reward assembled from verified sub-task checkers.

Per episode, sub-tasks complete strictly in order. Each first completion
pays ``r_aux``; the environment reward passes through unchanged. After the
last sub-task, a check-kind goal pays a terminal bonus once (taking the
larger of bonus and environment reward on that step, so the scale stays
bounded), while a reward-kind goal adds its value on every step.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .artifacts import GeneratedArtifacts, program_digest
from .imaging import Frame
from .rewardlang import CachedEvaluator, EvalContext, EvalError, Kind, Program
from .rewardlang.interpreter import DEFAULT_FUEL
from .verifier import VerificationReport

log = logging.getLogger(__name__)

ASSEMBLY_FORMAT = "assembly/v1"


class NotInitialized(RuntimeError):
    pass


class UnverifiedArtifacts(ValueError):
    pass


@dataclass(frozen=True)
class SubTaskProgram:
    description: str
    checker: Program
    identifiers: tuple[Program, ...] = ()
    verified: bool = False


@dataclass
class StepInfo:
    completed: int | None = None  # index of the sub-task that completed this step
    goal_fired: bool = False
    goal_value: float | None = None
    errors: int = 0


class RewardAssembly:
    def __init__(self, subtasks: list[SubTaskProgram], goal: Program | None = None,
                 r_aux: float | None = None, goal_bonus: float = 1.0, replace_mode: bool = False,
                 fuel: int = DEFAULT_FUEL, cache: CachedEvaluator | None = None):
        if goal is not None and goal.kind is Kind.IDENTIFY:
            raise ValueError("goal must be a check or reward program")
        self.subtasks = list(subtasks)
        self.goal = goal
        self.n = len(self.subtasks)
        self.r_aux = (1.0 / self.n if self.n else 0.0) if r_aux is None else float(r_aux)
        self.goal_bonus = goal_bonus
        self.replace_mode = replace_mode
        self.fuel = fuel
        self.cache = cache or CachedEvaluator()
        self.done = [False] * self.n
        self.goal_done = False
        self.ctx: EvalContext | None = None
        self.steps = 0
        self.aux_total = 0.0
        self.completion_steps: list[int | None] = [None] * self.n
        self.error_count = 0
        self.last = StepInfo()
        self.report_digest: str | None = None

    def begin_episode(self, initial: Frame) -> None:
        self.done = [False] * self.n
        self.goal_done = False
        self.ctx = EvalContext(initial, initial, {}, self.fuel)
        self.steps = 0
        self.aux_total = 0.0
        self.completion_steps = [None] * self.n
        self.last = StepInfo()

    @property
    def active(self) -> int | None:
        for i, d in enumerate(self.done):
            if not d:
                return i
        return None

    def _run(self, program: Program, frame: Frame):
        self.ctx.frame = frame
        self.ctx.fuel = self.fuel
        return self.cache.evaluate(program, self.ctx)

    def reward_step(self, frame: Frame, env_reward: float) -> float:
        if self.ctx is None:
            raise NotInitialized("begin_episode must be called first")
        self.steps += 1
        info = StepInfo()
        reward = float(env_reward)
        i = self.active
        if i is not None:
            try:
                fired = self._run(self.subtasks[i].checker, frame) is True
            except EvalError as e:
                log.debug("checker %d failed on step %d: %s", i, self.steps, e)
                info.errors += 1
                fired = False
            if fired:
                self.done[i] = True
                self.completion_steps[i] = self.steps
                self.aux_total += self.r_aux
                info.completed = i
                reward = self.r_aux if self.replace_mode else reward + self.r_aux
        elif self.goal is not None:
            try:
                value = self._run(self.goal, frame)
            except EvalError as e:
                log.debug("goal failed on step %d: %s", self.steps, e)
                info.errors += 1
                value = None
            if self.goal.kind is Kind.CHECK:
                if value is True and not self.goal_done:
                    self.goal_done = True
                    info.goal_fired = True
                    reward = max(reward, self.goal_bonus)
            elif value is not None:
                info.goal_value = float(value)
                reward += float(value)
        self.error_count += info.errors
        self.last = info
        return reward

    def manifest(self, files: dict[int, str] | None = None) -> dict:
        def ref(p: Program, name: str | None = None) -> dict:
            return {"file": name, "kind": p.kind.value, "sha256": program_digest(p)}

        files = files or {}
        return {
            "format": ASSEMBLY_FORMAT,
            "n": self.n,
            "r_aux": self.r_aux,
            "goal_bonus": self.goal_bonus,
            "replace_mode": self.replace_mode,
            "subtasks": [
                {"order": i, "description": s.description, "checker": ref(s.checker, files.get(i)),
                 "identifiers": [ref(p) for p in s.identifiers], "verified": s.verified}
                for i, s in enumerate(self.subtasks)
            ],
            "goal": None if self.goal is None else ref(self.goal, files.get(-1)),
            "verification_report_sha256": self.report_digest,
        }

    def manifest_json(self, files: dict[int, str] | None = None) -> str:
        return json.dumps(self.manifest(files), indent=2, sort_keys=True)


def assemble(artifacts: GeneratedArtifacts, report: VerificationReport, *,
             goal_as_last_task: bool | None = None, r_aux: float | None = None,
             goal_bonus: float = 1.0, replace_mode: bool = False, use_reward: bool = True,
             fuel: int = DEFAULT_FUEL) -> RewardAssembly:
    """Build a runtime assembly from verified artifacts.

    With ``goal_as_last_task`` the final checker becomes the goal (paying the
    terminal bonus) and the remaining checkers share ``1/(n-1)`` each.
    """
    if report is None or not report.passed:
        raise UnverifiedArtifacts("verification report did not pass")
    if goal_as_last_task is None:
        goal_as_last_task = artifacts.goal_is_last_task
    checkers = list(artifacts.checkers)
    descs = list(artifacts.subtasks)
    goal: Program | None
    if goal_as_last_task:
        if not checkers:
            raise UnverifiedArtifacts("no sub-task to promote to goal")
        goal = checkers.pop()
        descs.pop()
    elif use_reward and artifacts.reward is not None:
        goal = artifacts.reward
    else:
        goal = artifacts.goal
    subs = []
    for i, (d, c) in enumerate(zip(descs, checkers)):
        names = artifacts.subtask_objects[i] if i < len(artifacts.subtask_objects) else []
        ids = tuple(artifacts.identifiers[nm] for nm in names if nm in artifacts.identifiers)
        subs.append(SubTaskProgram(d, c, ids, verified=True))
    out = RewardAssembly(subs, goal, r_aux=r_aux, goal_bonus=goal_bonus,
                         replace_mode=replace_mode, fuel=fuel)
    out.report_digest = report.digest()
    return out
