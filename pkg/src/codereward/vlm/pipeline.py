"""Sequential prompting pipelines that turn two frames into verified programs.

Each program slot is retried with the fixed failure responses until the
verify callback accepts it or the attempt budget runs out. Everything sent
and received is recorded as a session log that the replay backend can
serve back without a network.
"""
from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..artifacts import GeneratedArtifacts
from ..gridworld.envs import Trajectory
from ..imaging import Frame
from ..rewardlang import (
    CachedEvaluator, EvalContext, EvalError, Kind, ParseError, Program, parse,
)
from ..verifier import VerifierConfig, verify_artifacts, verify_identifier, verify_subtasks
from . import prompts as P
from .backends import Backend, ChatMessage, Slot

# (slot, candidate, checkers accepted so far) -> None if accepted, else a reason
VerifyFn = Callable[[Slot, Program, Sequence[Program]], "str | None"]


class PipelineError(RuntimeError):
    pass


class NoCodeBlock(PipelineError):
    pass


class MaxAttemptsExceeded(PipelineError):
    def __init__(self, slot: str, attempts: int, diagnostics: list[str]):
        self.slot = slot
        self.attempts = attempts
        self.diagnostics = diagnostics
        last = diagnostics[-1] if diagnostics else "no diagnostics"
        super().__init__(f"slot {slot!r} failed {attempts} attempts; last: {last}")


@dataclass(frozen=True)
class PipelineConfig:
    n: int = 3
    agent_description: str = "red triangle"
    max_attempts: int = 12
    simplify_after: int = 5
    backend: str = "oracle"  # oracle | replay | live
    robotic: bool = False  # ask for the interacting part and an incremental reward

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if not 1 <= self.simplify_after < self.max_attempts:
            raise ValueError("simplify_after must lie in [1, max_attempts)")
        if self.backend not in ("oracle", "replay", "live"):
            raise ValueError(f"unknown backend {self.backend!r}")


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_program(text: str) -> str:
    """Body of the last fenced code block."""
    blocks = _FENCE.findall(text)
    if not blocks:
        raise NoCodeBlock("reply contains no fenced code block")
    return blocks[-1]


_ITEM = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+(.+?)\s*$")


def list_items(text: str) -> list[str]:
    return [m.group(1) for line in text.splitlines() if (m := _ITEM.match(line))]


def names_none(text: str) -> bool:
    return re.match(r"\s*(none|no)\b", text, re.IGNORECASE) is not None


class _Session:
    def __init__(self, backend: Backend, cfg: PipelineConfig, verify: VerifyFn,
                 clock: Callable[[], float]):
        self.backend = backend
        self.cfg = cfg
        self.verify = verify
        self.clock = clock
        self.messages: list[ChatMessage] = []
        self.records: list[dict] = []
        self.failures: dict[str, int] = {}
        self._push(ChatMessage("system", P.system_message()))

    def _push(self, m: ChatMessage) -> None:
        self.messages.append(m)
        self.records.append({"role": m.role, "text": m.text,
                             "image_hashes": [f.digest for f in m.images], "timestamp": self.clock()})

    def note(self, text: str) -> None:
        """Log-only record; never sent to the backend."""
        self.records.append({"role": "system", "text": "note: " + text, "image_hashes": [],
                             "timestamp": self.clock()})

    def say(self, text: str, slot: Slot, images: Sequence[Frame] = ()) -> str:
        self._push(ChatMessage("user", text, tuple(images)))
        reply = self.backend.complete(list(self.messages), slot)
        self._push(ChatMessage("assistant", reply))
        return reply

    def program(self, prompt: str, slot: Slot, accepted: Sequence[Program] = (),
                images: Sequence[Frame] = ()) -> Program:
        self.failures.setdefault(slot.name, 0)
        diagnostics: list[str] = []
        reply = self.say(prompt, slot, images)
        for attempt in range(1, self.cfg.max_attempts + 1):
            try:
                program = parse(extract_program(reply), slot.kind)
                reason = self.verify(slot, program, accepted)
            except (NoCodeBlock, ParseError) as e:
                reason = f"{type(e).__name__}: {e}"
            if reason is None:
                self.note(f"{slot.name} accepted after {self.failures[slot.name]} failed attempt(s)")
                return program
            self.failures[slot.name] += 1
            diagnostics.append(reason)
            self.note(f"{slot.name} attempt {attempt} rejected: {reason}")
            if attempt == self.cfg.max_attempts:
                break
            retry = P.fail_response(self.failures[slot.name], self.cfg.simplify_after,
                                    identify=slot.kind is Kind.IDENTIFY)
            reply = self.say(retry, slot)
        raise MaxAttemptsExceeded(slot.name, self.cfg.max_attempts, diagnostics)

    def identify(self, slot: Slot, item: str, label: str) -> Program:
        prog = self.program(P.OBJECT_SCRIPT, slot)
        self.say(P.OBJECT_OK.format(item=item, label=label), Slot("ack"))
        return prog

    def objects(self, reply: str) -> list[str]:
        if names_none(reply):
            return []
        return list_items(reply) or [reply.strip()]

    def summary(self) -> None:
        self.note("failed attempts per slot: " + json.dumps(self.failures, sort_keys=True))


def _finish(session: _Session, session_path: str | Path | None) -> str | None:
    session.summary()
    if session_path is None:
        return None
    from ..datastore import save_session
    save_session(session.records, session_path)
    return str(session_path)


def run_task_pipeline(initial: Frame, goal: Frame, config: PipelineConfig, verify: VerifyFn,
                      backend: Backend, env_id: str = "", session_path: str | Path | None = None,
                      clock: Callable[[], float] = time.time) -> GeneratedArtifacts:
    """Agent identifier, n sub-tasks with identifiers and checkers, then the goal check."""
    s = _Session(backend, config, verify, clock)
    try:
        s.say(P.INTRO.format(agent=config.agent_description), Slot("describe"), [initial])
        if config.robotic:
            s.say(P.AGENT_PART, Slot("part"))
        identifiers = {"agent": s.program(P.AGENT_SCRIPT, Slot("agent", Kind.IDENTIFY))}
        s.say(P.AGENT_OK, Slot("ack"))
        s.say(P.OBJECTS, Slot("objects"))
        s.say(P.GOAL_IMAGE, Slot("goal_image"), [goal])
        task = s.say(P.FINAL_GOAL, Slot("final_goal")).strip()

        prompt = P.TASKS.format(n=config.n)
        tasks: list[str] = []
        for attempt in range(1, config.max_attempts + 1):
            tasks = list_items(s.say(prompt, Slot("tasks", n=config.n)))
            if len(tasks) == config.n:
                break
            s.failures["tasks"] = s.failures.get("tasks", 0) + 1
            s.note(f"tasks attempt {attempt}: expected {config.n} list items, got {len(tasks)}")
            prompt = P.FAIL_PLAIN
        else:
            raise MaxAttemptsExceeded("tasks", config.max_attempts, [f"list of {len(tasks)} items"])

        checkers: list[Program] = []
        subtask_objects: list[list[str]] = []
        for k in range(1, config.n + 1):
            s.say(P.TASK_OBJECT.format(k=k), Slot(f"task_{k}_object", task=k))
            names = [f"task_{k}_o1"]
            identifiers[names[0]] = s.identify(Slot(names[0], Kind.IDENTIFY, task=k), f"Task {k}",
                                               f"{names[0]}_ID_script")
            s.say(P.check_desc(f"Task {k}"), Slot(f"task_{k}_desc", task=k))
            extra = s.objects(s.say(P.TASK_EXTRA, Slot(f"task_{k}_extra", task=k)))
            for j, _ in enumerate(extra, start=2):
                nm = f"task_{k}_o{j}"
                identifiers[nm] = s.identify(Slot(nm, Kind.IDENTIFY, task=k), f"Task {k}", f"{nm}_ID_script")
                names.append(nm)
            labels = [f"{nm}_ID_script" for nm in names]
            checkers.append(s.program(P.task_implement(labels), Slot(f"task_{k}", Kind.CHECK, task=k), checkers))
            subtask_objects.append(names)

        s.say(P.check_desc("the goal", P.GOAL_NEW_OBJECTS), Slot("goal_desc"))
        extra = s.objects(s.say(P.GOAL_EXTRA, Slot("goal_extra")))
        for j, _ in enumerate(extra, start=1):
            nm = f"goal_o{j}"
            identifiers[nm] = s.identify(Slot(nm, Kind.IDENTIFY), "goal", f"{nm}_ID_script")
        labels = [f"{nm}_ID_script" for nm in identifiers if nm != "agent"]
        goal_prog = s.program(P.goal_implement(labels), Slot("goal", Kind.CHECK), checkers, [initial, goal])
        reward = None
        if config.robotic:
            reward = s.program(P.REWARD, Slot("reward", Kind.REWARD), checkers)
    finally:
        log_ref = _finish(s, session_path)
    return GeneratedArtifacts(env_id, task, tasks, checkers, goal_prog, reward, identifiers, subtask_objects,
                              False, dict(s.failures), log_ref)


def run_robotic_pipeline(initial: Frame, goal: Frame, config: PipelineConfig, verify: VerifyFn,
                         backend: Backend, env_id: str = "", session_path: str | Path | None = None,
                         clock: Callable[[], float] = time.time) -> GeneratedArtifacts:
    """Goal check plus an incremental reward; no sub-tasks."""
    s = _Session(backend, config, verify, clock)
    try:
        s.say(P.INTRO_ROBOTIC.format(agent=config.agent_description), Slot("describe"), [initial])
        s.say(P.AGENT_PART, Slot("part"))
        s.say(P.OBJECTS, Slot("objects"))
        s.say(P.GOAL_IMAGE, Slot("goal_image"), [goal])
        task = s.say(P.FINAL_GOAL, Slot("final_goal")).strip()
        s.say(P.check_desc("the goal"), Slot("goal_desc"))
        identifiers: dict[str, Program] = {}
        found = s.objects(s.say(P.ESSENTIAL, Slot("essential")))
        found += s.objects(s.say(P.GOAL_EXTRA, Slot("goal_extra")))
        for j, _ in enumerate(found, start=1):
            nm = f"goal_o{j}"
            identifiers[nm] = s.identify(Slot(nm, Kind.IDENTIFY), "goal", f"{nm}_ID_script")
        s.say(P.check_desc("the goal", P.STATIONARY), Slot("goal_stationary_desc"))
        labels = [f"{nm}_ID_script" for nm in identifiers]
        goal_prog = s.program(P.goal_implement(labels, robotic=True), Slot("goal", Kind.CHECK), [],
                              [initial, goal])
        reward = s.program(P.REWARD, Slot("reward", Kind.REWARD))
    finally:
        log_ref = _finish(s, session_path)
    return GeneratedArtifacts(env_id, task, [], [], goal_prog, reward, identifiers, [], False,
                              dict(s.failures), log_ref)


# -- default verification callback ----------------------------------------------

@dataclass
class TrajectoryVerifier:
    """Checks each candidate against recorded expert and random rollouts.

    Identifiers must find something on the initial frame (and the expected
    count when one is given). Sub-task checkers are verified gated behind the
    already-accepted ones. A goal check must be false on the initial frame and
    true on the goal frame, then pass the trajectory and recency tests. A
    reward must score the goal frame above the initial one.
    """
    experts: Sequence[Trajectory]
    randoms: Sequence[Trajectory]
    cfg: VerifierConfig = field(default_factory=VerifierConfig)
    expected_counts: dict[str, int] = field(default_factory=dict)
    cache: CachedEvaluator = field(default_factory=CachedEvaluator)

    def __post_init__(self):
        if not self.experts:
            raise ValueError("need at least one expert trajectory")
        self.initial = self.experts[0].frames[0]
        self.goal = self.experts[0].frames[-1]

    def _two_frames(self, program: Program) -> tuple[object, object]:
        store: dict = {}
        a = self.cache.evaluate(program, EvalContext(self.initial, self.initial, store, self.cfg.fuel))
        b = self.cache.evaluate(program, EvalContext(self.goal, self.initial, store, self.cfg.fuel))
        return a, b

    def __call__(self, slot: Slot, program: Program, accepted: Sequence[Program]) -> str | None:
        if program.kind is Kind.IDENTIFY:
            rep = verify_identifier(program, self.initial, self.expected_counts.get(slot.name), self.cfg.fuel)
            return None if rep.passed else rep.reason
        try:
            first, last = self._two_frames(program)
        except EvalError as e:
            return f"runtime error on the initial/goal frames: {e}"
        if program.kind is Kind.REWARD:
            if not float(last) > float(first):
                return f"reward does not increase from initial ({first}) to goal ({last})"
            return None
        if slot.name == "goal":
            if first is not False or last is not True:
                return f"goal check must be false on the initial frame and true on the goal frame, got {first}/{last}"
            rep = verify_artifacts(list(accepted), program, self.experts, self.randoms, self.cfg)
            failed = [r.reason for r in (rep.goal, rep.goal_recency) if r is not None and not r.passed]
            return "; ".join(failed) if failed else None
        rep = verify_subtasks(list(accepted) + [program], self.experts, self.randoms, self.cfg, cache=self.cache)
        last_rep = rep.subtasks[-1]
        if not all(r.passed for r in rep.subtasks[:-1]):
            return "an earlier accepted checker no longer passes"
        return None if last_rep.passed else last_rep.reason
