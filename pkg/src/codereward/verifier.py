"""Automated verification of generated programs against expert and random rollouts.

Sub-task checkers are consulted in order: checker j only runs once checkers
0..j-1 have fired in that trajectory, and at most one fires per frame. This
is the same progression the rewarder applies during training, so a program
that passes here behaves identically when deployed.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .gridworld.envs import Trajectory
from .gridworld.policies import PolicyKind, policy_rollout
from .imaging import Frame
from .rewardlang import CachedEvaluator, EvalContext, EvalError, Kind, Program, evaluate
from .rewardlang.interpreter import DEFAULT_FUEL

REPORT_FORMAT = "report/v1"


class InvalidArtifacts(ValueError):
    pass


class TrajectoryMismatch(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class VerifierConfig:
    n_expert: int = 2
    n_random: int = 100
    p: float = 0.1
    p_units: str = "fraction"  # "fraction" (0.1 = 10%) or "percent" (10 = 10%)
    goal_recency_x: int = 5
    expert_seed_base: int = 0
    random_seed_base: int = 1000
    # frames of each random trajectory to examine: "expert" matches the longest
    # expert trajectory, "full" uses everything, an integer caps the step count
    random_horizon: str | int = "expert"
    fuel: int = DEFAULT_FUEL
    workers: int = 1

    def __post_init__(self):
        if self.p_units not in ("fraction", "percent"):
            raise InvalidConfig(f"p_units must be 'fraction' or 'percent', got {self.p_units!r}")
        if not 0 < self.threshold < 1:
            raise InvalidConfig(f"p must lie strictly between 0 and 1 as a fraction, got {self.threshold}")
        if self.n_expert < 1 or self.n_random < 1:
            raise InvalidConfig("n_expert and n_random must be >= 1")
        if self.goal_recency_x < 0:
            raise InvalidConfig("goal_recency_x must be >= 0")
        if not (self.random_horizon in ("expert", "full")
                or (isinstance(self.random_horizon, int) and self.random_horizon >= 1)):
            raise InvalidConfig(f"bad random_horizon {self.random_horizon!r}")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")

    @property
    def threshold(self) -> float:
        return self.p if self.p_units == "fraction" else self.p / 100.0


@dataclass
class IdentifierReport:
    passed: bool
    reason: str
    locations: list[tuple[float, float]]


@dataclass
class SubTaskReport:
    index: int
    description: str
    expert_flags: list[bool]
    expert_completion_frames: list[int | None]
    random_completion_rate: float
    random_completion_frames: list[int | None]
    runtime_errors: dict[str, int]
    threshold: float
    passed: bool
    reason: str


@dataclass
class RecencyReport:
    x: int
    first_true_frames: list[int | None]
    trajectory_frames: list[int]
    passed: bool
    reason: str


@dataclass
class VerificationReport:
    subtasks: list[SubTaskReport]
    goal: SubTaskReport | None = None
    goal_recency: RecencyReport | None = None
    random_horizon: int | None = None
    format: str = REPORT_FORMAT

    @property
    def passed(self) -> bool:
        parts = [s.passed for s in self.subtasks]
        if self.goal is not None:
            parts.append(self.goal.passed)
        if self.goal_recency is not None:
            parts.append(self.goal_recency.passed)
        return bool(parts) and all(parts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


# -- identifiers ---------------------------------------------------------------

def verify_identifier(program: Program, initial: Frame, expected: int | None = None,
                      fuel: int = DEFAULT_FUEL) -> IdentifierReport:
    if program.kind is not Kind.IDENTIFY:
        return IdentifierReport(False, f"expected an identify program, got {program.kind.value}", [])
    try:
        det = evaluate(program, EvalContext(initial, initial, {}, fuel))
    except EvalError as e:
        return IdentifierReport(False, f"runtime error: {e}", [])
    locs = [(p.x, p.y) for p in det.locations]
    if not det.found:
        return IdentifierReport(False, "found=false on the initial frame", locs)
    if expected is not None and len(locs) != expected:
        return IdentifierReport(False, f"count: found {len(locs)} instances, expected {expected}", locs)
    return IdentifierReport(True, "ok", locs)


# -- sequential sub-task evaluation ------------------------------------------

@dataclass
class _Progress:
    completion: list[int | None]
    errors: list[int]  # per program


def _run_sequence(programs: Sequence[Program], frames: Sequence[Frame], fuel: int,
                  cache: CachedEvaluator) -> _Progress:
    completion: list[int | None] = [None] * len(programs)
    errors = [0] * len(programs)
    store: dict = {}
    active = 0
    initial = frames[0]
    for t, frame in enumerate(frames):
        if active >= len(programs):
            break
        ctx = EvalContext(frame, initial, store, fuel)
        try:
            hit = cache.evaluate(programs[active], ctx)
        except EvalError:
            errors[active] += 1
            hit = False
        if hit is True:
            completion[active] = t
            active += 1
    return _Progress(completion, errors)


def _check_frames(trajs: Sequence[Trajectory]) -> tuple[int, int]:
    shapes = {(f.height, f.width) for tr in trajs for f in tr.frames}
    if len(shapes) > 1:
        raise TrajectoryMismatch(f"frame sizes differ across trajectories: {sorted(shapes)}")
    return shapes.pop() if shapes else (0, 0)


def _horizon(cfg: VerifierConfig, experts: Sequence[Trajectory]) -> int | None:
    if cfg.random_horizon == "full":
        return None
    if cfg.random_horizon == "expert":
        return max(len(t) for t in experts)
    return int(cfg.random_horizon)


def _map(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def verify_subtasks(checkers: Sequence[Program], expert_trajs: Sequence[Trajectory],
                    random_trajs: Sequence[Trajectory], cfg: VerifierConfig = VerifierConfig(),
                    descriptions: Sequence[str] | None = None,
                    cache: CachedEvaluator | None = None) -> VerificationReport:
    if not checkers:
        raise InvalidArtifacts("no sub-task checkers to verify")
    for i, c in enumerate(checkers):
        if c.kind is not Kind.CHECK:
            raise InvalidArtifacts(f"checker {i} is a {c.kind.value} program")
    if not expert_trajs or not random_trajs:
        raise InvalidArtifacts("need at least one expert and one random trajectory")
    _check_frames(list(expert_trajs) + list(random_trajs))
    cache = cache or CachedEvaluator()
    horizon = _horizon(cfg, expert_trajs)
    threshold = cfg.threshold

    expert = _map(lambda tr: _run_sequence(checkers, tr.frames, cfg.fuel, cache), expert_trajs, cfg.workers)

    def rand(tr: Trajectory) -> _Progress:
        frames = tr.frames if horizon is None else tr.frames[:horizon + 1]
        return _run_sequence(checkers, frames, cfg.fuel, cache)

    randoms = _map(rand, random_trajs, cfg.workers)
    reports = []
    for j in range(len(checkers)):
        expert_errors = sum(p.errors[j] for p in expert)
        random_errors = sum(p.errors[j] for p in randoms)
        flags = [p.completion[j] is not None for p in expert]
        rframes = [p.completion[j] for p in randoms]
        rate = sum(f is not None for f in rframes) / len(randoms)
        if expert_errors:
            passed, reason = False, f"{expert_errors} runtime error(s) on expert frames"
        elif not all(flags):
            passed, reason = False, f"not completed in expert trajectories {[i for i, f in enumerate(flags) if not f]}"
        elif not rate < threshold:
            passed, reason = False, f"random completion rate {rate:.3f} >= p={threshold:g}"
        else:
            passed, reason = True, "ok"
        desc = descriptions[j] if descriptions and j < len(descriptions) else f"sub-task {j + 1}"
        reports.append(SubTaskReport(
            j, desc, flags, [p.completion[j] for p in expert], rate, rframes,
            {"expert": expert_errors, "random": random_errors}, threshold, passed, reason,
        ))
    return VerificationReport(reports, random_horizon=horizon)


def first_true_frame(program: Program, frames: Sequence[Frame], fuel: int = DEFAULT_FUEL,
                     cache: CachedEvaluator | None = None) -> int | None:
    cache = cache or CachedEvaluator()
    store: dict = {}
    for t, f in enumerate(frames):
        try:
            if cache.evaluate(program, EvalContext(f, frames[0], store, fuel)) is True:
                return t
        except EvalError:
            continue
    return None


def verify_goal_recency(goal: Program, expert_trajs: Sequence[Trajectory], x: int,
                        fuel: int = DEFAULT_FUEL, cache: CachedEvaluator | None = None) -> RecencyReport:
    """The goal check must first fire within the last ``x`` frames of every expert run."""
    if x < 0:
        raise InvalidConfig("x must be >= 0")
    if goal.kind is not Kind.CHECK:
        raise InvalidArtifacts("goal recency applies to check programs")
    firsts, lengths, bad = [], [], []
    for i, tr in enumerate(expert_trajs):
        n = len(tr.frames)
        f = first_true_frame(goal, tr.frames, fuel, cache)
        firsts.append(f)
        lengths.append(n)
        if x >= n:
            continue  # the window covers the whole trajectory
        if f is None or f < n - x:
            bad.append(i)
    if bad:
        return RecencyReport(x, firsts, lengths, False,
                             f"goal fires outside the final {x} frames in expert trajectories {bad}")
    return RecencyReport(x, firsts, lengths, True, "ok")


def verify_artifacts(checkers: Sequence[Program], goal: Program | None,
                     expert_trajs: Sequence[Trajectory], random_trajs: Sequence[Trajectory],
                     cfg: VerifierConfig = VerifierConfig(),
                     descriptions: Sequence[str] | None = None) -> VerificationReport:
    """Full check: gated sub-tasks, then the goal (gated after them) and its recency."""
    cache = CachedEvaluator()
    if goal is not None and goal.kind is Kind.CHECK:
        seq = list(checkers)
        goal_is_last = bool(seq) and seq[-1] == goal
        if not goal_is_last:
            seq.append(goal)
        descs = list(descriptions or [f"sub-task {i + 1}" for i in range(len(checkers))])
        if not goal_is_last:
            descs.append("goal")
        report = verify_subtasks(seq, expert_trajs, random_trajs, cfg, descs, cache)
        if not goal_is_last:
            report.goal = report.subtasks.pop()
        else:
            report.goal = report.subtasks[-1]
        report.goal_recency = verify_goal_recency(goal, expert_trajs, cfg.goal_recency_x, cfg.fuel, cache)
        return report
    if not checkers:
        raise InvalidArtifacts("nothing to verify: no checkers and no check-kind goal")
    return verify_subtasks(checkers, expert_trajs, random_trajs, cfg, descriptions, cache)


# -- policy separation ---------------------------------------------------------

@dataclass
class PolicyStats:
    policy: str
    mean: float
    std: float
    sem: float
    n: int
    values: list[float]
    runtime_errors: int


@dataclass
class SeparationReport:
    policies: list[PolicyStats]
    ordering_ok: bool
    separation_ok: bool
    k: int
    seeds: list[int]
    format: str = REPORT_FORMAT
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.ordering_ok and self.separation_ok

    def stats(self, policy: str) -> PolicyStats:
        return next(p for p in self.policies if p.policy == policy)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def terminal_reward(program: Program, frames: Sequence[Frame], fuel: int = DEFAULT_FUEL,
                    cache: CachedEvaluator | None = None) -> tuple[float, int]:
    """Evaluate on every frame in order (the store carries over); return the last value."""
    cache = cache or CachedEvaluator()
    store: dict = {}
    value, errors = 0.0, 0
    for f in frames:
        try:
            value = float(cache.evaluate(program, EvalContext(f, frames[0], store, fuel)))
        except EvalError:
            errors += 1
            value = 0.0
    return value, errors


def pooled_se(a: PolicyStats, b: PolicyStats) -> float:
    return math.sqrt(a.sem ** 2 + b.sem ** 2)


def evaluate_separation(program: Program, env, k: int = 20, seed_base: int = 0,
                        policies: Sequence[PolicyKind | str] = tuple(PolicyKind),
                        fuel: int = DEFAULT_FUEL) -> SeparationReport:
    if program.kind is not Kind.REWARD:
        raise InvalidArtifacts("policy separation needs a reward program")
    if k < 1:
        raise InvalidConfig("k must be >= 1")
    seeds = [seed_base + i for i in range(k)]
    cache = CachedEvaluator()
    stats = []
    for kind in policies:
        kind = PolicyKind(kind)
        vals, errs = [], 0
        for s in seeds:
            tr = policy_rollout(env, kind, s)
            v, e = terminal_reward(program, tr.frames, fuel, cache)
            vals.append(v)
            errs += e
        arr = np.asarray(vals)
        std = float(arr.std(ddof=1)) if k > 1 else 0.0
        stats.append(PolicyStats(kind.value, float(arr.mean()), std, std / math.sqrt(k), k, vals, errs))
    by = {s.policy: s for s in stats}
    notes = []
    order = [p for p in ("random", "novice", "suboptimal", "expert") if p in by]
    ordering_ok = len(order) == 4 and (
        by["random"].mean < by["novice"].mean < by["suboptimal"].mean <= by["expert"].mean
    )
    separation_ok = False
    if len(order) == 4:
        gaps = {p: (by["expert"].mean - by[p].mean) / max(pooled_se(by["expert"], by[p]), 1e-12)
                for p in ("random", "novice")}
        separation_ok = all(g >= 2.0 for g in gaps.values())
        notes.append("expert gap in pooled SEs: " + ", ".join(f"{p}={g:.2f}" for p, g in gaps.items()))
    else:
        notes.append("ordering needs all four policies")
    return SeparationReport(stats, ordering_ok, separation_ok, k, seeds, notes=notes)


def collect(env, kind: PolicyKind | str, n: int, seed_base: int) -> list[Trajectory]:
    return [policy_rollout(env, kind, seed_base + i) for i in range(n)]
