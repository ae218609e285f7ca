from __future__ import annotations

import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codereward.artifacts import GeneratedArtifacts, program_digest
from codereward.gridworld import Action, policy_rollout
from codereward.rewarder import (
    NotInitialized, RewardAssembly, SubTaskProgram, UnverifiedArtifacts, assemble,
)
from codereward.rewardlang import oracle, parse
from codereward.verifier import VerificationReport, verify_artifacts


def doorkey_assembly(n: int = 3, **kw) -> RewardAssembly:
    names = ("key_check", "door_check", "goal_check")[:n]
    subs = [SubTaskProgram(nm, oracle.load(nm), verified=True) for nm in names]
    return RewardAssembly(subs, **kw)


def run_episode(asm: RewardAssembly, tr) -> list[float]:
    asm.begin_episode(tr.frames[0])
    return [asm.reward_step(f, r) for f, r in zip(tr.frames[1:], tr.rewards)]


@pytest.fixture(scope="module")
def artifacts():
    return GeneratedArtifacts(
        "DoorKey-8x8", "reach the goal", ["pick up the key", "open the door", "reach the goal"],
        [oracle.load("key_check"), oracle.load("door_check"), oracle.load("goal_check")],
        goal=oracle.load("goal_check"),
        identifiers={"key": oracle.load("key_identify"), "door": oracle.load("door_identify")},
        subtask_objects=[["key"], ["door"], []],
    )


@pytest.fixture(scope="module")
def passing_report(artifacts, doorkey_experts, doorkey_randoms):
    rep = verify_artifacts(artifacts.checkers, artifacts.goal, doorkey_experts, doorkey_randoms)
    assert rep.passed
    return rep


def test_key_pickup_pays_half(doorkey):
    tr = policy_rollout(doorkey, "expert", 0)
    asm = doorkey_assembly(2)
    assert asm.r_aux == 0.5
    out = run_episode(asm, tr)
    pick = tr.actions.index(Action.Pickup) + 1
    toggle = tr.actions.index(Action.Toggle) + 1
    for t, r in enumerate(out, start=1):
        want = tr.rewards[t - 1] + (0.5 if t in (pick, toggle) else 0.0)
        assert r == want
    assert asm.completion_steps == [pick, toggle]


def test_begin_episode_resets_everything(doorkey):
    tr = policy_rollout(doorkey, "expert", 1)
    asm = doorkey_assembly()
    run_episode(asm, tr)
    assert all(asm.done) and asm.aux_total == pytest.approx(1.0)
    other = policy_rollout(doorkey, "expert", 2)
    asm.begin_episode(other.frames[0])
    first = (list(asm.done), asm.aux_total, asm.ctx.store, asm.steps)
    asm.begin_episode(other.frames[0])
    assert (list(asm.done), asm.aux_total, asm.ctx.store, asm.steps) == first == ([False] * 3, 0.0, {}, 0)
    assert asm.ctx.initial is other.frames[0]


def test_initial_follows_begin_episode(doorkey):
    probe = parse('fn reward() { return x(centroid(largest(contours(mask(initial(), "red"))))); }')
    asm = RewardAssembly([], probe)
    a = policy_rollout(doorkey, "random", 0, max_steps=3)
    b = policy_rollout(doorkey, "random", 7, max_steps=3)
    values = []
    for tr in (a, b):
        asm.begin_episode(tr.frames[0])
        values.append(asm.reward_step(tr.frames[1], 0.0))
    t = doorkey.spec.tile_px
    for v, tr in zip(values, (a, b)):
        assert int(v // t) == tr.states[0].agent[0]


def test_errors_count_as_false_and_no_completion_passes_env_reward(doorkey):
    crash = parse("fn check() { return 1 / 0 == 1; }")
    asm = RewardAssembly([SubTaskProgram("crash", crash)])
    tr = policy_rollout(doorkey, "expert", 0)
    out = run_episode(asm, tr)
    assert out == tr.rewards
    assert asm.error_count == len(tr.rewards) and not any(asm.done)


def test_not_initialized():
    with pytest.raises(NotInitialized):
        doorkey_assembly().reward_step(None, 0.0)


def test_replace_mode_and_check_goal_bonus(doorkey):
    tr = policy_rollout(doorkey, "expert", 0)
    asm = doorkey_assembly(2, replace_mode=True, goal=oracle.load("goal_check"), goal_bonus=1.0)
    out = run_episode(asm, tr)
    assert sorted(set(out)) == [0.0, 0.5, 1.0]
    assert out.count(0.5) == 2 and out[-1] == 1.0  # env 1 and bonus 1 do not stack


def test_reward_goal_halfway(push_env):
    s = push_env.reset(4)
    cfg = push_env.config
    mid = ((s.block[0] + s.target[0]) / 2, (s.block[1] + s.target[1]) / 2)
    # park the pusher in a corner away from both
    corner = min(((0.05, 0.05), (0.95, 0.05), (0.05, 0.95), (0.95, 0.95)),
                 key=lambda c: -min(math.dist(c, s.target), math.dist(c, s.block)))
    asm = RewardAssembly([], oracle.load("push_reward"))
    asm.begin_episode(push_env.render(s))
    r = asm.reward_step(push_env.render(replace(s, block=mid, agent=corner)), 0.0)
    d0 = math.dist(s.block, s.target) * cfg.size_px
    assert r == pytest.approx(0.5, abs=1.0 / d0)


def test_assemble_defaults_and_overrides(artifacts, passing_report):
    asm = assemble(artifacts, passing_report, use_reward=False)
    assert asm.n == 3 and asm.r_aux == pytest.approx(1 / 3)
    assert asm.subtasks[0].identifiers == (artifacts.identifiers["key"],)
    assert all(s.verified for s in asm.subtasks)
    last = assemble(artifacts, passing_report, goal_as_last_task=True)
    assert last.n == 2 and last.r_aux == 0.5 and last.goal is artifacts.checkers[-1]
    assert assemble(artifacts, passing_report, r_aux=0.25).r_aux == 0.25


def test_assemble_refuses_failed_reports(artifacts, passing_report):
    failed = VerificationReport([replace(passing_report.subtasks[0], passed=False)])
    with pytest.raises(UnverifiedArtifacts):
        assemble(artifacts, failed)
    with pytest.raises(UnverifiedArtifacts):
        assemble(artifacts, None)


def test_manifest(artifacts, passing_report):
    asm = assemble(artifacts, passing_report)
    m = asm.manifest({0: "check_00.rwd", -1: "goal.rwd"})
    assert m["format"] == "assembly/v1" and m["n"] == 3
    assert m["verification_report_sha256"] == passing_report.digest()
    assert [s["order"] for s in m["subtasks"]] == [0, 1, 2]
    assert m["subtasks"][0]["checker"] == {"file": "check_00.rwd", "kind": "check",
                                           "sha256": program_digest(artifacts.checkers[0])}
    assert m["goal"]["file"] == "goal.rwd"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_aux_rewards_are_ordered_and_bounded(doorkey, seed):
    kind = ("random", "novice", "suboptimal", "expert")[seed % 4]
    tr = policy_rollout(doorkey, kind, seed)
    asm = doorkey_assembly()
    asm.begin_episode(tr.frames[0])
    seen_done = [False] * 3
    for f, r in zip(tr.frames[1:], tr.rewards):
        asm.reward_step(f, r)
        assert all(d or not prev for d, prev in zip(asm.done, seen_done))  # never unset
        seen_done = list(asm.done)
    k = sum(asm.done)
    assert asm.done == [True] * k + [False] * (3 - k)
    assert asm.aux_total == pytest.approx(k * asm.r_aux)
    steps = [s for s in asm.completion_steps if s is not None]
    assert steps == sorted(set(steps))
