"""Scripted policies of graded skill: expert plus epsilon-noised variants."""
from __future__ import annotations

import enum

import numpy as np

from .envs import Trajectory, rollout


class PolicyKind(str, enum.Enum):
    EXPERT = "expert"
    SUBOPTIMAL = "suboptimal"
    NOVICE = "novice"
    RANDOM = "random"


# probability that the expert's action is swapped for a uniform random one
NOISE = {
    PolicyKind.EXPERT: 0.0,
    PolicyKind.SUBOPTIMAL: 0.30,
    PolicyKind.NOVICE: 0.50,
    PolicyKind.RANDOM: 1.0,
}


class ScriptedPolicy:
    def __init__(self, kind: PolicyKind | str, env, seed: int):
        self.kind = PolicyKind(kind)
        self.env = env
        self.rng = np.random.default_rng(seed)
        self.calls = 0
        self.random_calls = 0

    @property
    def noise(self) -> float:
        return NOISE[self.kind]

    def __call__(self, state):
        self.calls += 1
        if self.kind is PolicyKind.EXPERT:
            return self.env.expert_action(state)
        if self.kind is PolicyKind.RANDOM or self.rng.random() < self.noise:
            self.random_calls += 1
            return self.env.random_action(self.rng)
        return self.env.expert_action(state)


def scripted_policy(kind: PolicyKind | str, state, seed: int, env):
    """One action from a fresh policy stream seeded with ``seed``."""
    return ScriptedPolicy(kind, env, seed)(state)


def policy_rollout(env, kind: PolicyKind | str, seed: int, max_steps: int | None = None) -> Trajectory:
    kind = PolicyKind(kind)
    return rollout(env, ScriptedPolicy(kind, env, seed), seed, kind.value, max_steps)
