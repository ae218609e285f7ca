"""Uniform wrappers over the gridworld and block-pusher, plus rollouts."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from ..imaging import Frame
from .grid import (
    Action, GridSpec, GridState, InvalidSpec, Layout,
    geometry, grid_expert, grid_render, grid_reset, grid_step, is_success,
)
from .push import PushConfig, PushState, push_expert, push_render, push_reset, push_step_full


@dataclass(frozen=True)
class Transition:
    state: Any
    reward: float
    done: bool
    success: bool


def _hash_fields(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class GridEnv:
    kind = "grid"

    def __init__(self, spec: GridSpec):
        spec.validate()
        self.spec = spec

    @property
    def env_id(self) -> str:
        return self.spec.env_id

    @property
    def spec_hash(self) -> str:
        return _hash_fields(asdict(self.spec))

    @property
    def frame_shape(self) -> tuple[int, int]:
        t = self.spec.tile_px
        return (self.spec.height * t, self.spec.width * t)

    def reset(self, seed: int) -> GridState:
        return grid_reset(self.spec, seed)

    def step(self, state: GridState, action) -> Transition:
        r = grid_step(state, action, self.spec)
        return Transition(r.state, r.reward, r.done, r.reward > 0)

    def render(self, state: GridState) -> Frame:
        return grid_render(state, self.spec)

    def expert_action(self, state: GridState) -> Action:
        return grid_expert(state, self.spec)

    def random_action(self, rng: np.random.Generator) -> Action:
        return Action(int(rng.integers(len(Action))))

    def encode_action(self, a) -> int:
        return int(a)

    def decode_action(self, v) -> Action:
        return Action(int(v))

    def truth(self, state: GridState) -> dict:
        """Ground-truth flags, used by tests and the verifier's self-checks."""
        return {
            "has_key": state.has_key,
            "key_present": state.key_present,
            "door_open": state.door_open,
            "success": is_success(state, self.spec),
        }


class PushEnv:
    kind = "push"

    def __init__(self, config: PushConfig | None = None):
        self.config = config or PushConfig()

    @property
    def env_id(self) -> str:
        return self.config.env_id

    @property
    def spec_hash(self) -> str:
        return _hash_fields(asdict(self.config))

    @property
    def frame_shape(self) -> tuple[int, int]:
        return (self.config.size_px, self.config.size_px)

    def reset(self, seed: int) -> PushState:
        return push_reset(self.config, seed)

    def step(self, state: PushState, action) -> Transition:
        ns, done, success = push_step_full(state, action, self.config)
        return Transition(ns, 1.0 if success else 0.0, done, success)

    def render(self, state: PushState) -> Frame:
        return push_render(state, self.config)

    def expert_action(self, state: PushState):
        return push_expert(state, self.config)

    def random_action(self, rng: np.random.Generator):
        vm = self.config.v_max
        vx, vy = rng.uniform(-vm, vm, size=2)
        return (float(vx), float(vy))

    def encode_action(self, a) -> list[float]:
        return [float(a[0]), float(a[1])]

    def decode_action(self, v) -> tuple[float, float]:
        return (float(v[0]), float(v[1]))

    def truth(self, state: PushState) -> dict:
        return {"block": state.block, "target": state.target, "agent": state.agent}


_GRID_ID = re.compile(r"^(empty|unlock|doorkey)-(\d+)x(\d+)$", re.IGNORECASE)


def make_env(env_id: str, tile_px: int = 16, layout_seed: int | None = None,
             max_steps: int | None = None):
    """Build an environment from ids like ``DoorKey-8x8`` or ``BlockPush``."""
    if env_id.lower() == "blockpush":
        cfg = PushConfig() if max_steps is None else PushConfig(max_steps=max_steps)
        return PushEnv(cfg)
    m = _GRID_ID.match(env_id.strip())
    if not m:
        raise InvalidSpec(f"unknown environment id {env_id!r}")
    layout = {l.value.lower(): l for l in Layout}[m.group(1).lower()]
    kw = {} if layout_seed is None else {"seed": layout_seed}
    spec = GridSpec(int(m.group(2)), int(m.group(3)), layout, tile_px, max_steps=max_steps, **kw)
    env = GridEnv(spec)
    geometry(spec)  # surfaces InvalidSpec early
    return env


@dataclass
class Trajectory:
    frames: list[Frame]
    actions: list
    rewards: list[float]
    label: str
    env_id: str
    seed: int
    spec_hash: str = ""
    states: list | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.frames) != len(self.actions) + 1 or len(self.rewards) != len(self.actions):
            raise ValueError("trajectory needs frames = actions + 1 = rewards + 1")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def rollout(env, policy: Callable[[Any], Any], seed: int, label: str,
            max_steps: int | None = None) -> Trajectory:
    state = env.reset(seed)
    states = [state]
    frames = [env.render(state)]
    actions, rewards = [], []
    while max_steps is None or len(actions) < max_steps:
        a = policy(state)
        t = env.step(state, a)
        state = t.state
        actions.append(a)
        rewards.append(t.reward)
        states.append(state)
        frames.append(env.render(state))
        if t.done:
            break
    return Trajectory(frames, actions, rewards, label, env.env_id, seed, env.spec_hash, states)
