"""Tabular Q-learning with sparse or assembled dense rewards.

Updates use the selected reward stream, but evaluation always reports the
sparse environment return so curves from both conditions are comparable.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .gridworld.envs import GridEnv
from .gridworld.grid import Action
from .imaging import Frame
from .rewarder import RewardAssembly

N_ACTIONS = len(Action)


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 60_000
    gamma: float = 0.99
    alpha: float = 0.5
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int | None = None  # None: first half of training
    eval_every: int = 250
    eval_episodes: int = 5
    final_eval_episodes: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 1:
            raise InvalidConfig("total_steps must be >= 1")
        if not 0 < self.gamma < 1:
            raise InvalidConfig("gamma must lie in (0, 1)")
        if not 0 < self.alpha <= 1:
            raise InvalidConfig("alpha must lie in (0, 1]")
        for e in (self.eps_start, self.eps_end):
            if not 0 <= e <= 1:
                raise InvalidConfig("epsilon values must lie in [0, 1]")
        if self.eps_decay_steps is not None and self.eps_decay_steps < 1:
            raise InvalidConfig("eps_decay_steps must be >= 1")
        if self.eval_every < 1 or self.eval_episodes < 1 or self.final_eval_episodes < 1:
            raise InvalidConfig("evaluation cadence and counts must be >= 1")

    def epsilon(self, step: int) -> float:
        decay = self.eps_decay_steps or max(1, self.total_steps // 2)
        frac = min(1.0, step / decay)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


class QTable:
    """State key -> action values; unseen entries read as zero."""

    def __init__(self, n_actions: int = N_ACTIONS):
        self.n_actions = n_actions
        self.values: dict[Hashable, list[float]] = {}

    def get(self, key: Hashable) -> list[float]:
        row = self.values.get(key)
        return row if row is not None else [0.0] * self.n_actions

    def row(self, key: Hashable) -> list[float]:
        row = self.values.get(key)
        if row is None:
            row = self.values[key] = [0.0] * self.n_actions
        return row

    def greedy(self, key: Hashable) -> int:
        row = self.get(key)
        best = 0
        for a in range(1, self.n_actions):  # first maximum wins
            if row[a] > row[best]:
                best = a
        return best

    def max_value(self, key: Hashable) -> float:
        return max(self.get(key))

    def __len__(self) -> int:
        return len(self.values)


def q_update(q: QTable, s: Hashable, a: int, r: float, s2: Hashable, terminal: bool,
             alpha: float, gamma: float) -> None:
    target = r if terminal else r + gamma * q.max_value(s2)
    row = q.row(s)
    row[a] += alpha * (target - row[a])


@dataclass
class CurvePoint:
    step: int
    mean_return: float
    success_rate: float


@dataclass
class TrainResult:
    mode: str
    seed: int
    curve: list[CurvePoint]
    final_mean_return: float
    final_success_rate: float
    episodes: int
    config: dict = field(default_factory=dict)

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "mean_return", "success_rate"])
        for p in self.curve:
            w.writerow([p.step, f"{p.mean_return:.6f}", f"{p.success_rate:.6f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def evaluate(q: QTable, env: GridEnv, episodes: int, seed: int) -> tuple[float, float]:
    """Greedy rollouts; returns (mean sparse return, success rate)."""
    if episodes < 1:
        raise InvalidConfig("episodes must be >= 1")
    total, wins = 0.0, 0
    for i in range(episodes):
        state = env.reset(seed + i)
        seen = set()
        ret = 0.0
        while True:
            key = state.key()
            if key in seen:
                break  # deterministic greedy loop: the episode can only truncate
            seen.add(key)
            t = env.step(state, q.greedy(key))
            ret += t.reward
            state = t.state
            if t.done:
                break
        total += ret
        wins += ret > 0
    return total / episodes, wins / episodes


class _FrameCache:
    def __init__(self, env: GridEnv):
        self.env = env
        self.frames: dict[Hashable, Frame] = {}

    def __call__(self, state) -> Frame:
        k = state.key()
        f = self.frames.get(k)
        if f is None:
            f = self.frames[k] = self.env.render(state)
        return f


EVAL_SEED_OFFSET = 1_000_000


def train(env: GridEnv, reward_source: str | RewardAssembly, cfg: TrainConfig = TrainConfig()
          ) -> tuple[QTable, TrainResult]:
    """Epsilon-greedy Q-learning; ``reward_source`` is "sparse" or an assembly."""
    if not isinstance(env, GridEnv):
        raise InvalidConfig("tabular training needs a gridworld environment")
    assembly = reward_source if isinstance(reward_source, RewardAssembly) else None
    if assembly is None and reward_source != "sparse":
        raise InvalidConfig(f"reward source must be 'sparse' or an assembly, got {reward_source!r}")
    mode = "dense" if assembly is not None else "sparse"
    rng = np.random.default_rng(cfg.seed)
    render = _FrameCache(env)
    q = QTable()
    curve: list[CurvePoint] = []
    eval_seed = EVAL_SEED_OFFSET + cfg.seed * 1000
    episodes = 0

    def new_episode():
        s = env.reset(int(rng.integers(2 ** 31)))
        if assembly is not None:
            assembly.begin_episode(render(s))
        return s

    state = new_episode()
    for step in range(1, cfg.total_steps + 1):
        key = state.key()
        if rng.random() < cfg.epsilon(step - 1):
            a = int(rng.integers(N_ACTIONS))
        else:
            a = q.greedy(key)
        t = env.step(state, a)
        r = t.reward if assembly is None else assembly.reward_step(render(t.state), t.reward)
        # truncation is not a true terminal: bootstrap through it
        q_update(q, key, a, r, t.state.key(), t.success, cfg.alpha, cfg.gamma)
        state = t.state
        if t.done:
            episodes += 1
            state = new_episode()
        if step % cfg.eval_every == 0:
            m, s = evaluate(q, env, cfg.eval_episodes, eval_seed)
            curve.append(CurvePoint(step, m, s))
    fm, fs = evaluate(q, env, cfg.final_eval_episodes, eval_seed)
    return q, TrainResult(mode, cfg.seed, curve, fm, fs, episodes, asdict(cfg))


def aggregate(results: Sequence[TrainResult]) -> list[dict]:
    """Mean and standard error across seeds at each evaluation step."""
    if not results:
        return []
    out = []
    for points in zip(*(r.curve for r in results)):
        rets = np.array([p.mean_return for p in points])
        succ = np.array([p.success_rate for p in points])
        n = len(points)
        se = (lambda v: float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
        out.append({"step": points[0].step, "mean_return": float(rets.mean()), "return_se": se(rets),
                    "success_rate": float(succ.mean()), "success_se": se(succ)})
    return out
