"""Pixel-rendered environments and scripted policies."""
from .envs import GridEnv, PushEnv, Trajectory, Transition, make_env, rollout
from .grid import (
    Action, Facing, GridSpec, GridState, InvalidSpec, Layout, StepResult, Unsolvable,
    grid_expert, grid_render, grid_reset, grid_step,
)
from .policies import PolicyKind, ScriptedPolicy, policy_rollout, scripted_policy
from .push import PushConfig, PushState, push_expert, push_render, push_reset, push_step

__all__ = [
    "Action", "Facing", "GridEnv", "GridSpec", "GridState", "InvalidSpec", "Layout",
    "PolicyKind", "PushConfig", "PushEnv", "PushState", "ScriptedPolicy", "StepResult",
    "Trajectory", "Transition", "Unsolvable", "grid_expert", "grid_render", "grid_reset",
    "grid_step", "make_env", "policy_rollout", "push_expert", "push_render", "push_reset",
    "push_step", "rollout", "scripted_policy",
]
