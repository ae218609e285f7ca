"""Deterministic DoorKey / Unlock / Empty gridworld with full-frame rendering.

Visual conventions: agent is a red triangle pointing where it faces, doors
and keys are yellow, the goal is a green square, walls are grey and the
floor is black. Tiles are drawn without grid lines.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ..imaging import PALETTE, Frame


class InvalidSpec(ValueError):
    pass


class Unsolvable(RuntimeError):
    pass


class Layout(str, enum.Enum):
    EMPTY = "Empty"
    UNLOCK = "Unlock"
    DOORKEY = "DoorKey"


class Facing(enum.IntEnum):
    E = 0
    S = 1
    W = 2
    N = 3


class Action(enum.IntEnum):
    TurnLeft = 0
    TurnRight = 1
    Forward = 2
    Pickup = 3
    Toggle = 4


_STEP = {Facing.E: (1, 0), Facing.S: (0, 1), Facing.W: (-1, 0), Facing.N: (0, -1)}


@dataclass(frozen=True)
class GridSpec:
    width: int = 8
    height: int = 8
    layout: Layout = Layout.DOORKEY
    tile_px: int = 16
    seed: int = 7  # layout seed (walls, door, key); reset seeds only move the agent
    max_steps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "layout", Layout(self.layout))

    def validate(self) -> None:
        if self.width < 5 or self.height < 5:
            raise InvalidSpec(f"grid must be at least 5x5, got {self.width}x{self.height}")
        if self.tile_px < 8 or self.tile_px % 2:
            raise InvalidSpec(f"tile_px must be even and >= 8, got {self.tile_px}")
        if not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must fit in 64 bits")
        if self.max_steps is not None and self.max_steps < 1:
            raise InvalidSpec("max_steps must be positive")

    @property
    def step_limit(self) -> int:
        return self.max_steps if self.max_steps is not None else 4 * self.width * self.height

    @property
    def env_id(self) -> str:
        return f"{self.layout.value}-{self.width}x{self.height}"


@dataclass(frozen=True)
class GridState:
    agent: tuple[int, int]
    facing: Facing
    has_key: bool = False
    door_open: bool = False
    key_present: bool = False
    step: int = 0

    def key(self) -> tuple:
        """Canonical key without the step counter."""
        return (self.agent, int(self.facing), self.has_key, self.door_open, self.key_present)


@dataclass(frozen=True)
class StepResult:
    state: GridState
    reward: float
    done: bool
    truncated: bool = False


@dataclass(frozen=True)
class _Geometry:
    walls: frozenset
    door: tuple[int, int] | None
    key: tuple[int, int] | None
    goal: tuple[int, int] | None
    start_cells: tuple[tuple[int, int], ...]


@lru_cache(maxsize=256)
def geometry(spec: GridSpec) -> _Geometry:
    """Static layout derived from ``spec.seed``; agent starts are left to reset."""
    spec.validate()
    w, h = spec.width, spec.height
    rng = np.random.default_rng(spec.seed)
    walls = {(x, y) for x in range(w) for y in range(h) if x in (0, w - 1) or y in (0, h - 1)}
    if spec.layout is Layout.EMPTY:
        goal = (w - 2, h - 2)
        starts = tuple((x, y) for y in range(1, h - 1) for x in range(1, w - 1) if (x, y) != goal)
        return _Geometry(frozenset(walls), None, None, goal, starts)

    # left room at least half the width so the key sub-task takes some walking
    split = int(rng.integers(w // 2, w - 2))
    door_y = int(rng.integers(1, h - 1))
    for y in range(1, h - 1):
        if y != door_y:
            walls.add((split, y))
    left = [(x, y) for y in range(1, h - 1) for x in range(1, split)]
    key = left[int(rng.integers(len(left)))]
    goal = (w - 2, h - 2) if spec.layout is Layout.DOORKEY else None
    # never start next to the key; fall back to any free cell on tiny grids
    starts = tuple(c for c in left if abs(c[0] - key[0]) + abs(c[1] - key[1]) >= 2)
    if not starts:
        starts = tuple(c for c in left if c != key)
    return _Geometry(frozenset(walls), (split, door_y), key, goal, starts)


def grid_reset(spec: GridSpec, seed: int) -> GridState:
    geo = geometry(spec)
    rng = np.random.default_rng([spec.seed, seed])
    agent = geo.start_cells[int(rng.integers(len(geo.start_cells)))]
    facing = Facing(int(rng.integers(4)))
    if spec.layout is Layout.EMPTY:
        return GridState(agent, facing, has_key=False, door_open=True, key_present=False)
    return GridState(agent, facing, has_key=False, door_open=False, key_present=True)


def _front(state: GridState) -> tuple[int, int]:
    dx, dy = _STEP[state.facing]
    return state.agent[0] + dx, state.agent[1] + dy


def _blocked(cell, state: GridState, geo: _Geometry) -> bool:
    if cell in geo.walls:
        return True
    if cell == geo.door and not state.door_open:
        return True
    return cell == geo.key and state.key_present


def grid_step(state: GridState, action: Action, spec: GridSpec) -> StepResult:
    geo = geometry(spec)
    action = Action(action)
    s = state
    reward, done = 0.0, False
    if action is Action.TurnLeft:
        s = replace(s, facing=Facing((s.facing - 1) % 4))
    elif action is Action.TurnRight:
        s = replace(s, facing=Facing((s.facing + 1) % 4))
    elif action is Action.Forward:
        fwd = _front(s)
        if not _blocked(fwd, s, geo):
            s = replace(s, agent=fwd)
            if fwd == geo.goal:
                reward, done = 1.0, True
    elif action is Action.Pickup:
        if s.key_present and not s.has_key and _front(s) == geo.key:
            s = replace(s, has_key=True, key_present=False)
    elif action is Action.Toggle:
        if geo.door is not None and _front(s) == geo.door and s.has_key and not s.door_open:
            s = replace(s, door_open=True)
            if spec.layout is Layout.UNLOCK:
                reward, done = 1.0, True
    s = replace(s, step=s.step + 1)
    truncated = False
    if not done and s.step >= spec.step_limit:
        done, truncated = True, True
    return StepResult(s, reward, done, truncated)


def is_success(state: GridState, spec: GridSpec) -> bool:
    geo = geometry(spec)
    if spec.layout is Layout.UNLOCK:
        return state.door_open
    return state.agent == geo.goal


# -- rendering ---------------------------------------------------------------

# ring head + shaft; head corners stay > tile/10 off any chord so the
# polygon approximates to more than 4 vertices at tile_px >= 8
KEY_OUTLINE = (
    (0.06, 0.10), (0.52, 0.10), (0.52, 0.42), (0.94, 0.42),
    (0.94, 0.58), (0.52, 0.58), (0.52, 0.90), (0.06, 0.90),
)


def rasterize(poly, size: int) -> np.ndarray:
    """Pixel-centre inclusion of a polygon (tile-pixel coordinates)."""
    ys, xs = np.mgrid[0:size, 0:size]
    px = xs + 0.5
    py = ys + 0.5
    inside = np.zeros((size, size), dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if y1 == y2:
            continue
        cond = (y1 > py) != (y2 > py)
        xi = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (px < xi)
    return inside


def agent_margin(tile: int) -> int:
    return tile // 8 + 1


def door_strip_width(tile: int) -> int:
    return max(2, tile // 8)


@lru_cache(maxsize=64)
def _sprites(tile: int) -> dict:
    m = agent_margin(tile)
    east = [(m, m), (tile - m, tile / 2), (m, tile - m)]
    tri = {}
    for f in Facing:
        pts = east
        for _ in range(int(f)):
            # rotate 90 degrees clockwise on screen about the tile centre
            pts = [(tile - y, x) for x, y in pts]
        tri[f] = rasterize(pts, tile)
    key = rasterize([(x * tile, y * tile) for x, y in KEY_OUTLINE], tile)
    return {"agent": tri, "key": key}


def _paint(img: np.ndarray, cell, tile: int, sprite: np.ndarray, color: str) -> None:
    x, y = cell
    view = img[y * tile:(y + 1) * tile, x * tile:(x + 1) * tile]
    view[sprite] = PALETTE[color]


@lru_cache(maxsize=64)
def _static_layer(spec: GridSpec) -> np.ndarray:
    geo = geometry(spec)
    t = spec.tile_px
    img = np.zeros((spec.height * t, spec.width * t, 3), dtype=np.uint8)
    for x, y in geo.walls:
        img[y * t:(y + 1) * t, x * t:(x + 1) * t] = PALETTE["grey"]
    if geo.goal is not None:
        gm = max(1, t // 16)
        x, y = geo.goal
        img[y * t + gm:(y + 1) * t - gm, x * t + gm:(x + 1) * t - gm] = PALETTE["green"]
    img.flags.writeable = False
    return img


def grid_render(state: GridState, spec: GridSpec) -> Frame:
    geo = geometry(spec)
    t = spec.tile_px
    sprites = _sprites(t)
    img = _static_layer(spec).copy()
    if geo.door is not None:
        dx, dy = geo.door
        if state.door_open:
            sw = door_strip_width(t)
            img[dy * t:(dy + 1) * t, dx * t:dx * t + sw] = PALETTE["yellow"]
        else:
            dm = t // 16
            img[dy * t + dm:(dy + 1) * t - dm, dx * t + dm:(dx + 1) * t - dm] = PALETTE["yellow"]
    if state.key_present and geo.key is not None:
        _paint(img, geo.key, t, sprites["key"], "yellow")
    _paint(img, state.agent, t, sprites["agent"][state.facing], "red")
    return Frame(img)


# -- scripted expert ---------------------------------------------------------

def _flag_sets(spec: GridSpec, geo: _Geometry) -> list[tuple[bool, bool, bool]]:
    # (has_key, door_open, key_present) combinations the dynamics can reach
    if geo.door is None:
        return [(False, True, False)]
    return [(False, False, True), (True, False, False), (True, True, False)]


@lru_cache(maxsize=64)
def _distance_table(spec: GridSpec) -> dict[tuple, int]:
    """Steps-to-success for every state, by backward BFS over the full state space."""
    geo = geometry(spec)
    free = [(x, y) for y in range(spec.height) for x in range(spec.width) if (x, y) not in geo.walls]
    preds: dict[tuple, list[tuple]] = {}
    dist: dict[tuple, int] = {}
    frontier = []
    for flags in _flag_sets(spec, geo):
        for pos in free:
            for f in Facing:
                s = GridState(pos, f, *flags)
                if _blocked(pos, s, geo) or is_success(s, spec):
                    continue
                for a in Action:
                    t = grid_step(s, a, spec)
                    if t.reward > 0:
                        if s.key() not in dist:
                            dist[s.key()] = 1
                            frontier.append(s.key())
                    elif t.state.key() != s.key():
                        preds.setdefault(t.state.key(), []).append(s.key())
    q = deque(frontier)
    while q:
        k = q.popleft()
        for p in preds.get(k, ()):
            if p not in dist:
                dist[p] = dist[k] + 1
                q.append(p)
    return dist


@lru_cache(maxsize=65536)
def _expert_cached(spec: GridSpec, skey: tuple) -> Action:
    agent, facing, has_key, door_open, key_present = skey
    state = GridState(agent, Facing(facing), has_key, door_open, key_present)
    dist = _distance_table(spec)
    d = dist.get(skey)
    if d is None:
        if is_success(state, spec):
            raise Unsolvable("task already complete")
        raise Unsolvable(f"no path to success from {state.agent}")
    # first action in enum order that makes progress keeps the solver deterministic
    for a in Action:
        t = grid_step(state, a, spec)
        if t.reward > 0 or dist.get(t.state.key()) == d - 1:
            return a
    raise AssertionError("distance table is inconsistent")


def grid_expert(state: GridState, spec: GridSpec) -> Action:
    """Scripted solver: key, pickup, door, toggle, goal along a jointly shortest path.

    Planning the three legs together (rather than one after another) matters
    because the pose in which the key is picked up changes the walk to the door.
    """
    return _expert_cached(spec, state.key())
