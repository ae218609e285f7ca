"""2D block pushing: a blue disc pushes a green square into a yellow target.

Positions live in the unit square; rendering maps them onto a square raster.
Contacts are resolved by projecting the block out of the disc (pure pushing),
sub-stepped so the disc never tunnels through the block.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..imaging import PALETTE, Frame

Vec = tuple[float, float]


@dataclass(frozen=True)
class PushConfig:
    size_px: int = 256
    agent_radius: float = 10 / 256
    block_half: float = 12 / 256
    target_half: float = 14 / 256
    v_max: float = 0.05
    dt: float = 1.0
    max_steps: int = 120
    min_start_distance: float = 0.4
    wall_margin: float = 0.02

    @property
    def env_id(self) -> str:
        return "BlockPush"

    @property
    def block_lo(self) -> float:
        # room for the disc between block and wall, so every face stays pushable
        return self.block_half + 2 * self.agent_radius + self.wall_margin

    @property
    def block_hi(self) -> float:
        return 1.0 - self.block_lo


@dataclass(frozen=True)
class PushState:
    agent: Vec
    block: Vec
    target: Vec
    step: int = 0


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def push_reset(config: PushConfig, seed: int) -> PushState:
    rng = np.random.default_rng(seed)
    s = config.size_px
    lo, hi = config.block_lo, config.block_hi
    # target centre on an integer pixel so its rendered edges are exact
    tx = int(rng.integers(math.ceil(lo * s), math.floor(hi * s) + 1)) / s
    ty = int(rng.integers(math.ceil(lo * s), math.floor(hi * s) + 1)) / s
    while True:
        bx, by = (float(v) for v in rng.uniform(lo, hi, size=2))
        if math.hypot(bx - tx, by - ty) >= config.min_start_distance:
            break
    ra = config.agent_radius
    while True:
        ax, ay = (float(v) for v in rng.uniform(ra, 1 - ra, size=2))
        clear_block = _box_distance((ax, ay), (bx, by), config.block_half) > ra + 0.01
        clear_target = _box_distance((ax, ay), (tx, ty), config.target_half) > ra + 0.01
        if clear_block and clear_target:
            break
    return PushState((ax, ay), (bx, by), (tx, ty))


def _box_distance(p: Vec, center: Vec, half: float) -> float:
    qx = _clamp(p[0], center[0] - half, center[0] + half)
    qy = _clamp(p[1], center[1] - half, center[1] + half)
    return math.hypot(p[0] - qx, p[1] - qy)


def _separate(agent: Vec, block: Vec, ra: float, hb: float) -> Vec | None:
    """Translation that moves the block off the disc, or None when apart."""
    qx = _clamp(agent[0], block[0] - hb, block[0] + hb)
    qy = _clamp(agent[1], block[1] - hb, block[1] + hb)
    dx, dy = agent[0] - qx, agent[1] - qy
    d = math.hypot(dx, dy)
    if d >= ra:
        return None
    if d > 1e-12:
        pen = ra - d
        return (-dx / d * pen, -dy / d * pen)
    # disc centre inside the block: leave along the shallowest axis
    ox = hb + ra - abs(agent[0] - block[0])
    oy = hb + ra - abs(agent[1] - block[1])
    if ox <= oy:
        return (math.copysign(ox, block[0] - agent[0]), 0.0)
    return (0.0, math.copysign(oy, block[1] - agent[1]))


def block_inside_target(state: PushState, config: PushConfig) -> bool:
    slack = config.target_half - config.block_half + 1e-9
    return (abs(state.block[0] - state.target[0]) <= slack
            and abs(state.block[1] - state.target[1]) <= slack)


def push_step(state: PushState, action, config: PushConfig) -> tuple[PushState, bool]:
    """Advance one step; ``done`` when the block sits fully inside the target."""
    ns, done, _ = push_step_full(state, action, config)
    return ns, done


def push_step_full(state: PushState, action, config: PushConfig) -> tuple[PushState, bool, bool]:
    vm = config.v_max
    vx = _clamp(float(action[0]), -vm, vm) * config.dt
    vy = _clamp(float(action[1]), -vm, vm) * config.dt
    ra, hb = config.agent_radius, config.block_half
    ax, ay = state.agent
    bx, by = state.block
    n_sub = max(1, math.ceil(max(abs(vx), abs(vy)) / (ra / 2)))
    for _ in range(n_sub):
        ax = _clamp(ax + vx / n_sub, ra, 1 - ra)
        ay = _clamp(ay + vy / n_sub, ra, 1 - ra)
        shift = _separate((ax, ay), (bx, by), ra, hb)
        if shift is None:
            continue
        bx = _clamp(bx + shift[0], config.block_lo, config.block_hi)
        by = _clamp(by + shift[1], config.block_lo, config.block_hi)
        back = _separate((ax, ay), (bx, by), ra, hb)
        if back is not None:
            # block pinned by the arena bound: the disc gives way instead
            ax = _clamp(ax - back[0], ra, 1 - ra)
            ay = _clamp(ay - back[1], ra, 1 - ra)
    ns = PushState((ax, ay), (bx, by), state.target, state.step + 1)
    success = block_inside_target(ns, config)
    truncated = not success and ns.step >= config.max_steps
    return ns, success or truncated, success


@lru_cache(maxsize=8)
def _pixel_centres(size: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:size, 0:size]
    return (xs + 0.5), (ys + 0.5)


def push_render(state: PushState, config: PushConfig) -> Frame:
    s = config.size_px
    img = np.zeros((s, s, 3), dtype=np.uint8)

    def square(center: Vec, half: float, color: str) -> None:
        cx, cy, h = center[0] * s, center[1] * s, half * s
        x0, x1 = math.ceil(cx - h - 0.5), math.floor(cx + h - 0.5)
        y0, y1 = math.ceil(cy - h - 0.5), math.floor(cy + h - 0.5)
        img[max(y0, 0):min(y1 + 1, s), max(x0, 0):min(x1 + 1, s)] = PALETTE[color]

    square(state.target, config.target_half, "yellow")
    square(state.block, config.block_half, "green")
    cx, cy, r = state.agent[0] * s, state.agent[1] * s, config.agent_radius * s
    x0, x1 = max(int(cx - r) - 1, 0), min(int(cx + r) + 2, s)
    y0, y1 = max(int(cy - r) - 1, 0), min(int(cy + r) + 2, s)
    px, py = _pixel_centres(s)
    disc = (px[y0:y1, x0:x1] - cx) ** 2 + (py[y0:y1, x0:x1] - cy) ** 2 <= r * r
    img[y0:y1, x0:x1][disc] = PALETTE["blue"]
    return Frame(img)


# -- scripted expert ---------------------------------------------------------

def _segment_hits_box(p: Vec, q: Vec, center: Vec, half: float) -> bool:
    """Does segment p->q pass through the open box? (Liang-Barsky clip)"""
    t0, t1 = 0.0, 1.0
    d = (q[0] - p[0], q[1] - p[1])
    for axis in (0, 1):
        lo = center[axis] - half - p[axis]
        hi = center[axis] + half - p[axis]
        if abs(d[axis]) < 1e-15:
            if lo >= 0 or hi <= 0:
                return False
            continue
        a, b = lo / d[axis], hi / d[axis]
        if a > b:
            a, b = b, a
        t0, t1 = max(t0, a), min(t1, b)
        if t0 >= t1:
            return False
    return True


def _route(start: Vec, goal: Vec, block: Vec, w: float, margin: float) -> Vec:
    """Next waypoint on the shortest path that skirts the inflated block."""
    inner = w - 1e-9
    if not _segment_hits_box(start, goal, block, inner):
        return goal
    c = w + margin
    corners = [(block[0] + sx * c, block[1] + sy * c) for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
    nodes = [start, goal] + corners
    dist = {0: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, 0)]
    done = set()
    while heap:
        d0, i = heapq.heappop(heap)
        if i in done:
            continue
        done.add(i)
        if i == 1:
            break
        for j in range(1, len(nodes)):
            if j in done or _segment_hits_box(nodes[i], nodes[j], block, inner):
                continue
            nd = d0 + math.dist(nodes[i], nodes[j])
            if nd < dist.get(j, math.inf):
                dist[j] = nd
                prev[j] = i
                heapq.heappush(heap, (nd, j))
    if 1 not in prev:
        return goal
    j = 1
    while prev[j] != 0:
        j = prev[j]
    return nodes[j]


def _toward(a: Vec, b: Vec, v_max: float) -> Vec:
    dx, dy = b[0] - a[0], b[1] - a[1]
    m = max(abs(dx), abs(dy))
    if m <= v_max:
        return (dx, dy)
    return (dx * v_max / m, dy * v_max / m)


def push_expert(state: PushState, config: PushConfig, tol: float = 0.002) -> Vec:
    """Axis-by-axis face pushing: align x, then y, walking around as needed."""
    ex = state.target[0] - state.block[0]
    ey = state.target[1] - state.block[1]
    if abs(ex) > tol:
        axis, err = 0, ex
    elif abs(ey) > tol:
        axis, err = 1, ey
    else:
        return (0.0, 0.0)
    sgn = 1.0 if err > 0 else -1.0
    w = config.block_half + config.agent_radius
    margin = 0.01
    contact = list(state.block)
    contact[axis] -= sgn * w
    contact = tuple(contact)
    standoff = list(contact)
    standoff[axis] -= sgn * margin
    standoff = tuple(standoff)
    a = state.agent
    if math.dist(a, contact) < 1e-6:
        push = min(config.v_max, abs(err)) * sgn
        return (push, 0.0) if axis == 0 else (0.0, push)
    # on the push side and lined up: slide straight onto the contact point
    behind = (state.block[axis] - a[axis]) * sgn >= w - 1e-9
    if behind and abs(a[1 - axis] - state.block[1 - axis]) < 1e-6:
        return _toward(a, contact, config.v_max)
    if math.dist(a, standoff) < 1e-6:
        return _toward(a, contact, config.v_max)
    wp = _route(a, standoff, state.block, w, margin)
    return _toward(a, wp, config.v_max)
