"""Image-analysis primitives over exact-palette RGB frames.

Coordinates follow the raster convention: ``x`` grows to the right, ``y``
grows downward, and pixel ``(row=r, col=c)`` covers the unit square
``[c, c+1] x [r, r+1]``. Contours are traced along pixel corners, so the
shoelace area of a hole-free component equals its pixel count exactly.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import ndimage

PALETTE: dict[str, tuple[int, int, int]] = {
    "black": (0, 0, 0),
    "grey": (128, 128, 128),
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "yellow": (255, 255, 0),
    "blue": (0, 0, 255),
    "brown": (150, 75, 0),
    "orange": (255, 165, 0),
    "purple": (160, 32, 240),
}


class ImagingError(Exception):
    pass


class UnknownColor(ImagingError):
    pass


class Degenerate(ImagingError):
    pass


class Frame:
    """An immutable RGB raster (height x width x 3, uint8)."""

    __slots__ = ("pixels", "_digest")

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise ValueError(f"frame must be HxWx3 uint8, got {arr.shape} {arr.dtype}")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.flags.writeable = False
        self.pixels = arr
        self._digest: str | None = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def digest(self) -> str:
        if self._digest is None:
            h = hashlib.blake2b(digest_size=16)
            h.update(f"{self.height}x{self.width}".encode())
            h.update(self.pixels.tobytes())
            self._digest = h.hexdigest()
        return self._digest

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and self.digest == other.digest

    def __hash__(self) -> int:
        return hash(self.digest)

    def __repr__(self) -> str:
        return f"Frame({self.width}x{self.height}, {self.digest[:8]})"


@dataclass(frozen=True, eq=False)
class Mask:
    bits: np.ndarray  # (height, width) bool

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(f"{self.height}x{self.width}".encode())
        h.update(np.packbits(self.bits).tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Mask) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.digest)


class Point(NamedTuple):
    x: float
    y: float


class Rect(NamedTuple):
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


@dataclass(frozen=True)
class Contour:
    """Closed polygon; the last vertex connects back to the first."""

    vertices: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.vertices)

    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)


def color_mask(frame: Frame, color: str, tolerance: int = 0) -> Mask:
    """Pixels equal to the palette colour (or within ``tolerance`` per channel)."""
    try:
        rgb = PALETTE[color]
    except KeyError:
        raise UnknownColor(f"unknown colour {color!r}; palette is {sorted(PALETTE)}") from None
    pix = frame.pixels
    if tolerance <= 0:
        bits = (pix[:, :, 0] == rgb[0]) & (pix[:, :, 1] == rgb[1]) & (pix[:, :, 2] == rgb[2])
    else:
        delta = np.abs(pix.astype(np.int16) - np.asarray(rgb, dtype=np.int16))
        bits = (delta <= tolerance).all(axis=2)
    return Mask(bits)


# direction index -> (dx, dy); E, S, W, N (clockwise on screen)
_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def _trace_outer(comp: np.ndarray) -> list[tuple[int, int]]:
    """Corner vertices of the outer boundary of one 4-connected component.

    ``comp`` must be padded with a background border. Travel keeps the
    foreground on the right; at diagonal saddles the walk turns right so
    diagonal-only neighbours stay separate.
    """
    rows, cols = np.nonzero(comp)
    r0, c0 = int(rows[0]), int(cols[0])  # raster-first pixel
    start = (c0, r0)
    x, y = start
    d = 0
    corners: list[tuple[int, int]] = []
    first = True
    while True:
        if d == 0:
            fl, fr = comp[y - 1, x], comp[y, x]
        elif d == 1:
            fl, fr = comp[y, x], comp[y, x - 1]
        elif d == 2:
            fl, fr = comp[y, x - 1], comp[y - 1, x - 1]
        else:
            fl, fr = comp[y - 1, x - 1], comp[y - 1, x]
        if not fr:
            nd = (d + 1) % 4
        elif fl:
            nd = (d + 3) % 4
        else:
            nd = d
        if not first and (x, y) == start and nd == 0:
            break
        if nd != d or first:
            corners.append((x, y))
        first = False
        d = nd
        x += _DIRS[d][0]
        y += _DIRS[d][1]
    return corners


def extract_contours(mask: Mask) -> list[Contour]:
    """Outer boundary per 4-connected component, largest area first."""
    labels, n = ndimage.label(mask.bits)
    if n == 0:
        return []
    out = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        sub = labels[sl] == k
        padded = np.pad(sub, 1)
        oy, ox = sl[0].start - 1, sl[1].start - 1
        verts = tuple((vx + ox, vy + oy) for vx, vy in _trace_outer(padded))
        out.append(Contour(verts))
    out.sort(key=lambda c: (-_signed_area(c.vertices), c.vertices[0][1], c.vertices[0][0]))
    return out


def _signed_area(verts: Sequence[tuple[float, float]]) -> float:
    s = 0.0
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s / 2.0


def _seg_dist(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - ax - t * dx, py - ay - t * dy)


def _dp_open(pts: list, eps: float) -> list:
    # iterative Douglas-Peucker on an open chain; keeps both endpoints
    keep = [False] * len(pts)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        best, idx = -1.0, -1
        for k in range(i + 1, j):
            dk = _seg_dist(pts[k], pts[i], pts[j])
            if dk > best:
                best, idx = dk, k
        if idx >= 0 and best > eps:
            keep[idx] = True
            stack.append((i, idx))
            stack.append((idx, j))
    return [p for p, k in zip(pts, keep) if k]


def approx_polygon(c: Contour, eps: float) -> Contour:
    """Douglas-Peucker reduction of a closed contour.

    The chain is split at two mutually distant vertices, which are extreme
    points of the shape, so true corners anchor the reduction.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    verts = list(c.vertices)
    n = len(verts)
    if eps == 0 or n <= 3:
        return c
    a = max(range(n), key=lambda i: (verts[i][0] - verts[0][0]) ** 2 + (verts[i][1] - verts[0][1]) ** 2)
    b = max(range(n), key=lambda i: (verts[i][0] - verts[a][0]) ** 2 + (verts[i][1] - verts[a][1]) ** 2)
    i, j = min(a, b), max(a, b)
    if i == j:
        return c
    first = _dp_open(verts[i:j + 1], eps)
    second = _dp_open(verts[j:] + verts[:i + 1], eps)
    out = first[:-1] + second[:-1]
    if len(out) < 3:
        # thin shapes collapse to a chord; keep the farthest vertex so the result stays a polygon
        far = max((v for v in verts if v not in out), key=lambda v: _seg_dist(v, out[0], out[-1]))
        out = [v for v in verts if v in out or v == far]
    # rotate to canonical start (topmost, then leftmost) in original order
    k = min(range(len(out)), key=lambda q: (out[q][1], out[q][0]))
    return Contour(tuple(out[k:] + out[:k]))


def convex_hull(c: Contour) -> Contour:
    """Monotone-chain hull, oriented like traced contours (clockwise on screen)."""
    pts = sorted(set(c.vertices))
    if len(pts) < 3:
        raise Degenerate("hull needs at least 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise Degenerate("all points are collinear")
    # match traced contours: positive signed area with y pointing down
    if _signed_area(hull) < 0:
        hull.reverse()
    k = min(range(len(hull)), key=lambda q: (hull[q][1], hull[q][0]))
    return Contour(tuple(hull[k:] + hull[:k]))


def area(c: Contour) -> float:
    a = abs(_signed_area(c.vertices))
    if a == 0:
        raise Degenerate("zero-area contour")
    return a


def perimeter(c: Contour) -> float:
    v = c.vertices
    return sum(math.dist(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))


def centroid(c: Union[Contour, Rect]) -> Point:
    if isinstance(c, Rect):
        return Point((c.x0 + c.x1) / 2.0, (c.y0 + c.y1) / 2.0)
    v = c.vertices
    n = len(v)
    a2 = 0.0
    cx = cy = 0.0
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        cr = x1 * y2 - x2 * y1
        a2 += cr
        cx += (x1 + x2) * cr
        cy += (y1 + y2) * cr
    if a2 == 0:
        raise Degenerate("zero-area contour has no centroid")
    return Point(cx / (3.0 * a2), cy / (3.0 * a2))


def bbox(c: Contour) -> Rect:
    xs = [p[0] for p in c.vertices]
    ys = [p[1] for p in c.vertices]
    return Rect(float(min(xs)), float(min(ys)), float(max(xs)), float(max(ys)))


def _on_segment(p, a, b, tol: float = 1e-9) -> bool:
    return _seg_dist(p, a, b) <= tol


def contains_point(outer: Union[Contour, Rect], p: Sequence[float]) -> bool:
    """Even-odd test; points on the boundary count as inside."""
    px, py = float(p[0]), float(p[1])
    if isinstance(outer, Rect):
        return outer.x0 <= px <= outer.x1 and outer.y0 <= py <= outer.y1
    v = outer.vertices
    n = len(v)
    inside = False
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        if _on_segment((px, py), a, b):
            return True
        (x1, y1), (x2, y2) = a, b
        if (y1 > py) != (y2 > py):
            xi = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xi:
                inside = not inside
    return inside


def euclidean(p1: Sequence[float], p2: Sequence[float]) -> float:
    return math.hypot(float(p1[0]) - float(p2[0]), float(p1[1]) - float(p2[1]))
