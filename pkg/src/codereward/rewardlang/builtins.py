"""Builtin functions: the imaging vocabulary exposed to reward programs.

Each builtin declares its arity range and a fuel surcharge that scales with
the work it does, so the fuel budget bounds wall-clock time as well as
node count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable

from .. import imaging
from ..imaging import Contour, Frame, Mask, Point, Rect
from .errors import DegenerateGeometry, MissingStoreKey, RangeError, RuntimeTypeError
from .values import Detection, type_name


@dataclass(frozen=True)
class Builtin:
    name: str
    fn: Callable[..., Any]
    min_args: int
    max_args: int
    signature: str
    doc: str
    cost: Callable[[tuple], int] = lambda args: 0


REGISTRY: dict[str, Builtin] = {}


def builtin(signature: str, doc: str, min_args: int, max_args: int | None = None, cost=None):
    def deco(fn):
        name = signature.split("(", 1)[0]
        REGISTRY[name] = Builtin(name, fn, min_args, min_args if max_args is None else max_args,
                                 signature, doc, cost or (lambda args: 0))
        return fn
    return deco


# -- argument coercion -------------------------------------------------------

def _num(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise RuntimeTypeError(f"{what} must be a number, got {type_name(v)}")
    return v


def _str(v, what: str) -> str:
    if not isinstance(v, str):
        raise RuntimeTypeError(f"{what} must be a string, got {type_name(v)}")
    return v


def _image(v, what: str) -> Frame:
    if not isinstance(v, Frame):
        raise RuntimeTypeError(f"{what} must be an image, got {type_name(v)}")
    return v


def _contour(v, what: str) -> Contour:
    if not isinstance(v, Contour):
        raise RuntimeTypeError(f"{what} must be a contour, got {type_name(v)}")
    return v


def _is_seq(v) -> bool:
    # Point and Rect are NamedTuples, so an isinstance check would admit them
    return type(v) is tuple


def _seq(v, what: str) -> tuple:
    if not _is_seq(v):
        raise RuntimeTypeError(f"{what} must be a contour sequence, got {type_name(v)}")
    return v


def _point(v, what: str) -> Point:
    if not isinstance(v, Point):
        raise RuntimeTypeError(f"{what} must be a point, got {type_name(v)}")
    return v


def _shape(v, what: str):
    if not isinstance(v, (Contour, Rect)):
        raise RuntimeTypeError(f"{what} must be a contour or rect, got {type_name(v)}")
    return v


def _area_or_zero(c: Contour) -> float:
    try:
        return imaging.area(c)
    except imaging.Degenerate:
        return 0.0


def _pixels(v) -> int:
    if isinstance(v, Frame):
        return v.width * v.height
    if isinstance(v, Mask):
        return v.width * v.height
    return 0


def _verts(v) -> int:
    if isinstance(v, Contour):
        return len(v.vertices)
    if _is_seq(v):
        return sum(len(c.vertices) for c in v if isinstance(c, Contour))
    return 0


@lru_cache(maxsize=512)
def _mask_cached(frame: Frame, color: str, tol: int) -> Mask:
    return imaging.color_mask(frame, color, tol)


@lru_cache(maxsize=512)
def _contours_cached(mask: Mask) -> tuple[Contour, ...]:
    return tuple(imaging.extract_contours(mask))


@lru_cache(maxsize=4096)
def _approx_cached(c: Contour, eps: float) -> Contour:
    return imaging.approx_polygon(c, eps)


# -- frames ------------------------------------------------------------------

@builtin("frame()", "The current frame.", 0)
def _frame(rt):
    return rt.frame


@builtin("initial()", "The first frame of the episode.", 0)
def _initial(rt):
    return rt.initial


@builtin("mask(img, color, tol=0)",
         "Pixels of palette colour `color` (exact match, or per-channel delta <= tol).",
         2, 3, cost=lambda a: _pixels(a[0]) // 4096)
def _mask(rt, img, color, tol=0):
    img = _image(img, "mask image")
    color = _str(color, "colour")
    tol = _num(tol, "tolerance")
    if color not in imaging.PALETTE:
        raise RuntimeTypeError(f"unknown colour {color!r}")
    return _mask_cached(img, color, int(tol))


@builtin("contours(m)", "Outer boundaries of 4-connected regions, largest first.",
         1, cost=lambda a: _pixels(a[0]) // 4096)
def _contours(rt, m):
    if not isinstance(m, Mask):
        raise RuntimeTypeError(f"contours expects a mask, got {type_name(m)}")
    return _contours_cached(m)


# -- shape reduction ---------------------------------------------------------

@builtin("approx(c, eps)", "Douglas-Peucker simplification; maps over a sequence.",
         2, cost=lambda a: _verts(a[0]) // 8)
def _approx(rt, c, eps):
    eps = _num(eps, "eps")
    if eps < 0:
        raise RangeError("eps must be >= 0")
    if _is_seq(c):
        return tuple(_approx_cached(_contour(x, "approx item"), float(eps)) for x in c)
    return _approx_cached(_contour(c, "approx argument"), float(eps))


@builtin("hull(c)", "Convex hull; maps over a sequence.", 1, cost=lambda a: _verts(a[0]) // 8)
def _hull(rt, c):
    def one(x):
        try:
            return imaging.convex_hull(_contour(x, "hull argument"))
        except imaging.Degenerate as e:
            raise DegenerateGeometry(str(e)) from None
    if _is_seq(c):
        return tuple(one(x) for x in c)
    return one(c)


@builtin("vertices(c)", "Number of vertices of a contour.", 1)
def _vertices(rt, c):
    return len(_contour(c, "vertices argument").vertices)


# -- measurements ------------------------------------------------------------

@builtin("area(c)", "Polygon area in px^2 (rects allowed).", 1)
def _area(rt, c):
    c = _shape(c, "area argument")
    if isinstance(c, Rect):
        return float(c.width * c.height)
    try:
        return imaging.area(c)
    except imaging.Degenerate as e:
        raise DegenerateGeometry(str(e)) from None


@builtin("perimeter(c)", "Polygon perimeter in px.", 1)
def _perimeter(rt, c):
    return imaging.perimeter(_contour(c, "perimeter argument"))


@builtin("centroid(c)", "Area centroid of a contour, or centre of a rect.", 1)
def _centroid(rt, c):
    try:
        return imaging.centroid(_shape(c, "centroid argument"))
    except imaging.Degenerate as e:
        raise DegenerateGeometry(str(e)) from None


@builtin("bbox(c)", "Axis-aligned bounding rect.", 1)
def _bbox(rt, c):
    return imaging.bbox(_contour(c, "bbox argument"))


@builtin("width(r)", "Width of a rect or of a contour's bounding rect.", 1)
def _width(rt, r):
    r = _shape(r, "width argument")
    return (r if isinstance(r, Rect) else imaging.bbox(r)).width


@builtin("height(r)", "Height of a rect or of a contour's bounding rect.", 1)
def _height(rt, r):
    r = _shape(r, "height argument")
    return (r if isinstance(r, Rect) else imaging.bbox(r)).height


# -- sequences ---------------------------------------------------------------

@builtin("count(xs)", "Length of a sequence, detection locations, or set mask pixels.", 1,
         cost=lambda a: _pixels(a[0]) // 4096)
def _count(rt, xs):
    if _is_seq(xs):
        return len(xs)
    if isinstance(xs, Detection):
        return len(xs.locations)
    if isinstance(xs, Mask):
        return xs.count()
    raise RuntimeTypeError(f"count expects a sequence, detection or mask, got {type_name(xs)}")


@builtin("nth(xs, i)", "Element i (0-based) of a sequence or of detection locations.", 2)
def _nth(rt, xs, i):
    i = _num(i, "index")
    if not isinstance(i, int):
        raise RuntimeTypeError("index must be an integer")
    items = xs.locations if isinstance(xs, Detection) else _seq(xs, "nth sequence")
    if not 0 <= i < len(items):
        raise RangeError(f"index {i} out of range for length {len(items)}")
    return items[i]


@builtin("filter_area(xs, lo, hi)", "Contours with lo <= area <= hi.", 3, cost=lambda a: _verts(a[0]) // 8)
def _filter_area(rt, xs, lo, hi):
    lo, hi = _num(lo, "lo"), _num(hi, "hi")
    return tuple(c for c in _seq(xs, "filter_area sequence") if lo <= _area_or_zero(c) <= hi)


@builtin("filter_vertices(xs, eps, lo, hi)",
         "Contours whose approx(c, eps) has between lo and hi vertices (originals returned).",
         4, cost=lambda a: _verts(a[0]) // 8)
def _filter_vertices(rt, xs, eps, lo, hi):
    eps, lo, hi = _num(eps, "eps"), _num(lo, "lo"), _num(hi, "hi")
    if eps < 0:
        raise RangeError("eps must be >= 0")
    return tuple(c for c in _seq(xs, "filter_vertices sequence")
                 if lo <= len(_approx_cached(c, float(eps)).vertices) <= hi)


@builtin("largest(xs)", "Largest-area contour of a non-empty sequence.", 1)
def _largest(rt, xs):
    xs = _seq(xs, "largest argument")
    if not xs:
        raise RangeError("largest of an empty sequence")
    best = xs[0]
    for c in xs[1:]:
        if _area_or_zero(c) > _area_or_zero(best):
            best = c
    return best


# -- geometry ----------------------------------------------------------------

@builtin("contains(shape, p)", "Point inside contour or rect (boundary counts as inside).", 2)
def _contains(rt, shape, p):
    return imaging.contains_point(_shape(shape, "container"), _point(p, "point"))


@builtin("dist(p, q)", "Euclidean distance in px.", 2)
def _dist(rt, p, q):
    return imaging.euclidean(_point(p, "first point"), _point(q, "second point"))


@builtin("point(x, y)", "Construct a point.", 2)
def _mkpoint(rt, x, y):
    return Point(float(_num(x, "x")), float(_num(y, "y")))


@builtin("x(p)", "x coordinate of a point.", 1)
def _x(rt, p):
    return _point(p, "x argument").x


@builtin("y(p)", "y coordinate of a point.", 1)
def _y(rt, p):
    return _point(p, "y argument").y


@builtin("corner(r, i)", "Corner i of a rect: 0 top-left, 1 top-right, 2 bottom-right, 3 bottom-left.", 2)
def _corner(rt, r, i):
    if not isinstance(r, Rect):
        raise RuntimeTypeError(f"corner expects a rect, got {type_name(r)}")
    i = _num(i, "corner index")
    if i not in (0, 1, 2, 3) or isinstance(i, float):
        raise RangeError("corner index must be 0..3")
    return Point(*((r.x0, r.y0), (r.x1, r.y0), (r.x1, r.y1), (r.x0, r.y1))[i])


# -- detections --------------------------------------------------------------

@builtin("detection(x)", "Detection from contours (their centroids), a contour, or a point.", 1)
def _detection(rt, x):
    if isinstance(x, Point):
        return Detection.of([x])
    if isinstance(x, Contour):
        x = (x,)
    xs = _seq(x, "detection argument")
    locs = []
    for c in xs:
        try:
            locs.append(imaging.centroid(c))
        except imaging.Degenerate:
            continue
    return Detection.of(locs)


@builtin("found(d)", "Whether a detection found anything.", 1)
def _found(rt, d):
    if not isinstance(d, Detection):
        raise RuntimeTypeError(f"found expects a detection, got {type_name(d)}")
    return d.found


# -- numbers -----------------------------------------------------------------

@builtin("abs(v)", "Absolute value.", 1)
def _abs(rt, v):
    return abs(_num(v, "abs argument"))


@builtin("min(a, b)", "Smaller of two numbers.", 2)
def _min(rt, a, b):
    return min(_num(a, "min argument"), _num(b, "min argument"))


@builtin("max(a, b)", "Larger of two numbers.", 2)
def _max(rt, a, b):
    return max(_num(a, "max argument"), _num(b, "max argument"))


@builtin("clamp(v, lo, hi)", "v limited to [lo, hi].", 3)
def _clamp(rt, v, lo, hi):
    v, lo, hi = _num(v, "value"), _num(lo, "lo"), _num(hi, "hi")
    if lo > hi:
        raise RangeError("clamp bounds are reversed")
    return min(max(v, lo), hi)


@builtin("sqrt(v)", "Square root of a non-negative number.", 1)
def _sqrt(rt, v):
    v = _num(v, "sqrt argument")
    if v < 0:
        raise RangeError("sqrt of a negative number")
    return math.sqrt(v)


# -- episode store -----------------------------------------------------------

@builtin("has(key)", "Whether the episode store holds `key`.", 1)
def _has(rt, key):
    return _str(key, "store key") in rt.store


def recall(rt, key: str):
    try:
        return rt.store[key]
    except KeyError:
        raise MissingStoreKey(f"store has no key {key!r}") from None


def reference_card() -> str:
    """One line per builtin, for documentation and prompts."""
    lines = [f"  {b.signature:<34} {b.doc}" for b in REGISTRY.values()]
    lines.append(f"  {'recall(key)':<34} Value stored under `key` this episode.")
    return "\n".join(lines)
