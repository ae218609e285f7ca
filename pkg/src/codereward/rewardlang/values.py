"""Runtime values of the reward language."""
from __future__ import annotations

from dataclasses import dataclass

from ..imaging import Contour, Frame, Mask, Point, Rect


@dataclass(frozen=True)
class Detection:
    found: bool
    locations: tuple[Point, ...] = ()

    def __post_init__(self):
        if self.found != bool(self.locations):
            raise ValueError("found must equal (locations non-empty)")

    @classmethod
    def of(cls, locations) -> "Detection":
        locs = tuple(Point(float(p[0]), float(p[1])) for p in locations)
        return cls(bool(locs), locs)


def type_name(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, float):
        return "real"
    if isinstance(v, str):
        return "string"
    if isinstance(v, Point):
        return "point"
    if isinstance(v, Rect):
        return "rect"
    if isinstance(v, Contour):
        return "contour"
    if isinstance(v, tuple):
        return "contours"
    if isinstance(v, Mask):
        return "mask"
    if isinstance(v, Frame):
        return "image"
    if isinstance(v, Detection):
        return "detection"
    return type(v).__name__
