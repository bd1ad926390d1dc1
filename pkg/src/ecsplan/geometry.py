"""Planar segment predicates used for cable-crossing detection."""

from __future__ import annotations

EPS = 1e-9

Point = tuple[float, float]
Segment = tuple[Point, Point]


def orientation(a: Point, b: Point, c: Point, eps: float = EPS) -> int:
    """Sign of the turn a->b->c: +1 counter-clockwise, -1 clockwise, 0 collinear."""
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if cross > eps:
        return 1
    if cross < -eps:
        return -1
    return 0


def _collinear_overlap(a: Segment, b: Segment, eps: float) -> bool:
    (p, q), (r, s) = a, b
    # project on the dominant axis of the first segment
    axis = 0 if abs(q[0] - p[0]) >= abs(q[1] - p[1]) else 1
    lo1, hi1 = sorted((p[axis], q[axis]))
    lo2, hi2 = sorted((r[axis], s[axis]))
    return min(hi1, hi2) - max(lo1, lo2) > eps


def segments_cross(a: Segment, b: Segment, eps: float = EPS) -> bool:
    """True when the open interiors of two segments meet.

    Proper crossings and collinear overlaps of positive length count;
    touching at an endpoint, including a T-junction, does not.
    """
    p, q = a
    r, s = b
    o1 = orientation(p, q, r, eps)
    o2 = orientation(p, q, s, eps)
    o3 = orientation(r, s, p, eps)
    o4 = orientation(r, s, q, eps)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if o1 == 0 and o2 == 0 and o3 == 0 and o4 == 0:
        return _collinear_overlap(a, b, eps)
    return False
