"""Algebra on half-open time intervals [start, end).

All functions operate on plain lists of ``(start, end)`` float tuples.  The
canonical form used throughout the package is: sorted by start, pairwise
disjoint, non-empty, with touching intervals merged.  Endpoints are compared
exactly (no epsilon): callers are expected to build endpoints from the same
decimal inputs so that equal instants compare equal.
"""

from __future__ import annotations

from bisect import bisect_right
from typing import Iterable, Sequence

Interval = tuple[float, float]


def merge(intervals: Iterable[Interval]) -> list[Interval]:
    """Return the canonical union of the given intervals.

    Empty or inverted intervals are dropped; overlapping or touching ones
    are merged.
    """
    items = sorted((s, e) for s, e in intervals if e > s)
    if not items:
        return []
    out = [items[0]]
    for s, e in items[1:]:
        ls, le = out[-1]
        if s <= le:
            if e > le:
                out[-1] = (ls, e)
        else:
            out.append((s, e))
    return out


def measure(intervals: Sequence[Interval]) -> float:
    return sum(e - s for s, e in intervals)


def clip(intervals: Sequence[Interval], lo: float, hi: float) -> list[Interval]:
    """Intersection of a canonical interval list with the window [lo, hi)."""
    out = []
    for s, e in intervals:
        if e <= lo:
            continue
        if s >= hi:
            break
        out.append((max(s, lo), min(e, hi)))
    return out


def subtract(intervals: Sequence[Interval], cuts: Sequence[Interval]) -> list[Interval]:
    """Remove the union of ``cuts`` from a canonical interval list."""
    if not cuts:
        return list(intervals)
    out: list[Interval] = []
    ci = 0
    n = len(cuts)
    for s, e in intervals:
        cur = s
        while ci < n and cuts[ci][1] <= cur:
            ci += 1
        j = ci
        while cur < e:
            if j >= n or cuts[j][0] >= e:
                out.append((cur, e))
                break
            cs, ce = cuts[j]
            if cs > cur:
                out.append((cur, cs))
            cur = max(cur, ce)
            if ce < e:
                j += 1
        # loop falls through when a cut swallowed the tail
    return out


def intersect(a: Sequence[Interval], b: Sequence[Interval]) -> list[Interval]:
    """Intersection of two canonical interval lists."""
    out: list[Interval] = []
    i = j = 0
    while i < len(a) and j < len(b):
        s = max(a[i][0], b[j][0])
        e = min(a[i][1], b[j][1])
        if e > s:
            out.append((s, e))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return out


def intersection_measure(a: Sequence[Interval], b: Sequence[Interval]) -> float:
    return measure(intersect(a, b))


def union_measure(a: Sequence[Interval], b: Sequence[Interval]) -> float:
    return measure(merge(list(a) + list(b)))


def covers(intervals: Sequence[Interval], t: float) -> bool:
    """Point query on a canonical list: is t inside some [start, end)?"""
    i = bisect_right(intervals, (t, float("inf"))) - 1
    return i >= 0 and intervals[i][0] <= t < intervals[i][1]


def dilate(intervals: Sequence[Interval], slack: float) -> list[Interval]:
    """Grow every interval by ``slack`` on both sides and re-canonicalize."""
    return merge([(s - slack, e + slack) for s, e in intervals])
