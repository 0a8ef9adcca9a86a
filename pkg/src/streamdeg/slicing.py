"""Time slices, logarithmic degree classes and the fraction matrix.

The analysis window is cut into consecutive slices of duration tau.  Integer
degrees are grouped into classes by the bucket rule ``b(k) = floor(log10(k)/r)``
with the non-empty buckets renumbered consecutively from 1; with r = 0.1 this
yields {1}, {2}, {3}, {4,5}, ... and the class widths grow geometrically.

The fraction matrix holds, for slice i and class j, the measure share of
(time, node) couples whose degree lies in the class:

    f[i][j] = measure{(t, v) in T_i x V : degree_t(v) in C_j} / (tau * |V|)

plus the zero-degree share f[i][0], so each row is a partition of measure.
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .linkstream import LinkStream, NormalizedDegrees
from .robust_stats import ks_two_sample


class SchemeRangeError(ValueError):
    """The class scheme does not cover an observed degree."""


@dataclass(frozen=True)
class TimeSliceGrid:
    origin: float
    tau: float
    count: int

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.count < 0:
            raise ValueError("count must be non-negative")

    def bounds(self, i: int) -> tuple[float, float]:
        return self.origin + i * self.tau, self.origin + (i + 1) * self.tau

    @property
    def end(self) -> float:
        return self.origin + self.count * self.tau

    @classmethod
    def covering(cls, t_begin: float, t_end: float, tau: float) -> "TimeSliceGrid":
        """Second-aligned grid over [t_begin, t_end); a trailing partial slice
        is dropped rather than padded."""
        origin = float(math.floor(t_begin))
        # relative guard: division error grows with the slice count, so an
        # exactly divisible span must not lose its last slice to rounding
        count = int(math.floor((t_end - origin) / tau * (1.0 + 1e-12) + 1e-9))
        return cls(origin, tau, count)


def _boundary(bucket: int, ratio: float) -> float:
    """Lower edge 10**(bucket*ratio), snapped to integers hit exactly."""
    x = 10.0 ** (bucket * ratio)
    n = round(x)
    if n >= 1 and abs(x - n) <= 1e-9 * n:
        return float(n)
    return x


def _bucket_lo(bucket: int, ratio: float) -> int:
    x = _boundary(bucket, ratio)
    return int(x) if x == int(x) else int(math.ceil(x))


@dataclass(frozen=True)
class DegreeClass:
    index: int
    k_lo: int
    k_hi: int

    def __contains__(self, k) -> bool:
        return self.k_lo <= k <= self.k_hi

    def label(self) -> str:
        if self.k_lo == self.k_hi:
            return f"{{{self.k_lo}}}"
        return f"{{{self.k_lo}..{self.k_hi}}}"


@dataclass
class DegreeClassScheme:
    """Partition of {1..k_max} into consecutively indexed log-width classes."""

    ratio: float
    k_max: int
    classes: list[DegreeClass]
    _los: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self._los = [c.k_lo for c in self.classes]

    def class_of(self, k: int) -> int:
        """1-based class index for degree k; 0 means degree zero."""
        if k == 0:
            return 0
        if k < 0 or k > self.k_max:
            raise SchemeRangeError(f"degree {k} outside scheme range 1..{self.k_max}")
        return bisect_right(self._los, k)

    def __len__(self) -> int:
        return len(self.classes)

    def bounds_of(self, index: int) -> tuple[float, float]:
        c = self.classes[index - 1]
        return float(c.k_lo), float(c.k_hi)


def build_class_scheme(k_max: int, r: float) -> DegreeClassScheme:
    """Degree classes for 1..k_max with logarithmic width ``r``.

    Bucket b covers integers in [10**(b*r), 10**((b+1)*r)); empty buckets are
    collapsed and the remaining ones renumbered from 1.  The last class is
    clipped at k_max.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if r <= 0:
        raise ValueError("r must be positive")
    classes: list[DegreeClass] = []
    b = 0
    while True:
        lo = _bucket_lo(b, r)
        if lo > k_max:
            break
        hi = min(_bucket_lo(b + 1, r) - 1, k_max)
        if lo <= hi:
            classes.append(DegreeClass(len(classes) + 1, lo, hi))
        b += 1
    return DegreeClassScheme(r, k_max, classes)


@dataclass(frozen=True)
class NormalizedClass:
    index: int
    lo: float
    hi: float

    def label(self) -> str:
        return f"[{self.lo:.6g},{self.hi:.6g})"


@dataclass
class NormalizedClassScheme:
    """Pure logarithmic bins of width r over positive normalized degrees.

    Normalized degrees are real-valued, so no integer collapsing happens; the
    bins simply span the observed value range.
    """

    ratio: float
    bucket_lo: int
    classes: list[NormalizedClass]

    def class_of(self, x: float) -> int:
        if x <= 0:
            return 0
        b = int(math.floor(math.log10(x) / self.ratio + 1e-12))
        idx = b - self.bucket_lo + 1
        if idx < 1 or idx > len(self.classes):
            raise SchemeRangeError(f"normalized value {x} outside scheme range")
        return idx

    def __len__(self) -> int:
        return len(self.classes)

    def bounds_of(self, index: int) -> tuple[float, float]:
        c = self.classes[index - 1]
        return c.lo, c.hi


def build_normalized_scheme(max_value: float, r: float, min_value: float = 1e-12) -> NormalizedClassScheme:
    if max_value <= 0:
        return NormalizedClassScheme(r, 0, [NormalizedClass(1, 0.0, 1.0)])
    b_lo = int(math.floor(math.log10(min_value) / r + 1e-12))
    b_hi = int(math.floor(math.log10(max_value) / r + 1e-12))
    classes = [
        NormalizedClass(i + 1, 10.0 ** ((b_lo + i) * r), 10.0 ** ((b_lo + i + 1) * r))
        for i in range(b_hi - b_lo + 1)
    ]
    return NormalizedClassScheme(r, b_lo, classes)


# ---------------------------------------------------------------------------
# Per-slice measures
# ---------------------------------------------------------------------------


def slice_value_measures(
    stream: LinkStream,
    grid: TimeSliceGrid,
    normalized: NormalizedDegrees | None = None,
) -> list[dict[float, float]]:
    """Measure of active couple-time per degree value, one dict per slice.

    Keys are integer degrees (or real normalized degrees when a normalized
    view is given); zero-degree time is not included.
    """
    per_slice: list[dict[float, float]] = [dict() for _ in range(grid.count)]
    if grid.count == 0:
        return per_slice
    origin, tau, end = grid.origin, grid.tau, grid.end

    def add_segment(a: float, b: float, value) -> None:
        if b <= origin or a >= end:
            return
        a = max(a, origin)
        b = min(b, end)
        i0 = int(math.floor((a - origin) / tau))
        i1 = min(int(math.ceil((b - origin) / tau)), grid.count)
        for i in range(i0, i1):
            lo = origin + i * tau
            ov = min(b, lo + tau) - max(a, lo)
            if ov > 0:
                acc = per_slice[i]
                acc[value] = acc.get(value, 0.0) + ov

    for node in range(stream.num_nodes):
        if normalized is not None:
            for a, b, val in normalized.segments(node):
                if val > 0:
                    add_segment(a, b, val)
        else:
            for a, b, k in stream.degree_profile(node).segments():
                if k > 0:
                    add_segment(a, b, k)
    return per_slice


@dataclass
class FractionMatrix:
    """Per-slice, per-class measure fractions plus the zero-degree column."""

    grid: TimeSliceGrid
    scheme: DegreeClassScheme | NormalizedClassScheme
    fractions: np.ndarray  # (count, n_classes), class j at column j-1
    zero: np.ndarray  # (count,)
    node_count: int

    @property
    def n_classes(self) -> int:
        return self.fractions.shape[1]

    def column(self, class_index: int) -> np.ndarray:
        return self.fractions[:, class_index - 1]

    def value(self, slice_index: int, class_index: int) -> float:
        if class_index == 0:
            return float(self.zero[slice_index])
        return float(self.fractions[slice_index, class_index - 1])

    def row_sums(self) -> np.ndarray:
        return self.fractions.sum(axis=1) + self.zero

    def write_csv(self, out: IO[str]) -> None:
        writer = csv.writer(out)
        writer.writerow(["slice", "class", "fraction"])
        for i in range(self.grid.count):
            writer.writerow([i, 0, repr(float(self.zero[i]))])
            for j in range(1, self.n_classes + 1):
                writer.writerow([i, j, repr(float(self.fractions[i, j - 1]))])

    def sidecar(self) -> dict:
        if isinstance(self.scheme, DegreeClassScheme):
            classes = [
                {"index": c.index, "k_lo": c.k_lo, "k_hi": c.k_hi} for c in self.scheme.classes
            ]
        else:
            classes = [
                {"index": c.index, "lo": c.lo, "hi": c.hi} for c in self.scheme.classes
            ]
        return {
            "ratio": self.scheme.ratio,
            "classes": classes,
            "grid": {"origin": self.grid.origin, "tau": self.grid.tau, "count": self.grid.count},
            "node_count": self.node_count,
        }

    def write_sidecar(self, out: IO[str]) -> None:
        json.dump(self.sidecar(), out, indent=2, sort_keys=True)
        out.write("\n")


def fraction_matrix(
    stream: LinkStream,
    grid: TimeSliceGrid,
    scheme: DegreeClassScheme | NormalizedClassScheme,
    normalized: NormalizedDegrees | None = None,
) -> FractionMatrix:
    """Exact fraction matrix from degree-profile segments clipped to slices.

    The zero column is computed independently from the active measure, so the
    row-sum-equals-one invariant is a real check rather than a tautology.
    """
    if stream.num_nodes == 0:
        raise ValueError("fraction matrix undefined for an empty node set")
    measures = slice_value_measures(stream, grid, normalized)
    n = len(scheme)
    fractions = np.zeros((grid.count, n))
    zero = np.zeros(grid.count)
    denom = grid.tau * stream.num_nodes
    for i, acc in enumerate(measures):
        active = 0.0
        for value, m in sorted(acc.items()):
            j = scheme.class_of(value)
            fractions[i, j - 1] += m
            active += m
        zero[i] = (denom - active) / denom
    fractions /= denom
    return FractionMatrix(grid, scheme, fractions, zero, stream.num_nodes)


# ---------------------------------------------------------------------------
# All-pairs slice similarity (two-sample KS)
# ---------------------------------------------------------------------------


@dataclass
class SimilarityReport:
    """KS distance over critical value for every unordered slice pair."""

    ratios: np.ndarray
    pairs: list[tuple[int, int]]
    skipped_slices: list[int]
    alpha: float

    @property
    def fraction_above_one(self) -> float:
        if len(self.ratios) == 0:
            return 0.0
        return float((self.ratios > 1.0).mean())


def _distribution_arrays(measures: dict[float, float]) -> tuple[np.ndarray, np.ndarray]:
    values = np.array(sorted(measures))
    weights = np.array([measures[v] for v in values])
    return values, weights / weights.sum()


def ks_similarity_report(
    per_slice: Sequence[dict[float, float]],
    alpha: float = 0.1,
    size_mode: str = "support-extent",
    delta: float = 1.0,
) -> SimilarityReport:
    """Two-sample KS of per-slice degree distributions, all unordered pairs.

    Sample sizes enter only the critical value: ``support-extent`` uses each
    slice's maximum degree, ``observation-count`` the active measure in units
    of delta.  Slices with no active couples are skipped and reported.
    """
    active = [(i, m) for i, m in enumerate(per_slice) if m]
    skipped = [i for i, m in enumerate(per_slice) if not m]
    dists = []
    sizes = []
    for i, m in active:
        values, weights = _distribution_arrays(m)
        dists.append((values, weights))
        if size_mode == "support-extent":
            # normalized supports can sit entirely below 1; a size under one
            # observation is meaningless for the critical value
            sizes.append(max(1.0, float(values.max())))
        elif size_mode == "observation-count":
            sizes.append(max(1.0, round(sum(m.values()) / delta)))
        else:
            raise ValueError(f"unknown size mode {size_mode!r}")
    ratios = []
    pairs = []
    for a in range(len(active)):
        for b in range(a + 1, len(active)):
            d, c = ks_two_sample(dists[a], dists[b], sizes[a], sizes[b], alpha)
            ratios.append(d / c)
            pairs.append((active[a][0], active[b][0]))
    return SimilarityReport(np.array(ratios), pairs, skipped, alpha)
