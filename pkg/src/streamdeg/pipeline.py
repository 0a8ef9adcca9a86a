"""Class labelling, event detection and identification by iterative removal.

Each degree class gets a verdict from its fraction column:

* ``A``  -- the column is zero in a strict majority of slices: the class is
  normally empty, so any occupancy is anomalous and directly attributable.
* ``AN`` -- the Grubbs-pruned normal fit of the column is accepted with a
  positive mean: normal and anomalous traffic mix, only high-side
  three-sigma excursions are events and they cannot be attributed directly.
* ``R``  -- the fit is rejected: no stable baseline, the class is discarded.

Identification walks the A-class events from the highest degree class down.
For each event it removes every incident link of the responsible nodes during
the sub-intervals where their degree sits in the event's class.  A removal
that creates a fresh negative outlier (a fraction newly below mu - 3 sigma in
any class) removed legitimate traffic: it is rolled back and the event stays
detected but unidentified.  Removals of high-degree events typically erase
low-class events caused by the same nodes' partners, which is how events in
AN classes get identified without ever being removed directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from . import intervals as iv
from .linkstream import LinkStream, NormalizedDegrees, normalize_degrees
from .robust_stats import NormalFit, fit_homogeneous, three_sigma_outliers
from .slicing import (
    DegreeClassScheme,
    FractionMatrix,
    NormalizedClassScheme,
    TimeSliceGrid,
    fraction_matrix,
)

POLARITY_HIGH = "high"
POLARITY_NONZERO = "nonzero-in-A"


@dataclass
class ClassLabel:
    class_index: int
    verdict: str  # "AN" | "A" | "R"
    zero_share: float
    fit: NormalFit | None = None


@dataclass(frozen=True)
class Event:
    class_index: int
    slice_index: int
    fraction: float
    polarity: str

    @property
    def key(self) -> tuple[int, int]:
        return (self.class_index, self.slice_index)


@dataclass
class IdentifiedSet:
    """Per-node disjoint intervals of attributed anomalous activity."""

    entries: dict[int, list[iv.Interval]] = field(default_factory=dict)
    provenance: list[Event] = field(default_factory=list)

    @property
    def measure(self) -> float:
        return sum(iv.measure(ivs) for ivs in self.entries.values())

    @property
    def is_empty(self) -> bool:
        return not any(self.entries.values())

    def nodes(self) -> set[int]:
        return {n for n, ivs in self.entries.items() if ivs}

    def victims(self) -> list[tuple[int, iv.Interval]]:
        return [(n, interval) for n, ivs in sorted(self.entries.items()) for interval in ivs]

    def merged_with(self, other: "IdentifiedSet") -> "IdentifiedSet":
        entries = {n: list(ivs) for n, ivs in self.entries.items()}
        for n, ivs in other.entries.items():
            entries[n] = iv.merge(entries.get(n, []) + list(ivs))
        return IdentifiedSet(entries, self.provenance + other.provenance)


class NotAnAClassError(ValueError):
    """Direct identification is only defined for events in A classes."""


def classify_classes(
    matrix: FractionMatrix,
    grubbs_alpha: float = 0.05,
    ks_alpha: float = 0.1,
    zero_majority: float = 0.5,
) -> list[ClassLabel]:
    """Label every degree class from its fraction column."""
    labels = []
    n_slices = matrix.grid.count
    for j in range(1, matrix.n_classes + 1):
        column = matrix.column(j)
        zero_share = float((column == 0.0).sum()) / n_slices if n_slices else 1.0
        if zero_share > zero_majority:
            labels.append(ClassLabel(j, "A", zero_share))
            continue
        fit = fit_homogeneous(column, grubbs_alpha, ks_alpha)
        if fit.accepted and fit.mu > 0:
            labels.append(ClassLabel(j, "AN", zero_share, fit))
        else:
            labels.append(ClassLabel(j, "R", zero_share, fit))
    return labels


def detect_events(
    matrix: FractionMatrix,
    labels: Sequence[ClassLabel],
    sigma_mult: float = 3.0,
) -> list[Event]:
    """High-side three-sigma events in AN classes, every non-zero slice in A
    classes; R classes contribute nothing."""
    events = []
    for label in labels:
        column = matrix.column(label.class_index)
        if label.verdict == "A":
            for i in np.flatnonzero(column > 0.0):
                events.append(Event(label.class_index, int(i), float(column[i]), POLARITY_NONZERO))
        elif label.verdict == "AN":
            high, _ = three_sigma_outliers(column, label.fit, sigma_mult)
            for i in high:
                events.append(Event(label.class_index, int(i), float(column[i]), POLARITY_HIGH))
    return events


def negative_outliers(
    matrix: FractionMatrix,
    labels: Sequence[ClassLabel],
    sigma_mult: float = 3.0,
) -> set[tuple[int, int]]:
    """(class, slice) pairs whose fraction sits below mu - sigma_mult*sigma."""
    out = set()
    for label in labels:
        if label.verdict != "AN":
            continue
        column = matrix.column(label.class_index)
        _, low = three_sigma_outliers(column, label.fit, sigma_mult)
        for i in low:
            out.add((label.class_index, int(i)))
    return out


def identify_event(
    stream: LinkStream,
    event: Event,
    grid: TimeSliceGrid,
    scheme: DegreeClassScheme | NormalizedClassScheme,
    labels: Sequence[ClassLabel] | None = None,
    normalized: NormalizedDegrees | None = None,
) -> IdentifiedSet:
    """Nodes and maximal sub-intervals of the event's slice during which their
    degree lies in the event's class."""
    if labels is not None:
        verdict = labels[event.class_index - 1].verdict
        if verdict != "A":
            raise NotAnAClassError(
                f"event in class {event.class_index} has verdict {verdict}; "
                "only A-class events are directly identifiable"
            )
    lo, hi = grid.bounds(event.slice_index)
    k_lo, k_hi = scheme.bounds_of(event.class_index)
    entries: dict[int, list[iv.Interval]] = {}
    for node in range(stream.num_nodes):
        if normalized is None:
            prof = stream.degree_profile(node)
            if prof.max_value < k_lo:
                continue
            in_class = prof.intervals_with(lambda k: k_lo <= k <= k_hi)
        else:
            in_class = iv.merge(
                [(a, b) for a, b, x in normalized.segments(node) if k_lo <= x <= k_hi]
            )
        clipped = iv.clip(in_class, lo, hi)
        if clipped:
            entries[node] = clipped
    return IdentifiedSet(entries, [event])


# ---------------------------------------------------------------------------
# Iterative removal
# ---------------------------------------------------------------------------


@dataclass
class PipelineParams:
    grubbs_alpha: float = 0.05
    ks_alpha: float = 0.1
    zero_majority: float = 0.5
    sigma_mult: float = 3.0
    rollback_fit: str = "refit"  # or "frozen"
    normalized: bool = False


@dataclass
class RemovalRecord:
    event: Event
    victims: IdentifiedSet
    status: str  # "applied" | "rolled-back" | "cascade"
    reason: str | None = None

    def to_json(self, node_names: Sequence[str]) -> str:
        payload = {
            "event": {"class": self.event.class_index, "slice": self.event.slice_index},
            "victims": [
                {"node": node_names[n], "start": s, "end": e}
                for n, (s, e) in self.victims.victims()
            ],
            "status": self.status,
        }
        if self.reason:
            payload["reason"] = self.reason
        return json.dumps(payload, sort_keys=True)


@dataclass
class DetectionState:
    matrix: FractionMatrix
    labels: list[ClassLabel]
    events: list[Event]
    negatives: set[tuple[int, int]]


@dataclass
class IdentificationResult:
    initial: DetectionState
    final: DetectionState
    final_stream: LinkStream
    log: list[RemovalRecord]
    identified_set: IdentifiedSet
    detected_events: list[Event]
    identified_events: list[Event]
    residual_events: list[Event]
    rolled_back_events: list[Event]
    removed_share: float
    residual_under_initial_labels: int

    @property
    def applied_count(self) -> int:
        return sum(1 for rec in self.log if rec.status == "applied")


def _detect_state(
    stream: LinkStream,
    grid: TimeSliceGrid,
    scheme,
    params: PipelineParams,
    normalized: NormalizedDegrees | None,
) -> DetectionState:
    matrix = fraction_matrix(stream, grid, scheme, normalized)
    labels = classify_classes(matrix, params.grubbs_alpha, params.ks_alpha, params.zero_majority)
    events = detect_events(matrix, labels, params.sigma_mult)
    negatives = negative_outliers(matrix, labels, params.sigma_mult)
    return DetectionState(matrix, labels, events, negatives)


def _frozen_negatives(
    matrix: FractionMatrix,
    frozen_labels: Sequence[ClassLabel],
    sigma_mult: float,
) -> set[tuple[int, int]]:
    return negative_outliers(matrix, frozen_labels, sigma_mult)


def _event_order(event: Event) -> tuple[int, float, int]:
    # highest class first, then largest fraction, then earliest slice
    return (-event.class_index, -event.fraction, event.slice_index)


def run_identification(
    stream: LinkStream,
    grid: TimeSliceGrid,
    scheme: DegreeClassScheme | NormalizedClassScheme,
    params: PipelineParams | None = None,
) -> IdentificationResult:
    """Detect events, then iteratively remove A-class events with rollback.

    Loop: re-detect on the current stream, pick the next unprocessed A-class
    event (highest class first), remove its identified couples, and keep the
    removal only if it creates no new negative outlier.  Every (class, slice)
    event is attempted at most once, so the loop always terminates.  The
    original stream object is never mutated.

    Afterwards events are re-detected on the final stream: initially detected
    events that vanished are identified (directly or through cascades), the
    rest are residual; rolled-back attempts are reported separately.
    """
    params = params or PipelineParams()
    normalized = None
    if params.normalized:
        # the normalization reference is frozen from the input stream so that
        # removals do not shift class membership of untouched couples
        base_series = stream.mean_degree_per_second()
        normalized = normalize_degrees(stream, base_series)

    original = stream
    initial = _detect_state(stream, grid, scheme, params, normalized)
    state = initial
    processed: set[tuple[int, int]] = set()
    log: list[RemovalRecord] = []
    identified_union = IdentifiedSet()

    while True:
        pending = [
            e for e in state.events if e.polarity == POLARITY_NONZERO and e.key not in processed
        ]
        if not pending:
            break
        event = min(pending, key=_event_order)
        processed.add(event.key)
        victims = identify_event(stream, event, grid, scheme, None, normalized)
        if victims.is_empty:
            log.append(RemovalRecord(event, victims, "cascade", "already removed"))
            continue
        tentative = stream.remove_interactions(victims.victims())
        tentative_norm = None
        if normalized is not None:
            tentative_norm = normalize_degrees(tentative, normalized.series)
        if params.rollback_fit == "frozen":
            tent_matrix = fraction_matrix(tentative, grid, scheme, tentative_norm)
            before = _frozen_negatives(state.matrix, initial.labels, params.sigma_mult)
            after = _frozen_negatives(tent_matrix, initial.labels, params.sigma_mult)
            tent_state = None
        else:
            tent_state = _detect_state(tentative, grid, scheme, params, tentative_norm)
            before = state.negatives
            after = tent_state.negatives
        created = sorted(after - before)
        if created:
            j, i = created[0]
            log.append(
                RemovalRecord(
                    event, victims, "rolled-back",
                    f"negative outlier in class {j}, slice {i}",
                )
            )
            continue
        stream = tentative
        state = tent_state if tent_state is not None else _detect_state(
            tentative, grid, scheme, params, tentative_norm
        )
        if normalized is not None:
            normalized = tentative_norm
        identified_union = identified_union.merged_with(victims)
        log.append(RemovalRecord(event, victims, "applied"))

    final = state
    final_keys = {e.key for e in final.events}
    rolled_keys = {rec.event.key for rec in log if rec.status == "rolled-back"}
    identified_events = [e for e in initial.events if e.key not in final_keys]
    rolled_back_events = [
        e for e in initial.events if e.key in final_keys and e.key in rolled_keys
    ]
    residual_events = [
        e for e in initial.events if e.key in final_keys and e.key not in rolled_keys
    ]
    before_seconds = original.total_link_seconds()
    after_seconds = stream.total_link_seconds()
    removed_share = 1.0 - after_seconds / before_seconds if before_seconds > 0 else 0.0

    residual_initial = len(
        {e.key for e in detect_events(final.matrix, initial.labels, params.sigma_mult)}
        & {e.key for e in initial.events}
    )

    return IdentificationResult(
        initial=initial,
        final=final,
        final_stream=stream,
        log=log,
        identified_set=identified_union,
        detected_events=list(initial.events),
        identified_events=identified_events,
        residual_events=residual_events,
        rolled_back_events=rolled_back_events,
        removed_share=removed_share,
        residual_under_initial_labels=residual_initial,
    )


def write_removal_log(log: Iterable[RemovalRecord], node_names: Sequence[str], out: IO[str]) -> None:
    for rec in log:
        out.write(rec.to_json(node_names))
        out.write("\n")


def write_events_csv(
    events: Iterable[Event], statuses: dict[tuple[int, int], str], out: IO[str]
) -> None:
    out.write("class,slice,fraction,polarity,status\n")
    for e in events:
        status = statuses.get(e.key, "detected")
        out.write(f"{e.class_index},{e.slice_index},{e.fraction!r},{e.polarity},{status}\n")


def event_statuses(result: IdentificationResult) -> dict[tuple[int, int], str]:
    out: dict[tuple[int, int], str] = {}
    for e in result.identified_events:
        out[e.key] = "identified"
    for e in result.residual_events:
        out[e.key] = "residual"
    for e in result.rolled_back_events:
        out[e.key] = "rolled-back"
    return out
