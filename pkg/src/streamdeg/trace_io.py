"""Triplet trace I/O and synthetic trace generation.

A trace is a sequence of triplets ``(t, u, v)``: nodes u and v interacted at
time t.  On disk this is UTF-8 text, one ``t u v`` per line, whitespace
separated, with ``#`` comment lines.  Node identifiers are opaque tokens,
interned to dense integer indices at parse time; every downstream structure
works on indices and keeps the name table for reporting.

The synthetic generator produces traces with a stationary background plus
injected anomalies (network scan, fan-in, degree spike) and the matching
ground-truth labels, so that detection quality can be scored end to end.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import networkx as nx
import numpy as np


class TraceFormatError(ValueError):
    """Malformed trace input; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class Triplet(NamedTuple):
    t: float
    u: int
    v: int


@dataclass
class TraceMeta:
    triplet_count: int
    node_count: int
    t_min: float
    t_max: float
    node_names: list[str] = field(default_factory=list)

    def index_of(self, name: str) -> int:
        return self.node_names.index(name)


@dataclass(frozen=True)
class TruthEntry:
    node: str
    start: float
    end: float
    kind: str  # scan | fanin | spike


@dataclass
class GroundTruth:
    entries: list[TruthEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        for e in self.entries:
            if not e.start < e.end:
                raise ValueError(f"ground-truth interval not well-formed: {e}")

    def by_kind(self, kind: str) -> list[TruthEntry]:
        return [e for e in self.entries if e.kind == kind]


def parse_trace(source: io.IOBase | bytes | str) -> tuple[list[Triplet], TraceMeta]:
    """Parse a text trace into index-interned triplets plus summary metadata.

    Rejects self-interactions (u == v), non-finite times and malformed lines,
    reporting the 1-based line number.  Triplets are returned in input order;
    duplicates are kept (they are harmless under interval-union semantics).
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    triplets: list[Triplet] = []
    names: list[str] = []
    index: dict[str, int] = {}
    t_min = math.inf
    t_max = -math.inf

    def intern(name: str) -> int:
        idx = index.get(name)
        if idx is None:
            idx = len(names)
            index[name] = idx
            names.append(name)
        return idx

    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise TraceFormatError(line_no, f"expected 't u v', got {len(parts)} fields")
        try:
            t = float(parts[0])
        except ValueError:
            raise TraceFormatError(line_no, f"cannot parse time {parts[0]!r}") from None
        if not math.isfinite(t):
            raise TraceFormatError(line_no, f"non-finite time {parts[0]!r}")
        if parts[1] == parts[2]:
            raise TraceFormatError(line_no, f"self-interaction {parts[1]!r}")
        triplets.append(Triplet(t, intern(parts[1]), intern(parts[2])))
        t_min = min(t_min, t)
        t_max = max(t_max, t)

    if not triplets:
        t_min = t_max = 0.0
    meta = TraceMeta(len(triplets), len(names), t_min, t_max, names)
    return triplets, meta


def format_time(t: float) -> str:
    """Canonical decimal rendering: integral times without trailing zeros."""
    if t == int(t) and abs(t) < 1e15:
        return str(int(t))
    return repr(t)


def write_trace(triplets: Sequence[Triplet], node_names: Sequence[str], out: io.IOBase) -> None:
    """Write triplets back to canonical text form, preserving order."""
    for tr in triplets:
        out.write(f"{format_time(tr.t)} {node_names[tr.u]} {node_names[tr.v]}\n")


def write_ground_truth(truth: GroundTruth, out: io.IOBase) -> None:
    writer = csv.writer(out)
    writer.writerow(["node", "start", "end", "kind"])
    for e in truth.entries:
        writer.writerow([e.node, format_time(e.start), format_time(e.end), e.kind])


def read_ground_truth(source: io.IOBase | str) -> GroundTruth:
    text = source if isinstance(source, str) else source.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    entries = []
    for row in rows:
        if not row or row[0] == "node":
            continue
        node, start, end, kind = row
        entries.append(TruthEntry(node, float(start), float(end), kind))
    return GroundTruth(entries)


# ---------------------------------------------------------------------------
# Synthetic scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanInjection:
    """One source contacts ``targets`` fresh nodes inside ``window``.

    Per-target contact probability within a degree window of width delta is
    at least ``delta / (window + delta)`` (uniform model) or ``1/ceil(window)``
    (regular model), so the source's peak degree is >= targets * p_hit.
    """

    source: str
    targets: int
    window: tuple[float, float]


@dataclass(frozen=True)
class FanInInjection:
    """``sources`` fresh nodes each contact one destination inside ``window``."""

    dest: str
    sources: int
    window: tuple[float, float]


@dataclass(frozen=True)
class SpikeInjection:
    """One node holds a sustained degree of ``level`` for the whole window."""

    node: str
    level: int
    window: tuple[float, float]


Injection = ScanInjection | FanInInjection | SpikeInjection


@dataclass
class ScenarioSpec:
    """Synthetic trace description.

    background_model:
      * ``"regular"`` -- every integral second gets a fresh random d-regular
        graph over the background nodes, all contacts placed at the second's
        midpoint.  Per-second interaction measure is exactly constant, which
        makes per-slice degree-class fractions stationary by construction.
      * ``"poisson"`` -- each background node draws a contact rate from a
        two-point (low/high) mixture and contacts uniformly random peers as a
        Poisson process.  ``rate_modulation`` optionally scales the rate over
        time (``'circadian'`` applies a sinusoid with max/min ratio 3).
    """

    duration: float
    background_nodes: int
    background_degree: int = 4
    background_model: str = "regular"
    rate_low: float = 0.5
    rate_high: float = 2.0
    high_fraction: float = 0.2
    rate_modulation: str | None = None
    injections: list[Injection] = field(default_factory=list)

    def validate(self) -> None:
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.background_model not in ("regular", "poisson"):
            raise ValueError(f"unknown background model {self.background_model!r}")
        for inj in self.injections:
            w0, w1 = inj.window
            if not (0 <= w0 < w1 <= self.duration):
                raise ValueError(f"injection window {inj.window} outside [0, {self.duration})")
            count = inj.targets if isinstance(inj, ScanInjection) else (
                inj.sources if isinstance(inj, FanInInjection) else inj.level
            )
            if count < 1:
                raise ValueError(f"injection needs a positive count, got {count}")


def scenario_from_dict(raw: dict) -> ScenarioSpec:
    """Build a scenario from its JSON representation (see README)."""
    injections: list[Injection] = []
    for item in raw.get("injections", []):
        kind = item["kind"]
        window = (float(item["window"][0]), float(item["window"][1]))
        if kind == "scan":
            injections.append(ScanInjection(item["source"], int(item["targets"]), window))
        elif kind == "fanin":
            injections.append(FanInInjection(item["dest"], int(item["sources"]), window))
        elif kind == "spike":
            injections.append(SpikeInjection(item["node"], int(item["level"]), window))
        else:
            raise ValueError(f"unknown injection kind {kind!r}")
    return ScenarioSpec(
        duration=float(raw["duration"]),
        background_nodes=int(raw["background_nodes"]),
        background_degree=int(raw.get("background_degree", 4)),
        background_model=raw.get("background_model", "regular"),
        rate_low=float(raw.get("rate_low", 0.5)),
        rate_high=float(raw.get("rate_high", 2.0)),
        high_fraction=float(raw.get("high_fraction", 0.2)),
        rate_modulation=raw.get("rate_modulation"),
        injections=injections,
    )


def _second_centers(window: tuple[float, float]) -> list[float]:
    """Midpoints of the integral seconds fully or partly inside the window."""
    lo = int(math.floor(window[0]))
    hi = int(math.ceil(window[1]))
    return [s + 0.5 for s in range(lo, hi) if window[0] <= s + 0.5 < window[1]]


def generate_synthetic(spec: ScenarioSpec, seed: int) -> tuple[list[Triplet], TraceMeta, GroundTruth]:
    """Deterministically generate a labelled synthetic trace.

    Returns interned triplets sorted by time, the name table, and one
    ground-truth entry per injection.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    names: list[str] = []
    index: dict[str, int] = {}

    def intern(name: str) -> int:
        idx = index.get(name)
        if idx is None:
            idx = len(names)
            index[name] = idx
            names.append(name)
        return idx

    records: list[tuple[float, int, int]] = []
    n_bg = spec.background_nodes
    bg = [intern(f"bg{i}") for i in range(n_bg)]

    if n_bg > 0 and spec.background_model == "regular":
        d = min(spec.background_degree, n_bg - 1)
        if d >= 1 and (d * n_bg) % 2 == 0:
            for sec in range(int(math.floor(spec.duration))):
                g_seed = int(rng.integers(0, 2**31 - 1))
                graph = nx.random_regular_graph(d, n_bg, seed=g_seed)
                center = sec + 0.5
                for a, b in sorted(graph.edges()):
                    records.append((center, bg[a], bg[b]))
        elif d >= 1:
            raise ValueError("regular background needs background_degree * background_nodes even")
    elif n_bg > 0:
        rates = np.where(rng.random(n_bg) < spec.high_fraction, spec.rate_high, spec.rate_low)
        for i in range(n_bg):
            peak = rates[i] * (2.0 if spec.rate_modulation == "circadian" else 1.0)
            n_events = rng.poisson(peak * spec.duration)
            times = np.sort(rng.random(n_events) * spec.duration)
            if spec.rate_modulation == "circadian":
                # thinning against (2+sin)/3 keeps a max/min rate ratio of 3
                phase = 2 * math.pi * times / spec.duration
                accept = rng.random(n_events) < (2.0 + np.sin(phase)) / 3.0
                times = times[accept]
            for t in times:
                peer = int(rng.integers(0, n_bg - 1))
                if peer >= i:
                    peer += 1
                records.append((float(t), bg[i], bg[peer]))

    truth_entries: list[TruthEntry] = []
    for inj in spec.injections:
        w = inj.window
        if isinstance(inj, ScanInjection):
            src = intern(inj.source)
            centers = _second_centers(w) if spec.background_model == "regular" else None
            for j in range(inj.targets):
                tgt = intern(f"{inj.source}.t{j}")
                if centers:
                    t = centers[int(rng.integers(0, len(centers)))]
                else:
                    t = float(w[0] + rng.random() * (w[1] - w[0]))
                records.append((t, src, tgt))
            truth_entries.append(TruthEntry(inj.source, w[0], w[1], "scan"))
        elif isinstance(inj, FanInInjection):
            dst = intern(inj.dest)
            centers = _second_centers(w) if spec.background_model == "regular" else None
            for j in range(inj.sources):
                src = intern(f"{inj.dest}.s{j}")
                if centers:
                    t = centers[int(rng.integers(0, len(centers)))]
                else:
                    t = float(w[0] + rng.random() * (w[1] - w[0]))
                records.append((t, src, dst))
            truth_entries.append(TruthEntry(inj.dest, w[0], w[1], "fanin"))
        else:
            node = intern(inj.node)
            peers = [intern(f"{inj.node}.p{j}") for j in range(inj.level)]
            if spec.background_model == "regular":
                times: Iterable[float] = _second_centers(w)
            else:
                # one contact per peer per delta-sized step keeps the level sustained
                steps = max(1, int(math.ceil(w[1] - w[0])))
                times = [w[0] + (i + 0.5) * (w[1] - w[0]) / steps for i in range(steps)]
            for t in times:
                for p in peers:
                    records.append((t, node, p))
            truth_entries.append(TruthEntry(inj.node, w[0], w[1], "spike"))

    records.sort(key=lambda r: (r[0], r[1], r[2]))
    triplets = [Triplet(t, u, v) for t, u, v in records]
    if triplets:
        t_min = triplets[0].t
        t_max = max(tr.t for tr in triplets)
    else:
        t_min = t_max = 0.0
    meta = TraceMeta(len(triplets), len(names), t_min, t_max, names)
    return triplets, meta, GroundTruth(truth_entries)
