"""Temporal network data model: ingestion, rebinning, slicing and aggregation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

LN2 = math.log(2.0)

TIME_UNITS = {
    "second": 1,
    "minute": 60,
    "hour": 3600,
    "day": 86400,
    "week": 7 * 86400,
}


class ParseError(ValueError):
    """Raised for malformed edge-list input; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _readonly(a, dtype=np.int64):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TemporalGraph:
    """Multiset of directed events ``(src, dst, t)`` on nodes ``0..N-1`` and times ``0..T-1``.

    Arrays are stored read-only; every transformation returns a new graph.
    """

    N: int
    T: int
    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if self.N < 1 or self.T < 1:
            raise ValueError(f"need N >= 1 and T >= 1, got N={self.N}, T={self.T}")
        src, dst, t = _readonly(self.src), _readonly(self.dst), _readonly(self.t)
        if not (len(src) == len(dst) == len(t)):
            raise ValueError("src, dst and t must have equal length")
        if len(src):
            if src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.N:
                raise ValueError("node id out of range [0, N)")
            if t.min() < 0 or t.max() >= self.T:
                raise ValueError("time step out of range [0, T)")
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_events(cls, events: Iterable[tuple[int, int, int]], N=None, T=None):
        ev = np.asarray(list(events), dtype=np.int64).reshape(-1, 3)
        if N is None:
            N = int(ev[:, :2].max()) + 1 if len(ev) else 1
        if T is None:
            T = int(ev[:, 2].max()) + 1 if len(ev) else 1
        return cls(N, T, ev[:, 0], ev[:, 1], ev[:, 2])

    @classmethod
    def empty(cls, N, T):
        z = np.zeros(0, dtype=np.int64)
        return cls(N, T, z, z, z)

    @property
    def M(self):
        return len(self.t)

    def __repr__(self):
        return f"TemporalGraph(N={self.N}, T={self.T}, M={self.M})"

    def __eq__(self, other):
        # multiset equality: event order is irrelevant
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return (
            self.N == other.N
            and self.T == other.T
            and np.array_equal(self.step_cells()[0], other.step_cells()[0])
            and np.array_equal(self.step_cells()[1], other.step_cells()[1])
        )

    __hash__ = None

    def events(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.t.tolist()))

    def step_cells(self):
        """Distinct ``(t, cell)`` keys in sorted order with multiplicities.

        ``cell = src * N + dst``; the key is ``t * N**2 + cell``.
        """
        return self._step_cells

    @cached_property
    def _step_cells(self):
        key = self.t * (self.N * self.N) + self.src * self.N + self.dst
        keys, counts = np.unique(key, return_counts=True)
        return keys, counts

    @cached_property
    def stats(self):
        return IntervalStats(self)


@dataclass(frozen=True)
class NodeMapping:
    """Label and timestamp table produced at ingestion."""

    labels: tuple[str, ...]
    time_origin: str
    time_unit: str
    resolution: int = 1

    def to_json(self, indent=2):
        return json.dumps(
            {
                "labels": {str(i): lab for i, lab in enumerate(self.labels)},
                "time_origin": self.time_origin,
                "time_unit": self.time_unit,
                "resolution": self.resolution,
            },
            indent=indent,
        )


@dataclass(frozen=True)
class CsvSchema:
    """Column spec for ``source,target,timestamp`` edge lists.

    ``time_format`` is ``"int"`` for integer steps or ``"iso"`` for ISO-8601
    dates/datetimes, which are floored to ``time_unit`` bins.
    """

    header: bool = False
    delimiter: str = ","
    time_format: str = "int"
    time_unit: str = "day"

    def __post_init__(self):
        if self.time_format not in ("int", "iso"):
            raise ValueError(f"time_format must be 'int' or 'iso', got {self.time_format!r}")
        if self.time_unit not in TIME_UNITS:
            raise ValueError(f"time_unit must be one of {sorted(TIME_UNITS)}")


def _parse_iso(s):
    d = datetime.fromisoformat(s.replace("Z", "+00:00"))
    if d.tzinfo is None:
        d = d.replace(tzinfo=timezone.utc)
    return d.timestamp()


def ingest_csv(stream, schema: CsvSchema = CsvSchema()):
    """Read an edge list into a :class:`TemporalGraph`.

    Node labels get dense ids in first-appearance order and timestamps are
    shifted so the earliest maps to step 0. Returns ``(graph, mapping)``.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream, delimiter=schema.delimiter)
    ids: dict[str, int] = {}
    src, dst, raw_t = [], [], []
    first = True
    for row in reader:
        line = reader.line_num
        if first and schema.header:
            first = False
            continue
        first = False
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", line)
        a, b, ts = (c.strip() for c in row)
        if not a or not b:
            raise ParseError("empty node label", line)
        try:
            if schema.time_format == "int":
                tv = int(ts)
            else:
                tv = _parse_iso(ts)
        except ValueError:
            raise ParseError(f"bad timestamp {ts!r}", line) from None
        for lab in (a, b):
            if lab not in ids:
                ids[lab] = len(ids)
        src.append(ids[a])
        dst.append(ids[b])
        raw_t.append(tv)
    if not src:
        raise ParseError("no events in input")

    if schema.time_format == "int":
        t0 = min(raw_t)
        steps = np.asarray(raw_t, dtype=np.int64) - t0
        origin, unit = str(t0), "step"
    else:
        unit_s = TIME_UNITS[schema.time_unit]
        secs = np.asarray(raw_t, dtype=np.float64)
        t0 = secs.min()
        steps = np.floor((secs - t0) / unit_s).astype(np.int64)
        origin = datetime.fromtimestamp(t0, tz=timezone.utc).isoformat()
        unit = schema.time_unit
    g = TemporalGraph(len(ids), int(steps.max()) + 1, src, dst, steps)
    mapping = NodeMapping(tuple(ids), origin, unit)
    return g, mapping


def read_csv(path, schema: CsvSchema = CsvSchema()):
    with open(path, newline="") as fh:
        return ingest_csv(fh, schema)


def write_csv(g: TemporalGraph, stream, labels: Sequence[str] | None = None):
    """Write events as ``source,target,timestamp`` rows sorted by time, then cell."""
    keys, counts = g.step_cells()
    nn = g.N * g.N
    w = csv.writer(stream, lineterminator="\n")
    for key, c in zip(keys.tolist(), counts.tolist()):
        t, cell = divmod(key, nn)
        v, u = divmod(cell, g.N)
        a = labels[v] if labels is not None else v
        b = labels[u] if labels is not None else u
        for _ in range(c):
            w.writerow((a, b, t))


def rebin(g: TemporalGraph, resolution: int) -> TemporalGraph:
    """Coarsen time: step ``t`` maps to ``t // resolution``."""
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if resolution == 1:
        return g
    return TemporalGraph(g.N, -(-g.T // resolution), g.src, g.dst, g.t // resolution)


def slice_graph(g: TemporalGraph, t0: int, t1: int) -> TemporalGraph:
    """Events with ``t0 <= t < t1`` shifted to start at 0; node set unchanged."""
    if not (0 <= t0 < t1 <= g.T):
        raise ValueError(f"invalid slice [{t0}, {t1}) for T={g.T}")
    keep = (g.t >= t0) & (g.t < t1)
    return TemporalGraph(g.N, t1 - t0, g.src[keep], g.dst[keep], g.t[keep] - t0)


@dataclass(frozen=True)
class WindowPartition:
    """Ordered window widths covering ``[0, T)``."""

    widths: tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(x) for x in self.widths)
        if not w:
            raise ValueError("partition needs at least one window")
        if min(w) < 1:
            raise ValueError(f"window widths must be >= 1, got {w}")
        object.__setattr__(self, "widths", w)

    @classmethod
    def from_boundaries(cls, boundaries: Sequence[int], T: int):
        """Build from interior change points (strictly increasing, inside ``(0, T)``)."""
        edges = [0, *boundaries, T]
        return cls(tuple(b - a for a, b in zip(edges, edges[1:])))

    @classmethod
    def single(cls, T):
        return cls((T,))

    @property
    def z(self):
        return len(self.widths)

    @property
    def T(self):
        return sum(self.widths)

    @property
    def edges(self):
        """Cumulative window boundaries ``0 = e_0 < e_1 < ... < e_z = T``."""
        out = [0]
        for w in self.widths:
            out.append(out[-1] + w)
        return out

    @property
    def boundaries(self):
        return self.edges[1:-1]

    def intervals(self):
        e = self.edges
        return list(zip(e[:-1], e[1:]))

    def check(self, T):
        if self.T != T:
            raise ValueError(f"partition covers {self.T} steps but graph has T={T}")


@dataclass(frozen=True, eq=False)
class WindowAggregate:
    """Static aggregate of one window.

    ``A`` maps ``(v, w)`` to the window count; ``log_data_term`` is
    ``sum_t sum_vw log2(A_vwt!)`` over the window's steps, in bits.
    """

    tau: int
    start: int
    width: int
    m: int
    A: dict = field(repr=False)
    kout: np.ndarray = field(repr=False)
    kin: np.ndarray = field(repr=False)
    log_data_term: float = 0.0

    @property
    def N(self):
        return len(self.kout)


def aggregate(g: TemporalGraph, p: WindowPartition) -> list[WindowAggregate]:
    p.check(g.T)
    keys, counts = g.step_cells()
    nn = g.N * g.N
    t_of = keys // nn
    cell_of = keys % nn
    out = []
    for tau, (a, b) in enumerate(p.intervals()):
        lo, hi = np.searchsorted(t_of, [a, b])
        cells, inv = np.unique(cell_of[lo:hi], return_inverse=True)
        A_cells = np.bincount(inv, weights=counts[lo:hi], minlength=len(cells)).astype(np.int64)
        v, u = np.divmod(cells, g.N)
        kout = np.bincount(v, weights=A_cells, minlength=g.N).astype(np.int64)
        kin = np.bincount(u, weights=A_cells, minlength=g.N).astype(np.int64)
        A = {(int(x), int(y)): int(c) for x, y, c in zip(v, u, A_cells)}
        data = float(gammaln(counts[lo:hi] + 1.0).sum()) / LN2
        out.append(WindowAggregate(tau, a, b - a, int(A_cells.sum()), A, kout, kin, data))
    return out


class IntervalStats:
    """Count lookups for arbitrary step intervals ``[a, b)``.

    Cells are the distinct ``(src, dst)`` pairs of the graph. Interval counts
    come from a dense prefix-sum table when it fits in memory, otherwise from
    a bincount over the time-sorted events.
    """

    dense_limit = 30_000_000

    def __init__(self, g: TemporalGraph):
        self.N, self.T = g.N, g.T
        keys, counts = g.step_cells()
        nn = g.N * g.N
        t_of = keys // nn
        cells, cell_idx = np.unique(keys % nn, return_inverse=True)
        self.K = len(cells)
        self.cell_src, self.cell_dst = np.divmod(cells, g.N)
        self._t_of = t_of
        self._cell_idx = cell_idx
        self._counts = counts
        # prefix of sum_t sum_vw log(A_vwt!) in nats
        per_step = np.bincount(t_of, weights=gammaln(counts + 1.0), minlength=g.T)
        self.data_prefix = np.concatenate(([0.0], np.cumsum(per_step)))
        self.dense = (g.T + 1) * max(self.K, 1) <= self.dense_limit
        if self.dense:
            table = np.zeros((g.T + 1, self.K), dtype=np.int64)
            np.add.at(table, (t_of + 1, cell_idx), counts)
            self.prefix = np.cumsum(table, axis=0)

    def counts(self, starts, ends):
        """Cell-count matrix of shape ``(len(starts), K)``."""
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        if self.dense:
            return self.prefix[ends] - self.prefix[starts]
        out = np.zeros((len(starts), self.K), dtype=np.int64)
        for i, (a, b) in enumerate(zip(starts.tolist(), ends.tolist())):
            lo, hi = np.searchsorted(self._t_of, [a, b])
            out[i] = np.bincount(self._cell_idx[lo:hi], weights=self._counts[lo:hi],
                                 minlength=self.K)
        return out

    def data_term_nats(self, a, b):
        return self.data_prefix[b] - self.data_prefix[a]
