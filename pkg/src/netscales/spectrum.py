"""Fixed-width description-length scans, spectral lines and their prominence."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import TemporalGraph, WindowPartition, slice_graph
from .htcm import FIXED, WindowCoder, fixed_prior_bits

MDL = "mdl"
PROMINENCE = "prominence"
DOMINANT_MODES = (MDL, PROMINENCE)


def alpha_range(T: int, delta: int) -> range:
    """Paddings for window size ``delta``: ``alpha < delta`` and one full window must fit."""
    return range(0, min(delta - 1, T - delta) + 1)


def build_fixed_partition(T: int, delta: int, alpha: int = 0) -> WindowPartition:
    """Widths ``(alpha, delta, ..., delta, omega)`` with ``0 < omega <= delta``.

    When ``alpha + delta > T`` no full window fits and the result is the
    two-window partition ``(alpha, T - alpha)``.
    """
    if not 1 <= delta <= T:
        raise ValueError(f"delta={delta} outside [1, T={T}]")
    if not 0 <= alpha < delta:
        raise ValueError(f"alpha={alpha} outside [0, delta={delta})")
    widths = [alpha] if alpha else []
    full, rem = divmod(T - alpha, delta)
    widths += [delta] * full
    if rem:
        widths.append(rem)
    return WindowPartition(tuple(widths))


@dataclass(frozen=True)
class SpectrumPoint:
    delta: int
    alpha: int
    bits: float
    norm_bits: float = 0.0


@dataclass(frozen=True)
class Spectrum:
    points: tuple[SpectrumPoint, ...]
    minima: tuple[tuple[int, float], ...] = ()
    mdl_delta: int = 0

    @property
    def deltas(self):
        return [p.delta for p in self.points]

    @property
    def bits(self):
        return [p.bits for p in self.points]

    def dominant(self, mode: str = MDL) -> int:
        """MDL window size, or the most prominent spectral line other than it."""
        if mode == MDL:
            return self.mdl_delta
        if mode != PROMINENCE:
            raise ValueError(f"unknown dominant mode {mode!r}")
        for d, _ in self.minima:
            if d != self.mdl_delta:
                return d
        return self.mdl_delta

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("delta", "alpha", "bits", "norm_bits"))
        for p in self.points:
            w.writerow((p.delta, p.alpha, f"{p.bits:.9g}", f"{p.norm_bits:.9g}"))

    def minima_dict(self):
        return {
            "mdl_delta": self.mdl_delta,
            "minima": [{"delta": d, "prominence": float(f"{pr:.9g}")} for d, pr in self.minima],
        }

    def to_json(self, indent=2):
        return json.dumps(self.minima_dict(), indent=indent)


def _scan_deltas(coder: WindowCoder, deltas):
    T = coder.T
    prior = fixed_prior_bits(T)
    wb = coder.window_bits
    out = []
    for delta in deltas:
        alphas = alpha_range(T, delta)
        starts = np.arange(0, T - delta + 1)
        full = coder.batch_window_bits(starts, starts + delta)
        best = None
        for alpha in alphas:
            k, rem = divmod(T - alpha, delta)
            parts = full[alpha: alpha + k * delta: delta].tolist()
            if alpha:
                parts.append(wb(0, alpha))
            if rem:
                parts.append(wb(T - rem, T))
            parts += [prior, coder.constant]
            bits = math.fsum(parts)
            if best is None or bits < best[1]:
                best = (alpha, bits)
        out.append(SpectrumPoint(delta, best[0], best[1]))
    return out


def _scan_worker(args):
    g, deltas = args
    return _scan_deltas(WindowCoder(g), deltas)


def _chunks(items, n):
    items = list(items)
    n = max(1, min(n, len(items)))
    return [items[i::n] for i in range(n)]


def scan(g: TemporalGraph, deltas: Sequence[int], coder: WindowCoder | None = None, jobs: int = 1):
    """Minimal fixed-mode description length over paddings for each window size.

    Returns points in the order of ``deltas`` with ``norm_bits`` relative to
    the scan minimum.
    """
    deltas = [int(d) for d in deltas]
    if not deltas:
        raise ValueError("empty window-size range")
    if min(deltas) < 1 or max(deltas) > g.T:
        raise ValueError(f"window sizes must lie in [1, T={g.T}]")
    if jobs > 1 and len(deltas) > 1:
        chunks = _chunks(deltas, jobs)
        with ProcessPoolExecutor(len(chunks)) as ex:
            found = {p.delta: p for part in ex.map(_scan_worker, [(g, c) for c in chunks])
                     for p in part}
        pts = [found[d] for d in deltas]
    else:
        pts = _scan_deltas(coder or WindowCoder(g), deltas)
    lo = min(p.bits for p in pts)
    return [SpectrumPoint(p.delta, p.alpha, p.bits, p.bits - lo) for p in pts]


def local_minima(bits: Sequence[float], deltas: Sequence[int] | None = None) -> list[int]:
    """Window sizes at strict or plateau local minima of ``bits``.

    A plateau counts when both of its neighbours lie strictly higher (curve
    ends count as higher); it is reported by its smallest window size.
    """
    b = list(bits)
    n = len(b)
    deltas = list(range(1, n + 1)) if deltas is None else list(deltas)
    out = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and b[j + 1] == b[i]:
            j += 1
        left_ok = i == 0 or b[i - 1] > b[i]
        right_ok = j == n - 1 or b[j + 1] > b[i]
        if left_ok and right_ok:
            out.append(deltas[i])
        i = j + 1
    return out


def prominence(bits: Sequence[float], candidates: Sequence[int],
               deltas: Sequence[int] | None = None) -> list[tuple[int, float]]:
    """Topographic prominence of DL minima, computed as peaks of ``-bits``.

    For each side the key col is the lowest point between the peak and the
    nearest strictly higher point; sides without a higher point are ignored.
    The reference is the highest such col, or the curve minimum when no
    higher point exists at all. Sorted by prominence, then window size.
    """
    h = -np.asarray(bits, dtype=np.float64)
    deltas = list(range(1, len(h) + 1)) if deltas is None else list(deltas)
    pos = {d: i for i, d in enumerate(deltas)}
    floor = h.min()
    out = []
    for d in candidates:
        i = pos[d]
        top = h[i]
        cols = []
        higher = np.flatnonzero(h[:i] > top)
        if len(higher):
            cols.append(h[higher[-1]:i + 1].min())
        higher = np.flatnonzero(h[i + 1:] > top)
        if len(higher):
            cols.append(h[i:i + 1 + higher[0] + 1].min())
        ref = max(cols) if cols else floor
        out.append((d, float(top - ref)))
    out.sort(key=lambda x: (-x[1], x[0]))
    return out


def spectrogram(g: TemporalGraph, deltas: Sequence[int], coder=None, jobs: int = 1) -> Spectrum:
    pts = scan(g, deltas, coder, jobs)
    bits = [p.bits for p in pts]
    ds = [p.delta for p in pts]
    cands = local_minima(bits, ds)
    proms = prominence(bits, cands, ds)
    best = min(pts, key=lambda p: (p.bits, p.delta))
    return Spectrum(tuple(pts), tuple(proms), best.delta)


# ---------------------------------------------------------------- rolling analysis

PRE, OVERLAP, POST = "pre", "overlap", "post"


def rolling_starts(T: int, window_len: int, step: int = 1) -> list[int]:
    if window_len > T:
        raise ValueError(f"window length {window_len} exceeds T={T}")
    if window_len < 2:
        raise ValueError("window length must be >= 2")
    if step < 1:
        raise ValueError("step must be >= 1")
    return list(range(0, T - window_len + 1, step))


def classify_windows(starts: Sequence[int], window_len: int, shock: int) -> list[str]:
    """``pre`` ends before the shock step, ``post`` starts at or after it."""
    out = []
    for s in starts:
        if s + window_len < shock:
            out.append(PRE)
        elif s >= shock:
            out.append(POST)
        else:
            out.append(OVERLAP)
    return out


def renormalize(values: Sequence[float], phases: Sequence[str]) -> np.ndarray:
    """Center on the mean over shock-overlapping windows, scale by the series std."""
    v = np.asarray(values, dtype=np.float64)
    ref = [x for x, ph in zip(v, phases) if ph == OVERLAP]
    if not ref:
        raise ValueError("no window overlaps the shock time")
    sd = v.std()
    centered = v - np.mean(ref)
    return centered / sd if sd > 0 else np.zeros_like(v)


@dataclass(frozen=True)
class RollingSeries:
    starts: tuple[int, ...]
    dominant: tuple[int, ...]
    window_len: int
    phases: tuple[str, ...] = field(default=())
    renormalized: tuple[float, ...] = field(default=())

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("window_start", "dominant_delta", "renormalized_delta", "phase"))
        for i, (s, d) in enumerate(zip(self.starts, self.dominant)):
            r = f"{self.renormalized[i]:.9g}" if self.renormalized else ""
            ph = self.phases[i] if self.phases else ""
            w.writerow((s, d, r, ph))


def _rolling_one(args):
    g, s, window_len, delta_max, mode = args
    h = slice_graph(g, s, s + window_len)
    dmax = min(delta_max or window_len, window_len)
    return spectrogram(h, range(1, dmax + 1)).dominant(mode)


def rolling_dominant(g: TemporalGraph, window_len: int, step: int = 1, mode: str = MDL,
                     delta_max: int | None = None, shock: int | None = None,
                     jobs: int = 1) -> RollingSeries:
    """Dominant timescale of each slice ``[s, s + window_len)`` stepped by ``step``."""
    if mode not in DOMINANT_MODES:
        raise ValueError(f"unknown dominant mode {mode!r}")
    starts = rolling_starts(g.T, window_len, step)
    tasks = [(g, s, window_len, delta_max, mode) for s in starts]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            dom = list(ex.map(_rolling_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        dom = [_rolling_one(t) for t in tasks]
    phases, renorm = (), ()
    if shock is not None:
        phases = tuple(classify_windows(starts, window_len, shock))
        renorm = tuple(renormalize(dom, phases).tolist())
    return RollingSeries(tuple(starts), tuple(dom), window_len, phases, renorm)
