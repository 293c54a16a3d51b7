"""Hypergeometric temporal configuration model: description length of a partition.

The description length is ``-log2`` of the joint probability of the events,
the per-window activities (set to in-window degrees), the per-window edge
counts and the window partition. All terms are evaluated through log-gamma.

Two evaluation paths exist on purpose. :func:`description_length` aggregates
the windows from scratch and uses the scalar term functions below.
:class:`WindowCoder` caches per-interval terms from prefix sums and is what
the optimizers use; :func:`dl_delta` is built on it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import gammaln

from .graph import LN2, TemporalGraph, WindowAggregate, WindowPartition, aggregate

GENERAL = "general"
FIXED = "fixed"
PRIOR_MODES = (GENERAL, FIXED)


def _lgam(x):
    return math.lgamma(x) if x < 1e15 else float(gammaln(x))


def _log_binom(n, k):
    return _lgam(n + 1) - _lgam(k + 1) - _lgam(n - k + 1)


def window_log_likelihood(w: WindowAggregate) -> float:
    """``log2 Pr(A_vwt for t in window | width, degrees)``, data term included."""
    m = w.m
    if m == 0:
        return 0.0
    ln = -_log_binom(m * m, m)
    for (v, u), a in w.A.items():
        xi = int(w.kout[v]) * int(w.kin[u])
        ln += _lgam(xi + 1) - _lgam(xi - a + 1)
    ln -= m * math.log(w.width)
    return ln / LN2 - w.log_data_term


def partition_prior_bits(z: int, T: int) -> float:
    """``-log2`` of the uniform prior over all compositions of ``T``."""
    if not 1 <= z <= T:
        raise ValueError(f"window count z={z} outside [1, T={T}]")
    return (_log_binom(T - 1, z - 1) + math.log(T)) / LN2


def is_fixed_admissible(widths: Sequence[int]) -> bool:
    """True for ``(alpha, D, ..., D, omega)`` with ``alpha < D`` and ``omega <= D``."""
    w = list(widths)
    if len(w) <= 2:
        return True
    d = w[1]
    return all(x == d for x in w[1:-1]) and w[0] <= d and w[-1] <= d


def fixed_prior_bits(T: int, p: WindowPartition | None = None) -> float:
    """``-log2`` of the uniform prior over constant-width partitions."""
    if T < 2:
        raise ValueError(f"fixed-window prior needs T >= 2, got {T}")
    if p is not None and not is_fixed_admissible(p.widths):
        raise ValueError(f"partition {p.widths} is not a constant-width partition")
    return math.log2(T * (T - 1) / 2)


def activity_prior_bits(N: int, m: int) -> float:
    """Uniform weak-composition prior on the out- and in-activities of one window."""
    if m < 0:
        raise ValueError("m must be >= 0")
    return 2.0 * _log_binom(N + m - 1, m) / LN2


def edge_count_prior_bits(m_seq: Sequence[int], p: WindowPartition, M: int) -> float:
    """``-log2`` multinomial probability of the window edge counts."""
    m_seq = [int(x) for x in m_seq]
    if len(m_seq) != p.z:
        raise ValueError(f"{len(m_seq)} edge counts for {p.z} windows")
    if sum(m_seq) != M:
        raise ValueError(f"edge counts sum to {sum(m_seq)}, expected M={M}")
    T = p.T
    ln = _lgam(M + 1)
    for m, d in zip(m_seq, p.widths):
        ln -= _lgam(m + 1)
        if m:
            ln += m * math.log(d / T)
    return -ln / LN2


@dataclass(frozen=True)
class WindowBits:
    likelihood: float
    activity_prior: float


@dataclass(frozen=True)
class DLReport:
    """Description length in bits with its components.

    ``per_window`` likelihoods exclude the per-step data term and
    ``edge_count_prior`` excludes the ``M!`` and ``T**M`` factors; those
    partition-independent pieces are collected in ``data_constant``.
    """

    total: float
    per_window: tuple[WindowBits, ...]
    partition_prior: float
    edge_count_prior: float
    data_constant: float
    prior_mode: str
    widths: tuple[int, ...] = field(default=())

    def to_dict(self):
        return {
            "total_bits": self.total,
            "partition_prior_bits": self.partition_prior,
            "edge_count_prior_bits": self.edge_count_prior,
            "data_constant_bits": self.data_constant,
            "prior_mode": self.prior_mode,
            "widths": list(self.widths),
            "per_window": [
                {"likelihood_bits": w.likelihood, "activity_prior_bits": w.activity_prior}
                for w in self.per_window
            ],
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


def data_constant_bits(g: TemporalGraph) -> float:
    """``-log2(M! T**-M / prod_t A_vwt!)``: depends on the graph only."""
    ln = _lgam(g.M + 1) - g.M * math.log(g.T) - g.stats.data_term_nats(0, g.T)
    return -ln / LN2


def description_length(g: TemporalGraph, p: WindowPartition, mode: str = GENERAL) -> DLReport:
    p.check(g.T)
    if mode == GENERAL:
        prior = partition_prior_bits(p.z, g.T)
    elif mode == FIXED:
        prior = fixed_prior_bits(g.T, p)
    else:
        raise ValueError(f"unknown prior mode {mode!r}")
    windows = aggregate(g, p)
    per_window = []
    edge = 0.0
    for w in windows:
        lik = -(window_log_likelihood(w) + w.log_data_term)
        per_window.append(WindowBits(lik, activity_prior_bits(g.N, w.m)))
        edge += (_lgam(w.m + 1) - w.m * math.log(w.width)) / LN2
    const = data_constant_bits(g)
    parts = [x for w in per_window for x in (w.likelihood, w.activity_prior)]
    total = math.fsum(parts + [prior, edge, const])
    return DLReport(total, tuple(per_window), prior, edge, const, mode, p.widths)


# ---------------------------------------------------------------- edits

@dataclass(frozen=True)
class Split:
    """Split window ``tau`` so that its first part has ``offset`` steps."""

    tau: int
    offset: int


@dataclass(frozen=True)
class Join:
    """Merge windows ``tau`` and ``tau + 1``."""

    tau: int


@dataclass(frozen=True)
class Move:
    """Shift the boundary between ``tau`` and ``tau + 1`` so window ``tau`` has ``offset`` steps."""

    tau: int
    offset: int


Edit = Union[Split, Join, Move]


def apply_edit(widths: Sequence[int], edit: Edit) -> tuple[int, ...]:
    w = list(widths)
    z = len(w)
    if isinstance(edit, Split):
        if not 0 <= edit.tau < z or not 0 < edit.offset < w[edit.tau]:
            raise ValueError(f"invalid split {edit} for widths {tuple(w)}")
        d = w[edit.tau]
        w[edit.tau:edit.tau + 1] = [edit.offset, d - edit.offset]
    elif isinstance(edit, Join):
        if not 0 <= edit.tau < z - 1:
            raise ValueError(f"invalid join {edit} for widths {tuple(w)}")
        w[edit.tau:edit.tau + 2] = [w[edit.tau] + w[edit.tau + 1]]
    elif isinstance(edit, Move):
        if not 0 <= edit.tau < z - 1:
            raise ValueError(f"invalid move {edit} for widths {tuple(w)}")
        tot = w[edit.tau] + w[edit.tau + 1]
        if not 0 < edit.offset < tot:
            raise ValueError(f"invalid move {edit} for widths {tuple(w)}")
        w[edit.tau], w[edit.tau + 1] = edit.offset, tot - edit.offset
    else:
        raise TypeError(f"not an edit: {edit!r}")
    return tuple(w)


def inverse_edit(widths: Sequence[int], edit: Edit) -> Edit:
    """The edit that maps ``apply_edit(widths, edit)`` back to ``widths``."""
    if isinstance(edit, Split):
        return Join(edit.tau)
    if isinstance(edit, Join):
        return Split(edit.tau, widths[edit.tau])
    return Move(edit.tau, widths[edit.tau])


# ---------------------------------------------------------------- fast path

class WindowCoder:
    """Cached description-length terms for windows ``[a, b)`` of one graph.

    ``window_bits(a, b)`` is everything a window contributes that depends on
    the partition: likelihood without the per-step data term, both activity
    priors and its share of the edge-count prior. Totals add the partition
    prior and the graph constant.
    """

    def __init__(self, g: TemporalGraph):
        self.g = g
        self.N, self.T, self.M = g.N, g.T, g.M
        self.stats = g.stats
        st = self.stats
        self._src = st.cell_src
        self._dst = st.cell_dst
        self.constant = data_constant_bits(g)
        z = np.arange(1, self.T + 1, dtype=np.float64)
        self._general_prior = (
            gammaln(self.T) - gammaln(z) - gammaln(self.T - z + 1) + math.log(self.T)
        ) / LN2
        K = len(self._src)
        self._out_map = np.zeros((K, self.N))
        self._out_map[np.arange(K), self._src] = 1.0
        self._in_map = np.zeros((K, self.N))
        self._in_map[np.arange(K), self._dst] = 1.0
        self._cache: dict[tuple[int, int], float] = {}

    def terms(self, starts, ends):
        """Vectorized ``(likelihood, activity, edge)`` bits for many windows."""
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        A = self.stats.counts(starts, ends)
        width = (ends - starts).astype(np.float64)
        m = A.sum(axis=1).astype(np.float64)
        N = self.N
        Af = A.astype(np.float64)
        kout = Af @ self._out_map
        kin = Af @ self._in_map
        xi = kout[:, self._src] * kin[:, self._dst]
        falling = (gammaln(xi + 1) - gammaln(xi - Af + 1)).sum(axis=1)
        lgm = gammaln(m + 1)
        log_c = gammaln(m * m + 1) - lgm - gammaln(m * m - m + 1)
        log_w = np.log(width)
        lik = (log_c - falling + m * log_w) / LN2
        act = 2.0 * (gammaln(N + m) - lgm - gammaln(N)) / LN2
        edge = (lgm - m * log_w) / LN2
        return lik, act, edge

    def window_bits(self, a: int, b: int) -> float:
        key = (a, b)
        v = self._cache.get(key)
        if v is None:
            lik, act, edge = self.terms([a], [b])
            v = float(lik[0]) + float(act[0]) + float(edge[0])
            self._cache[key] = v
        return v

    def batch_window_bits(self, starts, ends):
        lik, act, edge = self.terms(starts, ends)
        return lik + act + edge

    def prior_bits(self, z: int, mode: str = GENERAL) -> float:
        if mode == GENERAL:
            return float(self._general_prior[z - 1])
        return fixed_prior_bits(self.T)

    def total_bits(self, widths: Sequence[int], mode: str = GENERAL) -> float:
        if sum(widths) != self.T:
            raise ValueError(f"partition covers {sum(widths)} steps but graph has T={self.T}")
        if mode == FIXED and not is_fixed_admissible(widths):
            raise ValueError(f"partition {tuple(widths)} is not a constant-width partition")
        parts = []
        a = 0
        for w in widths:
            parts.append(self.window_bits(a, a + w))
            a += w
        parts.append(self.prior_bits(len(widths), mode))
        parts.append(self.constant)
        return math.fsum(parts)

    def delta(self, widths: Sequence[int], edit: Edit) -> float:
        """``DL(after) - DL(before)`` from the touched windows and the prior."""
        new = apply_edit(widths, edit)
        tau = edit.tau
        a = sum(widths[:tau])
        wb = self.window_bits
        z = len(widths)
        if isinstance(edit, Split):
            d = widths[tau]
            c = a + edit.offset
            dw = wb(a, c) + wb(c, a + d) - wb(a, a + d)
        elif isinstance(edit, Join):
            c = a + widths[tau]
            b = c + widths[tau + 1]
            dw = wb(a, b) - wb(a, c) - wb(c, b)
        else:
            c_old = a + widths[tau]
            c_new = a + edit.offset
            b = c_old + widths[tau + 1]
            dw = wb(a, c_new) + wb(c_new, b) - wb(a, c_old) - wb(c_old, b)
        return dw + self.prior_bits(len(new)) - self.prior_bits(z)


def dl_delta(g: TemporalGraph, p: WindowPartition, edit: Edit, coder: WindowCoder | None = None):
    p.check(g.T)
    coder = coder or WindowCoder(g)
    return coder.delta(p.widths, edit)
