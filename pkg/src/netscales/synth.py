"""Sampling temporal networks from the hypergeometric temporal configuration model."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .graph import TemporalGraph, WindowPartition
from .hcm import ActivityVectors

# numpy's marginal hypergeometric sampler needs sum(colors) < 1e9
_HYPERGEOM_LIMIT = 10**9


class ConfigError(ValueError):
    pass


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def repeat_pattern(pattern: Sequence[int], T: int) -> WindowPartition:
    """Cycle ``pattern`` until ``T`` steps are covered, truncating the last window."""
    if not pattern or min(pattern) < 1:
        raise ValueError("pattern needs positive widths")
    widths, total, i = [], 0, 0
    while total < T:
        w = min(pattern[i % len(pattern)], T - total)
        widths.append(w)
        total += w
        i += 1
    return WindowPartition(tuple(widths))


def sample_edge_counts(M: int, p: WindowPartition, rng=None) -> np.ndarray:
    if M < 0:
        raise ValueError("M must be >= 0")
    rng = _rng(rng)
    probs = np.asarray(p.widths, dtype=np.float64) / p.T
    return rng.multinomial(M, probs)


# ---------------------------------------------------------------- activities

def _cv(x):
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(mu > 0, x.std(axis=-1) / mu, 0.0)


def _round_to_sum(weights, m):
    """Largest-remainder rounding of ``m * weights`` rows to integers summing to ``m``."""
    raw = m * weights
    fl = np.floor(raw)
    short = (m - fl.sum(axis=-1)).astype(np.int64)
    order = np.argsort(-(raw - fl), axis=-1, kind="stable")
    rank = np.argsort(order, axis=-1, kind="stable")
    return (fl + (rank < short[..., None])).astype(np.int64)


def _equal_split(N, m):
    base = np.full(N, m // N, dtype=np.int64)
    base[: m % N] += 1
    return base


_CAL_DRAWS = 4000
_CONC_LO, _CONC_HI = 1e-3, 1e6


def _mean_cv(N, m, conc, draws=_CAL_DRAWS):
    rng = np.random.default_rng(12345)
    W = rng.dirichlet(np.full(N, conc), size=draws)
    return float(_cv(_round_to_sum(W, m)).mean())


@lru_cache(maxsize=256)
def feasible_cv_range(N: int, m: int) -> tuple[float, float]:
    """Range of mean degree CV reachable for ``N`` nodes and ``m`` edges."""
    return float(_cv(_equal_split(N, m))), _mean_cv(N, m, _CONC_LO)


@lru_cache(maxsize=1024)
def calibrate_concentration(N: int, m: int, cv: float) -> float:
    """Symmetric Dirichlet parameter whose rounded draws have mean CV ``cv``."""
    lo_cv, hi_cv = feasible_cv_range(N, m)
    if cv > hi_cv:
        raise ValueError(
            f"degree CV {cv} unreachable for N={N}, m={m}; feasible range is "
            f"[{lo_cv:.4g}, {hi_cv:.4g}]"
        )
    lo, hi = np.log(_CONC_LO), np.log(_CONC_HI)
    if _mean_cv(N, m, np.exp(hi)) >= cv:
        return float(np.exp(hi))
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if _mean_cv(N, m, np.exp(mid)) > cv:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


def _one_activity(N, m, degree_cv, rng):
    if m == 0:
        return np.zeros(N, dtype=np.int64)
    if degree_cv is None:
        # stars and bars: N-1 bar positions among m+N-1 slots
        bars = np.sort(rng.choice(m + N - 1, size=N - 1, replace=False))
        return np.diff(np.concatenate(([-1], bars, [m + N - 1]))) - 1
    lo_cv, _ = feasible_cv_range(N, m)
    if degree_cv <= lo_cv:
        x = _equal_split(N, m)
        return rng.permutation(x)
    conc = calibrate_concentration(N, m, float(degree_cv))
    w = rng.dirichlet(np.full(N, conc))
    return _round_to_sum(w[None, :], m)[0]


def sample_activities(N: int, m: int, degree_cv: float | None = None, rng=None) -> ActivityVectors:
    """Draw out- and in-activities summing to ``m`` independently.

    Without ``degree_cv`` each vector is a uniform weak composition of ``m``.
    With it, Dirichlet weights calibrated to the target CV are rounded to
    integers.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if degree_cv is not None and not 0.0 <= degree_cv <= 1.0:
        raise ValueError(f"degree CV must lie in [0, 1], got {degree_cv}")
    rng = _rng(rng)
    xo = _one_activity(N, m, degree_cv, rng)
    xi = _one_activity(N, m, degree_cv, rng)
    return ActivityVectors(xo, xi, m)


# ---------------------------------------------------------------- windows

def sample_window(act: ActivityVectors, rng=None) -> np.ndarray:
    """Draw ``m`` edges without replacement from the urn; returns an ``N x N`` count matrix."""
    rng = _rng(rng)
    N, m = act.N, act.m
    if m == 0:
        return np.zeros((N, N), dtype=np.int64)
    Xi = act.urn()
    if m * m < _HYPERGEOM_LIMIT:
        return rng.multivariate_hypergeometric(Xi.ravel(), m, method="marginals").reshape(N, N)
    # same law: choose m distinct (out-stub, in-stub) pairs of the m x m stub grid
    picks = rng.choice(m * m, size=m, replace=False)
    out_stub, in_stub = np.divmod(picks, m)
    owner_out = np.repeat(np.arange(N), act.xi_out)
    owner_in = np.repeat(np.arange(N), act.xi_in)
    A = np.zeros((N, N), dtype=np.int64)
    np.add.at(A, (owner_out[out_stub], owner_in[in_stub]), 1)
    return A


@dataclass(frozen=True)
class SynthConfig:
    """One generating process.

    Exactly one of ``total_edges`` (exact ``M``, multinomial over windows) and
    ``expected_edges`` (Poisson per window; scalar or one value per window)
    must be set.
    """

    N: int
    partition: WindowPartition
    total_edges: int | None = None
    expected_edges: float | Sequence[float] | None = None
    degree_cv: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N: must be >= 1")
        if (self.total_edges is None) == (self.expected_edges is None):
            raise ConfigError("total_edges/expected_edges: exactly one must be given")
        if self.total_edges is not None and self.total_edges < 0:
            raise ConfigError("total_edges: must be >= 0")
        if self.expected_edges is not None:
            e = np.atleast_1d(np.asarray(self.expected_edges, dtype=np.float64))
            if (e < 0).any():
                raise ConfigError("expected_edges: must be >= 0")
            if e.size not in (1, self.partition.z):
                raise ConfigError(
                    f"expected_edges: need 1 or {self.partition.z} values, got {e.size}"
                )
        if self.degree_cv is not None and not 0.0 <= self.degree_cv <= 1.0:
            raise ConfigError(f"degree_cv: must lie in [0, 1], got {self.degree_cv}")

    @property
    def T(self):
        return self.partition.T


def sample_temporal(cfg: SynthConfig, rng=None) -> TemporalGraph:
    rng = _rng(cfg.seed if rng is None else rng)
    p = cfg.partition
    if cfg.total_edges is not None:
        m_seq = sample_edge_counts(cfg.total_edges, p, rng)
    else:
        lam = np.broadcast_to(np.asarray(cfg.expected_edges, dtype=np.float64), (p.z,))
        m_seq = rng.poisson(lam)
    N = cfg.N
    src, dst, ts = [], [], []
    for (a, b), m in zip(p.intervals(), m_seq.tolist()):
        act = sample_activities(N, m, cfg.degree_cv, rng)
        A = sample_window(act, rng).ravel()
        cells = np.repeat(np.arange(N * N), A)
        v, u = np.divmod(cells, N)
        src.append(v)
        dst.append(u)
        ts.append(a + rng.integers(0, b - a, size=len(cells)))
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64)
    return TemporalGraph(N, p.T, cat(src), cat(dst), cat(ts))


def overlay(g1: TemporalGraph, g2: TemporalGraph) -> TemporalGraph:
    """Multiset union of two graphs on the same node set and time axis."""
    if g1.N != g2.N or g1.T != g2.T:
        raise ValueError(f"shape mismatch: (N={g1.N}, T={g1.T}) vs (N={g2.N}, T={g2.T})")
    return TemporalGraph(
        g1.N,
        g1.T,
        np.concatenate((g1.src, g2.src)),
        np.concatenate((g1.dst, g2.dst)),
        np.concatenate((g1.t, g2.t)),
    )


def sample_overlay(configs: Sequence[SynthConfig], seed=None) -> TemporalGraph:
    """Sample each process with its own stream and bind the results."""
    if not configs:
        raise ConfigError("processes: at least one process is required")
    streams = np.random.SeedSequence(seed).spawn(len(configs))
    g = None
    for cfg, ss in zip(configs, streams):
        h = sample_temporal(cfg, np.random.default_rng(ss))
        g = h if g is None else overlay(g, h)
    return g


# ---------------------------------------------------------------- config files

def _partition_from(spec, T, where):
    if "widths" in spec:
        p = WindowPartition(tuple(spec["widths"]))
        if T is not None and p.T != T:
            raise ConfigError(f"{where}widths: sum {p.T} does not match T={T}")
        return p
    if "pattern" in spec:
        if T is None:
            raise ConfigError(f"T: required when {where}pattern is used")
        return repeat_pattern(spec["pattern"], T)
    raise ConfigError(f"{where}widths/pattern: one of them is required")


def parse_config(raw: dict) -> tuple[list[SynthConfig], int | None]:
    """Validate a declarative config; returns ``(processes, seed)``.

    Shape::

        {"N": 5, "T": 396, "seed": 1,
         "processes": [{"pattern": [22], "expected_edges_per_window": 500},
                       {"pattern": [33], "expected_edges_per_window": 500}]}

    A config without ``processes`` describes a single process at top level.
    Each process takes ``widths`` or ``pattern``, ``total_edges`` or
    ``expected_edges_per_window``, and optionally ``degree_cv``.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config: must be a JSON object")
    known = {"N", "T", "seed", "processes", "widths", "pattern", "total_edges",
             "expected_edges_per_window", "degree_cv"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{sorted(extra)[0]}: unknown field")
    if "N" not in raw:
        raise ConfigError("N: required")
    N, T, seed = raw["N"], raw.get("T"), raw.get("seed")
    if not isinstance(N, int) or N < 1:
        raise ConfigError("N: must be a positive integer")
    if T is not None and (not isinstance(T, int) or T < 1):
        raise ConfigError("T: must be a positive integer")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    procs = raw.get("processes")
    if procs is None:
        procs = [{k: v for k, v in raw.items() if k not in ("N", "T", "seed")}]
    elif not isinstance(procs, list) or not procs:
        raise ConfigError("processes: must be a non-empty list")
    out = []
    for i, spec in enumerate(procs):
        where = "" if raw.get("processes") is None else f"processes[{i}]."
        p = _partition_from(spec, T, where)
        cv = spec.get("degree_cv")
        if cv is not None:
            if not isinstance(cv, (int, float)) or not 0 <= cv <= 1:
                raise ConfigError(f"{where}degree_cv: must lie in [0, 1]")
            cv = float(cv)
        try:
            out.append(SynthConfig(
                N=N,
                partition=p,
                total_edges=spec.get("total_edges"),
                expected_edges=spec.get("expected_edges_per_window"),
                degree_cv=cv,
            ))
        except ConfigError as exc:
            raise ConfigError(f"{where}{exc}") from None
    Ts = {c.T for c in out}
    if len(Ts) != 1:
        raise ConfigError("T: processes cover different numbers of steps")
    return out, seed


def load_config(path) -> tuple[list[SynthConfig], int | None]:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
    return parse_config(raw)


def check_feasible(configs: Sequence[SynthConfig]):
    """Fail early when a CV target cannot be met by the expected window sizes."""
    for cfg in configs:
        if cfg.degree_cv is None:
            continue
        if cfg.total_edges is not None:
            ms = np.asarray(cfg.partition.widths) * cfg.total_edges / cfg.T
        else:
            ms = np.broadcast_to(np.asarray(cfg.expected_edges, dtype=float), (cfg.partition.z,))
        for m in sorted({max(1, int(round(x))) for x in ms}):
            lo, hi = feasible_cv_range(cfg.N, m)
            if cfg.degree_cv > hi:
                raise ConfigError(
                    f"degree_cv: {cfg.degree_cv} unreachable for N={cfg.N}, m={m}; "
                    f"feasible range is [{lo:.4g}, {hi:.4g}]"
                )
