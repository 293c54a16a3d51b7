"""Metropolis-Hastings over window partitions with split, join and move proposals."""
from __future__ import annotations

import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import TemporalGraph, WindowPartition
from .htcm import Edit, Join, Move, Split, WindowCoder, apply_edit, inverse_edit

LN2 = math.log(2.0)
LOG3 = math.log(3.0)
MOVE_TYPES = ("split", "join", "move")


def _kind(edit):
    return "split" if isinstance(edit, Split) else "join" if isinstance(edit, Join) else "move"


def raw_log_prob(widths: Sequence[int], edit: Edit) -> float:
    """Natural-log probability of drawing ``edit`` in one raw proposal attempt.

    Move type 1/3; split picks a window out of ``z`` and an interior point;
    join picks one of ``z - 1`` adjacent pairs; move picks a pair and one of
    the other boundary positions.
    """
    z = len(widths)
    if isinstance(edit, Split):
        return -LOG3 - math.log(z) - math.log(widths[edit.tau] - 1)
    if isinstance(edit, Join):
        return -LOG3 - math.log(z - 1)
    tot = widths[edit.tau] + widths[edit.tau + 1]
    return -LOG3 - math.log(z - 1) - math.log(tot - 2)


def valid_mass(widths: Sequence[int]) -> float:
    """Probability that a raw attempt yields a usable edit."""
    z = len(widths)
    split = sum(1 for w in widths if w > 1) / z
    if z == 1:
        return split / 3.0
    movable = sum(1 for a, b in zip(widths, widths[1:]) if a + b > 2) / (z - 1)
    return (split + 1.0 + movable) / 3.0


@dataclass(frozen=True)
class Proposal:
    edit: Edit
    log_fwd: float
    log_bwd: float
    new_widths: tuple[int, ...]


def propose(widths: Sequence[int], rng: random.Random) -> Proposal | None:
    """Draw an edit, redrawing degenerate attempts; ``None`` if none exists.

    Log probabilities are those of the redrawn (normalized) kernel in both
    directions, so their difference is the exact Hastings correction.
    """
    widths = tuple(widths)
    z = len(widths)
    v = valid_mass(widths)
    if v == 0.0:
        return None
    while True:
        kind = rng.randrange(3)
        if kind == 0:
            tau = rng.randrange(z)
            d = widths[tau]
            if d < 2:
                continue
            edit = Split(tau, 1 + rng.randrange(d - 1))
        elif z < 2:
            continue
        elif kind == 1:
            edit = Join(rng.randrange(z - 1))
        else:
            tau = rng.randrange(z - 1)
            tot = widths[tau] + widths[tau + 1]
            if tot < 3:
                continue
            off = 1 + rng.randrange(tot - 2)
            if off >= widths[tau]:
                off += 1
            edit = Move(tau, off)
        break
    new = apply_edit(widths, edit)
    log_fwd = raw_log_prob(widths, edit) - math.log(v)
    log_bwd = raw_log_prob(new, inverse_edit(widths, edit)) - math.log(valid_mass(new))
    return Proposal(edit, log_fwd, log_bwd, new)


def accept_probability(delta_bits: float, log_fwd: float, log_bwd: float, beta: float) -> float:
    """Metropolis-Hastings acceptance for a change of ``delta_bits`` in description length."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    a = -LN2 * delta_bits / beta + log_bwd - log_fwd
    return 1.0 if a >= 0 else math.exp(a)


def geometric_schedule(sweeps: int, start: float = 1.0, end: float = 0.05):
    """Per-sweep ``(sweep, beta)`` pairs decaying geometrically from ``start`` to ``end``."""
    if sweeps == 1:
        return ((0, start),)
    r = (end / start) ** (1.0 / (sweeps - 1))
    return tuple((s, start * r**s) for s in range(sweeps))


@dataclass(frozen=True)
class ChainConfig:
    """Chain settings.

    ``anneal`` is a sequence of ``(sweep, beta)`` pairs; the temperature is
    piecewise constant from each listed sweep on and ``beta`` applies before
    the first entry. One sweep is ``moves_per_sweep`` proposals (default T).
    ``init`` is ``"single"``, ``"singletons"`` or a sequence of widths.
    """

    beta: float = 1.0
    sweeps: int = 1000
    seed: int | None = None
    init: object = "single"
    anneal: tuple[tuple[int, float], ...] | None = None
    chains: int = 1
    moves_per_sweep: int | None = None
    sample_every: int = 0
    patience: int | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.anneal is not None:
            sched = tuple((int(s), float(b)) for s, b in self.anneal)
            if any(b <= 0 for _, b in sched):
                raise ValueError("annealing temperatures must be > 0")
            object.__setattr__(self, "anneal", tuple(sorted(sched)))

    @classmethod
    def annealed(cls, sweeps: int, start=1.0, end=0.05, **kw):
        return cls(beta=start, sweeps=sweeps, anneal=geometric_schedule(sweeps, start, end), **kw)

    def beta_at(self, sweep: int) -> float:
        beta = self.beta
        if self.anneal:
            for s, b in self.anneal:
                if s > sweep:
                    break
                beta = b
        return beta


@dataclass
class ChainResult:
    best_widths: tuple[int, ...]
    best_bits: float
    proposed: dict = field(default_factory=dict)
    accepted: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    best_trace: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    chain: int = 0
    chain_bits: list = field(default_factory=list)

    @property
    def best_partition(self):
        return WindowPartition(self.best_widths)

    @property
    def acceptance_rate(self):
        return {k: (self.accepted.get(k, 0) / n if n else 0.0) for k, n in self.proposed.items()}

    def to_dict(self, trace_every: int = 1):
        p = self.best_partition
        fmt = lambda x: float(f"{x:.9g}")
        out = {
            "boundaries": p.boundaries,
            "widths": list(p.widths),
            "T": p.T,
            "bits": fmt(self.best_bits),
            "chain": self.chain,
            "chain_bits": [fmt(b) for b in self.chain_bits],
            "acceptance": {
                k: {"proposed": self.proposed[k], "accepted": self.accepted.get(k, 0)}
                for k in MOVE_TYPES
            },
        }
        if trace_every:
            out["trace"] = [fmt(b) for b in self.trace[::trace_every]]
        return out

    def to_json(self, indent=2, trace_every: int = 1):
        return json.dumps(self.to_dict(trace_every), indent=indent)


def _initial(init, T):
    if isinstance(init, str):
        if init == "single":
            return (T,)
        if init == "singletons":
            return (1,) * T
        raise ValueError(f"unknown init {init!r}")
    widths = tuple(int(w) for w in (init.widths if isinstance(init, WindowPartition) else init))
    if sum(widths) != T or min(widths) < 1:
        raise ValueError(f"initial partition {widths} does not cover T={T}")
    return widths


def run_chain(g: TemporalGraph, cfg: ChainConfig, seed, coder: WindowCoder | None = None,
              chain: int = 0) -> ChainResult:
    """One chain; ``seed`` is anything ``random.Random`` accepts."""
    coder = coder or WindowCoder(g)
    rng = random.Random(seed)
    widths = _initial(cfg.init, g.T)
    bits = coder.total_bits(widths)
    best_w, best = widths, bits
    proposed = dict.fromkeys(MOVE_TYPES, 0)
    accepted = dict.fromkeys(MOVE_TYPES, 0)
    trace, best_trace, samples = [], [], []
    moves = cfg.moves_per_sweep or g.T
    stale = 0
    for sweep in range(cfg.sweeps):
        beta = cfg.beta_at(sweep)
        improved = False
        for _ in range(moves):
            prop = propose(widths, rng)
            if prop is None:
                break
            kind = _kind(prop.edit)
            proposed[kind] += 1
            delta = coder.delta(widths, prop.edit)
            a = -LN2 * delta / beta + prop.log_bwd - prop.log_fwd
            if a >= 0 or rng.random() < math.exp(a):
                accepted[kind] += 1
                widths = prop.new_widths
                bits += delta
                if bits < best - 1e-9:
                    best_w, best, improved = widths, bits, True
        trace.append(bits)
        best_trace.append(best)
        if cfg.sample_every and sweep % cfg.sample_every == 0:
            samples.append((widths, bits))
        stale = 0 if improved else stale + 1
        if cfg.patience is not None and stale >= cfg.patience:
            break
    best = coder.total_bits(best_w)
    return ChainResult(best_w, best, proposed, accepted, trace, best_trace, samples, chain, [best])


def _chain_worker(args):
    g, cfg, seed, chain = args
    return run_chain(g, cfg, seed, chain=chain)


def chain_seeds(seed, n):
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run(g: TemporalGraph, cfg: ChainConfig, jobs: int = 1) -> ChainResult:
    """Run ``cfg.chains`` independent chains and keep the lowest description length."""
    seeds = chain_seeds(cfg.seed, cfg.chains)
    tasks = [(g, cfg, s, i) for i, s in enumerate(seeds)]
    if jobs > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(min(jobs, cfg.chains)) as ex:
            results = list(ex.map(_chain_worker, tasks))
    else:
        coder = WindowCoder(g)
        results = [run_chain(g, cfg, s, coder, i) for _, cfg, s, i in tasks]
    best = min(results, key=lambda r: (r.best_bits, r.chain))
    best.chain_bits = [r.best_bits for r in results]
    return best
