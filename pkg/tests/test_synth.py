import itertools
import math
from collections import Counter
from fractions import Fraction
from math import comb, factorial

import numpy as np
import pytest
from scipy import stats

from netscales.graph import TemporalGraph, WindowPartition, aggregate
from netscales.hcm import ActivityVectors
from netscales.synth import (
    ConfigError,
    SynthConfig,
    check_feasible,
    feasible_cv_range,
    overlay,
    parse_config,
    repeat_pattern,
    sample_activities,
    sample_edge_counts,
    sample_overlay,
    sample_temporal,
    sample_window,
)
from test_hcm import weak_compositions


def cv(x):
    x = np.asarray(x, dtype=float)
    return x.std() / x.mean()


def test_repeat_pattern():
    assert repeat_pattern([22, 33], 80).widths == (22, 33, 22, 3)
    assert repeat_pattern([5], 15).widths == (5, 5, 5)
    with pytest.raises(ValueError):
        repeat_pattern([], 5)


def test_edge_counts_single_window():
    assert sample_edge_counts(17, WindowPartition((9,)), 0).tolist() == [17]


def test_edge_counts_equal_widths():
    M, z = 10**6, 5
    counts = sample_edge_counts(M, WindowPartition((4,) * z), 1)
    sd = math.sqrt(M * (1 / z) * (1 - 1 / z))
    assert counts.sum() == M
    assert np.all(np.abs(counts - M / z) <= 3 * sd)


def test_edge_counts_chi_square():
    p = WindowPartition((1, 2, 3))
    M = 3
    rng = np.random.default_rng(2)
    outcomes = list(weak_compositions(M, 3))
    n = 20_000
    obs = Counter(tuple(sample_edge_counts(M, p, rng).tolist()) for _ in range(n))
    probs = [stats.multinomial.pmf(o, M, np.array(p.widths) / 6) for o in outcomes]
    res = stats.chisquare([obs[o] for o in outcomes], np.array(probs) * n)
    assert res.pvalue > 1e-3


def test_activities_zero_cv_is_even():
    rng = np.random.default_rng(0)
    for N, m in [(7, 50), (20, 500), (3, 2)]:
        act = sample_activities(N, m, 0.0, rng)
        for x in (act.xi_out, act.xi_in):
            assert x.sum() == m and x.max() - x.min() <= 1


def test_activities_uniform_weak_composition():
    rng = np.random.default_rng(9)
    n = 100_000
    obs = Counter(tuple(sample_activities(3, 4, rng=rng).xi_out) for _ in range(n))
    comps = list(weak_compositions(4, 3))
    assert len(comps) == 15 and set(obs) == set(comps)
    p = 1 / 15
    sd = math.sqrt(n * p * (1 - p))
    for c in comps:
        assert abs(obs[c] - n * p) <= 3 * sd


@pytest.mark.parametrize("target", [0.0, 0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0])
def test_activity_cv_calibration(target):
    rng = np.random.default_rng(int(target * 100))
    cvs = [cv(sample_activities(20, 500, target, rng).xi_out) for _ in range(400)]
    assert abs(np.mean(cvs) - target) <= 0.05


def test_infeasible_cv_names_range():
    with pytest.raises(ValueError, match="feasible range"):
        sample_activities(2, 3, 1.0, np.random.default_rng(0))
    lo, hi = feasible_cv_range(2, 3)
    assert lo < hi < 1.0


def test_window_concentrated_cell():
    act = ActivityVectors([4, 0, 0], [0, 0, 4], 4)
    A = sample_window(act, 0)
    assert A[0, 2] == 4 and A.sum() == 4


def test_window_uniform_two_by_two():
    act = ActivityVectors([1, 1], [1, 1], 2)
    rng = np.random.default_rng(4)
    n = 100_000
    obs = Counter(tuple(sample_window(act, rng).ravel()) for _ in range(n))
    assert len(obs) == 6
    sd = math.sqrt(n * (1 / 6) * (5 / 6))
    for c in obs.values():
        assert abs(c - n / 6) <= 3 * sd


def test_window_stub_fallback_same_law(monkeypatch):
    import netscales.synth as synth

    act = ActivityVectors([2, 1], [1, 2], 3)
    rng = np.random.default_rng(6)
    n = 40_000
    direct = Counter(tuple(sample_window(act, rng).ravel()) for _ in range(n))
    monkeypatch.setattr(synth, "_HYPERGEOM_LIMIT", 0)
    stub = Counter(tuple(sample_window(act, rng).ravel()) for _ in range(n))
    keys = sorted(set(direct) | set(stub))
    table = np.array([[direct[k] for k in keys], [stub[k] for k in keys]])
    assert stats.chi2_contingency(table).pvalue > 1e-3


def test_unit_windows_put_edges_on_their_step():
    cfg = SynthConfig(N=3, partition=WindowPartition((1,) * 6), total_edges=60, seed=0)
    g = sample_temporal(cfg)
    ms = [w.m for w in aggregate(g, cfg.partition)]
    assert ms == np.bincount(g.t, minlength=6).tolist()


def test_steps_uniform_within_window():
    rng = np.random.default_rng(12)
    p = WindowPartition((4,))
    counts = np.zeros(4)
    for _ in range(300):
        g = sample_temporal(SynthConfig(N=2, partition=p, total_edges=20), rng)
        counts += np.bincount(g.t, minlength=4)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_exact_and_expected_edge_modes():
    p = repeat_pattern([22], 396)
    g = sample_temporal(SynthConfig(N=5, partition=p, total_edges=10_000, seed=1))
    assert g.M == 10_000
    h = sample_temporal(SynthConfig(N=5, partition=p, expected_edges=500, seed=1))
    sd = math.sqrt(500 * p.z)
    assert abs(h.M - 500 * p.z) <= 4 * sd


def test_sampler_matches_model_on_tiny_instance():
    """Empirical graph frequencies against the exact marginal over activities."""
    N, T, M = 2, 2, 2
    p = WindowPartition((2,))
    slots = [(v, w, t) for v in range(N) for w in range(N) for t in range(T)]
    exact = {}
    for events in itertools.combinations_with_replacement(slots, M):
        g = TemporalGraph.from_events(events, N=N, T=T)
        (w,) = aggregate(g, p)
        steps = Counter(events)
        tot = Fraction(0)
        for xo in weak_compositions(M, N):
            for xi in weak_compositions(M, N):
                q = Fraction(1, comb(N + M - 1, M) ** 2 * comb(M * M, M) * T**M)
                for (v, u), c in w.A.items():
                    q *= math.perm(xo[v] * xi[u], c)
                for c in steps.values():
                    q /= factorial(c)
                tot += q
        exact[tuple(sorted(events))] = tot
    assert sum(exact.values()) == 1
    rng = np.random.default_rng(21)
    n = 30_000
    obs = Counter(tuple(sorted(sample_temporal(SynthConfig(N=N, partition=p, total_edges=M),
                                               rng).events())) for _ in range(n))
    keys = [k for k, v in exact.items() if v > 0]
    assert set(obs) <= set(keys)
    res = stats.chisquare([obs[k] for k in keys], [float(exact[k]) * n for k in keys])
    assert res.pvalue > 1e-3


def test_overlay_properties():
    rng = np.random.default_rng(0)
    a = sample_temporal(SynthConfig(N=3, partition=WindowPartition((5,)), total_edges=20), rng)
    b = sample_temporal(SynthConfig(N=3, partition=WindowPartition((5,)), total_edges=30), rng)
    c = sample_temporal(SynthConfig(N=3, partition=WindowPartition((5,)), total_edges=10), rng)
    assert overlay(a, TemporalGraph.empty(3, 5)) == a
    assert overlay(a, b) == overlay(b, a)
    assert overlay(overlay(a, b), c) == overlay(a, overlay(b, c))
    keys, counts = a.step_cells()
    k2, c2 = overlay(a, a).step_cells()
    assert np.array_equal(keys, k2) and np.array_equal(2 * counts, c2)
    with pytest.raises(ValueError):
        overlay(a, TemporalGraph.empty(3, 6))


def test_seeded_determinism():
    cfg = SynthConfig(N=4, partition=repeat_pattern([3, 5], 40), total_edges=500, seed=9)
    assert sample_temporal(cfg) == sample_temporal(cfg)
    assert sample_overlay([cfg, cfg], 3) == sample_overlay([cfg, cfg], 3)


def test_config_validation_names_fields():
    with pytest.raises(ConfigError, match="total_edges/expected_edges"):
        SynthConfig(N=3, partition=WindowPartition((4,)))
    with pytest.raises(ConfigError, match="degree_cv"):
        SynthConfig(N=3, partition=WindowPartition((4,)), total_edges=5, degree_cv=1.5)
    with pytest.raises(ConfigError, match="N"):
        parse_config({"T": 5, "widths": [5], "total_edges": 4})
    with pytest.raises(ConfigError, match=r"processes\[1\]\.degree_cv"):
        parse_config({"N": 3, "T": 10, "processes": [
            {"pattern": [5], "total_edges": 5},
            {"pattern": [2], "total_edges": 5, "degree_cv": 2},
        ]})
    with pytest.raises(ConfigError, match="bogus"):
        parse_config({"N": 3, "widths": [4], "total_edges": 1, "bogus": 1})


def test_parse_config_and_feasibility():
    cfgs, seed = parse_config({"N": 5, "T": 396, "seed": 4, "processes": [
        {"pattern": [22], "expected_edges_per_window": 500},
        {"pattern": [33], "expected_edges_per_window": 500},
    ]})
    assert seed == 4 and [c.partition.z for c in cfgs] == [18, 12]
    cfgs, _ = parse_config({"N": 2, "widths": [3, 3], "total_edges": 6, "degree_cv": 1.0})
    with pytest.raises(ValueError, match="feasible range"):
        check_feasible(cfgs)
