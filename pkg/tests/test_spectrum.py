import io
import json
from collections import Counter

import numpy as np
import pytest

from conftest import random_graph
from netscales.graph import WindowPartition
from netscales.htcm import FIXED, WindowCoder, description_length
from netscales.plot import spectrogram_svg
from netscales.spectrum import (
    MDL,
    OVERLAP,
    POST,
    PRE,
    PROMINENCE,
    alpha_range,
    build_fixed_partition,
    classify_windows,
    local_minima,
    prominence,
    renormalize,
    rolling_dominant,
    rolling_starts,
    scan,
    spectrogram,
)
from netscales.synth import SynthConfig, repeat_pattern, sample_temporal


def brute_prominence(h, i):
    """Contour definition: lower the water level until the peak's island reaches higher ground."""
    h = list(h)
    top = h[i]
    if not any(x > top for x in h):
        return top - min(h)
    for level in sorted({x for x in h if x <= top}, reverse=True):
        lo = i
        while lo > 0 and h[lo - 1] >= level:
            lo -= 1
        hi = i
        while hi < len(h) - 1 and h[hi + 1] >= level:
            hi += 1
        if any(x > top for x in h[lo:hi + 1]):
            return top - level
    raise AssertionError("unreachable")


def test_build_fixed_partition_examples():
    assert build_fixed_partition(10, 3, 2).widths == (2, 3, 3, 2)
    assert build_fixed_partition(10, 3, 0).widths == (3, 3, 3, 1)
    assert build_fixed_partition(10, 10, 0).widths == (10,)
    assert build_fixed_partition(10, 8, 4).widths == (4, 6)
    with pytest.raises(ValueError):
        build_fixed_partition(10, 3, 3)
    with pytest.raises(ValueError):
        build_fixed_partition(10, 11, 0)


def test_alpha_range():
    assert list(alpha_range(10, 3)) == [0, 1, 2]
    assert list(alpha_range(10, 8)) == [0, 1, 2]
    assert list(alpha_range(10, 10)) == [0]


def test_scan_full_width_is_single_window(rng):
    g = random_graph(rng, N=3, T=12, M=80)
    (pt,) = scan(g, [12])
    assert pt.alpha == 0
    ref = description_length(g, WindowPartition.single(12), FIXED).total
    assert pt.bits == pytest.approx(ref, abs=1e-9)


def test_scan_matches_explicit_partitions(rng):
    for _ in range(5):
        g = random_graph(rng, N=4, T=17, M=150)
        for pt in scan(g, range(1, 18)):
            best = min(
                description_length(g, build_fixed_partition(17, pt.delta, a), FIXED).total
                for a in alpha_range(17, pt.delta)
            )
            assert pt.bits == pytest.approx(best, abs=1e-9)
            explicit = description_length(g, build_fixed_partition(17, pt.delta, pt.alpha), FIXED)
            assert pt.bits == pytest.approx(explicit.total, abs=1e-9)


def test_scan_rejects_bad_range(rng):
    g = random_graph(rng, N=2, T=5, M=10)
    with pytest.raises(ValueError):
        scan(g, [])
    with pytest.raises(ValueError):
        scan(g, [6])


def test_local_minima_examples():
    assert local_minima([1, 2, 3, 4]) == [1]
    assert local_minima([5, 3, 4, 2, 6]) == [2, 4]
    assert local_minima([5, 2, 2, 3]) == [2]
    # a shelf on the way down is not a minimum
    assert local_minima([5, 3, 3, 1, 4]) == [4]
    assert local_minima([4, 3, 2, 1]) == [4]
    assert local_minima([7]) == [1]


def test_prominence_examples():
    h = [1, 3, 2, 5, 1]
    bits = [-x for x in h]
    out = dict(prominence(bits, [2, 4]))
    assert out == {4: 4.0, 2: 1.0}
    assert prominence([-x for x in [0, 2, 7, 3]], [3]) == [(3, 7.0)]


def test_prominence_oracle_random():
    rng = np.random.default_rng(8)
    for _ in range(300):
        bits = rng.integers(0, 12, int(rng.integers(1, 25))).tolist()
        cands = local_minima(bits)
        got = dict(prominence(bits, cands))
        h = [-b for b in bits]
        for d in cands:
            assert got[d] == brute_prominence(h, d - 1)


def test_spectrogram_invariants(rng):
    g = sample_temporal(SynthConfig(N=4, partition=repeat_pattern([6], 60), total_edges=6000,
                                    seed=1))
    spec = spectrogram(g, range(1, 31))
    assert min(p.norm_bits for p in spec.points) == 0.0
    assert all(p.norm_bits >= 0 for p in spec.points)
    assert spec.minima[0][0] == spec.mdl_delta == 6
    cands = set(local_minima(spec.bits, spec.deltas))
    assert {d for d, _ in spec.minima} == cands
    proms = [p for _, p in spec.minima]
    assert proms == sorted(proms, reverse=True)
    assert spectrogram(g, range(1, 31)) == spec
    assert spec.dominant(MDL) == 6
    assert spec.dominant(PROMINENCE) == spec.minima[1][0]


def test_spectrogram_parallel_matches(rng):
    g = random_graph(rng, N=3, T=40, M=300)
    assert spectrogram(g, range(1, 41), jobs=3) == spectrogram(g, range(1, 41))


def test_spectrum_outputs(rng):
    g = random_graph(rng, N=3, T=20, M=100)
    spec = spectrogram(g, range(1, 21))
    buf = io.StringIO()
    spec.write_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "delta,alpha,bits,norm_bits" and len(rows) == 21
    doc = json.loads(spec.to_json())
    assert doc["mdl_delta"] == spec.mdl_delta
    svg = spectrogram_svg(spec)
    assert svg.startswith("<svg") and svg.count("<circle") == len(spec.minima)


def test_rolling_counts():
    starts = rolling_starts(175, 26, 1)
    assert len(starts) == 150
    assert len(rolling_starts(150, 26, 1)) == 125
    phases = Counter(classify_windows(starts, 26, 100))
    assert (phases[PRE], phases[OVERLAP], phases[POST]) == (74, 26, 50)
    with pytest.raises(ValueError):
        rolling_starts(20, 26)


def test_renormalize():
    vals = [4, 4, 6, 8, 8]
    ph = [PRE, OVERLAP, OVERLAP, POST, POST]
    out = renormalize(vals, ph)
    assert np.mean(out[1:3]) == pytest.approx(0.0)
    assert out.std() == pytest.approx(1.0)
    assert renormalize([3, 3, 3], [PRE, OVERLAP, POST]).tolist() == [0.0, 0.0, 0.0]


def test_rolling_stationary_is_constant():
    cfg = SynthConfig(N=5, partition=repeat_pattern([5], 80), expected_edges=2000, seed=4)
    g = sample_temporal(cfg)
    series = rolling_dominant(g, 40, 2, delta_max=20, shock=40)
    assert len(set(series.dominant)) == 1 and series.dominant[0] == 5
    assert set(series.renormalized) == {0.0}
    buf = io.StringIO()
    series.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "window_start,dominant_delta,renormalized_delta,phase"
