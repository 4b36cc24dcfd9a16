from __future__ import annotations

import math

import numpy as np
import pytest

from apf_emd.core.errors import AlignmentError, DegenerateInputError, RangeError, WindowError
from apf_emd.core.signal import ThreePhaseSignal, TimeSeries, add, dft_bin, rms, slice, sub

from helpers import sine


def test_add_identity_and_inverse() -> None:
    a = TimeSeries([1.0, 2.0], 0.1)
    assert add(a, TimeSeries([0.0, 0.0], 0.1)).samples.tolist() == [1.0, 2.0]
    b = TimeSeries([1.0, -1.0], 0.1)
    assert add(b, TimeSeries([-1.0, 1.0], 0.1)).samples.tolist() == [0.0, 0.0]


def test_add_matches_scalar_loop() -> None:
    a = sine(1.0, 50.0, n=500)
    b = TimeSeries.from_function(lambda t: np.cos(2.0 * math.pi * 50.0 * t), n=500, dt=1e-5)
    got = add(a, b).samples
    for k in range(500):
        assert got[k] == a.samples[k] + b.samples[k]


def test_sub_examples_and_antisymmetry() -> None:
    assert sub(TimeSeries([3.0, 3.0], 1.0), TimeSeries([1.0, 2.0], 1.0)).samples.tolist() == [2.0, 1.0]
    a = sine(2.0, 70.0, n=300)
    assert not np.any(sub(a, a).samples)

    rng = np.random.default_rng(7)
    x = TimeSeries(rng.normal(size=200), 1e-3)
    y = TimeSeries(rng.normal(size=200), 1e-3)
    assert np.array_equal(sub(x, y).samples, -sub(y, x).samples)
    # round trip within ulp-scale drift
    assert np.allclose(sub(add(x, y), y).samples, x.samples, rtol=0.0, atol=1e-15 * 8)


def test_grid_mismatch_raises() -> None:
    with pytest.raises(AlignmentError):
        add(TimeSeries([1.0, 2.0], 0.1), TimeSeries([1.0, 2.0], 0.2))
    with pytest.raises(AlignmentError):
        sub(TimeSeries([1.0, 2.0], 0.1), TimeSeries([1.0, 2.0, 3.0], 0.1))
    with pytest.raises(AlignmentError):
        ThreePhaseSignal(TimeSeries([1.0], 0.1), TimeSeries([1.0], 0.1, t0=1.0), TimeSeries([1.0], 0.1))


def test_timeseries_rejects_bad_input() -> None:
    with pytest.raises(DegenerateInputError):
        TimeSeries([], 0.1)
    with pytest.raises(DegenerateInputError):
        TimeSeries([1.0, float("nan")], 0.1)
    with pytest.raises(DegenerateInputError):
        TimeSeries([1.0], 0.0)


def test_samples_are_read_only() -> None:
    a = TimeSeries([1.0, 2.0], 0.1)
    with pytest.raises(ValueError):
        a.samples[0] = 5.0


def test_slice_counts_and_nesting() -> None:
    x = sine(1.0, 50.0)  # 0.2 s at dt=1e-5
    assert len(slice(x, 0.0, x.end_time)) == len(x)
    assert np.array_equal(slice(x, 0.0, x.end_time).samples, x.samples)

    w = slice(x, 0.08, 0.1)
    assert len(w) == 2000
    assert w.t0 == pytest.approx(0.08, abs=1e-12)
    nested = slice(slice(x, 0.0, x.end_time), 0.08, 0.1)
    assert np.array_equal(nested.samples, w.samples)


def test_slice_out_of_range() -> None:
    x = sine(1.0, 50.0, n=1000)
    with pytest.raises(RangeError):
        slice(x, -0.01, 0.005)
    with pytest.raises(RangeError):
        slice(x, 0.0, 1.0)
    with pytest.raises(RangeError):
        slice(x, 0.005, 0.005)


def test_rms_examples() -> None:
    assert rms(TimeSeries(np.full(10, -3.0), 1.0)) == pytest.approx(3.0)
    assert rms(TimeSeries(np.zeros(10), 1.0)) == 0.0
    x = sine(5.0, 50.0)
    assert rms(x) == pytest.approx(5.0 / math.sqrt(2.0), rel=1e-6)
    assert rms(x.scale(-4.0)) == pytest.approx(4.0 * rms(x), rel=1e-12)


def test_dft_bin_amplitude_and_orthogonality() -> None:
    a = 7.0
    x = sine(a, 50.0, n=6000)  # 3 cycles
    assert abs(dft_bin(x, 50.0)) == pytest.approx(a, abs=1e-6 * a)
    assert abs(dft_bin(x, 100.0)) < 1e-6 * a

    dc = TimeSeries(np.full(2000, 4.0), 1e-5)
    assert abs(dft_bin(dc, 50.0)) < 1e-9

    mix = add(sine(10.0, 50.0, n=2000), sine(2.0, 250.0, n=2000))
    assert abs(dft_bin(mix, 50.0)) == pytest.approx(10.0, abs=1e-6)
    assert abs(dft_bin(mix, 250.0)) == pytest.approx(2.0, abs=1e-6)


def test_dft_bin_phase_and_linearity() -> None:
    phi = 0.7
    x = TimeSeries.from_function(lambda t: 3.0 * np.cos(2.0 * math.pi * 50.0 * t + phi), n=2000, dt=1e-5)
    z = dft_bin(x, 50.0)
    assert abs(z) == pytest.approx(3.0, rel=1e-9)
    assert np.angle(z) == pytest.approx(phi, abs=1e-9)

    rng = np.random.default_rng(3)
    a = TimeSeries(rng.uniform(-1, 1, 2000), 1e-5)
    b = TimeSeries(rng.uniform(-1, 1, 2000), 1e-5)
    lhs = dft_bin(add(a, b), 150.0)
    rhs = dft_bin(a, 150.0) + dft_bin(b, 150.0)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_dft_bin_rejects_fractional_window() -> None:
    x = sine(1.0, 50.0, n=1500)  # 0.75 cycle
    with pytest.raises(WindowError):
        dft_bin(x, 50.0)
    with pytest.raises(WindowError):
        dft_bin(x, 0.0)


def test_three_phase_neutral_and_stack() -> None:
    r = TimeSeries([1.0, 2.0], 0.5)
    s = TimeSeries([3.0, 4.0], 0.5)
    t = TimeSeries([-4.0, -6.0], 0.5)
    x = ThreePhaseSignal(r, s, t)
    assert x.neutral().samples.tolist() == [0.0, 0.0]
    assert x.stack().shape == (3, 2)
    y = ThreePhaseSignal.from_stack(x.stack() * 2.0, like=r)
    assert y.t.samples.tolist() == [-8.0, -12.0]
