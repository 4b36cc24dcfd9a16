from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from apf_emd.core.config import BurstSpec, Line1Spec, ScenarioConfig
from apf_emd.core.errors import ConfigError
from apf_emd.core.plant import apply_injection, burst_waveform, synth_load_currents, synth_voltages
from apf_emd.core.signal import ThreePhaseSignal, TimeSeries, dft_bin


def test_voltages_are_balanced_and_start_at_zero() -> None:
    cfg = ScenarioConfig()
    v = synth_voltages(cfg)
    assert len(v) == 20_000
    assert v.r.samples[0] == 0.0
    assert np.max(np.abs(v.neutral().samples)) < 1e-9 * cfg.v_peak
    assert v.r.peak == pytest.approx(cfg.v_peak, rel=1e-6)
    wt = 2 * math.pi * cfg.f0 * v.r.times
    assert np.allclose(v.s.samples, cfg.v_peak * np.sin(wt - 2 * math.pi / 3), atol=1e-9 * cfg.v_peak)
    assert np.allclose(v.t.samples, cfg.v_peak * np.sin(wt + 2 * math.pi / 3), atol=1e-9 * cfg.v_peak)


def test_burst_is_gated() -> None:
    b = BurstSpec()
    t = np.arange(20_000) * 1e-5
    w = burst_waveform(t, b)
    outside = (t < b.t_start) | (t >= b.t_end)
    assert np.all(w[outside] == 0.0)
    assert np.max(np.abs(w)) > 0.5 * b.amplitude
    assert np.max(np.abs(w)) <= b.amplitude
    assert np.all(burst_waveform(t, replace(b, amplitude=0.0)) == 0.0)


def test_zero_burst_gives_pure_lagged_line1() -> None:
    cfg = ScenarioConfig(line1=Line1Spec(burst=BurstSpec(amplitude=0.0)))
    out = synth_load_currents(cfg)
    t = np.arange(cfg.n_samples) * cfg.dt
    expected = 40.0 * np.sin(2 * math.pi * 50.0 * t - math.radians(30.0))
    assert np.allclose(out.load_currents.r.samples, expected, atol=1e-12)


def test_line3_carries_harmonics(default_plant) -> None:
    i_t = default_plant.load_currents.t
    assert abs(dft_bin(i_t, 50.0)) == pytest.approx(30.0, rel=1e-6)
    assert abs(dft_bin(i_t, 250.0)) == pytest.approx(6.0, rel=1e-6)
    assert abs(dft_bin(i_t, 350.0)) == pytest.approx(4.5, rel=1e-6)


def test_neutral_is_sum_of_phases(default_plant) -> None:
    load = default_plant.load_currents
    assert np.allclose(default_plant.neutral_current.samples, load.r.samples + load.s.samples + load.t.samples)


def test_plant_is_deterministic() -> None:
    cfg = ScenarioConfig(seed=7, noise_rms=0.5)
    a = synth_load_currents(cfg)
    b = synth_load_currents(cfg)
    assert a.fingerprint == b.fingerprint
    assert np.array_equal(a.load_currents.stack(), b.load_currents.stack())


def test_noise_depends_on_seed() -> None:
    a = synth_load_currents(ScenarioConfig(seed=1, noise_rms=0.5))
    b = synth_load_currents(ScenarioConfig(seed=2, noise_rms=0.5))
    clean = synth_load_currents(ScenarioConfig(seed=1))
    assert a.fingerprint != b.fingerprint
    assert not np.array_equal(a.load_currents.r.samples, b.load_currents.r.samples)
    resid = a.load_currents.r.samples - clean.load_currents.r.samples
    assert float(np.std(resid)) == pytest.approx(0.5, rel=0.05)


def test_burst_outside_duration_is_rejected() -> None:
    with pytest.raises(ConfigError):
        ScenarioConfig(duration=0.08)


def _zeros(like: ThreePhaseSignal) -> ThreePhaseSignal:
    return like.map(TimeSeries.zeros_like)


def test_apply_injection(default_plant) -> None:
    load = default_plant.load_currents
    zero_n = TimeSeries.zeros_like(load.r)

    source, neutral = apply_injection(load, _zeros(load), zero_n)
    assert np.array_equal(source.stack(), load.stack())
    assert np.allclose(neutral.samples, default_plant.neutral_current.samples)

    source, neutral = apply_injection(load, load.map(lambda s: s.scale(-1.0)), zero_n)
    assert np.all(source.stack() == 0.0)

    source, neutral = apply_injection(load, _zeros(load), default_plant.neutral_current.scale(-1.0))
    assert np.allclose(neutral.samples, 0.0, atol=1e-12)
