from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from apf_emd.core.config import BurstSpec, ScenarioConfig
from apf_emd.core.signal import ThreePhaseSignal, TimeSeries, add3, check_grid
from apf_emd.core.utils import sha256_arrays

logger = logging.getLogger(__name__)

_SHIFT = 2.0 * math.pi / 3.0


@dataclass(frozen=True)
class PlantOutputs:
    voltages: ThreePhaseSignal
    load_currents: ThreePhaseSignal
    neutral_current: TimeSeries
    config: ScenarioConfig
    fingerprint: str


def _grid(cfg: ScenarioConfig) -> np.ndarray:
    return np.arange(cfg.n_samples, dtype=np.float64) * cfg.dt


def _series(cfg: ScenarioConfig, samples: np.ndarray) -> TimeSeries:
    return TimeSeries(samples, cfg.dt, 0.0)


def synth_voltages(cfg: ScenarioConfig) -> ThreePhaseSignal:
    """Stiff balanced supply: r at 0, s at -120 degrees, t at +120 degrees."""
    t = _grid(cfg)
    wt = 2.0 * math.pi * cfg.f0 * t
    v = cfg.v_peak
    return ThreePhaseSignal(
        _series(cfg, v * np.sin(wt)),
        _series(cfg, v * np.sin(wt - _SHIFT)),
        _series(cfg, v * np.sin(wt + _SHIFT)),
    )


def burst_waveform(t: np.ndarray, burst: BurstSpec) -> np.ndarray:
    """Decaying carrier gated to [t_start, t_end); exactly zero elsewhere."""
    out = np.zeros_like(t)
    if burst.amplitude == 0.0:
        return out
    gate = (t >= burst.t_start) & (t < burst.t_end)
    tau = t[gate] - burst.t_start
    out[gate] = burst.amplitude * np.exp(-burst.decay * tau) * np.sin(2.0 * math.pi * burst.carrier * tau)
    return out


def synth_load_currents(cfg: ScenarioConfig) -> PlantOutputs:
    t = _grid(cfg)
    wt = 2.0 * math.pi * cfg.f0 * t

    l1 = cfg.line1
    i_r = l1.i_peak * np.sin(wt - math.radians(l1.phase_lag_deg)) + burst_waveform(t, l1.burst)

    l2 = cfg.line2
    i_s = l2.i_peak * np.sin(wt - _SHIFT - math.radians(l2.phase_lag_deg))

    l3 = cfg.line3
    shape = np.sin(wt + _SHIFT - math.radians(l3.phase_lag_deg))
    for h in l3.harmonics:
        shape = shape + h.rel_amplitude * np.sin(h.order * wt + math.radians(h.phase_deg))
    i_t = l3.i_peak * shape

    if cfg.noise_rms > 0.0:
        rng = np.random.default_rng(cfg.seed)
        noise = rng.normal(0.0, cfg.noise_rms, size=(3, t.size))
        i_r, i_s, i_t = i_r + noise[0], i_s + noise[1], i_t + noise[2]

    voltages = synth_voltages(cfg)
    load = ThreePhaseSignal(_series(cfg, i_r), _series(cfg, i_s), _series(cfg, i_t))
    neutral = load.neutral()
    fp = sha256_arrays([*voltages.stack(), *load.stack()], salt=repr(cfg).encode("utf-8"))
    logger.info("plant n=%s dt=%g duration=%g fingerprint=%s", cfg.n_samples, cfg.dt, cfg.duration, fp[:12])
    return PlantOutputs(voltages=voltages, load_currents=load, neutral_current=neutral, config=cfg, fingerprint=fp)


def apply_injection(
    load: ThreePhaseSignal,
    injected: ThreePhaseSignal,
    injected_neutral: TimeSeries,
) -> tuple[ThreePhaseSignal, TimeSeries]:
    check_grid(load.r, injected.r)
    check_grid(load.r, injected_neutral)
    source = add3(load, injected)
    return source, injected_neutral.with_samples(source.neutral().samples + injected_neutral.samples)
