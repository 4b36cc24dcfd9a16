from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from apf_emd.core.config import ApfConfig, ApfMode, ScenarioFile
from apf_emd.core.signal import ThreePhaseSignal, TimeSeries


def sine(amp: float, f: float, *, n: int = 20_000, dt: float = 1e-5, phase: float = 0.0, t0: float = 0.0) -> TimeSeries:
    return TimeSeries.from_function(lambda t: amp * np.sin(2.0 * math.pi * f * t + phase), n=n, dt=dt, t0=t0)


def balanced(amp: float, f: float, *, lag: float = 0.0, n: int = 20_000, dt: float = 1e-5) -> ThreePhaseSignal:
    shift = 2.0 * math.pi / 3.0
    return ThreePhaseSignal(
        sine(amp, f, n=n, dt=dt, phase=-lag),
        sine(amp, f, n=n, dt=dt, phase=-shift - lag),
        sine(amp, f, n=n, dt=dt, phase=shift - lag),
    )


def ideal(sf: ScenarioFile, mode: ApfMode) -> ApfConfig:
    return replace(sf.apf_config(mode), converter="ideal")
