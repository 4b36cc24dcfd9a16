"""Instantaneous power (p-q) theory for three-phase four-wire systems.

All transforms accept scalars or equal-shaped numpy arrays, so the same code
serves a single sample and a whole record.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.signal import butter, sosfiltfilt

from apf_emd.core.config import PqConfig
from apf_emd.core.errors import RangeError, VoltageCollapseError
from apf_emd.core.signal import ThreePhaseSignal, TimeSeries

logger = logging.getLogger(__name__)

Real = Union[float, np.ndarray]

_K = math.sqrt(2.0 / 3.0)
CLARKE = _K * np.array(
    [
        [1.0, -0.5, -0.5],
        [0.0, math.sqrt(3.0) / 2.0, -math.sqrt(3.0) / 2.0],
        [1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)],
    ]
)


@dataclass(frozen=True)
class AlphaBeta0Sample:
    alpha: Real
    beta: Real
    zero: Real

    @property
    def norm_sq(self) -> Real:
        return self.alpha * self.alpha + self.beta * self.beta


@dataclass(frozen=True)
class PowerTriple:
    p: Real
    q: Real
    p0: Real


def clarke(a: Real, b: Real, c: Real) -> AlphaBeta0Sample:
    m = CLARKE
    return AlphaBeta0Sample(
        alpha=m[0, 0] * a + m[0, 1] * b + m[0, 2] * c,
        beta=m[1, 1] * b + m[1, 2] * c,
        zero=m[2, 0] * a + m[2, 1] * b + m[2, 2] * c,
    )


def inverse_clarke(s: AlphaBeta0Sample) -> tuple[Real, Real, Real]:
    m = CLARKE
    a = m[0, 0] * s.alpha + m[2, 0] * s.zero
    b = m[0, 1] * s.alpha + m[1, 1] * s.beta + m[2, 1] * s.zero
    c = m[0, 2] * s.alpha + m[1, 2] * s.beta + m[2, 2] * s.zero
    return a, b, c


def instantaneous_power(v: AlphaBeta0Sample, i: AlphaBeta0Sample) -> PowerTriple:
    return PowerTriple(
        p=v.alpha * i.alpha + v.beta * i.beta,
        q=v.alpha * i.beta - v.beta * i.alpha,
        p0=v.zero * i.zero,
    )


def oscillating_p(p_series: TimeSeries, cfg: PqConfig) -> tuple[TimeSeries, TimeSeries]:
    """Split ``p`` into its one-period centered moving average and the remainder.

    Within half a period of either end the window shrinks to the samples that
    exist, so the first and last half-periods are less accurate.
    """
    n = len(p_series)
    w = int(round(cfg.mean_window / p_series.dt))
    if w > n:
        raise RangeError(f"mean window of {w} samples exceeds series length {n}")
    w = max(w, 1)

    c = np.concatenate(([0.0], np.cumsum(p_series.samples)))
    k = np.arange(n)
    lo = np.clip(k - w // 2, 0, n)
    hi = np.clip(k - w // 2 + w, 0, n)
    p_bar = (c[hi] - c[lo]) / (hi - lo)
    return p_series.with_samples(p_bar), p_series.with_samples(p_series.samples - p_bar)


def compensating_currents(
    v: AlphaBeta0Sample,
    p_c: Real,
    q_c: Real,
    i0_load: Real,
    cfg: PqConfig,
) -> AlphaBeta0Sample:
    """Currents that make the filter deliver ``p_c`` and ``q_c`` and cancel the zero sequence."""
    norm_sq = np.asarray(v.norm_sq, dtype=np.float64)
    low = norm_sq < cfg.min_voltage_norm * cfg.min_voltage_norm
    if np.any(low):
        idx = int(np.flatnonzero(np.atleast_1d(low))[0])
        raise VoltageCollapseError(idx, float(math.sqrt(np.atleast_1d(norm_sq)[idx])))
    inv = 1.0 / norm_sq
    alpha = inv * (v.alpha * p_c - v.beta * q_c)
    beta = inv * (v.beta * p_c + v.alpha * q_c)
    if np.ndim(alpha) == 0:
        alpha, beta = float(alpha), float(beta)
    return AlphaBeta0Sample(alpha=alpha, beta=beta, zero=-i0_load)


def clarke_series(x: ThreePhaseSignal) -> AlphaBeta0Sample:
    r, s, t = x.phases
    return clarke(r.samples, s.samples, t.samples)


def power_series(v: ThreePhaseSignal, i: ThreePhaseSignal) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Per-sample p, q, p0 of a voltage/current pair as TimeSeries on the shared grid."""
    pw = instantaneous_power(clarke_series(v), clarke_series(i))
    like = v.r
    return like.with_samples(pw.p), like.with_samples(pw.q), like.with_samples(pw.p0)


def band_limit(x: np.ndarray, bandwidth_hz: float | None, dt: float, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth low-pass; identity when ``bandwidth_hz`` is None."""
    if bandwidth_hz is None:
        return np.asarray(x, dtype=np.float64)
    nyquist = 0.5 / dt
    if bandwidth_hz >= nyquist:
        logger.warning("detector bandwidth %.1f Hz at or above Nyquist %.1f Hz, not filtering", bandwidth_hz, nyquist)
        return np.asarray(x, dtype=np.float64)
    sos = butter(order, bandwidth_hz, btype="lowpass", fs=1.0 / dt, output="sos")
    return sosfiltfilt(sos, x)
