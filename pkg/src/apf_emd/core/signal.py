from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from apf_emd.core.errors import AlignmentError, DegenerateInputError, RangeError, WindowError


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled real signal; sample k sits at ``t0 + k * dt``."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise DegenerateInputError("TimeSeries needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise DegenerateInputError("TimeSeries samples must be finite")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise DegenerateInputError(f"dt must be positive, got {self.dt!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], *, n: int, dt: float, t0: float = 0.0) -> "TimeSeries":
        t = t0 + np.arange(n, dtype=np.float64) * dt
        return cls(np.asarray(fn(t), dtype=np.float64) * np.ones(n), dt, t0)

    @classmethod
    def zeros_like(cls, other: "TimeSeries") -> "TimeSeries":
        return cls(np.zeros(len(other)), other.dt, other.t0)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self), dtype=np.float64) * self.dt

    @property
    def end_time(self) -> float:
        """Exclusive end of the covered interval."""
        return self.t0 + len(self) * self.dt

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def with_samples(self, samples: np.ndarray) -> "TimeSeries":
        return TimeSeries(samples, self.dt, self.t0)

    def scale(self, k: float) -> "TimeSeries":
        return self.with_samples(self.samples * k)

    def same_grid(self, other: "TimeSeries") -> bool:
        return (
            len(self) == len(other)
            and self.dt == other.dt
            and math.isclose(self.t0, other.t0, rel_tol=0.0, abs_tol=1e-6 * self.dt)
        )


def check_grid(a: TimeSeries, b: TimeSeries) -> None:
    if not a.same_grid(b):
        raise AlignmentError(
            f"grid mismatch: (n={len(a)}, dt={a.dt}, t0={a.t0}) vs (n={len(b)}, dt={b.dt}, t0={b.t0})"
        )


def add(a: TimeSeries, b: TimeSeries) -> TimeSeries:
    check_grid(a, b)
    return a.with_samples(a.samples + b.samples)


def sub(a: TimeSeries, b: TimeSeries) -> TimeSeries:
    check_grid(a, b)
    return a.with_samples(a.samples - b.samples)


def total(items: Iterable[TimeSeries], *, like: TimeSeries) -> TimeSeries:
    acc = np.zeros(len(like))
    for s in items:
        check_grid(like, s)
        acc = acc + s.samples
    return like.with_samples(acc)


def slice(a: TimeSeries, t_start: float, t_end: float) -> TimeSeries:  # noqa: A001
    tol = 1e-6 * a.dt
    if not (t_start < t_end) or t_start < a.t0 - tol or t_end > a.end_time + tol:
        raise RangeError(f"window [{t_start}, {t_end}) outside [{a.t0}, {a.end_time})")
    i0 = int(round((t_start - a.t0) / a.dt))
    i1 = int(round((t_end - a.t0) / a.dt))
    i1 = min(i1, len(a))
    if i1 <= i0:
        raise RangeError(f"window [{t_start}, {t_end}) is shorter than one sample")
    return TimeSeries(a.samples[i0:i1], a.dt, a.t0 + i0 * a.dt)


def rms(a: TimeSeries) -> float:
    return float(np.sqrt(np.mean(a.samples * a.samples)))


def dft_bin(a: TimeSeries, f: float) -> complex:
    """Fourier coefficient of ``a`` at frequency ``f``.

    The window must span an integer number of periods of ``f`` to within half
    a sample. For ``A*cos(2*pi*f*t + phi)`` the result is ``A*exp(1j*phi)``,
    so ``abs()`` gives the amplitude and ``np.angle()`` the phase.
    """
    n = len(a)
    if f <= 0.0:
        raise WindowError(f"frequency must be positive, got {f}")
    periods = n * a.dt * f
    k = round(periods)
    if k < 1 or abs(n - k / (f * a.dt)) > 0.5:
        raise WindowError(f"window of {n} samples holds {periods:.4f} periods of {f} Hz")
    w = 2.0 * math.pi * f * a.times
    re = float(np.dot(a.samples, np.cos(w)))
    im = float(np.dot(a.samples, np.sin(w)))
    return complex(2.0 * re / n, -2.0 * im / n)


@dataclass(frozen=True, eq=False)
class ThreePhaseSignal:
    r: TimeSeries
    s: TimeSeries
    t: TimeSeries

    def __post_init__(self) -> None:
        check_grid(self.r, self.s)
        check_grid(self.r, self.t)

    @property
    def phases(self) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
        return (self.r, self.s, self.t)

    @property
    def dt(self) -> float:
        return self.r.dt

    @property
    def t0(self) -> float:
        return self.r.t0

    def __len__(self) -> int:
        return len(self.r)

    def neutral(self) -> TimeSeries:
        return self.r.with_samples(self.r.samples + self.s.samples + self.t.samples)

    def stack(self) -> np.ndarray:
        """Samples as a ``(3, n)`` array."""
        return np.vstack([p.samples for p in self.phases])

    @classmethod
    def from_stack(cls, arr: np.ndarray, *, like: TimeSeries) -> "ThreePhaseSignal":
        return cls(like.with_samples(arr[0]), like.with_samples(arr[1]), like.with_samples(arr[2]))

    def map(self, fn: Callable[[TimeSeries], TimeSeries]) -> "ThreePhaseSignal":
        return ThreePhaseSignal(fn(self.r), fn(self.s), fn(self.t))

    def slice(self, t_start: float, t_end: float) -> "ThreePhaseSignal":
        return self.map(lambda p: slice(p, t_start, t_end))


def add3(a: ThreePhaseSignal, b: ThreePhaseSignal) -> ThreePhaseSignal:
    return ThreePhaseSignal(add(a.r, b.r), add(a.s, b.s), add(a.t, b.t))


PHASE_NAMES: tuple[str, str, str] = ("r", "s", "t")
