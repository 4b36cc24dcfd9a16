from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import hilbert

from apf_emd.core.config import Boundary, EmdConfig
from apf_emd.core.errors import DegenerateInputError, ResidueReached, UndefinedPhaseError, UndefinedSdError
from apf_emd.core.signal import TimeSeries, check_grid, sub
from apf_emd.core.utils import sha256_arrays

logger = logging.getLogger(__name__)

# |mean| <= ZERO_MEAN_TOL * peak counts as "zero mean" for an IMF.
ZERO_MEAN_TOL = 0.01
SD_EPS = 1e-12


@dataclass(frozen=True)
class ExtremaSet:
    maxima: list[tuple[int, float]]
    minima: list[tuple[int, float]]

    @property
    def count(self) -> int:
        return len(self.maxima) + len(self.minima)


@dataclass(frozen=True)
class SiftDiagnostics:
    envelope_mean: TimeSeries
    sift_component: TimeSeries
    sd_value: float
    iterations: int
    converged: bool = True
    # final iterate meets the IMF criteria
    valid: bool = True


@dataclass(frozen=True)
class Imf:
    series: TimeSeries
    index: int
    # False when sifting stopped at the iteration cap before SD converged.
    converged: bool = True
    sifts: int = 0


@dataclass(frozen=True)
class Decomposition:
    imfs: list[Imf]
    residue: TimeSeries
    source_fingerprint: str


@dataclass(frozen=True)
class AnalyticSignal:
    amplitude: TimeSeries
    phase: TimeSeries
    inst_frequency: TimeSeries


@dataclass(frozen=True)
class ImfSummary:
    index: int
    mean_frequency_hz: float
    energy: float
    zero_crossings: int
    extrema: int
    converged: bool = True
    sifts: int = 0


def fingerprint(x: TimeSeries) -> str:
    return sha256_arrays([np.array([x.dt, x.t0]), x.samples])


def find_extrema(x: TimeSeries) -> ExtremaSet:
    """Interior local maxima and minima by three-point comparison.

    A flat run of equal samples bounded by a rise and a fall (or a fall and a
    rise) counts as one extremum at its midpoint.
    """
    v = x.samples
    n = v.size
    if n < 3:
        raise DegenerateInputError(f"extrema need at least 3 samples, got {n}")

    d = np.diff(v)
    maxima: list[tuple[int, float]] = []
    minima: list[tuple[int, float]] = []

    if not np.any(d == 0.0):
        idx = np.nonzero((d[:-1] > 0) & (d[1:] < 0))[0] + 1
        maxima = [(int(i), float(v[i])) for i in idx]
        idx = np.nonzero((d[:-1] < 0) & (d[1:] > 0))[0] + 1
        minima = [(int(i), float(v[i])) for i in idx]
        return ExtremaSet(maxima=maxima, minima=minima)

    # Slow path: walk the sign sequence, collapsing flat runs.
    sign = np.sign(d)
    prev = 0.0
    k = 0
    while k < sign.size:
        s = sign[k]
        if s == 0.0:
            j = k
            while j < sign.size and sign[j] == 0.0:
                j += 1
            if j == sign.size:
                break
            if prev != 0.0 and sign[j] != prev:
                # samples k..j are the plateau
                mid = (k + j) // 2
                (maxima if prev > 0 else minima).append((mid, float(v[mid])))
            prev = sign[j]
            k = j + 1
            continue
        if prev != 0.0 and s != prev:
            (maxima if prev > 0 else minima).append((k, float(v[k])))
        prev = s
        k += 1
    return ExtremaSet(maxima=maxima, minima=minima)


def zero_crossings(x: TimeSeries) -> int:
    s = np.sign(x.samples)
    s = s[s != 0.0]
    if s.size < 2:
        return 0
    return int(np.count_nonzero(s[1:] != s[:-1]))


def is_imf(x: TimeSeries, ext: ExtremaSet | None = None) -> bool:
    ext = ext if ext is not None else find_extrema(x)
    if abs(ext.count - zero_crossings(x)) > 1:
        return False
    if any(val > 0.0 for _, val in ext.minima) or any(val < 0.0 for _, val in ext.maxima):
        return False
    peak = x.peak
    return peak == 0.0 or abs(float(np.mean(x.samples))) <= ZERO_MEAN_TOL * peak


def _mirror(pts: list[tuple[int, float]], n: int) -> tuple[np.ndarray, np.ndarray]:
    left = [(-i, val) for i, val in pts[:2]]
    right = [(2 * (n - 1) - i, val) for i, val in pts[-2:]]
    merged = dict(left + pts + right)
    pos = np.array(sorted(merged), dtype=np.float64)
    return pos, np.array([merged[int(p)] for p in pos], dtype=np.float64)


def envelope(x: TimeSeries, pts: list[tuple[int, float]], boundary: Boundary = "mirror") -> TimeSeries:
    """Natural cubic spline through ``pts`` evaluated on the full grid of ``x``."""
    n = len(x)
    if len(pts) < 2:
        raise ResidueReached(f"envelope needs 2 extrema, got {len(pts)}")
    if boundary == "mirror":
        pos, val = _mirror(pts, n)
    else:
        pos = np.array([p for p, _ in pts], dtype=np.float64)
        val = np.array([v for _, v in pts], dtype=np.float64)
    spline = CubicSpline(pos, val, bc_type="natural")
    return x.with_samples(spline(np.arange(n, dtype=np.float64)))


def sift_once(x: TimeSeries, boundary: Boundary = "mirror", ext: ExtremaSet | None = None) -> SiftDiagnostics:
    ext = ext if ext is not None else find_extrema(x)
    if len(ext.maxima) < 2 or len(ext.minima) < 2:
        raise ResidueReached(f"{len(ext.maxima)} maxima / {len(ext.minima)} minima, nothing left to sift")
    upper = envelope(x, ext.maxima, boundary)
    lower = envelope(x, ext.minima, boundary)
    mean = x.with_samples(0.5 * (upper.samples + lower.samples))
    return SiftDiagnostics(envelope_mean=mean, sift_component=sub(x, mean), sd_value=0.0, iterations=1)


def sd(h_prev: TimeSeries, h_cur: TimeSeries) -> float:
    """Sum of squared relative change between successive sift iterates."""
    check_grid(h_prev, h_cur)
    prev = h_prev.samples
    peak = h_prev.peak
    mask = np.abs(prev) >= SD_EPS * peak
    if peak == 0.0 or not np.any(mask):
        raise UndefinedSdError("previous sift iterate is numerically zero")
    diff = prev[mask] - h_cur.samples[mask]
    return float(np.sum((diff * diff) / (prev[mask] * prev[mask])))


def extract_imf(x: TimeSeries, cfg: EmdConfig) -> tuple[Imf, SiftDiagnostics]:
    """Sift ``x`` until the SD and IMF criteria hold or the iteration cap is hit.

    Raises ResidueReached when ``x`` cannot be sifted even once.
    """
    diag = sift_once(x, cfg.boundary)
    h = x
    sd_value = math.inf
    iterations = 0
    valid = False
    while True:
        iterations += 1
        h_next = diag.sift_component
        try:
            sd_value = sd(h, h_next)
        except UndefinedSdError:
            sd_value = 0.0
        h = h_next
        ext = find_extrema(h)
        valid = is_imf(h, ext)
        if sd_value < cfg.sd_threshold and valid:
            break
        if iterations >= cfg.max_sift_iterations:
            # Expected under masking; decompose reports unconverged IMFs.
            logger.debug("sift cap reached iterations=%s sd=%.4g imf=%s", iterations, sd_value, valid)
            break
        try:
            diag = sift_once(h, cfg.boundary, ext)
        except ResidueReached:
            break

    out = SiftDiagnostics(
        envelope_mean=sub(x, h),
        sift_component=h,
        sd_value=float(sd_value),
        iterations=iterations,
        converged=sd_value < cfg.sd_threshold and valid,
        valid=valid,
    )
    return Imf(series=h, index=1), out


def _extrema_rate_ok(x: TimeSeries, f0: float, ext: ExtremaSet) -> bool:
    """Zero-crossing and extrema rates both within 10% of 2 * f0.

    A burst riding near a fundamental zero crossing adds only a crossing or
    two and harmonics add extrema without crossings; the extrema rate
    catches both.
    """
    duration = len(x) * x.dt
    target = 2.0 * f0
    zc_rate = zero_crossings(x) / duration
    ext_rate = ext.count / duration
    return abs(zc_rate - target) <= 0.1 * target and abs(ext_rate - target) <= 0.1 * target


def _extract_masked(x: TimeSeries, cfg: EmdConfig) -> tuple[Imf, SiftDiagnostics]:
    """Masking-signal extraction keeping components near stop_f0 out of the IMF.

    The IMF is the mean of the IMFs extracted from ``x + mask`` and
    ``x - mask``; the mask cancels and the fundamental stays in the residue.
    The mean itself need not be an IMF, so it is sifted further until it is
    (see ``sift_until_imf``).
    """
    f_mask = cfg.mask_ratio * cfg.stop_f0
    amp = cfg.mask_gain * x.peak * cfg.stop_f0 / f_mask
    mask = x.with_samples(amp * np.sin(2.0 * math.pi * f_mask * x.times))
    plus, d_plus = extract_imf(x.with_samples(x.samples + mask.samples), cfg)
    minus, d_minus = extract_imf(x.with_samples(x.samples - mask.samples), cfg)
    h = x.with_samples(0.5 * (plus.series.samples + minus.series.samples))
    h, extra, valid = sift_until_imf(h, cfg)
    diag = SiftDiagnostics(
        envelope_mean=sub(x, h),
        sift_component=h,
        sd_value=max(d_plus.sd_value, d_minus.sd_value),
        iterations=d_plus.iterations + d_minus.iterations + extra,
        converged=d_plus.converged and d_minus.converged,
        valid=valid,
    )
    return Imf(series=h, index=1), diag


def sift_until_imf(h: TimeSeries, cfg: EmdConfig) -> tuple[TimeSeries, int, bool]:
    """Ordinary sifting of ``h`` stopped by the IMF criteria alone.

    Returns the last iterate, the sifts spent and whether it is an IMF;
    gives up after ``max_sift_iterations`` or when ``h`` runs out of extrema.
    """
    ext = find_extrema(h)
    valid = is_imf(h, ext)
    iterations = 0
    while not valid and iterations < cfg.max_sift_iterations:
        try:
            h = sift_once(h, cfg.boundary, ext).sift_component
        except ResidueReached:
            break
        iterations += 1
        ext = find_extrema(h)
        valid = is_imf(h, ext)
    return h, iterations, valid


def decompose(x: TimeSeries, cfg: EmdConfig) -> Decomposition:
    """Extract IMFs until the residue is monotone, runs out of extrema or hits a stop rule.

    In ``fundamental_locked`` mode extraction stops once the residue has both
    its zero-crossing and extrema rates within 10% of 2 * stop_f0. In either
    mode a component that cannot be sifted into an IMF stays in the residue.
    """
    if len(x) < 3:
        raise DegenerateInputError(f"decompose needs at least 3 samples, got {len(x)}")

    imfs: list[Imf] = []
    residue = x
    total_sifts = 0
    while len(imfs) < cfg.max_imfs:
        ext = find_extrema(residue)
        if len(ext.maxima) < 2 or len(ext.minima) < 2:
            break
        if cfg.stop_mode == "fundamental_locked" and _extrema_rate_ok(residue, cfg.stop_f0, ext):
            break
        try:
            if cfg.stop_mode == "fundamental_locked":
                imf, diag = _extract_masked(residue, cfg)
            else:
                imf, diag = extract_imf(residue, cfg)
        except ResidueReached:
            break
        total_sifts += diag.iterations
        energy = float(np.sum(imf.series.samples**2))
        floor = 1e-6 if cfg.stop_mode == "fundamental_locked" else 1e-12
        if energy <= floor * float(np.sum(residue.samples**2)):
            break
        if not diag.valid:
            logger.warning("component %s fails the IMF criteria, left in the residue", len(imfs) + 1)
            break
        imfs.append(Imf(series=imf.series, index=len(imfs) + 1, converged=diag.converged, sifts=diag.iterations))
        residue = sub(residue, imf.series)
        logger.debug("imf index=%s sifts=%s sd=%.4g converged=%s", len(imfs), diag.iterations, diag.sd_value, diag.converged)

    unconverged = sum(not c.converged for c in imfs)
    logger.info("emd imfs=%s sifts=%s unconverged=%s stop=%s", len(imfs), total_sifts, unconverged, cfg.stop_mode)
    return Decomposition(imfs=imfs, residue=residue, source_fingerprint=fingerprint(x))


def reconstruct(d: Decomposition) -> TimeSeries:
    acc = np.zeros(len(d.residue))
    for imf in d.imfs:
        check_grid(d.residue, imf.series)
        acc = acc + imf.series.samples
    return d.residue.with_samples(acc + d.residue.samples)


def analytic_signal(c: Imf, dt: float) -> AnalyticSignal:
    """Amplitude, unwrapped phase and rad/s frequency of ``c`` via the discrete Hilbert transform."""
    x = c.series
    if np.ptp(x.samples) == 0.0:
        raise UndefinedPhaseError("constant input has no defined phase")
    z = hilbert(x.samples)
    amplitude = np.abs(z)
    phase = np.unwrap(np.angle(z))
    omega = np.gradient(phase, dt)
    grid = TimeSeries(x.samples, dt, x.t0)
    return AnalyticSignal(
        amplitude=grid.with_samples(amplitude),
        phase=grid.with_samples(phase),
        inst_frequency=grid.with_samples(omega),
    )


def imf_summary(d: Decomposition) -> list[ImfSummary]:
    out: list[ImfSummary] = []
    for imf in d.imfs:
        s = imf.series
        try:
            a = analytic_signal(imf, s.dt)
            w = a.amplitude.samples**2
            f_mean = float(np.sum(w * a.inst_frequency.samples) / np.sum(w)) / (2.0 * math.pi) if np.sum(w) > 0 else 0.0
        except UndefinedPhaseError:
            f_mean = 0.0
        out.append(
            ImfSummary(
                index=imf.index,
                mean_frequency_hz=f_mean,
                energy=float(np.sum(s.samples**2) * s.dt),
                zero_crossings=zero_crossings(s),
                extrema=find_extrema(s).count,
                converged=imf.converged,
                sifts=imf.sifts,
            )
        )
    return out
