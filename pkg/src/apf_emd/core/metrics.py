from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from apf_emd.core.apf import ApfTrace
from apf_emd.core.errors import FingerprintMismatchError, UndefinedPowerFactorError, UndefinedThdError
from apf_emd.core.signal import ThreePhaseSignal, TimeSeries, dft_bin, rms, slice

logger = logging.getLogger(__name__)

DEFAULT_MAX_HARMONIC = 25
# Window where non-stationary p/q oscillation is compared between modes.
BURST_WINDOW: tuple[float, float] = (0.075, 0.1)

Q_RATIO_LIMIT = 0.01
PF_OSCILLATION_FACTOR = 3.0
THD_DIFF_LIMIT = 0.01
BURST_PP_RATIO = 0.2


def thd(i: TimeSeries, f0: float, max_harmonic: int = DEFAULT_MAX_HARMONIC) -> float:
    """Total harmonic distortion of ``i`` over its (integer-period) window."""
    a1 = abs(dft_bin(i, f0))
    if a1 == 0.0 or a1 < 1e-9 * i.peak:
        raise UndefinedThdError(f"fundamental amplitude {a1:.3e} too small for THD")
    top = min(max_harmonic, int(0.5 / (i.dt * f0)))
    harm = np.array([abs(dft_bin(i, h * f0)) for h in range(2, top + 1)])
    return float(math.sqrt(float(np.sum(harm * harm))) / a1)


def _cycle(x: TimeSeries, f0: float, cycle: int) -> TimeSeries:
    t_start = x.t0 + cycle / f0
    return slice(x, t_start, t_start + 1.0 / f0)


def power_factor(v: ThreePhaseSignal, i: ThreePhaseSignal, f0: float, cycle: int) -> float:
    """P/S over fundamental cycle ``cycle`` (0-based from the start of the record)."""
    p_sum = 0.0
    s_sum = 0.0
    for vp, ip in zip(v.phases, i.phases):
        vc = _cycle(vp, f0, cycle)
        ic = _cycle(ip, f0, cycle)
        p_sum += float(np.mean(vc.samples * ic.samples))
        s_sum += rms(vc) * rms(ic)
    if s_sum == 0.0:
        raise UndefinedPowerFactorError(f"apparent power is zero in cycle {cycle}")
    return p_sum / s_sum


def sliding_power_factor(v: ThreePhaseSignal, i: ThreePhaseSignal, f0: float) -> TimeSeries:
    """P/S over a one-period window advanced one sample at a time.

    Sample k covers the window starting at sample k, so the result has
    n - w + 1 samples for a w-sample period. Zero where S is zero.
    """
    w = int(round(1.0 / (f0 * v.dt)))
    n = len(v)
    if w > n:
        raise UndefinedPowerFactorError(f"window of {w} samples exceeds record of {n}")
    vs, cs = v.stack(), i.stack()

    def window_mean(x: np.ndarray) -> np.ndarray:
        c = np.concatenate((np.zeros((x.shape[0], 1)), np.cumsum(x, axis=1)), axis=1)
        return (c[:, w:] - c[:, :-w]) / w

    p = np.sum(window_mean(vs * cs), axis=0)
    s = np.sum(np.sqrt(np.maximum(window_mean(vs * vs), 0.0) * np.maximum(window_mean(cs * cs), 0.0)), axis=0)
    pf = np.divide(p, s, out=np.zeros_like(p), where=s > 0)
    return TimeSeries(pf, v.dt, v.t0)


@dataclass(frozen=True)
class CycleMetrics:
    cycle_index: int
    t_start: float
    settled: bool
    p_mean: float
    q_mean: float
    apparent_power: float
    power_factor: float
    thd_per_phase: tuple[float, float, float]
    p_peak_to_peak: float
    q_peak_to_peak: float
    source_neutral_rms: float
    phase_rms_mean: float

    @property
    def q_ratio(self) -> float:
        return abs(self.q_mean) / self.apparent_power if self.apparent_power > 0 else 0.0


def _safe_thd(x: TimeSeries, f0: float) -> float:
    try:
        return thd(x, f0)
    except UndefinedThdError:
        return math.nan


def cycle_metrics(trace: ApfTrace) -> list[CycleMetrics]:
    f0 = trace.f0
    spp = int(round(1.0 / (f0 * trace.dt)))
    n_cycles = len(trace) // spp
    v = trace.voltages.stack()
    src = trace.source.stack()
    out: list[CycleMetrics] = []
    for c in range(n_cycles):
        sl = np.s_[c * spp : (c + 1) * spp]
        vc, ic = v[:, sl], src[:, sl]
        p = trace.p.samples[sl]
        q = trace.q.samples[sl]
        phase_rms = np.sqrt(np.mean(ic * ic, axis=1))
        s_app = float(np.sum(np.sqrt(np.mean(vc * vc, axis=1)) * phase_rms))
        p_cycle = float(np.sum(np.mean(vc * ic, axis=1)))
        pf = p_cycle / s_app if s_app > 0 else math.nan
        out.append(
            CycleMetrics(
                cycle_index=c,
                t_start=trace.load.t0 + c * spp * trace.dt,
                settled=bool(np.all(trace.settled[sl])),
                p_mean=float(np.mean(p)),
                q_mean=float(np.mean(q)),
                apparent_power=s_app,
                power_factor=pf,
                thd_per_phase=tuple(_safe_thd(_cycle(ph, f0, c), f0) for ph in trace.source.phases),  # type: ignore[arg-type]
                p_peak_to_peak=float(np.ptp(p)),
                q_peak_to_peak=float(np.ptp(q)),
                source_neutral_rms=float(np.sqrt(np.mean(trace.source_neutral.samples[sl] ** 2))),
                phase_rms_mean=float(np.mean(phase_rms)),
            )
        )
    return out


def settled_cycles(rows: list[CycleMetrics]) -> list[CycleMetrics]:
    return [r for r in rows if r.settled]


def window_peak_to_peak(x: TimeSeries, window: tuple[float, float]) -> float:
    return float(np.ptp(slice(x, window[0], window[1]).samples))


def _clip_window(window: tuple[float, float], x: TimeSeries) -> tuple[float, float]:
    lo, hi = max(window[0], x.t0), min(window[1], x.end_time)
    if lo >= hi:
        logger.warning("comparison window [%g, %g] outside the record, using the full record", *window)
        return (x.t0, x.end_time)
    return (lo, hi)


def _overlaps(row: CycleMetrics, f0: float, window: tuple[float, float]) -> bool:
    return row.t_start < window[1] and row.t_start + 1.0 / f0 > window[0]


def _pf_variation(rows: list[CycleMetrics], f0: float, window: tuple[float, float]) -> float:
    pfs = [r.power_factor for r in rows if r.settled and _overlaps(r, f0, window)]
    return float(max(pfs) - min(pfs)) if pfs else 0.0


@dataclass(frozen=True)
class ComparisonReport:
    baseline: list[CycleMetrics]
    enhanced: list[CycleMetrics]
    window: tuple[float, float]
    baseline_p_pp: float
    enhanced_p_pp: float
    baseline_q_pp: float
    enhanced_q_pp: float
    baseline_pf_variation: float
    enhanced_pf_variation: float
    max_q_ratio: tuple[float, float]
    max_thd_difference: float
    q_eliminated: bool
    pf_oscillation_reduced: bool
    thd_comparable: bool
    # None when the scenario has no burst to remove.
    burst_removed: bool | None
    fingerprint: str

    @property
    def delta_p_pp(self) -> float:
        return self.enhanced_p_pp - self.baseline_p_pp

    @property
    def delta_q_pp(self) -> float:
        return self.enhanced_q_pp - self.baseline_q_pp

    def summary_lines(self) -> list[str]:
        def yn(flag: bool | None) -> str:
            return "n/a" if flag is None else ("yes" if flag else "no")

        lo, hi = self.window
        burst = (
            "burst removed: n/a (no burst configured)"
            if self.burst_removed is None
            else (
                f"burst removed: {yn(self.burst_removed)} "
                f"(p peak-to-peak over [{lo:g}, {hi:g}] s baseline={self.baseline_p_pp:.6g} enhanced={self.enhanced_p_pp:.6g}; "
                f"q baseline={self.baseline_q_pp:.6g} enhanced={self.enhanced_q_pp:.6g})"
            )
        )
        return [
            f"power output: q eliminated in both modes: {yn(self.q_eliminated)} "
            f"(max |q|/S baseline={self.max_q_ratio[0]:.4g} enhanced={self.max_q_ratio[1]:.4g})",
            f"power factor: oscillation reduced with EMD: {yn(self.pf_oscillation_reduced)} "
            f"(PF variation over [{lo:g}, {hi:g}] s baseline={self.baseline_pf_variation:.4g} enhanced={self.enhanced_pf_variation:.4g})",
            f"thd: comparable between modes: {yn(self.thd_comparable)} "
            f"(max difference {self.max_thd_difference:.4g}, harmonics 2..{DEFAULT_MAX_HARMONIC})",
            burst,
        ]


def compare(baseline: ApfTrace, enhanced: ApfTrace, window: tuple[float, float] = BURST_WINDOW) -> ComparisonReport:
    if baseline.fingerprint != enhanced.fingerprint:
        raise FingerprintMismatchError(
            f"traces come from different plants: {baseline.fingerprint[:12]} vs {enhanced.fingerprint[:12]}"
        )
    window = _clip_window(window, baseline.p)

    base_rows = cycle_metrics(baseline)
    enh_rows = cycle_metrics(enhanced)

    b_pp = window_peak_to_peak(baseline.p, window)
    e_pp = window_peak_to_peak(enhanced.p, window)
    b_qpp = window_peak_to_peak(baseline.q, window)
    e_qpp = window_peak_to_peak(enhanced.q, window)

    b_settled = settled_cycles(base_rows)
    e_settled = settled_cycles(enh_rows)
    q_b = max((r.q_ratio for r in b_settled), default=0.0)
    q_e = max((r.q_ratio for r in e_settled), default=0.0)

    b_var = _pf_variation(base_rows, baseline.f0, window)
    e_var = _pf_variation(enh_rows, enhanced.f0, window)

    # Steady-state distortion only; the burst window has its own verdict.
    skip_window = baseline.burst is not None
    diffs = [
        abs(tb - te)
        for rb, re_ in zip(b_settled, e_settled)
        if not (skip_window and _overlaps(rb, baseline.f0, window))
        for tb, te in zip(rb.thd_per_phase, re_.thd_per_phase)
        if not (math.isnan(tb) or math.isnan(te))
    ]
    max_diff = max(diffs, default=0.0)

    burst_removed: bool | None = None
    if baseline.burst is not None:
        burst_removed = e_pp <= BURST_PP_RATIO * b_pp and e_qpp <= BURST_PP_RATIO * b_qpp

    report = ComparisonReport(
        baseline=base_rows,
        enhanced=enh_rows,
        window=window,
        baseline_p_pp=b_pp,
        enhanced_p_pp=e_pp,
        baseline_q_pp=b_qpp,
        enhanced_q_pp=e_qpp,
        baseline_pf_variation=b_var,
        enhanced_pf_variation=e_var,
        max_q_ratio=(q_b, q_e),
        max_thd_difference=max_diff,
        q_eliminated=q_b <= Q_RATIO_LIMIT and q_e <= Q_RATIO_LIMIT,
        pf_oscillation_reduced=b_var > 0.0 and b_var >= PF_OSCILLATION_FACTOR * e_var,
        thd_comparable=max_diff <= THD_DIFF_LIMIT,
        burst_removed=burst_removed,
        fingerprint=baseline.fingerprint,
    )
    for line in report.summary_lines():
        logger.info("compare %s", line)
    return report
