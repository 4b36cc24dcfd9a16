from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from apf_emd.core.config import ApfConfig, ApfMode, BurstSpec, ConverterModel
from apf_emd.core.emd import Decomposition, decompose
from apf_emd.core.errors import ComputationError
from apf_emd.core.pq import band_limit, clarke_series, compensating_currents, instantaneous_power, inverse_clarke, oscillating_p, power_series
from apf_emd.core.plant import PlantOutputs, apply_injection
from apf_emd.core.signal import PHASE_NAMES, ThreePhaseSignal, TimeSeries, check_grid, total

logger = logging.getLogger(__name__)

LEG_NAMES = (*PHASE_NAMES, "n")

SLEW_MARGIN = 1.5
MAX_SUBSTEPS = 64
# Default coupling filter cutoff as a multiple of f0.
COUPLING_CUTOFF_F0 = 100.0


@dataclass(frozen=True)
class SwitchState:
    s_r: int = 0
    s_s: int = 0
    s_t: int = 0
    s_n: int = 0

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.s_r, self.s_s, self.s_t, self.s_n)


@dataclass(frozen=True)
class ReferenceSplit:
    """Fundamental/disturbance split of the load and the references built from it.

    ``split_disturbances`` fills ``i_m`` and ``i_n``; ``build_references``
    fills the rest.
    """

    i_m: ThreePhaseSignal
    i_n: tuple[list[TimeSeries], list[TimeSeries], list[TimeSeries]]
    decompositions: tuple[Decomposition | None, ...] = (None, None, None)
    i_c_m: ThreePhaseSignal | None = None
    i_c_n: ThreePhaseSignal | None = None
    i_c_ref: ThreePhaseSignal | None = None
    i_c_neutral: TimeSeries | None = None
    i_c_neutral_ref: TimeSeries | None = None


@dataclass(frozen=True, eq=False)
class ApfTrace:
    voltages: ThreePhaseSignal
    load: ThreePhaseSignal
    load_neutral: TimeSeries
    reference: ThreePhaseSignal
    reference_neutral: TimeSeries
    # Leg currents at the sample instants.
    injected: ThreePhaseSignal
    injected_neutral: TimeSeries
    # Leg currents after the coupling filter, as seen at the PCC. Same as
    # ``injected`` for the ideal converter.
    delivered: ThreePhaseSignal
    delivered_neutral: TimeSeries
    source: ThreePhaseSignal
    source_neutral: TimeSeries
    p: TimeSeries
    q: TimeSeries
    p0: TimeSeries
    p_load: TimeSeries
    q_load: TimeSeries
    # (4, n) int8, legs r, s, t, n.
    switches: np.ndarray
    settled: np.ndarray
    mode: ApfMode
    converter: ConverterModel
    f0: float
    hysteresis_band: float
    converter_slew: float
    substeps: int
    fingerprint: str
    split: ReferenceSplit = field(repr=False)
    # None when the scenario has no burst.
    burst: BurstSpec | None = None

    def __len__(self) -> int:
        return len(self.load)

    @property
    def dt(self) -> float:
        return self.load.dt

    def switch_state(self, k: int) -> SwitchState:
        return SwitchState(*(int(x) for x in self.switches[:, k]))


def split_disturbances(load: ThreePhaseSignal, cfg: ApfConfig) -> ReferenceSplit:
    if cfg.mode == "baseline":
        return ReferenceSplit(i_m=load, i_n=([], [], []))

    with ThreadPoolExecutor(max_workers=3, thread_name_prefix="emd") as pool:
        decs = list(pool.map(lambda x: decompose(x, cfg.emd), load.phases))

    for name, d in zip(PHASE_NAMES, decs):
        logger.info("emd phase=%s imfs=%s", name, len(d.imfs))
    i_m = ThreePhaseSignal(*(d.residue for d in decs))
    i_n = ([c.series for c in decs[0].imfs], [c.series for c in decs[1].imfs], [c.series for c in decs[2].imfs])
    return ReferenceSplit(i_m=i_m, i_n=i_n, decompositions=tuple(decs))


def disturbance_reference(i_n: tuple[list[TimeSeries], ...], like: TimeSeries) -> ThreePhaseSignal:
    """Per phase, the negated sum of the disturbance IMFs."""
    return ThreePhaseSignal(*(total(imfs, like=like).scale(-1.0) for imfs in i_n))


def pfc_reference(i_m: ThreePhaseSignal, v: ThreePhaseSignal, cfg: ApfConfig) -> tuple[ThreePhaseSignal, TimeSeries]:
    """p-q compensating currents for the fundamental waveforms plus reverse neutral current."""
    check_grid(i_m.r, v.r)
    dt = v.dt
    v_ab0 = clarke_series(v)
    i_ab0 = clarke_series(i_m)
    pw = instantaneous_power(v_ab0, i_ab0)

    _, p_tilde = oscillating_p(v.r.with_samples(pw.p), cfg.pq)
    bw = cfg.pq.bandwidth_hz
    p_c = -band_limit(p_tilde.samples + pw.p0, bw, dt)
    q_c = -band_limit(pw.q, bw, dt)
    i0 = band_limit(i_ab0.zero, bw, dt)

    ic = compensating_currents(v_ab0, p_c, q_c, i0, cfg.pq)
    a, b, c = inverse_clarke(ic)
    like = i_m.r
    i_c_m = ThreePhaseSignal(like.with_samples(a), like.with_samples(b), like.with_samples(c))
    return i_c_m, i_m.neutral().scale(-1.0)


def build_references(split: ReferenceSplit, load: ThreePhaseSignal, v: ThreePhaseSignal, cfg: ApfConfig) -> ReferenceSplit:
    i_c_n = disturbance_reference(split.i_n, like=load.r)
    i_c_m, i_c_neutral = pfc_reference(split.i_m, v, cfg)
    i_c_ref = ThreePhaseSignal.from_stack(i_c_m.stack() + i_c_n.stack(), like=load.r)
    # Fourth leg: reverse of the measured neutral current plus the return of
    # the phase-leg injections, so the source neutral only sees tracking error.
    neutral_ref = load.r.with_samples(-(load.neutral().samples + i_c_ref.neutral().samples))
    return replace(split, i_c_m=i_c_m, i_c_n=i_c_n, i_c_ref=i_c_ref, i_c_neutral=i_c_neutral, i_c_neutral_ref=neutral_ref)


def hysteresis_step(i_injected: float, i_ref: float, band: float, prev: int) -> int:
    error = i_ref - i_injected
    if error > 0.5 * band:
        return 1
    if error < -0.5 * band:
        return 0
    return prev


def converter_step(state: int, i_injected: float, slew: float, dt: float) -> float:
    return i_injected + slew * dt if state else i_injected - slew * dt


def resolve_band_and_slew(cfg: ApfConfig, load: ThreePhaseSignal, refs: np.ndarray | None = None) -> tuple[float, float]:
    """Hysteresis band and converter slew, filling whichever ``cfg`` leaves unset.

    The derived slew is ``SLEW_MARGIN`` times the larger of the steepest
    slope in ``refs`` (legs by samples, usually settled columns only) and
    the slope of a rated-peak fundamental.
    """
    band = cfg.hysteresis_band
    peak = max(p.peak for p in load.phases)
    if band is None:
        band = 0.02 * peak
        band = band if band > 0 else 1e-3
    if cfg.converter_slew is not None:
        return band, cfg.converter_slew

    dt = load.dt
    steepest = 2.0 * math.pi * cfg.pq.f0 * peak
    if refs is not None and refs.shape[-1] > 1:
        steepest = max(steepest, float(np.max(np.abs(np.diff(refs, axis=-1)))) / dt)
    slew = SLEW_MARGIN * steepest
    if slew <= 0.0:
        slew = band / (4.0 * dt)
    return band, slew


def resolve_substeps(cfg: ApfConfig, band: float, slew: float, dt: float) -> int:
    """Comparator updates per simulation step so one move stays within a quarter band."""
    if cfg.substeps is not None:
        return cfg.substeps
    m = max(1, math.ceil(slew * dt / (0.25 * band)))
    if m > MAX_SUBSTEPS:
        logger.warning("slew %.4g needs %s substeps per step, capping at %s", slew, m, MAX_SUBSTEPS)
        m = MAX_SUBSTEPS
    return m


def settled_mask(n: int, samples_per_period: int) -> np.ndarray:
    """False over the first period (start-up) and the last half period (window edge).

    The tail holds the end ringing of the zero-phase filters and of the
    EMD spline ends, so settled-sample measures skip it as well.
    """
    mask = np.ones(n, dtype=bool)
    mask[: min(n, samples_per_period)] = False
    tail = samples_per_period // 2
    if tail:
        mask[max(0, n - tail) :] = False
    return mask


def _track(refs: np.ndarray, band: float, slew: float, dt: float, substeps: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Run the comparator and leg ramp ``substeps`` times per sample.

    The reference is interpolated linearly inside a sample. Returns the leg
    current and the switch state at each sample instant.
    """
    legs, n = refs.shape
    h = dt / substeps
    injected = np.empty((legs, n))
    states = np.empty((legs, n), dtype=np.int8)
    ref_rows = refs.tolist()
    fractions = [j / substeps for j in range(1, substeps + 1)]
    for leg in range(legs):
        ref = ref_rows[leg]
        cur = 0.0
        state = 0
        prev = ref[0] if n else 0.0
        inj_row = [0.0] * n
        st_row = [0] * n
        for k in range(n):
            target = ref[k]
            for f in fractions:
                state = hysteresis_step(cur, prev + (target - prev) * f, band, state)
                cur = converter_step(state, cur, slew, h)
            prev = target
            inj_row[k] = cur
            st_row[k] = state
        injected[leg] = inj_row
        states[leg] = st_row
    return injected, states


def run_apf(plant: PlantOutputs, cfg: ApfConfig) -> ApfTrace:
    load = plant.load_currents
    v = plant.voltages
    check_grid(load.r, v.r)
    n = len(load)
    dt = load.dt
    spp = int(round(1.0 / (cfg.pq.f0 * dt)))

    split = build_references(split_disturbances(load, cfg), load, v, cfg)
    i_c_ref, neutral_ref = split.i_c_ref, split.i_c_neutral_ref
    if i_c_ref is None or neutral_ref is None:
        raise ComputationError("reference currents were not built")
    refs = np.vstack([i_c_ref.stack(), neutral_ref.samples[None, :]])
    settled = settled_mask(n, spp)

    band, slew = resolve_band_and_slew(cfg, load, refs[:, settled])
    if cfg.converter == "ideal":
        substeps = 1
        injected = refs.copy()
        delivered = injected
        # Ideal legs have no comparator; record the direction of the leg current.
        states = (np.diff(injected, axis=1, prepend=0.0) >= 0.0).astype(np.int8)
    else:
        substeps = resolve_substeps(cfg, band, slew, dt)
        cutoff = cfg.coupling_cutoff_hz if cfg.coupling_cutoff_hz is not None else COUPLING_CUTOFF_F0 * cfg.pq.f0
        injected = np.empty_like(refs)
        delivered = np.empty_like(refs)
        states = np.empty(refs.shape, dtype=np.int8)
        injected[:3], states[:3] = _track(refs[:3], band, slew, dt, substeps)
        delivered[:3] = band_limit(injected[:3], cutoff, dt)
        # Fourth leg returns what the phase legs actually deliver.
        refs[3] = -(load.neutral().samples + np.sum(delivered[:3], axis=0))
        injected[3:], states[3:] = _track(refs[3:], band, slew, dt, substeps)
        delivered[3] = band_limit(injected[3], cutoff, dt)
        neutral_ref = load.r.with_samples(refs[3])
        split = replace(split, i_c_neutral_ref=neutral_ref)

    like = load.r
    injected3 = ThreePhaseSignal.from_stack(injected[:3], like=like)
    injected_n = like.with_samples(injected[3])
    delivered3 = ThreePhaseSignal.from_stack(delivered[:3], like=like)
    delivered_n = like.with_samples(delivered[3])
    source, source_neutral = apply_injection(load, delivered3, delivered_n)
    p, q, p0 = power_series(v, source)
    p_load, q_load, _ = power_series(v, load)

    burst = plant.config.line1.burst
    if np.any(settled):
        err = np.abs(injected - refs)[:, settled]
        within = np.mean(err <= band, axis=1)
        logger.info(
            "apf mode=%s converter=%s band=%.4g slew=%.4g substeps=%s tracking=%s",
            cfg.mode,
            cfg.converter,
            band,
            slew,
            substeps,
            " ".join(f"{name}={w:.4f}" for name, w in zip(LEG_NAMES, within)),
        )

    return ApfTrace(
        voltages=v,
        load=load,
        load_neutral=plant.neutral_current,
        reference=i_c_ref,
        reference_neutral=neutral_ref,
        injected=injected3,
        injected_neutral=injected_n,
        delivered=delivered3,
        delivered_neutral=delivered_n,
        source=source,
        source_neutral=source_neutral,
        p=p,
        q=q,
        p0=p0,
        p_load=p_load,
        q_load=q_load,
        switches=states,
        settled=settled,
        mode=cfg.mode,
        converter=cfg.converter,
        f0=cfg.pq.f0,
        hysteresis_band=band,
        converter_slew=slew,
        substeps=substeps,
        fingerprint=plant.fingerprint,
        split=split,
        burst=burst if burst.amplitude != 0.0 else None,
    )
