from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Literal

from apf_emd.core.errors import ConfigError

StopMode = Literal["monotone", "fundamental_locked"]
Boundary = Literal["mirror", "none"]
ApfMode = Literal["baseline", "emd_enhanced"]
ConverterModel = Literal["hysteresis", "ideal"]

SD_BAND = (0.2, 0.3)


@dataclass(frozen=True)
class EmdConfig:
    sd_threshold: float = 0.25
    max_sift_iterations: int = 50
    max_imfs: int = 10
    stop_mode: StopMode = "monotone"
    # Fundamental frequency for stop_mode="fundamental_locked".
    stop_f0: float = 50.0
    boundary: Boundary = "mirror"
    # Masking sinusoid used in fundamental_locked mode, as a multiple of stop_f0.
    mask_ratio: float = 4.0
    # Mask amplitude = mask_gain * peak * stop_f0 / (mask_ratio * stop_f0).
    mask_gain: float = 2.0

    def __post_init__(self) -> None:
        lo, hi = SD_BAND
        if not (lo <= self.sd_threshold <= hi):
            raise ConfigError(f"sd_threshold must lie in [{lo}, {hi}], got {self.sd_threshold}", key="sd_threshold")
        if self.max_sift_iterations < 1:
            raise ConfigError("max_sift_iterations must be >= 1", key="max_sift_iterations")
        if self.max_imfs < 0:
            raise ConfigError("max_imfs must be >= 0", key="max_imfs")
        if self.stop_mode not in ("monotone", "fundamental_locked"):
            raise ConfigError(f"unknown stop_mode {self.stop_mode!r}", key="stop_mode")
        if self.stop_f0 <= 0:
            raise ConfigError("stop_f0 must be positive", key="stop_f0")
        if self.boundary not in ("mirror", "none"):
            raise ConfigError(f"unknown boundary {self.boundary!r}", key="boundary")
        if self.mask_ratio <= 1.0 or self.mask_gain <= 0.0:
            raise ConfigError("mask_ratio must exceed 1 and mask_gain must be positive", key="mask_ratio")

    @staticmethod
    def fundamental_locked(f0: float, **kwargs: Any) -> "EmdConfig":
        return EmdConfig(stop_mode="fundamental_locked", stop_f0=f0, **kwargs)


@dataclass(frozen=True)
class PqConfig:
    f0: float = 50.0
    # Absolute guard on sqrt(v_alpha^2 + v_beta^2), volts.
    min_voltage_norm: float = 1e-6
    # Zero-phase low-pass applied to the compensating power and zero-sequence
    # references; None compensates the full band.
    bandwidth_hz: float | None = None

    def __post_init__(self) -> None:
        if self.f0 <= 0:
            raise ConfigError("f0 must be positive", key="f0")
        if self.min_voltage_norm <= 0:
            raise ConfigError("min_voltage_norm must be positive", key="min_voltage_norm")
        if self.bandwidth_hz is not None and self.bandwidth_hz <= self.f0:
            raise ConfigError("bandwidth_hz must exceed f0", key="bandwidth_hz")

    @property
    def mean_window(self) -> float:
        return 1.0 / self.f0


@dataclass(frozen=True)
class ApfConfig:
    emd: EmdConfig = field(default_factory=lambda: EmdConfig.fundamental_locked(50.0))
    pq: PqConfig = field(default_factory=PqConfig)
    # None: 2% of the rated phase peak (largest line peak of the scenario).
    hysteresis_band: float | None = None
    # None: derived from the steepest settled reference slope with margin.
    converter_slew: float | None = None
    mode: ApfMode = "emd_enhanced"
    converter: ConverterModel = "hysteresis"
    # Comparator updates per simulation step; None keeps each move within a
    # quarter band.
    substeps: int | None = None
    # Coupling low-pass between the legs and the PCC; None is 100 * f0.
    coupling_cutoff_hz: float | None = None

    def __post_init__(self) -> None:
        if self.hysteresis_band is not None and self.hysteresis_band <= 0:
            raise ConfigError("hysteresis_band must be positive", key="hysteresis_band")
        if self.converter_slew is not None and self.converter_slew <= 0:
            raise ConfigError("converter_slew must be positive", key="converter_slew")
        if self.mode not in ("baseline", "emd_enhanced"):
            raise ConfigError(f"unknown mode {self.mode!r}", key="mode")
        if self.converter not in ("hysteresis", "ideal"):
            raise ConfigError(f"unknown converter {self.converter!r}", key="converter")
        if self.substeps is not None and (isinstance(self.substeps, bool) or not isinstance(self.substeps, int) or self.substeps < 1):
            raise ConfigError("substeps must be a positive integer", key="substeps")
        if self.coupling_cutoff_hz is not None and self.coupling_cutoff_hz <= 0:
            raise ConfigError("coupling_cutoff_hz must be positive", key="coupling_cutoff_hz")


@dataclass(frozen=True)
class BurstSpec:
    t_start: float = 0.088
    t_end: float = 0.094
    carrier: float = 1000.0
    decay: float = 200.0
    amplitude: float = 12.0


@dataclass(frozen=True)
class Line1Spec:
    i_peak: float = 40.0
    phase_lag_deg: float = 30.0
    burst: BurstSpec = field(default_factory=BurstSpec)


@dataclass(frozen=True)
class Line2Spec:
    i_peak: float = 30.0
    phase_lag_deg: float = 30.0


@dataclass(frozen=True)
class Harmonic:
    order: int
    rel_amplitude: float
    phase_deg: float = 0.0


DEFAULT_HARMONICS: tuple[Harmonic, ...] = (Harmonic(5, 0.20), Harmonic(7, 0.15))


@dataclass(frozen=True)
class Line3Spec:
    i_peak: float = 30.0
    phase_lag_deg: float = 30.0
    harmonics: tuple[Harmonic, ...] = DEFAULT_HARMONICS


@dataclass(frozen=True)
class ScenarioConfig:
    f0: float = 50.0
    dt: float = 1e-5
    duration: float = 0.2
    v_peak: float = 325.0
    line1: Line1Spec = field(default_factory=Line1Spec)
    line2: Line2Spec = field(default_factory=Line2Spec)
    line3: Line3Spec = field(default_factory=Line3Spec)
    seed: int | None = None
    # Gaussian measurement noise on the load currents, amps RMS; drawn from `seed`.
    noise_rms: float = 0.0

    def __post_init__(self) -> None:
        if self.f0 <= 0 or self.dt <= 0 or self.duration <= 0:
            raise ConfigError("f0, dt and duration must be positive", key="scenario")
        if self.duration < 4.0 / self.f0 - 1e-12:
            raise ConfigError("duration must cover at least 4 fundamental periods", key="duration")
        if self.dt > 1.0 / (200.0 * self.f0) + 1e-15:
            raise ConfigError("dt must not exceed 1/(200*f0)", key="dt")
        if self.noise_rms < 0:
            raise ConfigError("noise_rms must be non-negative", key="noise_rms")
        b = self.line1.burst
        if not (0.0 <= b.t_start < b.t_end <= self.duration + 1e-12):
            raise ConfigError(f"burst window [{b.t_start}, {b.t_end}) outside [0, {self.duration}]", key="burst")
        for h in self.line3.harmonics:
            if h.order < 2:
                raise ConfigError(f"harmonic order must be >= 2, got {h.order}", key="harmonics")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def samples_per_period(self) -> int:
        return int(round(1.0 / (self.f0 * self.dt)))

    @property
    def rated_phase_peak(self) -> float:
        return max(self.line1.i_peak, self.line2.i_peak, self.line3.i_peak)

    @property
    def nominal_voltage_norm(self) -> float:
        """Magnitude of the balanced voltage space vector, sqrt(3/2) * v_peak."""
        return math.sqrt(1.5) * self.v_peak


# JSON schema, nested sections mirror the dataclasses above.

_SECTION_TYPES: dict[str, type] = {
    "scenario": ScenarioConfig,
    "line1": Line1Spec,
    "line2": Line2Spec,
    "line3": Line3Spec,
    "emd": EmdConfig,
    "pq": PqConfig,
    "apf": ApfConfig,
}

_NESTED = {"burst", "harmonics", "line1", "line2", "line3", "emd", "pq"}


def _scalar_fields(cls: type) -> set[str]:
    return {f.name for f in fields(cls) if f.name not in _NESTED}


def _check_keys(section: str, data: Any, allowed: set[str]) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object", key=section)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}", key=f"{section}.{unknown[0]}")
    return data


def _build(cls: type, section: str, data: dict[str, Any], **nested: Any) -> Any:
    kwargs: dict[str, Any] = {}
    for f in fields(cls):
        if f.name in data and f.name not in _NESTED:
            kwargs[f.name] = data[f.name]
    kwargs.update(nested)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value in {section!r}: {e}", key=section) from e


def _parse_harmonics(raw: Any) -> tuple[Harmonic, ...]:
    if not isinstance(raw, list):
        raise ConfigError("line3.harmonics must be a list of [order, rel_amplitude, phase_deg]", key="line3.harmonics")
    out: list[Harmonic] = []
    for item in raw:
        if not isinstance(item, (list, tuple)) or len(item) not in (2, 3):
            raise ConfigError(f"bad harmonic entry {item!r}", key="line3.harmonics")
        try:
            out.append(Harmonic(int(item[0]), float(item[1]), float(item[2]) if len(item) == 3 else 0.0))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad harmonic entry {item!r}", key="line3.harmonics") from e
    return tuple(out)


@dataclass(frozen=True)
class ScenarioFile:
    """A scenario plus the controller settings used to run it."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    emd: EmdConfig = field(default_factory=lambda: EmdConfig.fundamental_locked(50.0))
    pq: PqConfig = field(default_factory=lambda: PqConfig(bandwidth_hz=600.0))
    apf: ApfConfig = field(default_factory=ApfConfig)

    def apf_config(self, mode: ApfMode) -> ApfConfig:
        """ApfConfig for ``mode`` with EMD/p-q settings tied to the scenario grid."""
        sc = self.scenario
        emd = replace(self.emd, stop_mode="fundamental_locked", stop_f0=sc.f0)
        guard = max(self.pq.min_voltage_norm, 1e-6 * sc.nominal_voltage_norm)
        pq = replace(self.pq, f0=sc.f0, min_voltage_norm=guard)
        band = self.apf.hysteresis_band
        if band is None:
            band = 0.02 * sc.rated_phase_peak if sc.rated_phase_peak > 0 else 1e-3
        # An unset slew is derived from the references inside run_apf.
        return replace(self.apf, emd=emd, pq=pq, hysteresis_band=band, mode=mode)

    def to_json(self) -> dict[str, Any]:
        sc = self.scenario
        b = sc.line1.burst
        return {
            "scenario": {
                "f0": sc.f0,
                "dt": sc.dt,
                "duration": sc.duration,
                "v_peak": sc.v_peak,
                "seed": sc.seed,
                "noise_rms": sc.noise_rms,
            },
            "line1": {
                "i_peak": sc.line1.i_peak,
                "phase_lag_deg": sc.line1.phase_lag_deg,
                "burst": {**b.__dict__},
            },
            "line2": {**sc.line2.__dict__},
            "line3": {
                "i_peak": sc.line3.i_peak,
                "phase_lag_deg": sc.line3.phase_lag_deg,
                "harmonics": [[h.order, h.rel_amplitude, h.phase_deg] for h in sc.line3.harmonics],
            },
            "emd": {**self.emd.__dict__},
            "pq": {**self.pq.__dict__},
            "apf": {
                "hysteresis_band": self.apf.hysteresis_band,
                "converter_slew": self.apf.converter_slew,
                "mode": self.apf.mode,
                "converter": self.apf.converter,
                "substeps": self.apf.substeps,
                "coupling_cutoff_hz": self.apf.coupling_cutoff_hz,
            },
        }

    @staticmethod
    def from_json(data: Any) -> "ScenarioFile":
        root = _check_keys("<root>", data, set(_SECTION_TYPES))

        line1_raw = _check_keys("line1", root.get("line1") or {}, _scalar_fields(Line1Spec) | {"burst"})
        burst_raw = _check_keys("line1.burst", line1_raw.get("burst") or {}, _scalar_fields(BurstSpec))
        burst = _build(BurstSpec, "line1.burst", burst_raw)
        line1 = _build(Line1Spec, "line1", line1_raw, burst=burst)

        line2_raw = _check_keys("line2", root.get("line2") or {}, _scalar_fields(Line2Spec))
        line2 = _build(Line2Spec, "line2", line2_raw)

        line3_raw = _check_keys("line3", root.get("line3") or {}, _scalar_fields(Line3Spec) | {"harmonics"})
        harmonics = _parse_harmonics(line3_raw["harmonics"]) if "harmonics" in line3_raw else DEFAULT_HARMONICS
        line3 = _build(Line3Spec, "line3", line3_raw, harmonics=harmonics)

        sc_raw = _check_keys("scenario", root.get("scenario") or {}, _scalar_fields(ScenarioConfig))
        scenario = _build(ScenarioConfig, "scenario", sc_raw, line1=line1, line2=line2, line3=line3)

        emd_raw = _check_keys("emd", root.get("emd") or {}, _scalar_fields(EmdConfig))
        emd = _build(EmdConfig, "emd", {"stop_mode": "fundamental_locked", "stop_f0": scenario.f0, **emd_raw})

        pq_raw = _check_keys("pq", root.get("pq") or {}, _scalar_fields(PqConfig))
        pq = _build(PqConfig, "pq", {"f0": scenario.f0, "bandwidth_hz": 12.0 * scenario.f0, **pq_raw})

        apf_raw = _check_keys("apf", root.get("apf") or {}, _scalar_fields(ApfConfig))
        apf = _build(ApfConfig, "apf", apf_raw, emd=emd, pq=pq)

        return ScenarioFile(scenario=scenario, emd=emd, pq=pq, apf=apf)

    @classmethod
    def load(cls, path: Path) -> "ScenarioFile":
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as e:
            raise ConfigError(f"{path} is not UTF-8 text", key="<file>") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}", key="<file>") from e
        return cls.from_json(data)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)
