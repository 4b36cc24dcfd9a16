from __future__ import annotations

import json
from pathlib import Path

import pytest

from apf_emd.core.config import (
    DEFAULT_HARMONICS,
    ApfConfig,
    EmdConfig,
    Harmonic,
    PqConfig,
    ScenarioConfig,
    ScenarioFile,
)
from apf_emd.core.errors import ConfigError, InputError


def test_sd_threshold_band() -> None:
    assert EmdConfig().sd_threshold == 0.25
    EmdConfig(sd_threshold=0.2)
    EmdConfig(sd_threshold=0.3)
    for bad in (0.19, 0.31, 0.0, 1.0):
        with pytest.raises(ConfigError) as exc:
            EmdConfig(sd_threshold=bad)
        assert exc.value.key == "sd_threshold"


def test_config_errors_are_input_errors() -> None:
    with pytest.raises(InputError):
        PqConfig(f0=-1.0)
    with pytest.raises(ConfigError):
        PqConfig(bandwidth_hz=40.0)
    with pytest.raises(ConfigError):
        ApfConfig(hysteresis_band=0.0)
    with pytest.raises(ConfigError):
        ApfConfig(mode="fast")  # type: ignore[arg-type]
    for bad in ({"substeps": 0}, {"substeps": 2.5}, {"substeps": True}, {"coupling_cutoff_hz": 0.0}):
        with pytest.raises(ConfigError) as exc:
            ApfConfig(**bad)  # type: ignore[arg-type]
        assert exc.value.key == next(iter(bad))


def test_scenario_validation() -> None:
    sc = ScenarioConfig()
    assert sc.n_samples == 20_000
    assert sc.samples_per_period == 2000
    assert sc.rated_phase_peak == 40.0
    with pytest.raises(ConfigError):
        ScenarioConfig(dt=1e-3)
    with pytest.raises(ConfigError):
        ScenarioConfig(duration=0.05)
    with pytest.raises(ConfigError):
        ScenarioConfig(noise_rms=-1.0)


def test_fundamental_locked_factory() -> None:
    cfg = EmdConfig.fundamental_locked(60.0, sd_threshold=0.2)
    assert cfg.stop_mode == "fundamental_locked"
    assert cfg.stop_f0 == 60.0
    assert cfg.sd_threshold == 0.2


def test_from_json_defaults_and_overrides() -> None:
    sf = ScenarioFile.from_json({})
    assert sf.scenario == ScenarioConfig()
    assert sf.scenario.line3.harmonics == DEFAULT_HARMONICS
    assert sf.pq.bandwidth_hz == 600.0
    assert sf.emd.stop_mode == "fundamental_locked"

    sf = ScenarioFile.from_json(
        {
            "scenario": {"f0": 60.0, "dt": 1e-5, "duration": 0.1, "seed": 3},
            "line1": {"i_peak": 20.0, "burst": {"t_start": 0.05, "t_end": 0.06}},
            "line3": {"harmonics": [[5, 0.1], [11, 0.05, 30.0]]},
            "emd": {"sd_threshold": 0.3},
            "apf": {"converter": "ideal"},
        }
    )
    assert sf.scenario.f0 == 60.0 and sf.scenario.seed == 3
    assert sf.scenario.line1.i_peak == 20.0
    assert sf.scenario.line1.burst.t_end == 0.06
    assert sf.scenario.line3.harmonics == (Harmonic(5, 0.1), Harmonic(11, 0.05, 30.0))
    assert sf.emd.stop_f0 == 60.0 and sf.emd.sd_threshold == 0.3
    assert sf.pq.bandwidth_hz == pytest.approx(720.0)
    assert sf.apf.converter == "ideal"


@pytest.mark.parametrize(
    ("data", "key"),
    [
        ({"bogus": {}}, "<root>.bogus"),
        ({"scenario": {"f0": 50.0, "fo": 60.0}}, "scenario.fo"),
        ({"line1": {"burst": {"width": 1.0}}}, "line1.burst.width"),
        ({"emd": {"sd_threshold": 0.5}}, "sd_threshold"),
        ({"line3": {"harmonics": [[1, 0.1]]}}, "harmonics"),
        ({"line3": {"harmonics": "5th"}}, "line3.harmonics"),
        ({"scenario": {"dt": "fast"}}, "scenario"),
        ({"line1": {"burst": {"t_start": 0.3, "t_end": 0.4}}}, "burst"),
    ],
)
def test_from_json_rejects(data: dict, key: str) -> None:
    with pytest.raises(ConfigError) as exc:
        ScenarioFile.from_json(data)
    assert exc.value.key == key


def test_round_trip_through_json() -> None:
    sf = ScenarioFile.from_json({"scenario": {"seed": 9, "noise_rms": 0.2}, "apf": {"hysteresis_band": 0.5}})
    again = ScenarioFile.from_json(json.loads(sf.dumps()))
    assert again == sf
    assert sf.dumps() == again.dumps()


def test_apf_config_fills_defaults(default_file: ScenarioFile) -> None:
    cfg = default_file.apf_config("baseline")
    assert cfg.mode == "baseline"
    assert cfg.hysteresis_band == pytest.approx(0.8)
    assert cfg.converter_slew is None
    assert cfg.substeps is None and cfg.coupling_cutoff_hz is None
    assert cfg.emd.stop_mode == "fundamental_locked"
    assert cfg.pq.bandwidth_hz == 600.0


def test_load_reports_bad_files(tmp_path: Path) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ScenarioFile.load(bad)

    binary = tmp_path / "bin.json"
    binary.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(ConfigError):
        ScenarioFile.load(binary)

    good = tmp_path / "good.json"
    good.write_text(ScenarioFile().dumps(), encoding="utf-8")
    assert ScenarioFile.load(good).scenario == ScenarioConfig()


SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.mark.parametrize("name", ["default.json", "no_burst.json", "noisy.json"])
def test_bundled_scenarios_load(name: str) -> None:
    sf = ScenarioFile.load(SCENARIO_DIR / name)
    assert sf.pq.bandwidth_hz == 600.0


def test_bundled_default_matches_builtin() -> None:
    sf = ScenarioFile.load(SCENARIO_DIR / "default.json")
    builtin = ScenarioFile()
    assert (sf.scenario, sf.emd, sf.pq) == (builtin.scenario, builtin.emd, builtin.pq)
