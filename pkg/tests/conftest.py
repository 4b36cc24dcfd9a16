from __future__ import annotations

import json
import logging
from pathlib import Path

import pytest

from apf_emd.core.apf import ApfTrace, run_apf
from apf_emd.core.config import BurstSpec, Line1Spec, Line3Spec, ScenarioConfig, ScenarioFile
from apf_emd.core.plant import PlantOutputs, synth_load_currents

from helpers import ideal


@pytest.fixture(scope="session")
def default_file() -> ScenarioFile:
    return ScenarioFile()


@pytest.fixture(scope="session")
def default_plant(default_file: ScenarioFile) -> PlantOutputs:
    return synth_load_currents(default_file.scenario)


@pytest.fixture(scope="session")
def default_traces(default_file: ScenarioFile, default_plant: PlantOutputs) -> dict[str, ApfTrace]:
    """Both modes of the default scenario exactly as configured (hysteresis converter)."""
    return {m: run_apf(default_plant, default_file.apf_config(m)) for m in ("baseline", "emd_enhanced")}


@pytest.fixture(scope="session")
def ideal_traces(default_file: ScenarioFile, default_plant: PlantOutputs) -> dict[str, ApfTrace]:
    return {m: run_apf(default_plant, ideal(default_file, m)) for m in ("baseline", "emd_enhanced")}


@pytest.fixture(scope="session")
def clean_file() -> ScenarioFile:
    """Burst-free, harmonic-free scenario (linear lagging unbalanced loads)."""
    sc = ScenarioConfig(
        line1=Line1Spec(burst=BurstSpec(amplitude=0.0)),
        line3=Line3Spec(harmonics=()),
    )
    return ScenarioFile(scenario=sc)


@pytest.fixture(scope="session")
def clean_plant(clean_file: ScenarioFile) -> PlantOutputs:
    return synth_load_currents(clean_file.scenario)


@pytest.fixture()
def small_scenario_path(tmp_path: Path) -> Path:
    """Short, coarse scenario for CLI runs; the default burst still falls inside it."""
    p = tmp_path / "small.json"
    p.write_text(json.dumps({"scenario": {"duration": 0.12, "dt": 2e-5}}), encoding="utf-8")
    return p


@pytest.fixture()
def restore_root_logger():
    root = logging.getLogger()
    saved = (list(root.handlers), root.level)
    yield root
    for h in root.handlers:
        if h not in saved[0]:
            h.close()
    root.handlers[:] = saved[0]
    root.setLevel(saved[1])
