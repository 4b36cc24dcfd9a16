from __future__ import annotations

import argparse
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from apf_emd import __version__
from apf_emd.core.apf import ApfTrace, run_apf
from apf_emd.core.config import ApfMode, EmdConfig, ScenarioFile
from apf_emd.core.emd import decompose, imf_summary, reconstruct
from apf_emd.core.errors import ComputationError, ConfigError, DegenerateInputError, InputError
from apf_emd.core.export import (
    compare_csv,
    compare_summary,
    decompose_summary,
    decomposition_csv,
    gnuplot_script,
    metrics_csv,
    plant_csv,
    power_csv,
    read_series_csv,
    render_csv,
    trace_csv,
)
from apf_emd.core.logging_config import configure_logging, default_log_path
from apf_emd.core.metrics import compare, cycle_metrics, sliding_power_factor
from apf_emd.core.plant import synth_load_currents
from apf_emd.core.signal import PHASE_NAMES
from apf_emd.core.utils import atomic_write_text, sha256_text

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3
EXIT_IO = 4

MODE_CHOICES: dict[str, tuple[ApfMode, ...]] = {
    "baseline": ("baseline",),
    "emd": ("emd_enhanced",),
    "both": ("baseline", "emd_enhanced"),
}


@dataclass(frozen=True)
class RunManifest:
    command: str
    scenario_path: str | None
    modes: tuple[str, ...]
    out_dir: str
    # file name -> sha256 of its content
    files: dict[str, str] = field(default_factory=dict)
    config_echo: str | None = None
    resolved_config: dict[str, Any] | None = None
    tool_version: str = __version__
    fingerprint: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "scenario_path": self.scenario_path,
            "modes": list(self.modes),
            "out_dir": self.out_dir,
            "files": dict(sorted(self.files.items())),
            "config_echo": self.config_echo,
            "resolved_config": self.resolved_config,
            "tool_version": self.tool_version,
            "fingerprint": self.fingerprint,
        }


def _guarded(fn: Callable[[], int]) -> int:
    try:
        return fn()
    except InputError as e:
        logger.error("input error: %s", e)
        return EXIT_INPUT
    except ComputationError as e:
        logger.error("computation error: %s", e)
        return EXIT_COMPUTE
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO


def _load_scenario(scenario_file: Path | None) -> tuple[ScenarioFile, str | None]:
    if scenario_file is None:
        return ScenarioFile(), None
    sf = ScenarioFile.load(scenario_file)
    return sf, scenario_file.read_text(encoding="utf-8")


def _write_outputs(out_dir: Path, outputs: dict[str, str], manifest: RunManifest) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {name: sha256_text(text) for name, text in outputs.items()}
    manifest = replace(manifest, files=files)
    for name, text in outputs.items():
        atomic_write_text(out_dir / name, text)
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")
    logger.info("wrote %s files to %s", len(outputs) + 1, out_dir)


def _trace_outputs(trace: ApfTrace) -> dict[str, str]:
    mode = trace.mode
    out = {
        f"trace_{mode}.csv": trace_csv(trace),
        f"metrics_{mode}.csv": metrics_csv(cycle_metrics(trace)),
        f"power_{mode}.csv": power_csv(trace.load.r.times, trace.p.samples, trace.q.samples, trace.p0.samples),
    }
    pf = sliding_power_factor(trace.voltages, trace.source, trace.f0)
    out[f"pf_{mode}.csv"] = render_csv(("time", "pf"), [pf.times, pf.samples])
    for name, d in zip(PHASE_NAMES, trace.split.decompositions):
        if d is not None:
            out[f"emd_{name}.csv"] = decomposition_csv(d)
    return out


def cmd_run(scenario_file: Path | None, mode: str, out_dir: Path) -> int:
    def body() -> int:
        if mode not in MODE_CHOICES:
            raise ConfigError(f"unknown mode {mode!r}", key="mode")
        sf, echo = _load_scenario(scenario_file)
        plant = synth_load_currents(sf.scenario)
        outputs = {"plant.csv": plant_csv(plant)}
        for m in MODE_CHOICES[mode]:
            trace = run_apf(plant, sf.apf_config(m))
            outputs.update(_trace_outputs(trace))
        manifest = RunManifest(
            command="run",
            scenario_path=str(scenario_file) if scenario_file is not None else None,
            modes=MODE_CHOICES[mode],
            out_dir=str(out_dir),
            config_echo=echo,
            resolved_config=sf.to_json(),
            fingerprint=plant.fingerprint,
        )
        _write_outputs(out_dir, outputs, manifest)
        return EXIT_OK

    return _guarded(body)


def parse_stop(stop: str) -> tuple[str, float | None]:
    s = stop.strip().lower()
    if s == "monotone":
        return "monotone", None
    if s.startswith("f0="):
        try:
            f0 = float(s[3:])
        except ValueError as e:
            raise ConfigError(f"bad --stop value {stop!r}", key="stop") from e
        if f0 <= 0:
            raise ConfigError("--stop f0 must be positive", key="stop")
        return "fundamental_locked", f0
    raise ConfigError(f"--stop must be 'monotone' or 'f0=<hz>', got {stop!r}", key="stop")


def cmd_decompose(csv_in: Path, sd: float, stop: str, out_dir: Path) -> int:
    def body() -> int:
        stop_mode, f0 = parse_stop(stop)
        cfg = EmdConfig(sd_threshold=sd)
        if f0 is not None:
            cfg = EmdConfig.fundamental_locked(f0, sd_threshold=sd)
        x = read_series_csv(csv_in)
        try:
            d = decompose(x, cfg)
        except DegenerateInputError as e:
            raise ComputationError(f"decomposition degenerate: {e}") from e
        recon = reconstruct(d)
        err = float(np.max(np.abs(recon.samples - x.samples)))
        logger.info("decompose in=%s stop=%s imfs=%s reconstruction_error=%.3e", csv_in, stop_mode, len(d.imfs), err)
        outputs = {
            "decomposition.csv": decomposition_csv(d),
            "decompose_summary.txt": decompose_summary(x, d, imf_summary(d), err),
        }
        manifest = RunManifest(
            command="decompose",
            scenario_path=str(csv_in),
            modes=(stop_mode,),
            out_dir=str(out_dir),
            resolved_config={**cfg.__dict__},
            fingerprint=d.source_fingerprint,
        )
        _write_outputs(out_dir, outputs, manifest)
        return EXIT_OK

    return _guarded(body)


def cmd_compare(scenario_file: Path | None, out_dir: Path) -> int:
    def body() -> int:
        sf, echo = _load_scenario(scenario_file)
        plant = synth_load_currents(sf.scenario)
        with ThreadPoolExecutor(max_workers=2, thread_name_prefix="apf") as pool:
            base_f = pool.submit(run_apf, plant, sf.apf_config("baseline"))
            enh_f = pool.submit(run_apf, plant, sf.apf_config("emd_enhanced"))
            base, enh = base_f.result(), enh_f.result()
        report = compare(base, enh)

        outputs = {"plant.csv": plant_csv(plant)}
        outputs.update(_trace_outputs(base))
        outputs.update(_trace_outputs(enh))
        outputs["compare.csv"] = compare_csv(report)
        outputs["compare_summary.txt"] = compare_summary(report)
        outputs["compare.gp"] = gnuplot_script(
            "trace_baseline.csv", "trace_emd_enhanced.csv", "metrics_baseline.csv", "metrics_emd_enhanced.csv"
        )
        manifest = RunManifest(
            command="compare",
            scenario_path=str(scenario_file) if scenario_file is not None else None,
            modes=("baseline", "emd_enhanced"),
            out_dir=str(out_dir),
            config_echo=echo,
            resolved_config=sf.to_json(),
            fingerprint=plant.fingerprint,
        )
        _write_outputs(out_dir, outputs, manifest)
        return EXIT_OK

    return _guarded(body)


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apf-emd", description="EMD-enhanced shunt active power filter simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--log-file", type=str, default="", help="Log file path (defaults to the user log directory)")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Simulate a scenario and write plant/trace/metrics CSVs")
    run.add_argument("--scenario", type=str, default="", help="Scenario JSON (built-in default scenario if omitted)")
    run.add_argument("--mode", choices=sorted(MODE_CHOICES), default="emd")
    run.add_argument("--out", type=str, required=True, help="Output directory")

    dec = sub.add_parser("decompose", help="EMD of a time,value CSV")
    dec.add_argument("--in", dest="csv_in", type=str, required=True)
    dec.add_argument("--sd", type=float, default=0.25, help="SD stopping threshold in [0.2, 0.3]")
    dec.add_argument("--stop", type=str, default="monotone", help="'monotone' or 'f0=<hz>'")
    dec.add_argument("--out", type=str, required=True)

    cmp_ = sub.add_parser("compare", help="Run baseline and EMD-enhanced modes and compare them")
    cmp_.add_argument("--scenario", type=str, default="")
    cmp_.add_argument("--out", type=str, required=True)
    return p


def _setup_logging(level: str, log_file: str) -> None:
    path = Path(log_file) if log_file else default_log_path()
    try:
        configure_logging(level, path)
    except OSError as e:
        configure_logging(level, None)
        logger.warning("file logging disabled (%s)", e)


def main(argv: list[str] | None = None) -> None:
    args = build_arg_parser().parse_args(argv)
    _setup_logging(args.log_level, args.log_file)

    scenario = Path(args.scenario) if getattr(args, "scenario", "") else None
    if args.command == "run":
        code = cmd_run(scenario, args.mode, Path(args.out))
    elif args.command == "decompose":
        code = cmd_decompose(Path(args.csv_in), float(args.sd), str(args.stop), Path(args.out))
    else:
        code = cmd_compare(scenario, Path(args.out))
    raise SystemExit(code)


if __name__ == "__main__":
    main()
