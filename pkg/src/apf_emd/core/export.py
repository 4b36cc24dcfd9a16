"""CSV rendering/reading and the generated gnuplot script.

Renderers return text; callers decide when to write, so a failed run can
avoid leaving partial output behind.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from apf_emd.core.apf import ApfTrace
from apf_emd.core.emd import Decomposition, ImfSummary
from apf_emd.core.errors import AlignmentError, DegenerateInputError
from apf_emd.core.metrics import DEFAULT_MAX_HARMONIC, ComparisonReport, CycleMetrics
from apf_emd.core.plant import PlantOutputs
from apf_emd.core.signal import TimeSeries

logger = logging.getLogger(__name__)

PLANT_COLUMNS = ("time", "v_r", "v_s", "v_t", "i_r", "i_s", "i_t", "i_n")

TRACE_COLUMNS = (
    "time",
    "load_r",
    "load_s",
    "load_t",
    "load_n",
    "ref_r",
    "ref_s",
    "ref_t",
    "inj_r",
    "inj_s",
    "inj_t",
    "inj_n",
    "src_r",
    "src_s",
    "src_t",
    "src_n",
    "p",
    "q",
    "p0",
    "s_r",
    "s_s",
    "s_t",
    "s_n",
    "settled",
    "p_load",
    "q_load",
    "ref_n",
)

METRICS_COLUMNS = (
    "cycle",
    "t_start",
    "settled",
    "p_mean",
    "q_mean",
    "apparent_power",
    "power_factor",
    "thd_r",
    "thd_s",
    "thd_t",
    "p_pp",
    "q_pp",
    "src_n_rms",
    "phase_rms_mean",
)

GRID_RTOL = 1e-9


def _fmt(x: float) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def render_csv(header: Sequence[str], columns: Sequence[np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*(c.tolist() for c in columns)):
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def render_rows(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([x if isinstance(x, str) else _fmt(x) for x in row])  # type: ignore[arg-type]
    return buf.getvalue()


def plant_csv(plant: PlantOutputs) -> str:
    v, i = plant.voltages, plant.load_currents
    return render_csv(PLANT_COLUMNS, [v.r.times, *v.stack(), *i.stack(), plant.neutral_current.samples])


def trace_csv(trace: ApfTrace) -> str:
    cols = [
        trace.load.r.times,
        *trace.load.stack(),
        trace.load_neutral.samples,
        *trace.reference.stack(),
        *trace.injected.stack(),
        trace.injected_neutral.samples,
        *trace.source.stack(),
        trace.source_neutral.samples,
        trace.p.samples,
        trace.q.samples,
        trace.p0.samples,
        *trace.switches,
        trace.settled,
        trace.p_load.samples,
        trace.q_load.samples,
        trace.reference_neutral.samples,
    ]
    return render_csv(TRACE_COLUMNS, cols)


def decomposition_csv(d: Decomposition) -> str:
    header = ["time", *(f"imf{c.index}" for c in d.imfs), "residue"]
    return render_csv(header, [d.residue.times, *(c.series.samples for c in d.imfs), d.residue.samples])


def power_csv(time: np.ndarray, p: np.ndarray, q: np.ndarray, p0: np.ndarray) -> str:
    return render_csv(("time", "p", "q", "p0"), [time, p, q, p0])


def _metrics_row(r: CycleMetrics) -> list[object]:
    return [
        r.cycle_index,
        r.t_start,
        r.settled,
        r.p_mean,
        r.q_mean,
        r.apparent_power,
        r.power_factor,
        *r.thd_per_phase,
        r.p_peak_to_peak,
        r.q_peak_to_peak,
        r.source_neutral_rms,
        r.phase_rms_mean,
    ]


def metrics_csv(rows: list[CycleMetrics]) -> str:
    return render_rows(METRICS_COLUMNS, (_metrics_row(r) for r in rows))


def compare_csv(report: ComparisonReport) -> str:
    rows = [["baseline", *_metrics_row(r)] for r in report.baseline]
    rows += [["emd_enhanced", *_metrics_row(r)] for r in report.enhanced]
    return render_rows(("mode", *METRICS_COLUMNS), rows)


def compare_summary(report: ComparisonReport) -> str:
    return "\n".join(report.summary_lines()) + f"\nthd truncated at harmonic {DEFAULT_MAX_HARMONIC}\n"


def decompose_summary(x: TimeSeries, d: Decomposition, summary: list[ImfSummary], recon_error: float) -> str:
    lines = [
        f"samples: {len(x)}",
        f"dt: {x.dt:.12g}",
        f"imfs: {len(d.imfs)}",
        f"unconverged_imfs: {sum(not s.converged for s in summary)}",
        f"reconstruction_error: {recon_error:.3e}",
        f"reconstruction_error_relative: {recon_error / x.peak if x.peak > 0 else 0.0:.3e}",
    ]
    for s in summary:
        lines.append(
            f"imf{s.index}: mean_frequency_hz={s.mean_frequency_hz:.6g} energy={s.energy:.6g} "
            f"zero_crossings={s.zero_crossings} extrema={s.extrema} "
            f"sifts={s.sifts} converged={'yes' if s.converged else 'no'}"
        )
    return "\n".join(lines) + "\n"


def read_series_csv(path: Path) -> TimeSeries:
    """Read a ``time,value`` CSV (header optional) on a uniform grid."""
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DegenerateInputError(f"{path} is not UTF-8 text") from e
    times: list[float] = []
    values: list[float] = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise DegenerateInputError(f"{path}:{lineno}: expected time,value")
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError:
            if lineno == 1 and not times:
                continue
            raise DegenerateInputError(f"{path}:{lineno}: not a number: {row[:2]!r}") from None
        times.append(t)
        values.append(v)

    if len(times) < 2:
        raise DegenerateInputError(f"{path}: need at least 2 samples, got {len(times)}")
    t_arr = np.asarray(times)
    steps = np.diff(t_arr)
    dt = float(steps.mean())
    if dt <= 0.0 or np.max(np.abs(steps - dt)) > GRID_RTOL * max(abs(dt), float(np.max(np.abs(t_arr)))):
        raise AlignmentError(f"{path}: time column is not a uniform grid")
    logger.info("read %s samples=%s dt=%.6g", path, len(values), dt)
    return TimeSeries(np.asarray(values), dt, float(t_arr[0]))


def _col(name: str) -> int:
    return TRACE_COLUMNS.index(name) + 1


def gnuplot_script(baseline_csv: str, enhanced_csv: str, baseline_metrics: str, enhanced_metrics: str) -> str:
    """gnuplot commands laying out both modes side by side: currents, p, q, PF, THD."""
    t = _col("time")
    panels = [
        ("source currents (A)", [("src_r", "r"), ("src_s", "s"), ("src_t", "t"), ("src_n", "n")]),
        ("p (W)", [("p", "p")]),
        ("q (var)", [("q", "q")]),
    ]
    out = [
        "# gnuplot script; run from this directory: gnuplot -p compare.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 1400,1600",
        "set output 'compare.png'",
        "set multiplot layout 5,2 columnsfirst",
    ]
    for label, data, metrics in (("baseline", baseline_csv, baseline_metrics), ("emd_enhanced", enhanced_csv, enhanced_metrics)):
        for title, cols in panels:
            plots = ", ".join(f"'{data}' using {t}:{_col(c)} with lines title '{lt}'" for c, lt in cols)
            out.append(f"set title '{label}: {title}'")
            out.append(f"plot {plots}")
        pf = METRICS_COLUMNS.index("power_factor") + 1
        cyc = METRICS_COLUMNS.index("t_start") + 1
        out.append(f"set title '{label}: power factor per cycle'")
        out.append(f"plot '{metrics}' using {cyc}:{pf} with linespoints title 'PF'")
        thd = ", ".join(
            f"'{metrics}' using {cyc}:{METRICS_COLUMNS.index(c) + 1} with linespoints title '{c}'" for c in ("thd_r", "thd_s", "thd_t")
        )
        out.append(f"set title '{label}: THD per cycle'")
        out.append(f"plot {thd}")
    out.append("unset multiplot")
    return "\n".join(out) + "\n"
