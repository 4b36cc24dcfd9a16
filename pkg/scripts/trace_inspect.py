from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np

from apf_emd.core.export import TRACE_COLUMNS


def main() -> None:
    if len(sys.argv) != 2:
        print("usage: python scripts/trace_inspect.py <trace_*.csv>")
        raise SystemExit(2)
    path = Path(sys.argv[1])
    print("trace:", path)

    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        data = np.array([[float(x) for x in row] for row in reader])

    if tuple(header) != TRACE_COLUMNS:
        print("unexpected header:", header)
        raise SystemExit(2)

    col = {name: data[:, i] for i, name in enumerate(header)}
    settled = col["settled"] > 0.5
    print("samples:", data.shape[0], "settled:", int(settled.sum()))
    print("time span:", col["time"][0], "->", col["time"][-1])

    for leg in ("r", "s", "t"):
        err = np.abs(col[f"inj_{leg}"] - col[f"ref_{leg}"])[settled]
        print(f"leg {leg}: max |inj-ref|={err.max():.4g} rms src={np.sqrt(np.mean(col[f'src_{leg}'][settled] ** 2)):.4g}")
    err_n = np.abs(col["inj_n"] - col["ref_n"])[settled]
    print(f"leg n: max |inj-ref|={err_n.max():.4g}")

    print("src_n rms (settled):", f"{np.sqrt(np.mean(col['src_n'][settled] ** 2)):.4g}")
    for name in ("p", "q", "p_load", "q_load"):
        x = col[name][settled]
        print(f"{name}: mean={x.mean():.6g} peak-to-peak={np.ptp(x):.6g}")


if __name__ == "__main__":
    main()
