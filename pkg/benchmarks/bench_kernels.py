"""Compare the compiled and numpy kernel backends.

Times one loss/gradient evaluation and a full 500-epoch fit on synthetic
data of a few sizes, and checks that both backends produce the same numbers.

    python3 benchmarks/bench_kernels.py [--sizes 200x6 2000x29] [--repeat 5] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import csv
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from chi import kernels
from chi.dataset import prepare
from chi.synth import SynthSpec, generate

FIT_SNIPPET = """
import time, sys
from chi.synth import SynthSpec, generate
from chi.training import fit, TrainOptions
ds, truth = generate(SynthSpec(n_cvs={L}, n_rows={N}, noise_sigma=0.02, seed=0))
t = time.perf_counter()
model, trace = fit(ds, truth.schema, TrainOptions())
print(time.perf_counter() - t, trace.best_mse)
"""


def parse_size(text: str) -> tuple[int, int]:
    n, _, l = text.partition("x")
    return int(n), int(l)


def time_loss_grad(X, O, plan, backend, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        kernels.loss_grad(X, O, plan, 1e-3, backend=backend)
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def time_fit(n: int, l: int, pure: bool) -> tuple[float, float]:
    # a fresh interpreter, since the backend is chosen at import time
    env = dict(os.environ, CHI_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(N=n, L=l)], env=env,
                         capture_output=True, text=True, check=True)
    secs, mse = out.stdout.split()
    return float(secs), float(mse)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", default=["200x6", "1000x12", "2000x29"], metavar="NxL")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-fit", action="store_true", help="skip the full training runs")
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args(argv)

    if "cython" not in kernels.available_backends():
        print("compiled extension not built; nothing to compare against", file=sys.stderr)
        return 1
    cy, py = kernels.get_backend("cython"), kernels.get_backend("python")

    rows = []
    for size in args.sizes:
        n, l = parse_size(size)
        ds, truth = generate(SynthSpec(n_cvs=l, n_rows=n, noise_sigma=0.02, seed=0))
        norm, _ = prepare(ds, truth.schema)
        plan = truth.plan()
        X, O = np.ascontiguousarray(norm.values), np.ascontiguousarray(norm.observed)

        a = kernels.loss_grad(X, O, plan, 1e-3, backend=cy)
        b = kernels.loss_grad(X, O, plan, 1e-3, backend=py)
        diff = max(float(np.max(np.abs(x - y))) for x, y in zip(a[1:], b[1:]))
        t_cy = time_loss_grad(X, O, plan, cy, args.repeat)
        t_py = time_loss_grad(X, O, plan, py, args.repeat)
        row = {"size": size, "grad_cython_ms": t_cy * 1e3, "grad_python_ms": t_py * 1e3,
               "grad_speedup": t_py / t_cy, "max_abs_diff": diff}
        if not args.no_fit:
            f_cy, m_cy = time_fit(n, l, pure=False)
            f_py, m_py = time_fit(n, l, pure=True)
            row.update(fit_cython_s=f_cy, fit_python_s=f_py, fit_speedup=f_py / f_cy,
                       mse_rel_diff=abs(m_cy - m_py) / max(m_cy, 1e-300))
        rows.append(row)

    keys = list(rows[0])
    print("  ".join(f"{k:>14}" for k in keys))
    for row in rows:
        print("  ".join(f"{row[k]:>14}" if isinstance(row[k], str) else f"{row[k]:>14.4g}" for k in keys))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
