"""Compare the numba and pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Each case first checks that both backends return the same result, then
reports the best-of-``repeat`` wall time per call.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from qrcmeas import kernels
from qrcmeas.reservoir import ANCILLA_ZERO_COLUMNS, ReservoirConfig, build_block_unitary


def trajectory_case(shots: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(shots, 4)) + 1j * rng.normal(size=(shots, 4))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    cols = np.ascontiguousarray(build_block_unitary(0.1, ReservoirConfig())[:, ANCILLA_ZERO_COLUMNS])
    draws = rng.random((shots, 3))
    return (psi, cols, 0.3, np.ascontiguousarray(draws[:, :2]), np.ascontiguousarray(draws[:, 2]))


def dtw_case(length: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=length), rng.normal(size=length)


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return bool(np.allclose(a, b, atol=1e-12))


def bench(name, impls, args, repeat):
    results = {k: f(*args) for k, f in impls.items()}  # also triggers compilation
    if not same(results["numba"], results["numpy"]):
        raise AssertionError(f"{name}: backends disagree")
    times = {k: min(timeit.repeat(lambda f=f: f(*args), number=1, repeat=repeat)) for k, f in impls.items()}
    return {"case": name, "numba_ms": 1e3 * times["numba"], "numpy_ms": 1e3 * times["numpy"], "speedup": times["numpy"] / times["numba"]}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--json", help="also write results to this file")
    args = parser.parse_args(argv)

    rows = []
    for shots in (1024, 8192, 65536):
        rows.append(bench(f"trajectory_step shots={shots}", kernels.IMPLEMENTATIONS["trajectory_step"], trajectory_case(shots), args.repeat))
    for length in (100, 1000):
        rows.append(bench(f"dtw length={length}", kernels.IMPLEMENTATIONS["dtw_distance"], dtw_case(length), args.repeat))

    print(f"{'case':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for r in rows:
        print(f"{r['case']:32s} {r['numba_ms']:10.3f} {r['numpy_ms']:10.3f} {r['speedup']:8.1f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
