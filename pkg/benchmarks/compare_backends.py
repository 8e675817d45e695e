#!/usr/bin/env python3
"""Benchmark the compiled kernel against the pure NumPy fallback.

Integrates three representative fields with both backends and reports
wall time per trajectory plus the speedup.  Results also sanity-check
that the two backends agree on the final state.

Usage: python benchmarks/compare_backends.py [--t-end T] [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from torusdrift import (
    CurrentField,
    Diffeomorphism,
    DirectionField,
    MatrixField,
    OneDField,
    RectifiedField,
    ScalarField,
)
from torusdrift._kernels import available_backends


def cases():
    a1 = ScalarField(1, [((1,), 0.0, 1.0)], const=2.0)
    a2 = ScalarField(2, [((1, 1), 0.0, 0.5), ((1, -1), 0.0, 0.5)], const=2.0)
    xi = np.array([1.0, math.sqrt(2.0)])
    xi /= np.linalg.norm(xi)
    phi = Diffeomorphism(
        np.array([[1, 1], [0, 1]]),
        [ScalarField(2, [((0, 1), 0.0, 0.05)]),
         ScalarField(2, [((1, 0), 0.0, 0.05)])])
    v = ScalarField(2, [((1, 1), 1 / (4 * math.pi), 0.0),
                        ((1, -1), 1 / (4 * math.pi), 0.0)])
    return [
        ("oned 2+sin", OneDField(a1), np.array([0.0])),
        ("direction 2d irrational", DirectionField(a2, xi), np.array([0.1, 0.2])),
        ("rectified shear", RectifiedField(ScalarField(2, [((1, 0), 0.0, 1.0)],
                                                       const=2.0),
                                           [1.0, 0.0], phi),
         np.array([0.1, 0.2])),
        ("current grad v", CurrentField(MatrixField.isotropic(2, 1.0), v),
         np.array([0.1, 0.05])),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=100.0)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("note: compiled backend unavailable; timing pure python only")

    sample_ts = np.linspace(0.0, args.t_end, 1001)
    print(f"t_end={args.t_end:g}, rtol=1e-10, atol=1e-12, best of "
          f"{args.repeats} repeats\n")
    header = f"{'case':28s}" + "".join(f"{n:>14s}" for n in backends)
    print(header + f"{'speedup':>10s}" if len(backends) > 1 else header)
    for label, spec, x0 in cases():
        packed = spec.pack()
        times = {}
        finals = {}
        for name, mod in backends.items():
            best = math.inf
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                out, status, *_ = mod.rk45_integrate(
                    packed, x0, args.t_end, 1e-10, 1e-12, sample_ts)
                best = min(best, time.perf_counter() - t0)
            times[name] = best
            finals[name] = out[-1]
        row = f"{label:28s}" + "".join(f"{times[n]*1e3:>12.1f}ms"
                                       for n in backends)
        if len(backends) > 1:
            row += f"{times['python'] / times['cython']:>9.1f}x"
            agree = float(np.max(np.abs(finals['python'] - finals['cython'])))
            row += f"   (|diff|={agree:.1e})"
        print(row)


if __name__ == "__main__":
    main()
