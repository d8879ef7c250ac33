"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once per backend before timing so JIT compilation is excluded.
"""

import argparse
import timeit

import numpy as np

from mpchannel import _accel
from mpchannel.hamiltonian import pauli_masks
from mpchannel.tensor import random_density


def cases(rng):
    outcomes = rng.integers(0, 6, size=(200_000, 6))
    rho = random_density(2**10, rng)
    masks = pauli_masks("XYZZXYIZXY")
    dense = np.zeros((2**10, 2**10), dtype=complex)
    return {
        "encode_outcomes (2e5 shots, 6 qubits)": lambda: _accel.encode_outcomes(outcomes, 6),
        "pauli_expectation (10 qubits)": lambda: _accel.pauli_expectation(rho, *masks),
        "add_pauli_dense (10 qubits)": lambda: _accel.add_pauli_dense(dense, 10, *masks, 0.5),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if not _accel._HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    work = cases(rng)
    print(f"{'kernel':42s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, fn in work.items():
        times = {}
        for backend in ("numba", "numpy"):
            _accel.set_backend(backend)
            fn()  # warm-up / compile
            times[backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:42s} {times['numba']:11.2f} {times['numpy']:11.2f} {times['numpy'] / times['numba']:7.1f}x")
    _accel.set_backend("numba")


if __name__ == "__main__":
    main()
