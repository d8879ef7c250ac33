"""Hot loops with a numba path and a pure-numpy path.

Set ``MPCHANNEL_DISABLE_NUMBA=1`` (or call :func:`set_backend`) to force the
numpy implementations. Both paths compute the same quantities and are checked
against each other in the test-suite. ``dual_sum`` has a numpy path only.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

_USE_NUMBA = _HAVE_NUMBA and os.environ.get("MPCHANNEL_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")


def numba_enabled() -> bool:
    return _USE_NUMBA


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` for subsequent kernel calls."""
    global _USE_NUMBA
    if name == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _USE_NUMBA = True
    elif name == "numpy":
        _USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def _njit(fn):
    if _HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# --------------------------------------------------------------------------
# outcome strings -> integer codes (base K, qubit 0 most significant)


@_njit
def _encode_nb(outcomes, k):
    s, n = outcomes.shape
    codes = np.empty(s, dtype=np.int64)
    for a in range(s):
        c = 0
        for q in range(n):
            c = c * k + outcomes[a, q]
        codes[a] = c
    return codes


def _encode_np(outcomes, k):
    n = outcomes.shape[1]
    weights = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return outcomes.astype(np.int64) @ weights


def encode_outcomes(outcomes: np.ndarray, k: int) -> np.ndarray:
    outcomes = np.ascontiguousarray(outcomes, dtype=np.int64)
    if _USE_NUMBA:
        return _encode_nb(outcomes, k)
    return _encode_np(outcomes, k)


def decode_codes(codes: np.ndarray, k: int, n: int) -> np.ndarray:
    out = np.empty((len(codes), n), dtype=np.int64)
    c = np.array(codes, dtype=np.int64)
    for q in range(n - 1, -1, -1):
        out[:, q] = c % k
        c //= k
    return out


# --------------------------------------------------------------------------
# sum_s count_s * kron(D[k_s0], ..., D[k_s,n-1])
# numpy only: the prefix-tree reduction is already vectorized, and a per-string
# loop under numba costs O(4^n) per distinct string


def _dual_sum_np(codes, weights, duals, n):
    # bottom-up over qubits: group strings by prefix, kron the next dual in front
    k = duals.shape[0]
    order = np.argsort(codes, kind="stable")
    codes = codes[order]
    blocks = weights[order].astype(complex)[:, None, None]
    for q in range(n - 1, -1, -1):
        digit = codes % k
        parent = codes // k
        blk = np.einsum("sab,scd->sacbd", duals[digit], blocks)
        m = blk.shape[1] * blk.shape[2]
        blk = blk.reshape(len(codes), m, m)
        starts = np.flatnonzero(np.r_[True, parent[1:] != parent[:-1]])
        blocks = np.add.reduceat(blk, starts, axis=0)
        codes = parent[starts]
    return blocks[0]


def dual_sum(codes: np.ndarray, weights: np.ndarray, duals: np.ndarray, n: int) -> np.ndarray:
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    duals = np.ascontiguousarray(duals, dtype=np.complex128)
    if len(codes) == 0:
        raise ValueError("no outcome strings to contract")
    return _dual_sum_np(codes, weights, duals, n)


# --------------------------------------------------------------------------
# Pauli strings in (x-mask, z-mask, #Y) form; qubit 0 is the most significant bit


@_njit
def _pauli_expect_nb(rho, xmask, zmask, ny):
    dim = rho.shape[0]
    acc = 0j
    for b in range(dim):
        par = 0
        v = b & zmask
        while v:
            par ^= 1
            v &= v - 1
        term = rho[b, b ^ xmask]
        if par:
            acc -= term
        else:
            acc += term
    return acc * (1j ** (ny % 4))


def _parity(v):
    v = v.copy()
    p = np.zeros_like(v)
    while np.any(v):
        p ^= v & 1
        v >>= 1
    return p


def _pauli_expect_np(rho, xmask, zmask, ny):
    b = np.arange(rho.shape[0], dtype=np.int64)
    sign = 1 - 2 * _parity(b & zmask)
    return np.sum(rho[b, b ^ xmask] * sign) * (1j ** (ny % 4))


def pauli_expectation(rho: np.ndarray, xmask: int, zmask: int, ny: int) -> complex:
    """tr[rho P] for the Pauli string P encoded by masks."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if _USE_NUMBA:
        return complex(_pauli_expect_nb(rho, np.int64(xmask), np.int64(zmask), np.int64(ny)))
    return complex(_pauli_expect_np(rho, int(xmask), int(zmask), int(ny)))


@_njit
def _pauli_dense_nb(n, xmask, zmask, ny, coeff, out):
    dim = 1 << n
    ph = coeff * (1j ** (ny % 4))
    for b in range(dim):
        par = 0
        v = b & zmask
        while v:
            par ^= 1
            v &= v - 1
        if par:
            out[b ^ xmask, b] -= ph
        else:
            out[b ^ xmask, b] += ph


def add_pauli_dense(out: np.ndarray, n: int, xmask: int, zmask: int, ny: int, coeff: float) -> None:
    """In-place ``out += coeff * P`` for the dense 2^n x 2^n Pauli string P."""
    if _USE_NUMBA:
        _pauli_dense_nb(np.int64(n), np.int64(xmask), np.int64(zmask), np.int64(ny), complex(coeff), out)
        return
    b = np.arange(1 << n, dtype=np.int64)
    sign = 1 - 2 * _parity(b & zmask)
    np.add.at(out, (b ^ xmask, b), coeff * (1j ** (ny % 4)) * sign)
