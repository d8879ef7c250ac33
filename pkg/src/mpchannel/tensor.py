"""Dense tensor helpers shared by every other module.

Tensors are plain ``numpy.ndarray`` objects of ``complex128``; legs are
addressed positionally.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10


class TensorShapeError(ValueError):
    """Raised when legs do not line up for a contraction or fusion."""


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over the paired legs ``(leg_of_a, leg_of_b)``.

    The free legs of ``a`` come first, followed by the free legs of ``b``,
    both in their original order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a, axes_b = [], []
    for la, lb in pairs:
        if not (-a.ndim <= la < a.ndim) or not (-b.ndim <= lb < b.ndim):
            raise TensorShapeError(f"leg pair ({la}, {lb}) out of range for ranks {a.ndim}, {b.ndim}")
        if a.shape[la] != b.shape[lb]:
            raise TensorShapeError(
                f"leg pair ({la}, {lb}) has mismatched dimensions {a.shape[la]} != {b.shape[lb]}"
            )
        axes_a.append(la % a.ndim)
        axes_b.append(lb % b.ndim)
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise TensorShapeError("a leg may appear in at most one pair")
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def permute_reshape(t: np.ndarray, order: Sequence[int], groups: Sequence[Sequence[int]] | None = None) -> np.ndarray:
    """Transpose ``t`` to ``order`` and fuse runs of adjacent legs.

    ``groups`` lists the positions (in the permuted tensor) of each output leg,
    e.g. ``[[0, 1], [2]]`` fuses the first two legs. Groups must cover every
    leg exactly once and each group must be a contiguous ascending run.
    """
    t = np.asarray(t)
    order = list(order)
    if sorted(order) != list(range(t.ndim)):
        raise TensorShapeError(f"order {order} is not a permutation of {t.ndim} legs")
    p = np.transpose(t, order)
    if groups is None:
        return p
    flat = [i for g in groups for i in g]
    if flat != list(range(p.ndim)):
        raise TensorShapeError(f"fusion groups {list(map(list, groups))} must cover adjacent legs in order")
    for g in groups:
        if len(g) == 0 or list(g) != list(range(g[0], g[0] + len(g))):
            raise TensorShapeError(f"fusion group {list(g)} fuses non-adjacent legs")
    shape = [int(np.prod([p.shape[i] for i in g])) for g in groups]
    return p.reshape(shape)


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def eigh_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a (numerically) Hermitian matrix.

    Returns ascending real eigenvalues and orthonormal eigenvector columns.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise TensorShapeError(f"eigh_hermitian needs a square matrix, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol * max(1.0, np.max(np.abs(m))):
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return np.linalg.eigh(hermitize(m))


def svd_split(m: np.ndarray, rel_tol: float = 0.0, max_rank: int | None = None):
    """Thin SVD ``m = U diag(s) Vh`` with optional truncation.

    Singular values are dropped from the tail while the discarded Frobenius
    weight stays below ``rel_tol * ||s||``. With ``rel_tol=0`` only exact
    zeros beyond the numerical rank are kept as-is (nothing is discarded).
    """
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = len(s)
    if rel_tol > 0 and len(s):
        total = np.linalg.norm(s)
        tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tail[k] = ||s[k:]||
        ok = np.nonzero(tail <= rel_tol * total)[0]
        if len(ok):
            keep = max(1, int(ok[0]))
    if max_rank is not None:
        keep = min(keep, max_rank)
    return u[:, :keep], s[:keep], vh[:keep]


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of n x n Hermitian matrices, shape (n*n, n, n)."""
    basis = np.zeros((n * n, n, n), dtype=complex)
    idx = 0
    for i in range(n):
        basis[idx, i, i] = 1.0
        idx += 1
    s = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            basis[idx, i, j] = basis[idx, j, i] = s
            idx += 1
            basis[idx, i, j] = -1j * s
            basis[idx, j, i] = 1j * s
            idx += 1
    return basis


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return hermitize(a)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def partial_trace(rho: np.ndarray, keep: Sequence[int], n: int, d: int = 2) -> np.ndarray:
    """Reduced density matrix on the qubits in ``keep`` (big-endian ordering)."""
    keep = sorted(keep)
    t = rho.reshape((d,) * (2 * n))
    traced = [q for q in range(n) if q not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n]) if 2 * n <= 26 else None
    if bra is None:
        raise ValueError("partial_trace supports at most 13 sites")
    for q in traced:
        bra[q] = ket[q]
    out = "".join(ket[q] for q in keep) + "".join(bra[q] for q in keep)
    r = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
    dk = d ** len(keep)
    return r.reshape(dk, dk)
