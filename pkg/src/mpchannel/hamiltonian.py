"""Pauli-sum Hamiltonians: parsing, dense rendering and MPO construction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .tensor import svd_split

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
MAX_DENSE_QUBITS = 12


class HamiltonianFormatError(ValueError):
    pass


def pauli_masks(label: str) -> tuple[int, int, int]:
    """(x-mask, z-mask, #Y) with qubit 0 as the most significant bit."""
    n = len(label)
    x = z = ny = 0
    for q, c in enumerate(label):
        bit = 1 << (n - 1 - q)
        if c in "XY":
            x |= bit
        if c in "ZY":
            z |= bit
        if c == "Y":
            ny += 1
    return x, z, ny


@dataclass(frozen=True)
class PauliHamiltonian:
    n: int
    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        seen = set()
        for coeff, label in self.terms:
            if len(label) != self.n or set(label) - set("IXYZ"):
                raise HamiltonianFormatError(f"bad Pauli string {label!r} for n={self.n}")
            if label in seen:
                raise HamiltonianFormatError(f"duplicate Pauli string {label!r}")
            seen.add(label)
            if not np.isreal(coeff):
                raise HamiltonianFormatError("coefficients must be real")

    @classmethod
    def from_terms(cls, terms, n: int | None = None) -> "PauliHamiltonian":
        """Canonicalize: merge duplicates, drop exact zeros, sort by label."""
        acc: dict[str, float] = {}
        for coeff, label in terms:
            label = label.upper()
            acc[label] = acc.get(label, 0.0) + float(coeff)
        if n is None:
            lengths = {len(lbl) for lbl in acc}
            if len(lengths) != 1:
                raise HamiltonianFormatError("Pauli strings have inconsistent lengths")
            n = lengths.pop()
        merged = tuple((c, lbl) for lbl, c in sorted(acc.items()) if c != 0.0)
        return cls(n, merged)

    @property
    def labels(self) -> list[str]:
        return [lbl for _, lbl in self.terms]

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    def identity_coefficient(self) -> float:
        for c, lbl in self.terms:
            if set(lbl) == {"I"}:
                return c
        return 0.0

    def site_operators(self) -> np.ndarray:
        """Array (n_terms, n, 2, 2) of the single-qubit Pauli factors."""
        ops = np.empty((len(self.terms), self.n, 2, 2), dtype=complex)
        for t, (_, lbl) in enumerate(self.terms):
            for q, c in enumerate(lbl):
                ops[t, q] = PAULI[c]
        return ops

    def expectation(self, rho: np.ndarray) -> complex:
        """tr[rho H] computed term by term (no dense H)."""
        total = 0j
        for coeff, lbl in self.terms:
            total += coeff * _accel.pauli_expectation(rho, *pauli_masks(lbl))
        return total


def parse(text: str) -> PauliHamiltonian:
    """Parse ``coefficient pauli_string`` lines; ``#`` starts a comment."""
    terms = []
    n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise HamiltonianFormatError(f"line {lineno}: expected 'coefficient pauli_string', got {raw!r}")
        try:
            coeff = float(parts[0])
        except ValueError:
            raise HamiltonianFormatError(f"line {lineno}: malformed coefficient {parts[0]!r}") from None
        if not np.isfinite(coeff):
            raise HamiltonianFormatError(f"line {lineno}: non-finite coefficient")
        label = parts[1].upper()
        if set(label) - set("IXYZ"):
            raise HamiltonianFormatError(f"line {lineno}: invalid characters in {parts[1]!r}")
        if n is None:
            n = len(label)
        elif len(label) != n:
            raise HamiltonianFormatError(f"line {lineno}: string length {len(label)} differs from {n}")
        terms.append((coeff, label))
    if n is None:
        raise HamiltonianFormatError("no terms found")
    return PauliHamiltonian.from_terms(terms, n)


def load(path) -> PauliHamiltonian:
    with open(path) as fh:
        return parse(fh.read())


def serialize(h: PauliHamiltonian) -> str:
    return "".join(f"{c!r} {lbl}\n" for c, lbl in h.terms)


def dense(h: PauliHamiltonian) -> np.ndarray:
    if h.n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense rendering limited to {MAX_DENSE_QUBITS} qubits (got {h.n})")
    out = np.zeros((2**h.n, 2**h.n), dtype=complex)
    for coeff, lbl in h.terms:
        _accel.add_pauli_dense(out, h.n, *pauli_masks(lbl), coeff)
    return out


# --------------------------------------------------------------------------
# generators for the shipped fixtures


def tfim(n: int, j: float = 1.0, h: float = 1.0) -> PauliHamiltonian:
    """Open-chain transverse-field Ising model  -J sum ZZ - h sum X."""
    terms = []
    for q in range(n - 1):
        terms.append((-j, "I" * q + "ZZ" + "I" * (n - q - 2)))
    for q in range(n):
        terms.append((-h, "I" * q + "X" + "I" * (n - q - 1)))
    return PauliHamiltonian.from_terms(terms, n)


def heisenberg(n: int, j: float = 1.0, field: float = 0.0) -> PauliHamiltonian:
    """Open-chain XXX model  J sum (XX + YY + ZZ) + field * sum Z."""
    terms = []
    for q in range(n - 1):
        for p in "XYZ":
            terms.append((j, "I" * q + p + p + "I" * (n - q - 2)))
    if field:
        for q in range(n):
            terms.append((field, "I" * q + "Z" + "I" * (n - q - 1)))
    return PauliHamiltonian.from_terms(terms, n)


def z_field(n: int) -> PauliHamiltonian:
    return PauliHamiltonian.from_terms([(1.0, "I" * q + "Z" + "I" * (n - q - 1)) for q in range(n)], n)


# --------------------------------------------------------------------------
# MPO


@dataclass
class HamiltonianMpo:
    """Site tensors with legs (bond_in, ket, bra, bond_out)."""

    tensors: list[np.ndarray] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0][0]  # (ket, bra, bond)
        for w in self.tensors[1:]:
            out = np.einsum("abx,xcdy->acbdy", out, w)
            s = out.shape
            out = out.reshape(s[0] * s[1], s[2] * s[3], s[4])
        return out[:, :, 0]


def _mpo_add(a: list[np.ndarray], b: list[np.ndarray]) -> list[np.ndarray]:
    n = len(a)
    if n == 1:
        return [a[0] + b[0]]
    out = []
    for q, (x, y) in enumerate(zip(a, b)):
        if q == 0:
            out.append(np.concatenate([x, y], axis=3))
        elif q == n - 1:
            out.append(np.concatenate([x, y], axis=0))
        else:
            z = np.zeros((x.shape[0] + y.shape[0], 2, 2, x.shape[3] + y.shape[3]), dtype=complex)
            z[: x.shape[0], :, :, : x.shape[3]] = x
            z[x.shape[0]:, :, :, x.shape[3]:] = y
            out.append(z)
    return out


def _mpo_compress(ws: list[np.ndarray], tol: float) -> list[np.ndarray]:
    n = len(ws)
    if n == 1:
        return ws
    ws = [w.copy() for w in ws]
    # left-orthogonalize
    for q in range(n - 1):
        a, p, pp, b = ws[q].shape
        qm, r = np.linalg.qr(ws[q].reshape(a * p * pp, b))
        ws[q] = qm.reshape(a, p, pp, -1)
        ws[q + 1] = np.einsum("xb,bcdy->xcdy", r, ws[q + 1])
    # right sweep with truncation; per-bond budget keeps total error <= tol * ||H||
    per_bond = tol / max(1, n - 1)
    for q in range(n - 1, 0, -1):
        a, p, pp, b = ws[q].shape
        u, s, vh = svd_split(ws[q].reshape(a, p * pp * b), rel_tol=per_bond)
        ws[q] = vh.reshape(-1, p, pp, b)
        ws[q - 1] = np.einsum("xcdb,by->xcdy", ws[q - 1], u * s)
    return ws


def term_mpo(coeff: float, label: str) -> list[np.ndarray]:
    ws = [PAULI[c].reshape(1, 2, 2, 1).astype(complex) for c in label]
    ws[0] = ws[0] * coeff
    return ws


def to_mpo(h: PauliHamiltonian, tol: float = 1e-12) -> HamiltonianMpo:
    """Sum of rank-1 term MPOs, compressed after every addition."""
    if not h.terms:
        return HamiltonianMpo([np.zeros((1, 2, 2, 1), dtype=complex) for _ in range(h.n)])
    acc = None
    for coeff, label in h.terms:
        t = term_mpo(coeff, label)
        acc = t if acc is None else _mpo_compress(_mpo_add(acc, t), tol)
    return HamiltonianMpo(acc)
