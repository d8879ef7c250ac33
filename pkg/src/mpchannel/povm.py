"""Informationally complete product measurements and dual-frame state estimates."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _accel
from .hamiltonian import PAULI, PauliHamiltonian
from .tensor import partial_trace

_PAULI_BASIS = np.array(
    [np.eye(2), [[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
) / np.sqrt(2)


def _to_real(ops: np.ndarray) -> np.ndarray:
    """Coordinates of 2x2 Hermitian operators in the normalized Pauli basis."""
    return np.real(np.einsum("kab,mba->km", ops, _PAULI_BASIS))


def _from_real(vecs: np.ndarray) -> np.ndarray:
    return np.einsum("km,mab->kab", vecs, _PAULI_BASIS)


@dataclass(frozen=True)
class QubitPovm:
    effects: np.ndarray  # (K, 2, 2)
    duals: np.ndarray  # (K, 2, 2)

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    @classmethod
    def from_effects(cls, effects) -> "QubitPovm":
        """Canonical duals from the pseudo-inverse of the frame operator."""
        effects = np.asarray(effects, dtype=complex)
        if np.max(np.abs(effects.sum(axis=0) - np.eye(2))) > 1e-12:
            raise ValueError("effects do not sum to the identity")
        if any(np.linalg.eigvalsh(e).min() < -1e-12 for e in effects):
            raise ValueError("effects must be positive semidefinite")
        v = _to_real(effects)
        frame = v.T @ v
        duals = _from_real(v @ np.linalg.pinv(frame).T)
        return cls(effects, duals)


def pauli6_povm() -> QubitPovm:
    """Eigenprojectors of Z, X and Y, each weighted 1/3.

    Outcome order: |0>, |1>, |+>, |->, |+i>, |-i>.
    """
    # (I +- sigma) / 6 sums to the identity without round-off
    eye = np.eye(2, dtype=complex)
    effects = np.array([(eye + sign * PAULI[p]) / 6.0 for p in "ZXY" for sign in (1, -1)])
    return QubitPovm.from_effects(effects)


@dataclass
class ShotRecord:
    outcomes: np.ndarray  # (S, N) integer outcome indices
    n_outcomes: int = 6

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=np.int64)
        if self.outcomes.ndim != 2:
            raise ValueError("outcomes must be an S x N table")
        if self.outcomes.size and (self.outcomes.min() < 0 or self.outcomes.max() >= self.n_outcomes):
            raise ValueError(f"outcome indices must lie in [0, {self.n_outcomes - 1}]")

    @property
    def shots(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n(self) -> int:
        return self.outcomes.shape[1]

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct outcome strings as base-K codes with their counts."""
        codes = _accel.encode_outcomes(self.outcomes, self.n_outcomes)
        return np.unique(codes, return_counts=True)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shot"] + [f"q{q}" for q in range(self.n)])
            for s, row in enumerate(self.outcomes):
                w.writerow([s, *row.tolist()])

    @classmethod
    def from_csv(cls, path, n_outcomes: int = 6) -> "ShotRecord":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header[0] != "shot" or any(h != f"q{q}" for q, h in enumerate(header[1:])):
                raise ValueError(f"unexpected shot-file header {header}")
            rows = [list(map(int, row[1:])) for row in r if row]
        return cls(np.array(rows, dtype=np.int64).reshape(len(rows), len(header) - 1), n_outcomes)


@dataclass
class QuasiState:
    """Dual-frame estimate of a state; Hermitian with unit trace, not necessarily positive."""

    matrix: np.ndarray
    shots: int | None = None  # None for an exact (infinite-shot) state

    @property
    def n(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))

    def save(self, path) -> None:
        np.savez(path, n=self.n, shots=-1 if self.shots is None else self.shots, matrix=self.matrix)

    @classmethod
    def load(cls, path) -> "QuasiState":
        with np.load(path) as z:
            mat = z["matrix"]
            if mat.shape != (2 ** int(z["n"]),) * 2:
                raise ValueError("quasistate header does not match matrix size")
            shots = int(z["shots"])
        return cls(mat, None if shots < 0 else shots)


def outcome_probabilities(rho: np.ndarray, povm: QubitPovm) -> np.ndarray:
    """Exact joint law over all K^N outcome strings (flattened, qubit 0 most significant)."""
    n = int(round(np.log2(rho.shape[0])))
    t = rho.reshape((2,) * (2 * n))
    for q in range(n):
        # contract ket/bra leg of qubit q with E_k^T -> new outcome leg at the end
        t = np.tensordot(t, povm.effects, axes=([0, n - q], [2, 1]))
    return np.real(t).reshape(-1)


def sample_shots(rho: np.ndarray, povm: QubitPovm, shots: int, seed) -> ShotRecord:
    """Draw shots from the exact product-POVM law by sequential conditioning.

    Shots sharing a prefix are handled together: a multinomial draw splits
    them over the next qubit's outcomes using the conditional (unnormalized)
    state of the remaining qubits.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    rho = np.asarray(rho, dtype=complex)
    n = int(round(np.log2(rho.shape[0])))
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-10:
        raise ValueError("sampling needs a positive semidefinite state")
    rng = np.random.default_rng(seed)
    k = povm.n_outcomes
    nodes = [(0, rho / np.trace(rho).real, shots)]
    for q in range(n):
        nxt = []
        for code, sigma, count in nodes:
            m = 2 ** (n - q - 1)
            t = sigma.reshape(2, m, 2, m)
            red = np.einsum("aibi->ab", t)
            p = np.clip(np.real(np.einsum("kba,ab->k", povm.effects, red)), 0.0, None)
            p /= p.sum()
            split = rng.multinomial(count, p)
            for out in np.flatnonzero(split):
                child = np.einsum("ba,aibj->ij", povm.effects[out], t) if q < n - 1 else None
                if child is not None:
                    tr = np.trace(child).real
                    child = child / tr if tr > 0 else child
                nxt.append((code * k + int(out), child, int(split[out])))
        nodes = nxt
    codes = np.repeat([c for c, _, _ in nodes], [c for _, _, c in nodes])
    rng.shuffle(codes)
    return ShotRecord(_accel.decode_codes(codes, k, n), k)


def estimate_quasistate(record: ShotRecord, povm: QubitPovm) -> QuasiState:
    if record.shots == 0:
        raise ValueError("empty shot record")
    codes, counts = record.histogram()
    mat = _accel.dual_sum(codes, counts / record.shots, povm.duals, record.n)
    return QuasiState(0.5 * (mat + mat.conj().T), record.shots)


def quasistate_from_weights(weights: np.ndarray, povm: QubitPovm, n: int) -> np.ndarray:
    """Dual contraction with arbitrary weights per outcome string (e.g. exact probabilities)."""
    codes = np.flatnonzero(weights != 0)
    return _accel.dual_sum(codes, weights[codes], povm.duals, n)


def energy_estimate(q, h: PauliHamiltonian) -> float:
    mat = q.matrix if isinstance(q, QuasiState) else np.asarray(q)
    if mat.shape != (2**h.n, 2**h.n):
        raise ValueError(f"state of shape {mat.shape} does not match {h.n}-qubit Hamiltonian")
    val = h.expectation(mat)
    scale = max(1.0, float(np.sum(np.abs(h.coeffs))))
    if abs(val.imag) > 1e-10 * scale:
        raise ArithmeticError(f"energy has imaginary part {val.imag:.3e}; dual frame or state is not Hermitian")
    return float(val.real)


def single_qubit_marginal(rho: np.ndarray, q: int, n: int) -> np.ndarray:
    return partial_trace(rho, [q], n)
