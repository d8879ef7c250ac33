"""Classical references: exact diagonalization, fixed-bond DMRG, entanglement entropies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import PauliHamiltonian, dense, to_mpo

MAX_EXACT_QUBITS = 10


@dataclass
class EntanglementProfile:
    cuts: list[float]  # bits, cut k separates qubits [0, k) from [k, N)
    per_qubit: list[float]

    @property
    def s_ent(self) -> float:
        return max(self.cuts) if self.cuts else 0.0

    @property
    def effective_bond(self) -> float:
        return 2.0**self.s_ent


@dataclass
class GroundReference:
    energy: float
    vector: np.ndarray
    multiplicity: int
    entropy: EntanglementProfile


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 1e-15]
    return max(0.0, float(-np.sum(p * np.log2(p))))


def entanglement_entropy(v: np.ndarray, n: int | None = None, d: int = 2) -> EntanglementProfile:
    v = np.asarray(v, dtype=complex).ravel()
    if n is None:
        n = int(round(np.log(v.size) / np.log(d)))
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise ValueError("state vector must be normalized")
    cuts = []
    for k in range(1, n):
        s = np.linalg.svd(v.reshape(d**k, -1), compute_uv=False)
        cuts.append(_entropy_bits(s**2))
    per_qubit = []
    t = v.reshape((d,) * n)
    for q in range(n):
        m = np.moveaxis(t, q, 0).reshape(d, -1)
        per_qubit.append(_entropy_bits(np.linalg.eigvalsh(m @ m.conj().T)))
    return EntanglementProfile(cuts, per_qubit)


def exact_ground(h: PauliHamiltonian, degeneracy_tol: float = 1e-9) -> GroundReference:
    if h.n > MAX_EXACT_QUBITS:
        raise ValueError(f"exact diagonalization limited to {MAX_EXACT_QUBITS} qubits")
    w, u = np.linalg.eigh(dense(h))
    e0 = float(w[0])
    mult = int(np.sum(w - e0 <= degeneracy_tol * max(1.0, abs(e0))))
    vec = u[:, 0]
    return GroundReference(e0, vec, mult, entanglement_entropy(vec, h.n))


# --------------------------------------------------------------------------
# single-site DMRG


@dataclass
class MpsState:
    tensors: list[np.ndarray]  # (left, phys, right)
    center: int = 0  # orthogonality center; sites left of it are left-, right of it right-canonical

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bonds(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def to_vector(self) -> np.ndarray:
        v = self.tensors[0]
        for t in self.tensors[1:]:
            v = np.tensordot(v, t, axes=(-1, 0))
        return v.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_vector()))


@dataclass
class DmrgResult:
    mps: MpsState
    energy: float
    history: list[float] = field(default_factory=list)  # energy after every site update


def _bond_dims(n: int, r: int, d: int) -> list[int]:
    return [1] + [min(r, d**k, d ** (n - k)) for k in range(1, n)] + [1]


def _left_step(env, a, w):
    # env (l_bra, w, l_ket); returns (r_bra, v, r_ket)
    return np.einsum("awb,asr,wstv,btq->rvq", env, a.conj(), w, a, optimize=True)


def _right_step(env, a, w):
    return np.einsum("rvq,asr,wstv,btq->awb", env, a.conj(), w, a, optimize=True)


def dmrg_ground(h: PauliHamiltonian, r: int, sweeps: int = 20, seed: int = 0, tol: float = 1e-12) -> DmrgResult:
    """Single-site DMRG with dense effective Hamiltonians at fixed bond ``r``."""
    ws = to_mpo(h).tensors
    n, d = h.n, 2
    rng = np.random.default_rng(seed)
    dims = _bond_dims(n, r, d)
    mps = [rng.normal(size=(dims[k], d, dims[k + 1])) + 1j * rng.normal(size=(dims[k], d, dims[k + 1]))
           for k in range(n)]
    # right-canonicalize
    for k in range(n - 1, 0, -1):
        a = mps[k]
        q, rr = np.linalg.qr(a.reshape(a.shape[0], -1).T)
        mps[k] = q.T.reshape(-1, d, a.shape[2])
        mps[k - 1] = np.tensordot(mps[k - 1], rr.T, axes=(2, 0))
    mps[0] /= np.linalg.norm(mps[0])
    left = [None] * (n + 1)
    right = [None] * (n + 1)
    left[0] = np.ones((1, 1, 1), dtype=complex)
    right[n] = np.ones((1, 1, 1), dtype=complex)
    for k in range(n - 1, -1, -1):
        right[k] = _right_step(right[k + 1], mps[k], ws[k])

    history: list[float] = []
    energy = np.inf

    def local_solve(k):
        heff = np.einsum("awb,wstv,rvq->asrbtq", left[k], ws[k], right[k + 1], optimize=True)
        dim = mps[k].size
        heff = heff.reshape(dim, dim)
        heff = 0.5 * (heff + heff.conj().T)
        evals, evecs = np.linalg.eigh(heff)
        mps[k] = evecs[:, 0].reshape(mps[k].shape)
        history.append(float(evals[0]))
        return float(evals[0])

    for _ in range(sweeps):
        prev = energy
        for k in range(n - 1):
            energy = local_solve(k)
            a = mps[k]
            q, rr = np.linalg.qr(a.reshape(-1, a.shape[2]))
            mps[k] = q.reshape(a.shape[0], d, -1)
            mps[k + 1] = np.tensordot(rr, mps[k + 1], axes=(1, 0))
            left[k + 1] = _left_step(left[k], mps[k], ws[k])
        for k in range(n - 1, 0, -1):
            energy = local_solve(k)
            a = mps[k]
            q, rr = np.linalg.qr(a.reshape(a.shape[0], -1).T)
            mps[k] = q.T.reshape(-1, d, a.shape[2])
            mps[k - 1] = np.tensordot(mps[k - 1], rr.T, axes=(2, 0))
            right[k] = _right_step(right[k + 1], mps[k], ws[k])
        if n == 1:
            energy = local_solve(0)
        if abs(prev - energy) <= tol * max(1.0, abs(energy)):
            break
    return DmrgResult(MpsState(mps, center=0), energy, history)
