"""Hardware-efficient ansatz circuits and their (noisy) dense simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import PAULI, PauliHamiltonian, dense

MAX_SIM_QUBITS = 10


@dataclass(frozen=True)
class Gate:
    name: str  # "RY", "RZ" or "CNOT"
    qubits: tuple[int, ...]
    angle: float = 0.0


@dataclass
class Circuit:
    n: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            _check_gate(g, self.n)

    def append(self, gate: Gate) -> None:
        _check_gate(gate, self.n)
        self.gates.append(gate)

    @property
    def n_cnot(self) -> int:
        return sum(g.name == "CNOT" for g in self.gates)

    @property
    def n_rotations(self) -> int:
        return sum(g.name in ("RY", "RZ") for g in self.gates)

    def to_text(self) -> str:
        lines = []
        for g in self.gates:
            if g.name == "CNOT":
                lines.append(f"CNOT {g.qubits[0]} {g.qubits[1]}")
            else:
                lines.append(f"{g.name} {g.qubits[0]} {g.angle!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n: int | None = None) -> "Circuit":
        gates = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            op = parts[0].upper()
            try:
                if op == "CNOT" and len(parts) == 3:
                    gates.append(Gate("CNOT", (int(parts[1]), int(parts[2]))))
                elif op in ("RY", "RZ") and len(parts) == 3:
                    gates.append(Gate(op, (int(parts[1]),), float(parts[2])))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"line {lineno}: cannot parse gate {raw!r}") from None
        if n is None:
            n = 1 + max((q for g in gates for q in g.qubits), default=0)
        return cls(n, gates)


def _check_gate(g: Gate, n: int) -> None:
    if g.name not in ("RY", "RZ", "CNOT"):
        raise ValueError(f"unknown gate {g.name}")
    if any(not (0 <= q < n) for q in g.qubits):
        raise ValueError(f"gate {g} acts outside qubits 0..{n - 1}")
    if g.name == "CNOT" and (len(g.qubits) != 2 or g.qubits[0] == g.qubits[1]):
        raise ValueError("CNOT needs distinct control and target")


@dataclass(frozen=True)
class NoiseSpec:
    sigma_coh: float = 0.0
    lam_low: float = 0.0
    lam_high: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_coh < 0 or self.lam_low < 0 or self.lam_high < self.lam_low:
            raise ValueError("need sigma_coh >= 0 and 0 <= lam_low <= lam_high")

    @classmethod
    def from_mean_range(cls, sigma_coh: float, mean: float, width: float, seed: int = 0) -> "NoiseSpec":
        return cls(sigma_coh, mean - width / 2, mean + width / 2, seed)


def n_parameters(n: int, layers: int) -> int:
    return 2 * n * (layers + 1)


def build_ansatz(n: int, layers: int, angles) -> Circuit:
    """Ry/Rz on every qubit, then ``layers`` x (CNOT chain + Ry/Rz on every qubit)."""
    angles = np.asarray(angles, dtype=float).ravel()
    need = n_parameters(n, layers)
    if angles.size != need:
        raise ValueError(f"ansatz with n={n}, layers={layers} needs {need} angles, got {angles.size}")
    gates = []
    it = iter(angles)
    for layer in range(layers + 1):
        if layer > 0:
            gates.extend(Gate("CNOT", (q, q + 1)) for q in range(n - 1))
        for q in range(n):
            gates.append(Gate("RY", (q,), float(next(it))))
            gates.append(Gate("RZ", (q,), float(next(it))))
    return Circuit(n, gates)


def rotation(axis: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return c * PAULI["I"] - 1j * s * PAULI[axis]


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


# --------------------------------------------------------------------------
# state-vector and density-matrix kernels (qubit 0 = most significant)


def apply_unitary_sv(psi: np.ndarray, u: np.ndarray, qubits, n: int) -> np.ndarray:
    k = len(qubits)
    t = psi.reshape((2,) * n)
    t = np.tensordot(u.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(-1)


def apply_unitary_dm(rho: np.ndarray, u: np.ndarray, qubits, n: int) -> np.ndarray:
    k = len(qubits)
    ur = u.reshape((2,) * (2 * k))
    t = rho.reshape((2,) * (2 * n))
    t = np.tensordot(ur, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    bra = [n + q for q in qubits]
    t = np.tensordot(t, ur.conj(), axes=(bra, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), bra)
    return t.reshape(rho.shape)


def apply_kraus_dm(rho: np.ndarray, kraus, qubits, n: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for a in kraus:
        out += apply_unitary_dm(rho, a, qubits, n)
    return out


def depolarize_pair(rho: np.ndarray, pair, n: int) -> np.ndarray:
    """I/4 on ``pair`` tensored with the partial trace of rho over ``pair``."""
    a, b = pair
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n])
    src_bra = list(bra)
    src_bra[a], src_bra[b] = ket[a], ket[b]
    out_ket, out_bra = list(ket), list(bra)
    out_ket[a], out_ket[b], out_bra[a], out_bra[b] = "W", "X", "Y", "Z"
    spec = "".join(ket + src_bra) + ",WY,XZ->" + "".join(out_ket + out_bra)
    eye = np.eye(2)
    t = np.einsum(spec, rho.reshape((2,) * (2 * n)), eye, eye) / 4.0
    return t.reshape(rho.shape)


def pauli_lindblad_channel(rho: np.ndarray, pair, lam: float, n: int | None = None) -> np.ndarray:
    """exp(L) with L(rho) = lam * sum_k (P_k rho P_k - rho) over the 16 two-qubit Paulis.

    Because sum_k P_k rho P_k = 4 * I (x) tr_pair(rho), the channel is the
    two-qubit depolarizing map exp(-16 lam) rho + (1 - exp(-16 lam)) I/4 (x) tr_pair(rho).
    """
    if n is None:
        n = int(round(math.log2(rho.shape[0])))
    a, b = pair
    if a == b or not (0 <= a < n and 0 <= b < n):
        raise ValueError(f"invalid qubit pair {pair} for n={n}")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam == 0:
        return rho.copy()
    keep = math.exp(-16.0 * lam)
    return keep * rho + (1.0 - keep) * depolarize_pair(rho, (a, b), n)


def statevector(circuit: Circuit) -> np.ndarray:
    if circuit.n > MAX_SIM_QUBITS:
        raise ValueError(f"dense simulation limited to {MAX_SIM_QUBITS} qubits")
    psi = np.zeros(2**circuit.n, dtype=complex)
    psi[0] = 1.0
    for g in circuit.gates:
        if g.name == "CNOT":
            psi = apply_unitary_sv(psi, CNOT, g.qubits, circuit.n)
        else:
            psi = apply_unitary_sv(psi, rotation(g.name[1].upper(), g.angle), g.qubits, circuit.n)
    return psi


def simulate(circuit: Circuit, noise: NoiseSpec | None = None) -> np.ndarray:
    """Density matrix at the circuit output.

    With noise, every rotation angle gets an independent N(0, sigma_coh^2)
    offset and every CNOT is followed by the Pauli-Lindblad channel with its
    own uniformly drawn rate. Draws happen in gate order from one generator.
    """
    n = circuit.n
    if n > MAX_SIM_QUBITS:
        raise ValueError(f"dense simulation limited to {MAX_SIM_QUBITS} qubits")
    if noise is None:
        psi = statevector(circuit)
        return np.outer(psi, psi.conj())
    rng = np.random.default_rng(noise.seed)
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    for g in circuit.gates:
        if g.name == "CNOT":
            rho = apply_unitary_dm(rho, CNOT, g.qubits, n)
            lam = rng.uniform(noise.lam_low, noise.lam_high) if noise.lam_high > noise.lam_low else noise.lam_low
            rho = pauli_lindblad_channel(rho, g.qubits, lam, n)
        else:
            theta = g.angle + (rng.normal(0.0, noise.sigma_coh) if noise.sigma_coh > 0 else 0.0)
            rho = apply_unitary_dm(rho, rotation(g.name[1], theta), g.qubits, n)
    return 0.5 * (rho + rho.conj().T)


# --------------------------------------------------------------------------
# VQE


def vqe_optimize(h: PauliHamiltonian, n: int, layers: int, seed: int = 0,
                 max_passes: int = 2000, rel_tol: float = 1e-10, angles0=None):
    """Coordinate descent with an exact line minimization per angle.

    Along one rotation angle the energy is ``a + b cos t + c sin t``; the
    values at ``t = 0, +-pi/2`` fix the sinusoid and hence its minimizer.
    Returns ``(angles, energy)``.
    """
    if h.n != n:
        raise ValueError("Hamiltonian size does not match qubit count")
    hd = dense(h)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-0.1, 0.1, n_parameters(n, layers)) if angles0 is None else np.array(angles0, float)

    def energy(th):
        psi = statevector(build_ansatz(n, layers, th))
        return float(np.real(np.vdot(psi, hd @ psi)))

    e = energy(theta)
    for _ in range(max_passes):
        e_prev = e
        for k in range(theta.size):
            base = theta[k]
            theta[k] = base + np.pi / 2
            e_plus = energy(theta)
            theta[k] = base - np.pi / 2
            e_minus = energy(theta)
            a = 0.5 * (e_plus + e_minus)
            b, c = e - a, 0.5 * (e_plus - e_minus)
            theta[k] = math.remainder(base + math.atan2(-c, -b), 2 * math.pi)
            e_new = energy(theta)
            if e_new <= e:
                e = e_new
            else:  # round-off near a flat slice
                theta[k] = base
        if e_prev - e <= rel_tol * max(1.0, abs(e)):
            break
    return theta, e
