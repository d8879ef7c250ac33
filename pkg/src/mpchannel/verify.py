"""Randomized oracle suites exposed through ``mpchannel verify``.

Every suite uses a pinned seed and compares a structured computation with an
independent dense one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mpc, tp
from .sim import apply_unitary_sv
from .tensor import random_hermitian, random_unitary


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class SuiteReport:
    suite: str
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, threshold: float, below: bool = True) -> None:
        ok = value <= threshold if below else value > threshold
        self.checks.append(Check(name, float(value), threshold, bool(ok)))


# --------------------------------------------------------------------------
# TP equivalence


def random_tp_instance(rng, n: int = 3, r: int = 2) -> mpc.Mpc:
    return mpc.pad_bonds(mpc.random_tp_mpc(n, rng), r)


def perturb_instance(phi: mpc.Mpc, rng) -> mpc.Mpc:
    """Break trace preservation: either rescale a core or add PSD noise to it."""
    m = int(rng.integers(phi.n))
    eps = 10 ** rng.uniform(-4, -1)
    x = phi.cores[m]
    if rng.random() < 0.5:
        return phi.replace(m, x * (1 + eps * rng.choice([-1, 1])))
    g = rng.normal(size=x.shape) + 1j * rng.normal(size=x.shape)
    noise = g @ g.conj().T
    return phi.replace(m, x + eps * np.linalg.norm(x) / np.linalg.norm(noise) * noise)


def tp_equivalence(n_instances: int = 200, seed: int = 11) -> SuiteReport:
    rep = SuiteReport("tp-equivalence")
    rng = np.random.default_rng(seed)
    disagreements = 0
    for k in range(n_instances):
        phi = random_tp_instance(rng)
        if k % 2:
            phi = perturb_instance(phi, rng)
        m = int(rng.integers(phi.n))
        bc = tp.BoundaryContractions.build(phi)
        local = tp.tp_criterion(phi, m, bc).holds
        dense_ok = tp.global_tp_residual(phi) <= 1e-6
        disagreements += local != dense_ok
    rep.add("disagreements", disagreements, 0)
    rep.notes.append(f"{n_instances - disagreements}/{n_instances} agreements")
    return rep


# --------------------------------------------------------------------------
# variance identity and the trace inequality


def variance_identity(n_env: int = 20, n_y: int = 20, seed: int = 12) -> SuiteReport:
    rep = SuiteReport("variance-identity")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_env):
        phi = mpc.random_mpc(3, 2, rng)
        m = int(rng.integers(3))
        bc = tp.BoundaryContractions.build(phi)
        v = tp.variance_matrix(phi, m, bc)
        for _ in range(n_y):
            y = random_hermitian(phi.core_dim(m), rng)
            t1, t2 = tp.moments(phi, m, bc, y)
            q = t2 - t1**2 / 2**phi.n
            form = float(np.real(np.vdot(y.reshape(-1), v @ y.reshape(-1))))
            worst = max(worst, abs(form - q) / max(abs(t2), 1e-300))
    rep.add("max relative residual", worst, 1e-8)
    return rep


def trace_inequality(trials: int = 1000, seed: int = 13) -> SuiteReport:
    """tr F^2 - (tr F)^2 / dim >= 0 with equality exactly for F proportional to I."""
    rep = SuiteReport("prop4")
    rng = np.random.default_rng(seed)
    worst_neg = 0.0
    misdetect = 0
    for k in range(trials):
        dim = 2 ** int(rng.integers(1, 4))
        if k % 2:
            f = rng.normal() * np.eye(dim) + (10 ** rng.uniform(-3, 0)) * random_hermitian(dim, rng)
        else:
            f = rng.normal() * np.eye(dim)
        gap = tp.variance_inequality_gap(f)
        worst_neg = min(worst_neg, gap)
        equal = abs(gap) <= 1e-10
        prop = np.linalg.norm(f - np.trace(f).real / dim * np.eye(dim)) <= 1e-8
        misdetect += equal != prop
    rep.add("most negative gap", max(0.0, -worst_neg), 1e-12)
    rep.add("equality misdetections", misdetect, 0)
    return rep


# --------------------------------------------------------------------------
# Kraus reduction


def kraus_reduction(n_instances: int = 50, seed: int = 14) -> SuiteReport:
    rep = SuiteReport("prop1")
    rng = np.random.default_rng(seed)
    d, r = 2, 2
    worst, max_k = 0.0, 0
    for k in range(n_instances):
        n = 2 + k % 3
        phi = mpc.random_mpc(n, r, rng, kraus_dim=d * d * r * r + 3)
        red, kraus = mpc.reduce_kraus(phi)
        max_k = max(max_k, max(a.shape[-1] for a in kraus))
        worst = max(worst, mpc.choi_distance(phi, red))
    rep.add("max Choi distance", worst, 1e-9)
    rep.add("max Kraus dimension", max_k, d * d * r * r)
    return rep


# --------------------------------------------------------------------------
# local-network embeddings and controlled unitaries


def random_pair_unitary(rng, d: int = 2) -> np.ndarray:
    return random_unitary(d * d, rng)[None]


def controlled_unitary_dense(n: int, control: int, target: int, u: np.ndarray) -> np.ndarray:
    dim = 2**n
    full = np.zeros((dim, dim), dtype=complex)
    for b in range(dim):
        psi = np.zeros(dim, dtype=complex)
        psi[b] = 1.0
        if (b >> (n - 1 - control)) & 1:
            psi = apply_unitary_sv(psi, u, (target,), n)
        full[:, b] = psi
    return full


def unitary_choi(u: np.ndarray) -> np.ndarray:
    v = u.reshape(-1)  # |U>> with rows (out, in)
    return np.outer(v, v.conj())


def embeddings(seed: int = 15, n: int = 4, repeats: int = 5) -> SuiteReport:
    rep = SuiteReport("prop2-3")
    rng = np.random.default_rng(seed)
    d = 2
    worst_bw, worst_lad, bond_bw, bond_lad = 0.0, 0.0, 0, 0
    for _ in range(repeats):
        chans = [random_pair_unitary(rng) for _ in range(n - 1)]
        layers = mpc.brickwall_layers(n, 2, chans)
        phi = mpc.embed_pair_channels(n, layers)
        worst_bw = max(worst_bw, np.linalg.norm(mpc.choi(phi) - mpc.dense_network_choi(n, layers)))
        bond_bw = max(bond_bw, max(phi.bonds))
        chans = [mpc.random_local_channel(rng, d * d, 2) for _ in range(n - 1)]
        layers = mpc.ladder_layers(n, 1, chans)
        phi = mpc.embed_pair_channels(n, layers)
        worst_lad = max(worst_lad, np.linalg.norm(mpc.choi(phi) - mpc.dense_network_choi(n, layers)))
        bond_lad = max(bond_lad, max(phi.bonds))
    rep.add("brickwall L=2 Choi distance", worst_bw, 1e-9)
    rep.add("brickwall L=2 bond", bond_bw, d * d)
    rep.add("ladder L=1 Choi distance", worst_lad, 1e-9)
    rep.add("ladder L=1 bond", bond_lad, d * d)
    worst_cu = 0.0
    for u in (np.array([[0, 1], [1, 0]], dtype=complex), random_unitary(2, rng)):
        phi = mpc.cu_channel_mpc(n, 0, n - 1, u)
        ref = unitary_choi(controlled_unitary_dense(n, 0, n - 1, u))
        worst_cu = max(worst_cu, np.linalg.norm(mpc.choi(phi) - ref))
        rep.add("CU bond", max(phi.bonds), d)
        rep.add("CU Kraus dimension", max(phi.kraus_dims(1e-12)), 1)
    rep.add("CU(0,3) Choi distance", worst_cu, 1e-10)
    return rep


def _project_cptp(a: np.ndarray, d_out: int, d_in: int, rounds: int = 300, tol: float = 1e-10) -> np.ndarray:
    """Dykstra projection of a Hermitian Choi matrix (rows: out, in) onto the CPTP set."""

    def proj_tp(x):
        t = x.reshape(d_out, d_in, d_out, d_in)
        excess = np.einsum("oioj->ij", t) - np.eye(d_in)
        t = t - np.einsum("oO,ij->oiOj", np.eye(d_out), excess) / d_out
        return t.reshape(x.shape)

    def proj_psd(x):
        w, v = np.linalg.eigh(0.5 * (x + x.conj().T))
        return (v * np.clip(w, 0, None)) @ v.conj().T

    x = a.copy()
    p = np.zeros_like(a)
    q = np.zeros_like(a)
    for _ in range(rounds):
        y = proj_tp(x + p)
        p = x + p - y
        x_new = proj_psd(y + q)
        q = y + q - x_new
        if np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x)):
            x = x_new
            break
        x = x_new
    return x


def product_choi_distance(target: np.ndarray, rng, iters: int = 40) -> float:
    """Alternating block minimization of ||C01 (x) C23 - target||_F over CPTP pair channels (N = 4)."""
    t = target.reshape((2,) * 16)
    # axes: out0..3, in0..3, Out0..3, In0..3 -> (o0 o1 i0 i1 | O0 O1 I0 I1 | o2 o3 i2 i3 | O2 O3 I2 I3)
    order = [0, 1, 4, 5, 8, 9, 12, 13, 2, 3, 6, 7, 10, 11, 14, 15]
    t4 = np.transpose(t, order).reshape(16, 16, 16, 16)

    def random_choi():
        k = random_unitary(16, rng)[:, :4].reshape(4, 4, 4)  # (kraus, out, in)
        return np.einsum("kab,kcd->abcd", k, k.conj()).reshape(16, 16)

    a, b = random_choi(), random_choi()
    for _ in range(iters):
        nb = np.vdot(b, b).real
        a = _project_cptp(np.einsum("aAbB,bB->aA", t4, b.conj()) / nb, 4, 4)
        na = np.vdot(a, a).real
        b = _project_cptp(np.einsum("aAbB,aA->bB", t4, a.conj()) / na, 4, 4)
    prod = np.einsum("aA,bB->aAbB", a, b)
    return float(np.linalg.norm(prod - t4))


def cu_separation(restarts: int = 50, seed: int = 16) -> SuiteReport:
    """A single brickwall layer (pairs (0,1), (2,3)) cannot realize CNOT(0,3)."""
    rep = SuiteReport("cu-separation")
    rng = np.random.default_rng(seed)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    target = unitary_choi(controlled_unitary_dense(4, 0, 3, x))
    best = min(product_choi_distance(target, rng) for _ in range(restarts))
    rep.add("min Choi distance (brickwall L=1)", best, 0.1, below=False)
    rep.notes.append(f"CU realized at bond 2 with distance {np.linalg.norm(mpc.choi(mpc.cu_channel_mpc(4, 0, 3, x)) - target):.2e}")
    return rep


SUITES = {
    "tp-equivalence": tp_equivalence,
    "prop1": kraus_reduction,
    "prop2-3": embeddings,
    "prop4": trace_inequality,
    "cu-separation": cu_separation,
    "variance-identity": variance_identity,
}


def run_suite(name: str) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return SUITES[name]()
