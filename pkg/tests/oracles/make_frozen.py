"""Regenerate tests/data/frozen.json from independent reference computations.

Nothing here imports ``mpchannel``: Hamiltonians are built from explicit
Kronecker products, spectra come from scipy's Lanczos solver, channels from
dense superoperator exponentials and the bond-2 MPS reference from a
quasi-Newton search over raw MPS entries.

    python3 tests/oracles/make_frozen.py
"""

import json
from functools import reduce
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.optimize as so
import scipy.sparse as sp
import scipy.sparse.linalg as spla

P = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]),
}


def kron_term(label):
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), [sp.csr_matrix(P[c]) for c in label])


def tfim(n, j=1.0, h=1.0):
    terms = [(-j, "I" * q + "ZZ" + "I" * (n - q - 2)) for q in range(n - 1)]
    terms += [(-h, "I" * q + "X" + "I" * (n - q - 1)) for q in range(n)]
    return terms


def heis(n):
    return [(1.0, "I" * q + p + p + "I" * (n - q - 2)) for q in range(n - 1) for p in "XYZ"]


def sparse_h(terms):
    return sum(c * kron_term(lbl) for c, lbl in terms)


def ground(terms):
    h = sparse_h(terms)
    if h.shape[0] <= 16:
        return float(np.linalg.eigvalsh(h.toarray())[0])
    return float(spla.eigsh(h, k=1, which="SA", tol=1e-14)[0][0])


def operator_schmidt_ranks(terms, n):
    h = sparse_h(terms).toarray().reshape((2,) * (2 * n))
    ranks = []
    for k in range(1, n):
        order = list(range(k)) + list(range(n, n + k)) + list(range(k, n)) + list(range(n + k, 2 * n))
        m = np.transpose(h, order).reshape(4**k, -1)
        s = np.linalg.svd(m, compute_uv=False)
        ranks.append(int(np.sum(s > 1e-12 * s[0])))
    return ranks


def mps_bond2_energy(terms, n, restarts=20, seed=0):
    """min <psi|H|psi>/<psi|psi> over real bond-2 MPS (TFIM ground states are real)."""
    h = sparse_h(terms).toarray().real
    dims = [1] + [2] * (n - 1) + [1]
    shapes = [(dims[k], 2, dims[k + 1]) for k in range(n)]
    sizes = [int(np.prod(s)) for s in shapes]

    def vec(x):
        parts = np.split(x, np.cumsum(sizes)[:-1])
        v = parts[0].reshape(shapes[0])
        for p, s in zip(parts[1:], shapes[1:]):
            v = np.tensordot(v, p.reshape(s), axes=(-1, 0))
        return v.reshape(-1)

    def f(x):
        v = vec(x)
        return float(v @ h @ v / (v @ v))

    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(restarts):
        res = so.minimize(f, rng.normal(size=sum(sizes)), method="BFGS", options={"gtol": 1e-10, "maxiter": 20000})
        best = min(best, res.fun)
    return best


def cnot_lindblad(lam):
    """CNOT on |00> followed by exp(L), L built as a 16x16 superoperator and exponentiated."""
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1
    rho = cnot @ rho @ cnot.conj().T
    eye = np.eye(4)
    gen = np.zeros((16, 16), dtype=complex)
    for a in "IXYZ":
        for b in "IXYZ":
            pk = np.kron(P[a], P[b])
            gen += np.kron(pk, pk.conj()) - np.kron(eye, eye)  # row-major vec: vec(A X B) = (A kron B^T) vec X
    out = (sla.expm(lam * gen) @ rho.reshape(-1)).reshape(4, 4)
    return out


def depolarizing_choi_eigs(p):
    """Choi matrix sum_k vec(A_k) vec(A_k)^dagger of the single-qubit depolarizing Kraus set."""
    ks = [np.sqrt(1 - 3 * p / 4) * P["I"]] + [np.sqrt(p / 4) * P[c] for c in "XYZ"]
    c = sum(np.outer(k.reshape(-1), k.reshape(-1).conj()) for k in ks)
    return sorted(np.linalg.eigvalsh(c).tolist())


def main():
    lam = 1e-3
    cn = cnot_lindblad(lam)
    data = {
        "tfim4_e0": ground(tfim(4)),
        "tfim6_e0": ground(tfim(6)),
        "heis6_e0": ground(heis(6)),
        "heis2_e0": ground(heis(2)),
        "tfim6_mps_bond2_energy": mps_bond2_energy(tfim(6), 6),
        "tfim4_operator_schmidt_ranks": operator_schmidt_ranks(tfim(4), 4),
        "cnot_lindblad_lambda": lam,
        "cnot_lindblad_re": cn.real.tolist(),
        "cnot_lindblad_im": cn.imag.tolist(),
        "depolarizing_p": 0.3,
        "depolarizing_choi_eigs": depolarizing_choi_eigs(0.3),
    }
    out = Path(__file__).resolve().parents[1] / "data" / "frozen.json"
    out.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(json.dumps(data, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
