"""Matrix product channels.

A channel on ``n`` sites is stored as one positive semidefinite core per
floor. Core ``m`` is a ``D x D`` matrix, ``D = d*d*b[m]*b[m+1]``, whose row
index fuses ``(i, j, l, lam)``: output leg, input leg, upper bond, lower bond
(row-major). The column index fuses the primed copies. The outer bonds
``b[0]`` and ``b[n]`` are closed with dummy tensors ``b**-0.5 * delta`` so
that every floor looks like an interior one.

Kraus tensors ``A[i, j, l, lam, k]`` with ``X = sum_k A A^*`` are derived
views obtained by eigen-decomposition of the cores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import eigh_hermitian, hermitize, random_unitary, svd_split

MAX_DENSE_SITES = 10
MAX_CHOI_SITES = 5


@dataclass(frozen=True)
class Mpc:
    cores: tuple[np.ndarray, ...]
    bonds: tuple[int, ...]
    d: int = 2

    def __post_init__(self):
        if len(self.bonds) != len(self.cores) + 1:
            raise ValueError("need one bond dimension per junction (n + 1 values)")
        for m, x in enumerate(self.cores):
            dim = self.d * self.d * self.bonds[m] * self.bonds[m + 1]
            if x.shape != (dim, dim):
                raise ValueError(f"core {m} has shape {x.shape}, expected {(dim, dim)} from bonds {self.bonds}")

    @property
    def n(self) -> int:
        return len(self.cores)

    def core_dim(self, m: int) -> int:
        return self.cores[m].shape[0]

    def leg_dims(self, m: int) -> tuple[int, int, int, int]:
        return (self.d, self.d, self.bonds[m], self.bonds[m + 1])

    def core_tensor(self, m: int) -> np.ndarray:
        """8-leg view (i, j, l, lam, i', j', l', lam')."""
        return self.cores[m].reshape(self.leg_dims(m) * 2)

    def kraus(self, m: int, rel_tol: float = 0.0) -> np.ndarray:
        """Kraus tensor (i, j, l, lam, k) from the eigenvectors of core ``m``."""
        w, v = eigh_hermitian(self.cores[m], tol=1e-8)
        keep = w > _rank_cutoff(w, rel_tol)
        a = v[:, keep] * np.sqrt(w[keep])
        if a.shape[1] == 0:
            a = np.zeros((v.shape[0], 1), dtype=complex)
        return a.reshape(self.leg_dims(m) + (a.shape[1],))

    def kraus_dims(self, rel_tol: float = 0.0) -> list[int]:
        return [self.kraus(m, rel_tol).shape[-1] for m in range(self.n)]

    def replace(self, m: int, core: np.ndarray) -> "Mpc":
        cores = list(self.cores)
        cores[m] = np.array(core, dtype=complex)
        return Mpc(tuple(cores), self.bonds, self.d)

    def is_psd(self, tol: float = 1e-9) -> bool:
        for x in self.cores:
            w = np.linalg.eigvalsh(hermitize(x))
            if w.min() < -tol * max(1.0, np.abs(w).max()):
                return False
        return True

    # serialization -------------------------------------------------------
    def save(self, path) -> None:
        arrays = {f"core_{m}": x for m, x in enumerate(self.cores)}
        np.savez(path, n=self.n, d=self.d, bonds=np.array(self.bonds), **arrays)

    @classmethod
    def load(cls, path) -> "Mpc":
        with np.load(path) as z:
            n = int(z["n"])
            return cls(tuple(np.array(z[f"core_{m}"]) for m in range(n)), tuple(int(b) for b in z["bonds"]), int(z["d"]))


def _rank_cutoff(w: np.ndarray, rel_tol: float) -> float:
    top = max(float(np.max(np.abs(w))) if w.size else 0.0, 0.0)
    floor = w.size * np.finfo(float).eps
    return max(rel_tol, floor) * top


# ---------------------------------------------------------------------------
# construction


def cores_from_kraus(kraus: list[np.ndarray], d: int | None = None) -> Mpc:
    """Build cores ``X = sum_k vec(A_k) vec(A_k)^dagger`` from 5-leg Kraus tensors."""
    if not kraus:
        raise ValueError("need at least one floor")
    d = kraus[0].shape[0] if d is None else d
    bonds = [kraus[0].shape[2]]
    cores = []
    for m, a in enumerate(kraus):
        if a.ndim == 4:
            a = a[..., None]
        if a.shape[0] != d or a.shape[1] != d:
            raise ValueError(f"floor {m}: physical legs must have dimension {d}")
        if a.shape[2] != bonds[-1]:
            raise ValueError(f"floor {m}: upper bond {a.shape[2]} does not match lower bond {bonds[-1]} of floor {m - 1}")
        bonds.append(a.shape[3])
        mat = a.reshape(-1, a.shape[-1])
        cores.append(mat @ mat.conj().T)
    return Mpc(tuple(cores), tuple(bonds), d)


def identity_mpc(n: int, r: int = 1, d: int = 2) -> Mpc:
    """Identity channel with every bond of dimension ``r``."""
    a = np.einsum("ij,lm->ijlm", np.eye(d), np.eye(r)).astype(complex)[..., None]
    return cores_from_kraus([a] * n, d)


def random_mpc(n: int, r: int, rng: np.random.Generator, kraus_dim: int | None = None, d: int = 2) -> Mpc:
    """Random completely positive (generally not trace preserving) MPC."""
    k = d * d * r * r if kraus_dim is None else kraus_dim
    kr = []
    for _ in range(n):
        a = rng.normal(size=(d, d, r, r, k)) + 1j * rng.normal(size=(d, d, r, r, k))
        kr.append(a / np.sqrt(d * r * k))
    return cores_from_kraus(kr, d)


def pad_bonds(phi: Mpc, r: int) -> Mpc:
    """Embed every bond into dimension ``r`` without changing the channel.

    Interior bonds are zero-padded. Outer bonds are padded with a rank-one
    factor ``sqrt(r_new/r_old)``-weighted on the first index so the dummy
    closure keeps the same normalization and the Kraus rank is unchanged.
    """
    if any(b > r for b in phi.bonds):
        raise ValueError(f"bond dimensions {phi.bonds} exceed target {r}")
    d, n = phi.d, phi.n
    new_bonds = (r,) * (n + 1)
    cores = []
    for m in range(n):
        bu, bd = phi.bonds[m], phi.bonds[m + 1]
        x = phi.core_tensor(m)
        out = np.zeros((d, d, r, r, d, d, r, r), dtype=complex)
        if m == 0 and bu != r:
            # old closure: sum_l bu^-1/2 X[l,l]; new closure: r^-1/2 on a single index
            x = np.einsum("ijlxIJLy->ijxIJy", x * np.eye(bu)[None, None, :, None, None, None, :, None])
            x = x[:, :, None, :, :, :, None, :] * np.sqrt(r / bu)
            bu = 1
        if m == n - 1 and bd != r:
            x = np.einsum("ijlxIJLy->ijlIJL", x * np.eye(bd)[None, None, None, :, None, None, None, :])
            x = x[:, :, :, None, :, :, :, None] * np.sqrt(r / bd)
            bd = 1
        out[:, :, :bu, :bd, :, :, :bu, :bd] = x
        dim = d * d * r * r
        cores.append(out.reshape(dim, dim))
    return Mpc(tuple(cores), new_bonds, d)


# ---------------------------------------------------------------------------
# application


def _dummy(b: int) -> np.ndarray:
    return np.eye(b, dtype=complex) / np.sqrt(b)


def _check_state(phi: Mpc, rho: np.ndarray) -> None:
    if phi.n > MAX_DENSE_SITES:
        raise ValueError(f"dense application limited to {MAX_DENSE_SITES} sites")
    if rho.shape != (phi.d**phi.n,) * 2:
        raise ValueError(f"state of shape {rho.shape} does not match {phi.n} sites of dimension {phi.d}")


def _apply_cores(phi: Mpc, rho: np.ndarray) -> np.ndarray:
    n, d = phi.n, phi.d
    # legs: (l, l', j_0..j_{n-1}, j'_0..j'_{n-1}); processed sites hold output legs
    t = np.multiply.outer(_dummy(phi.bonds[0]), rho.reshape((d,) * (2 * n)))
    for m in range(n):
        x = phi.core_tensor(m)  # i j l x I J L y
        t = np.tensordot(x, t, axes=([2, 6, 1, 5], [0, 1, 2 + m, 2 + n + m]))
        # now: i, x, I, y, then remaining j (n-1), remaining j' (n-1)
        t = np.moveaxis(t, [1, 3], [0, 1])
        t = np.moveaxis(t, [2, 3], [2 + m, 2 + n + m])
    t = np.tensordot(_dummy(phi.bonds[-1]), t, axes=([0, 1], [0, 1]))
    return t.reshape(rho.shape)


def _apply_kraus(phi: Mpc, rho: np.ndarray) -> np.ndarray:
    n, d = phi.n, phi.d
    t = np.multiply.outer(_dummy(phi.bonds[0]), rho.reshape((d,) * (2 * n)))
    for m in range(n):
        a = phi.kraus(m)  # i j l x k
        t = np.tensordot(a, t, axes=([2, 1], [0, 2 + m]))  # i x k l' [j..] [j'..]
        t = np.tensordot(a.conj(), t, axes=([4, 2, 1], [2, 3, 3 + n + m]))  # I y i x [j..] [j'..]
        t = np.moveaxis(t, [3, 1], [0, 1])  # x y I i ...
        t = np.moveaxis(t, [3, 2], [2 + m, 2 + n + m])
    t = np.tensordot(_dummy(phi.bonds[-1]), t, axes=([0, 1], [0, 1]))
    return t.reshape(rho.shape)


def apply(phi: Mpc, rho, method: str = "cores"):
    """Channel output for a dense state (or quasistate).

    ``method="cores"`` contracts the PSD cores two-sidedly; ``"kraus"``
    contracts the Kraus factorization ket-side then bra-side.
    """
    from .povm import QuasiState

    if isinstance(rho, QuasiState):
        return QuasiState(apply(phi, rho.matrix, method), rho.shots)
    rho = np.asarray(rho, dtype=complex)
    _check_state(phi, rho)
    if method == "cores":
        return _apply_cores(phi, rho)
    if method == "kraus":
        return _apply_kraus(phi, rho)
    raise ValueError(f"unknown method {method!r}")


def choi(phi: Mpc) -> np.ndarray:
    """(Phi (x) Id)(|delta><delta|), rows fused as (outputs, inputs)."""
    n, d = phi.n, phi.d
    if n > MAX_CHOI_SITES:
        raise ValueError(f"Choi operator limited to {MAX_CHOI_SITES} sites")
    c = _dummy(phi.bonds[0])  # legs l, l'
    for m in range(n):
        c = np.tensordot(c, phi.core_tensor(m), axes=([0, 1], [2, 6]))
        # (... i j x I J y)
        c = np.moveaxis(c, [-4, -1], [0, 1])
    c = np.tensordot(_dummy(phi.bonds[-1]), c, axes=([0, 1], [0, 1]))
    # legs per site: i j I J  -> order (i.., j.., I.., J..)
    order = [4 * m for m in range(n)] + [4 * m + 1 for m in range(n)] + [4 * m + 2 for m in range(n)] + [4 * m + 3 for m in range(n)]
    dim = d ** (2 * n)
    return np.transpose(c, order).reshape(dim, dim)


def full_kraus_mpo(phi: Mpc, rel_tol: float = 0.0) -> list[np.ndarray]:
    return [phi.kraus(m, rel_tol) for m in range(phi.n)]


def dual_identity(phi: Mpc) -> np.ndarray:
    """Dense F = Phi^dagger[I] = sum_K A_K^dagger A_K from the Kraus factorization."""
    n, d = phi.n, phi.d
    f = _dummy(phi.bonds[0])  # ket bond, bra bond
    f = f[None, None]  # (J', J, l, l') with trivial physical legs so far
    for m in range(n):
        a = phi.kraus(m)
        site = np.einsum("ijlxk,iJLyk->JjlLxy", a, a.conj())  # J'=bra input, j=ket input
        f = np.einsum("abpq,cdpqxy->acbdxy", f, site)
        s = f.shape
        f = f.reshape(s[0] * s[1], s[2] * s[3], s[4], s[5])
    f = np.einsum("abxy,xy->ab", f, _dummy(phi.bonds[-1]))
    # f[J', J] = sum_K conj(A_K)[I, J'] A_K[I, J] = (A^dagger A)[J', J]
    return f


def choi_distance(a: Mpc, b: Mpc) -> float:
    return float(np.linalg.norm(choi(a) - choi(b)))


# ---------------------------------------------------------------------------
# Kraus reduction


def reduce_kraus(phi: Mpc, rel_tol: float = 0.0) -> tuple[Mpc, list[np.ndarray]]:
    """Keep eigenpairs of each core above ``rel_tol * lambda_max``.

    Returns the rebuilt channel and its Kraus tensors; each Kraus dimension
    equals the kept rank of the core, at most ``d^2 * b[m] * b[m+1]``.
    """
    kraus = [phi.kraus(m, rel_tol) for m in range(phi.n)]
    return cores_from_kraus(kraus, phi.d), kraus


# ---------------------------------------------------------------------------
# embeddings of local networks


def _split_pair(kraus: np.ndarray, d: int, rel_tol: float = 1e-13):
    """Split a two-site Kraus set (K, d^2, d^2) into upper/lower floor pieces.

    Upper piece: (i1, j1, bond); lower piece: (bond, i2, j2, k).
    """
    kk = kraus.shape[0]
    t = kraus.reshape(kk, d, d, d, d)  # k i1 i2 j1 j2
    t = np.transpose(t, (1, 3, 2, 4, 0)).reshape(d * d, d * d * kk)
    u, s, vh = svd_split(t, rel_tol=rel_tol)
    upper = (u * np.sqrt(s)).reshape(d, d, -1)
    lower = (np.sqrt(s)[:, None] * vh).reshape(-1, d, d, kk)
    return upper, lower


def _check_cptp(kraus: np.ndarray, tol: float = 1e-9) -> None:
    s = np.einsum("kab,kac->bc", kraus.conj(), kraus)
    if np.max(np.abs(s - np.eye(s.shape[0]))) > tol:
        raise ValueError("constituent channel is not trace preserving")


def _compose(later: np.ndarray, earlier: np.ndarray) -> np.ndarray:
    """Floor pieces (i, j, up, down, k): physical product, bond/Kraus tensor product."""
    t = np.einsum("iaABK,ajCDL->ijCADBLK", later, earlier)
    d0, d1, c, a, dd, b, l, k = t.shape
    return t.reshape(d0, d1, c * a, dd * b, l * k)


def embed_pair_channels(n: int, layers: list[list[tuple[int, np.ndarray]]], d: int = 2) -> Mpc:
    """MPC for a network of nearest-neighbour channels.

    ``layers`` lists, in time order, groups of ``(q, kraus)`` entries. A
    Kraus set of shape ``(K, d^2, d^2)`` acts on sites ``(q, q+1)`` and is
    split by one SVD across the pair; a ``(K, d, d)`` set acts on site ``q``
    alone. The pieces on a floor are composed in time order.
    """
    eye = np.eye(d, dtype=complex)[:, :, None, None, None]
    floors = [eye.copy() for _ in range(n)]
    for group in layers:
        for q, kraus in group:
            kraus = np.asarray(kraus, dtype=complex)
            if kraus.ndim == 2:
                kraus = kraus[None]
            _check_cptp(kraus)
            if kraus.shape[-1] == d:
                if not (0 <= q < n):
                    raise ValueError(f"site {q} outside chain of {n} sites")
                floors[q] = _compose(np.transpose(kraus, (1, 2, 0))[:, :, None, None, :], floors[q])
                continue
            if not (0 <= q < n - 1):
                raise ValueError(f"pair ({q}, {q + 1}) outside chain of {n} sites")
            up, low = _split_pair(kraus, d)
            floors[q] = _compose(up[:, :, None, :, None], floors[q])
            floors[q + 1] = _compose(np.transpose(low, (1, 2, 0, 3))[:, :, :, None, :], floors[q + 1])
    return cores_from_kraus(floors, d)


def brickwall_layers(n: int, n_layers: int, channels) -> list[list[tuple[int, np.ndarray]]]:
    """Assign ``channels`` (consumed in order) to an ``n_layers`` brickwall."""
    it = iter(channels)
    layers = []
    for layer in range(n_layers):
        layers.append([(q, next(it)) for q in range(layer % 2, n - 1, 2)])
    return layers


def ladder_layers(n: int, n_ladders: int, channels) -> list[list[tuple[int, np.ndarray]]]:
    """Each ladder is the staircase (0,1), (1,2), ..., (n-2, n-1)."""
    it = iter(channels)
    layers = []
    for _ in range(n_ladders):
        for q in range(n - 1):
            layers.append([(q, next(it))])
    return layers


def embed_local_channel_layer(channels, n: int, structure: str = "brickwall", n_layers: int = 1, d: int = 2) -> Mpc:
    """Embed a brickwall (``n_layers`` layers) or ladder (``n_layers`` ladders) network."""
    channels = list(channels)
    if structure == "brickwall":
        need = sum(len(range(layer % 2, n - 1, 2)) for layer in range(n_layers))
        build = brickwall_layers
    elif structure == "ladder":
        need = n_layers * (n - 1)
        build = ladder_layers
    else:
        raise ValueError(f"unknown layer structure {structure!r}")
    if len(channels) != need:
        raise ValueError(f"{structure} with {n_layers} layer(s) on {n} sites needs {need} channels, got {len(channels)}")
    return embed_pair_channels(n, build(n, n_layers, channels), d)


def dense_network_choi(n: int, layers, d: int = 2) -> np.ndarray:
    """Choi operator of a pair-channel network by dense composition (oracle path)."""
    from .sim import apply_kraus_dm

    dim = d**n
    delta = np.eye(dim, dtype=complex).reshape(-1)
    state = np.outer(delta, delta.conj())  # outputs (first n) x references (last n)
    for group in layers:
        for q, kraus in group:
            kraus = np.asarray(kraus, dtype=complex)
            if kraus.ndim == 2:
                kraus = kraus[None]
            sites = (q,) if kraus.shape[-1] == d else (q, q + 1)
            state = apply_kraus_dm(state, kraus, sites, 2 * n)
    return state


# ---------------------------------------------------------------------------
# special channels


def cu_channel_mpc(n: int, control: int, target: int, u: np.ndarray, pad: bool = True) -> Mpc:
    """Controlled-U between arbitrary floors, bond ``d`` and Kraus rank 1 per floor."""
    d = u.shape[0]
    if control == target or not (0 <= control < n and 0 <= target < n):
        raise ValueError(f"invalid control/target ({control}, {target}) for {n} sites")
    lo, hi = min(control, target), max(control, target)
    kr = []
    for m in range(n):
        bu = d if lo < m <= hi else 1
        bd = d if lo <= m < hi else 1
        a = np.zeros((d, d, bu, bd, 1), dtype=complex)
        if m == control:
            for c in range(d):
                proj = np.zeros((d, d))
                proj[c, c] = 1.0
                if m == lo:
                    a[:, :, 0, c, 0] = proj
                else:
                    a[:, :, c, 0, 0] = proj
        elif m == target:
            for c in range(d):
                op = np.linalg.matrix_power(u, c)
                if m == lo:
                    a[:, :, 0, c, 0] = op
                else:
                    a[:, :, c, 0, 0] = op
        elif lo < m < hi:
            for c in range(d):
                a[:, :, c, c, 0] = np.eye(d)
        else:
            a[:, :, 0, 0, 0] = np.eye(d)
        kr.append(a)
    phi = cores_from_kraus(kr, d)
    return pad_bonds(phi, d) if pad else phi


def trash_and_prepare(mps: list[np.ndarray], r: int | None = None) -> Mpc:
    """Constant channel rho -> tr[rho] |psi><psi| for an MPS with tensors (left, phys, right).

    Cores are delta on the input legs times B B^* on the output legs.
    """
    d = mps[0].shape[1]
    bonds = [mps[0].shape[0]] + [b.shape[2] for b in mps]
    if r is not None and max(bonds) > r:
        raise ValueError(f"MPS bond {max(bonds)} exceeds channel bond {r}")
    kr = []
    for b in mps:
        # A[i, j, l, x, k=j'] = B[l, i, x] * delta_{j k}
        a = np.einsum("lix,jk->ijlxk", b, np.eye(d)).astype(complex)
        kr.append(a)
    phi = cores_from_kraus(kr, d)
    # MPS boundary bonds are 1; normalize the dummy closures of non-trivial ones
    return pad_bonds(phi, r) if r is not None else phi


def product_mps(n: int, local_state: np.ndarray) -> list[np.ndarray]:
    return [np.asarray(local_state, dtype=complex).reshape(1, -1, 1) for _ in range(n)]


def mps_from_vector(psi: np.ndarray, n: int, d: int = 2, max_bond: int | None = None) -> list[np.ndarray]:
    tensors = []
    rest = np.asarray(psi, dtype=complex).reshape(1, -1)
    for _ in range(n - 1):
        left = rest.shape[0]
        u, s, vh = svd_split(rest.reshape(left * d, -1), rel_tol=1e-14, max_rank=max_bond)
        tensors.append(u.reshape(left, d, -1))
        rest = s[:, None] * vh
    tensors.append(rest.reshape(rest.shape[0], d, 1))
    return tensors


def _product_generator_unitary(rng: np.random.Generator, eta: float, d: int) -> np.ndarray:
    """exp(-i eta A (x) B) for random Hermitian A, B with ||A (x) B||_F = 1.

    Its operator Schmidt rank is at most d, so it fits a bond of dimension d.
    """
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    b = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    a, b = hermitize(a), hermitize(b)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    w, v = np.linalg.eigh(np.kron(a, b))
    return (v * np.exp(-1j * eta * w)) @ v.conj().T


def init_identity_perturbation(n: int, r: int = 2, eta: float = 0.05, seed=0, d: int = 2) -> Mpc:
    """Trace-preserving perturbation of the identity at uniform bond ``r``.

    Two brickwall layers (even pairs, then odd pairs) of unitaries
    ``exp(-i eta G)`` with product generators are embedded exactly, then bonds
    are padded to ``r``.
    """
    if r < 1:
        raise ValueError("bond dimension must be positive")
    if eta < 0:
        raise ValueError("perturbation strength must be non-negative")
    rng = np.random.default_rng(seed)
    layers = []
    for parity in (0, 1):
        group = []
        for q in range(parity, n - 1, 2):
            u = _product_generator_unitary(rng, eta, d)
            group.append((q, u[None]))
        if group:
            layers.append(group)
    phi = embed_pair_channels(n, layers, d) if layers else identity_mpc(n, 1, d)
    if max(phi.bonds) > r:
        raise ValueError(f"perturbation needs bond {max(phi.bonds)} > r={r}")
    return pad_bonds(phi, r)


def random_local_channel(rng: np.random.Generator, d: int, n_kraus: int) -> np.ndarray:
    """Random CPTP Kraus set (K, d, d) from a Haar isometry."""
    v = random_unitary(d * n_kraus, rng)[:, :d]
    return v.reshape(n_kraus, d, d)


def random_tp_mpc(n: int, rng: np.random.Generator, d: int = 2, strength: float = 1.0) -> Mpc:
    """Random trace-preserving MPC at bond ``d``.

    Layers: random local channels, product-generator unitaries on even then
    odd pairs, random local channels again. Every pair unitary has operator
    Schmidt rank <= d, so each interior bond is at most ``d``.
    """
    layers = [[(q, random_local_channel(rng, d, d)) for q in range(n)]]
    for parity in (0, 1):
        group = [(q, _product_generator_unitary(rng, strength, d)[None]) for q in range(parity, n - 1, 2)]
        if group:
            layers.append(group)
    layers.append([(q, random_local_channel(rng, d, d)) for q in range(n)])
    return pad_bonds(embed_pair_channels(n, layers, d), d)
