"""Floor-local trace preservation.

For a fixed floor ``m`` every quantity of the dual operator ``F = Phi^dagger[I]``
that the criterion needs is a linear (``tr F``) or quadratic (``tr F^2``)
function of the core ``X^[m]``. The contractions above and below the floor
are cached:

* type 1 (``T1``, ``B1``): one copy of each core, outputs and inputs traced.
* type 2 (``T2``, ``B2``): two copies, outputs traced per copy and inputs
  cross-wired between the copies.

``q(X) = tr F^2 - (tr F)^2 / d^N`` is non-negative and vanishes exactly when
``F`` is proportional to the identity, so the TP manifold at floor ``m`` is
``{X : V X = 0, tr F(X) = d^N}`` with ``V`` the Hermitian matrix of ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .mpc import Mpc, dual_identity
from .tensor import hermitian_basis, hermitize

NULL_CUTOFF = 1e-9
ROUNDOFF_FLOOR = 1e-14  # relative; eigenvalues below this are indistinguishable from zero
MIN_GAP_DECADES = 2.0
CRITERION_TOL = 1e-7


class StaleCacheError(RuntimeError):
    """Boundary contractions were built from cores that no longer match the MPC."""


def _dummy(b: int) -> np.ndarray:
    return np.eye(b, dtype=complex) / np.sqrt(b)


def _out_traced(x8: np.ndarray) -> np.ndarray:
    """G[j, j', l, lam, l', lam'] = sum_i X[i, j, l, lam, i, j', l', lam']."""
    return np.einsum("ijlxiJLy->jJlxLy", x8)


def _t1_step(t1, x8):
    return np.einsum("lL,ijlxijLy->xy", t1, x8)


def _b1_step(b1, x8):
    return np.einsum("ijlxijLy,xy->lL", x8, b1)


def _t2_step(t2, x8):
    g = _out_traced(x8)
    # copy 1 uses (j, j'), copy 2 the swapped pair (j', j)
    h = np.einsum("aAbB,jJaxAX->jJxXbB", t2, g)
    return np.einsum("jJxXbB,JjbyBY->xXyY", h, g)


def _b2_step(b2, x8):
    g = _out_traced(x8)
    h = np.einsum("jJaxAX,xXyY->jJaAyY", g, b2)
    return np.einsum("jJaAyY,JjbyBY->aAbB", h, g)


@dataclass
class BoundaryContractions:
    """Type-1/type-2 caches per junction ``0..N``.

    Junction ``m`` of the top caches summarizes floors ``0..m-1``; of the
    bottom caches, floors ``m..N-1``. ``top_src``/``bottom_src`` remember the
    core arrays each entry was built from.
    """

    t1: list
    b1: list
    t2: list
    b2: list
    d: int
    n: int
    top_src: list = field(default_factory=list)
    bottom_src: list = field(default_factory=list)

    @classmethod
    def build(cls, phi: Mpc) -> "BoundaryContractions":
        n = phi.n
        bc = cls([None] * (n + 1), [None] * (n + 1), [None] * (n + 1), [None] * (n + 1), phi.d, n,
                 [None] * n, [None] * n)
        top = _dummy(phi.bonds[0])
        bot = _dummy(phi.bonds[-1])
        bc.t1[0], bc.t2[0] = top, np.einsum("ab,cd->abcd", top, top)
        bc.b1[n], bc.b2[n] = bot, np.einsum("ab,cd->abcd", bot, bot)
        for m in range(n):
            bc.update_top(phi, m)
        for m in range(n - 1, -1, -1):
            bc.update_bottom(phi, m)
        return bc

    def update_top(self, phi: Mpc, m: int) -> None:
        """Recompute junction ``m+1`` from junction ``m`` and core ``m``."""
        x8 = phi.core_tensor(m)
        self.t1[m + 1] = _t1_step(self.t1[m], x8)
        self.t2[m + 1] = _t2_step(self.t2[m], x8)
        self.top_src[m] = phi.cores[m]

    def update_bottom(self, phi: Mpc, m: int) -> None:
        """Recompute junction ``m`` from junction ``m+1`` and core ``m``."""
        x8 = phi.core_tensor(m)
        self.b1[m] = _b1_step(self.b1[m + 1], x8)
        self.b2[m] = _b2_step(self.b2[m + 1], x8)
        self.bottom_src[m] = phi.cores[m]

    def check(self, phi: Mpc, m: int) -> None:
        """Raise unless ``top[m]`` and ``bottom[m+1]`` match the current cores."""
        if phi.n != self.n or phi.d != self.d:
            raise StaleCacheError("contractions belong to a different MPC shape")
        for k in range(m):
            if not _same(self.top_src[k], phi.cores[k]):
                raise StaleCacheError(f"top contraction at junction {m} is stale (core {k} changed)")
        for k in range(m + 1, self.n):
            if not _same(self.bottom_src[k], phi.cores[k]):
                raise StaleCacheError(f"bottom contraction at junction {m + 1} is stale (core {k} changed)")

    def normalization(self, m: int) -> complex:
        """tr[T1^[m] (x) B1^[m]] contracted over the junction; equals tr F."""
        return complex(np.einsum("ab,ab->", self.t1[m], self.b1[m]))


def _same(a, b) -> bool:
    return a is b or (a is not None and a.shape == b.shape and np.array_equal(a, b))


def moments(phi: Mpc, m: int, bc: BoundaryContractions, core: np.ndarray | None = None) -> tuple[float, float]:
    """(tr F, tr F^2) with floor ``m`` replaced by ``core`` when given."""
    bc.check(phi, m)
    x8 = (phi.cores[m] if core is None else core).reshape(phi.leg_dims(m) * 2)
    tr1 = np.einsum("lL,ijlxijLy,xy->", bc.t1[m], x8, bc.b1[m + 1])
    g = _out_traced(x8)
    h = np.einsum("aAbB,jJaxAX->jJxXbB", bc.t2[m], g)
    tr2 = np.einsum("jJxXbB,JjbyBY,xXyY->", h, g, bc.b2[m + 1])
    scale = max(1.0, abs(tr1), abs(tr2))
    if abs(tr1.imag) > 1e-9 * scale or abs(tr2.imag) > 1e-9 * scale:
        raise ArithmeticError("moments are not real; core is not Hermitian")
    return float(tr1.real), float(tr2.real)


def normalization_vector(phi: Mpc, m: int, bc: BoundaryContractions) -> np.ndarray:
    """Hermitian ``w`` with ``<w, X>_HS = tr F(X)``."""
    d = phi.d
    w1 = np.einsum("iI,jJ,lL,xy->ijlxIJLy", np.eye(d), np.eye(d), bc.t1[m], bc.b1[m + 1])
    dim = phi.core_dim(m)
    return hermitize(w1.reshape(dim, dim).conj())


def variance_matrix(phi: Mpc, m: int, bc: BoundaryContractions) -> np.ndarray:
    """Hermitian ``V`` (D^2 x D^2) with ``vec(Y)^H V vec(Y) = q(Y)`` for Hermitian ``Y``."""
    bc.check(phi, m)
    d = phi.d
    dim = phi.core_dim(m)
    eye = np.eye(d)
    # bilinear form Y1 (a f l x b h L X), Y2 (c k m y e g M Y); inputs cross-wired
    mbil = np.einsum("ab,ce,fg,hk,lLmM,xXyY->aflxbhLXckmyegMY", eye, eye, eye, eye, bc.t2[m], bc.b2[m + 1],
                     optimize=True)
    mbil = mbil.reshape(dim, dim, dim * dim)
    v = np.transpose(mbil, (1, 0, 2)).reshape(dim * dim, dim * dim)
    w = normalization_vector(phi, m, bc).reshape(-1)
    v = v - np.outer(w, w.conj()) / d**phi.n
    return hermitize(v)


@lru_cache(maxsize=8)
def _basis_flat(dim: int) -> np.ndarray:
    b = hermitian_basis(dim).reshape(dim * dim, dim * dim)
    b.setflags(write=False)
    return b


def to_real(y: np.ndarray) -> np.ndarray:
    """Coordinates of a Hermitian matrix in the orthonormal Hermitian basis."""
    dim = y.shape[0]
    return np.real(_basis_flat(dim).conj() @ y.reshape(-1))


def from_real(c: np.ndarray, dim: int) -> np.ndarray:
    return (c @ _basis_flat(dim)).reshape(dim, dim)


def real_form(v: np.ndarray) -> np.ndarray:
    """Restriction of a Hermitian form to the real space of Hermitian matrices."""
    dim = int(round(np.sqrt(v.shape[0])))
    b = _basis_flat(dim)
    vr = np.real(b.conj() @ v @ b.T)
    return 0.5 * (vr + vr.T)


def null_basis(v: np.ndarray, cutoff: float = NULL_CUTOFF) -> np.ndarray:
    """Orthonormal real coordinates (columns) spanning the null space of ``V`` on Hermitian matrices.

    Eigenvalues below ``cutoff * lambda_max`` count as zero.
    """
    vr = real_form(v)
    w, u = np.linalg.eigh(vr)
    top = float(np.max(np.abs(w)))
    if top <= 0:
        return np.eye(vr.shape[0])
    return u[:, :_null_count(w / top, cutoff)]


def _null_count(rel: np.ndarray, cutoff: float) -> int:
    """Number of leading (ascending) eigenvalues treated as null.

    Everything below ``cutoff`` is a candidate.  A small but genuine curvature
    hiding under the cutoff (say 1e-11 with round-off at 1e-16) is split off
    when it clears the round-off band by ``MIN_GAP_DECADES``.
    """
    k = int(np.sum(rel <= cutoff))
    logs = np.log10(np.maximum(np.abs(rel[:k]), 1e-300))
    for j in range(1, k):
        if rel[j] > ROUNDOFF_FLOOR and logs[j] - logs[j - 1] >= MIN_GAP_DECADES:
            return j
    return k


@dataclass(frozen=True)
class Criterion:
    residual_v: float
    residual_norm: float
    holds: bool
    deviation: float = 0.0  # ||F - I||_F / sqrt(d^N) from the floor moments


def deviation(phi: Mpc, m: int, bc: BoundaryContractions, core: np.ndarray | None = None) -> float:
    """Distance of the dual identity from I implied by the floor moments; noise floor ~1e-8."""
    tr1, tr2 = moments(phi, m, bc, core)
    dim = phi.d**phi.n
    return float(np.sqrt(max(tr2 - 2 * tr1 + dim, 0.0) / dim))


def tp_criterion(phi: Mpc, m: int, bc: BoundaryContractions, v: np.ndarray | None = None,
                 tol: float = CRITERION_TOL) -> Criterion:
    v = variance_matrix(phi, m, bc) if v is None else v
    x = phi.cores[m].reshape(-1)
    vnorm = float(np.linalg.norm(v, 2))
    xnorm = float(np.linalg.norm(x))
    res_v = float(np.linalg.norm(v @ x)) / (vnorm * xnorm) if vnorm > 0 and xnorm > 0 else 0.0
    tr1, tr2 = moments(phi, m, bc)
    target = phi.d**phi.n
    res_n = abs(tr1 - target) / target
    dev = float(np.sqrt(max(tr2 - 2 * tr1 + target, 0.0) / target))
    return Criterion(res_v, res_n, res_v <= tol and res_n <= tol, dev)


def global_tp_residual(phi: Mpc) -> float:
    """Dense ``||Phi^dagger[I] - I||_F / sqrt(d^N)`` from the Kraus factorization."""
    f = dual_identity(phi)
    return float(np.linalg.norm(f - np.eye(f.shape[0])) / np.sqrt(f.shape[0]))


def variance_inequality_gap(f: np.ndarray) -> float:
    """tr F^2 - (tr F)^2 / dim for a Hermitian operator; zero iff F is proportional to I."""
    f = hermitize(np.asarray(f, dtype=complex))
    return float(np.real(np.trace(f @ f)) - np.real(np.trace(f)) ** 2 / f.shape[0])
