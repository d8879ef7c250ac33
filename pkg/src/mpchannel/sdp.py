"""Per-floor semidefinite program.

minimize tr[E X]  over Hermitian X >= 0 with X in span(null basis) and
<w, X> = target.

The affine constraints are eliminated: ``X(z) = Xp + sum_b z_b M_b`` where
``Xp`` is the projection of the warm start onto the affine set and ``M_b``
is an orthonormal basis of the directions that keep both constraints. In
anchored mode ``Xp`` is the warm start itself (normalization-corrected), so
components it has outside the span are kept rather than projected away. The
reduced problem is solved with a log-det barrier and damped Newton steps.
A phase-I search first finds a strictly positive definite point, since
warm starts produced by the sweep are frequently rank deficient.

An extra barrier ``-log(cap - tr X)`` keeps the problem bounded: directions
that do not change the channel at all (zero-padded bond indices) carry zero
cost and would otherwise let the log-det term diverge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .tensor import hermitize
from .tp import from_real, to_real

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max-iter"
STATUS_FALLBACK = "fallback-warm-start"

CAP_FACTOR = 10.0
FEASIBILITY_TOL = 1e-7


class InfeasibleWarmStart(ValueError):
    pass


class EmptyBasisError(ValueError):
    pass


@dataclass
class FloorSdp:
    cost: np.ndarray  # Hermitian D x D
    null: np.ndarray  # real coordinates (D^2, k), orthonormal columns
    w: np.ndarray  # Hermitian D x D, <w, X> = tr F(X)
    target: float
    x0: np.ndarray
    # anchored: feasible set is x0 + span(null) instead of span(null); x0 may carry
    # a component along weakly curved directions excluded from the basis
    anchored: bool = False

    @property
    def dim(self) -> int:
        return self.cost.shape[0]


@dataclass
class ReducedSdp:
    xp: np.ndarray  # affine anchor
    dirs: np.ndarray  # (p, D, D) Hermitian, orthonormal
    grad: np.ndarray  # tr[E M_b]
    offset: float  # tr[E Xp]


@dataclass
class SdpSolution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int = 0
    gap: float = float("nan")
    message: str = ""


@dataclass
class FeasibilityReport:
    affine: float
    psd: float
    rounds: int
    converged: bool


def _normal_direction(problem: FloorSdp) -> np.ndarray:
    u = problem.null.T @ to_real(problem.w)
    if np.linalg.norm(u) <= 1e-12 * max(1.0, np.linalg.norm(problem.w)):
        raise EmptyBasisError("normalization cannot be met inside the null space")
    return u


def project_affine(x: np.ndarray, problem: FloorSdp) -> np.ndarray:
    """Orthogonal projection onto {span(null), <w, X> = target}."""
    q = problem.null
    u = _normal_direction(problem)
    c = q.T @ to_real(hermitize(x))
    c = c + (problem.target - u @ c) * u / (u @ u)
    return from_real(q @ c, problem.dim)


def affine_residual(x: np.ndarray, problem: FloorSdp) -> float:
    y = to_real(hermitize(x))
    if problem.anchored:
        y = y - to_real(hermitize(problem.x0))
    q = problem.null
    off = y - q @ (q.T @ y)
    scale = float(np.linalg.norm(to_real(hermitize(x if not problem.anchored else problem.x0))))
    norm_err = abs(float(np.real(np.vdot(problem.w, x))) - problem.target) / abs(problem.target)
    return max(float(np.linalg.norm(off)) / max(scale, 1e-300), norm_err)


def psd_residual(x: np.ndarray) -> float:
    w = np.linalg.eigvalsh(hermitize(x))
    return max(0.0, -float(w[0])) / max(float(np.abs(w).max()), 1e-300)


def reduce(problem: FloorSdp) -> ReducedSdp:
    """Eliminate the linear constraints; raises EmptyBasisError if nothing can move."""
    if problem.null.shape[1] == 0:
        raise EmptyBasisError("null space of V is trivial")
    u = _normal_direction(problem)
    comp = sla.null_space(u[None, :])  # (k, k-1)
    if problem.anchored:
        x0 = hermitize(problem.x0)
        excess = problem.target - float(np.real(np.vdot(problem.w, x0)))
        xp = x0 + from_real(problem.null @ (excess * u / (u @ u)), problem.dim)
    else:
        xp = project_affine(problem.x0, problem)
    dirs = np.stack([from_real(problem.null @ col, problem.dim) for col in comp.T]) if comp.shape[1] else \
        np.zeros((0, problem.dim, problem.dim), dtype=complex)
    cost = hermitize(problem.cost)
    grad = np.real(np.einsum("ab,kba->k", cost, dirs))
    offset = float(np.real(np.trace(cost @ xp)))
    return ReducedSdp(xp, dirs, grad, offset)


class _Barrier:
    """f(z) = c.z / mu - logdet(A0 + sum z_b A_b) - log(slack0 - tau.z)."""

    def __init__(self, a0, amats, c, tau, slack0):
        self.a0, self.amats, self.c, self.tau, self.slack0 = a0, amats, c, tau, slack0
        self.eye = np.eye(a0.shape[0])

    def matrix(self, z):
        return self.a0 + np.tensordot(z, self.amats, axes=1)

    def value(self, z, mu):
        slack = self.slack0 - self.tau @ z
        if slack <= 0:
            return np.inf
        try:
            chol = np.linalg.cholesky(hermitize(self.matrix(z)))
        except np.linalg.LinAlgError:
            return np.inf
        return float(self.c @ z / mu - 2.0 * np.sum(np.log(np.real(np.diag(chol)))) - np.log(slack))

    def center(self, z, mu, max_steps=60):
        steps = 0
        f = self.value(z, mu)
        while steps < max_steps:
            chol = np.linalg.cholesky(hermitize(self.matrix(z)))
            linv = sla.solve_triangular(chol, self.eye, lower=True)
            k = linv @ self.amats @ linv.conj().T
            kf = k.reshape(k.shape[0], -1)
            slack = self.slack0 - self.tau @ z
            grad = self.c / mu - np.real(np.einsum("kaa->k", k)) + self.tau / slack
            hess = np.real(kf @ kf.conj().T) + np.outer(self.tau, self.tau) / slack**2
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec = -float(grad @ step)
            steps += 1
            if dec / 2 <= 1e-10:
                break
            t = 1.0
            while True:
                fn = self.value(z + t * step, mu)
                if fn <= f - 0.25 * t * dec:
                    break
                t *= 0.5
                if t < 1e-14:
                    return z, steps, False
            z, f = z + t * step, fn
        return z, steps, True


def _phase_one(red: ReducedSdp, cap: float, max_iter: int):
    """Find z with X(z) positive definite; None if no strictly feasible point is found."""
    d = red.xp.shape[0]
    p = red.dirs.shape[0]
    lam_min = float(np.linalg.eigvalsh(hermitize(red.xp))[0])
    scale = max(abs(np.trace(red.xp).real) / d, 1e-12)
    s0 = lam_min - 0.1 * scale - 1e-12
    amats = np.concatenate([red.dirs, -np.eye(d, dtype=complex)[None]], axis=0)
    tau = np.concatenate([np.real(np.einsum("kaa->k", red.dirs)), [0.0]])
    c = np.zeros(p + 1)
    c[-1] = -1.0
    bar = _Barrier(red.xp, amats, c, tau, cap - np.trace(red.xp).real)
    z = np.zeros(p + 1)
    z[-1] = s0
    mu = scale
    used = 0
    while used < max_iter and mu > 1e-14 * scale:
        z, steps, ok = bar.center(z, mu)
        used += steps
        if not ok:
            break
        if z[-1] > 0:
            return z[:-1], used
        mu /= 5.0
    return None, used


def solve(problem: FloorSdp, tol: float = 1e-8, max_iter: int = 2000) -> SdpSolution:
    x0 = hermitize(np.asarray(problem.x0, dtype=complex))
    cost = hermitize(problem.cost)
    obj0 = float(np.real(np.trace(cost @ x0)))
    aff0, psd0 = affine_residual(x0, problem), psd_residual(x0)
    if aff0 > FEASIBILITY_TOL or psd0 > FEASIBILITY_TOL:
        raise InfeasibleWarmStart(f"warm start violates constraints (affine {aff0:.2e}, psd {psd0:.2e})")

    def fallback(msg, iters=0):
        return SdpSolution(x0, obj0, STATUS_FALLBACK, iters, message=msg)

    try:
        red = reduce(problem)
    except EmptyBasisError as exc:
        return fallback(str(exc))
    if red.dirs.shape[0] == 0:
        return fallback("feasible set is a single point")
    if not np.any(red.grad):
        return SdpSolution(x0, obj0, STATUS_OPTIMAL, 0, 0.0, "cost is constant on the feasible set")

    d = problem.dim
    cap = CAP_FACTOR * max(float(np.trace(x0).real), 1.0)
    try:
        z, used = _phase_one(red, cap, max_iter)
        if z is None:
            return fallback("no strictly feasible point found", used)
        tau = np.real(np.einsum("kaa->k", red.dirs))
        bar = _Barrier(red.xp, red.dirs, red.grad, tau, cap - np.trace(red.xp).real)
        mu = abs(obj0) / d + 1.0
        status = STATUS_OPTIMAL
        while True:
            z, steps, ok = bar.center(z, mu)
            used += steps
            obj = red.offset + float(red.grad @ z)
            if not ok:
                return fallback("line search failed", used)
            # (d + 1) * mu bounds the suboptimality of the centered point
            if (d + 1) * mu <= tol * (1.0 + abs(obj)):
                break
            if used >= max_iter:
                status = STATUS_MAX_ITER
                break
            mu /= 5.0
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        return fallback(f"numerical failure: {exc}")
    x = hermitize(bar.matrix(z))
    obj = float(np.real(np.trace(cost @ x)))
    if not np.isfinite(obj) or obj > obj0 + 1e-9 * abs(obj0):
        return fallback("no improvement over warm start", used)
    return SdpSolution(x, obj, status, used, (d + 1) * mu)


def nearest_feasible(x: np.ndarray, problem: FloorSdp, tol: float = 1e-8, max_rounds: int = 500):
    """Alternate affine and PSD projections; returns (X', FeasibilityReport).

    The returned point is PSD; the report carries the remaining affine residual.
    """
    cur = hermitize(np.asarray(x, dtype=complex))
    if affine_residual(cur, problem) <= tol and psd_residual(cur) <= tol:
        return cur, FeasibilityReport(affine_residual(cur, problem), psd_residual(cur), 0, True)
    best, best_res = None, np.inf
    for rnd in range(1, max_rounds + 1):
        y = project_affine(cur, problem)
        w, v = np.linalg.eigh(hermitize(y))
        cur = hermitize((v * np.clip(w, 0.0, None)) @ v.conj().T)
        res = affine_residual(cur, problem)
        if res < best_res:
            best, best_res = cur, res
        if res <= tol:
            return cur, FeasibilityReport(res, 0.0, rnd, True)
    return best, FeasibilityReport(best_res, 0.0, max_rounds, False)
