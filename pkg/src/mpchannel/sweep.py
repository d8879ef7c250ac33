"""Sweeping optimization of an MPC between a training quasistate and a Hamiltonian."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sdp, tp
from .hamiltonian import PauliHamiltonian
from .mpc import Mpc, apply, init_identity_perturbation
from .povm import QuasiState, energy_estimate
from .tensor import hermitize, svd_split

log = logging.getLogger(__name__)

# improvements smaller than this (relative) are treated as round-off when accepting
ACCEPT_TOL = 1e-9
# per-update bound on ||Phi^dagger[I] - I||_F / sqrt(d^N); the moment estimate is good to ~1e-8
MAX_FLOOR_DEVIATION = 1e-7
STATUS_BACKTRACKED = "backtracked"


def backtrack(phi: Mpc, m: int, bc: tp.BoundaryContractions, x0: np.ndarray, x1: np.ndarray,
              limit: float = MAX_FLOOR_DEVIATION) -> float:
    """Largest ``t`` in [0, 1] keeping ``x0 + t (x1 - x0)`` within ``limit`` of trace preservation.

    ``||F - I||^2`` is quadratic in ``t``, so three moment evaluations pin it down.
    A linear cost makes any such ``t`` an improvement on ``x0``.
    """
    dim = phi.d**phi.n

    def g(t):
        tr1, tr2 = tp.moments(phi, m, bc, x0 + t * (x1 - x0))
        return tr2 - 2 * tr1 + dim

    g0, gh, g1 = g(0.0), g(0.5), g(1.0)
    bound = dim * max(limit, np.sqrt(max(g0, 0.0) / dim)) ** 2
    if g1 <= bound:
        return 1.0
    a = 2 * g1 - 4 * gh + 2 * g0
    b = g1 - g0 - a
    if a <= 0:
        return 0.0
    disc = b * b - 4 * a * (g0 - bound)
    t = 0.0 if disc < 0 else min(1.0, max(0.0, (-b + np.sqrt(disc)) / (2 * a)))
    while t > 1e-6 and g(t) > bound:
        t *= 0.5
    return t if t > 1e-6 else 0.0


def _dummy(b: int) -> np.ndarray:
    return np.eye(b, dtype=complex) / np.sqrt(b)


def state_mpo(rho: np.ndarray, n: int, d: int = 2) -> list[np.ndarray]:
    """Exact MPO of a dense operator by successive SVDs; tensors (left, ket, bra, right).

    Only singular values that are zero to machine precision are dropped.
    """
    t = np.asarray(rho, dtype=complex).reshape((d,) * (2 * n))
    order = [a for q in range(n) for a in (q, n + q)]
    rest = np.transpose(t, order).reshape(1, -1)
    out = []
    for _ in range(n - 1):
        left = rest.shape[0]
        u, s, vh = svd_split(rest.reshape(left * d * d, -1), rel_tol=1e-15)
        out.append(u.reshape(left, d, d, -1))
        rest = s[:, None] * vh
    out.append(rest.reshape(rest.shape[0], d, d, 1))
    return out


class Environment:
    """Cached left/right contractions of ``tr[H Phi(rho_tr)]`` around one floor.

    ``left[m]`` holds floors ``0..m-1`` and ``right[m]`` floors ``m..N-1``,
    one slice per Pauli term.
    """

    def __init__(self, phi: Mpc, rho_tr, h: PauliHamiltonian):
        mat = rho_tr.matrix if isinstance(rho_tr, QuasiState) else np.asarray(rho_tr)
        if h.n != phi.n or mat.shape != (phi.d**phi.n,) * 2:
            raise ValueError("Hamiltonian, quasistate and MPC sizes do not match")
        n = phi.n
        self.n = n
        self.rho = state_mpo(mat, n, phi.d)
        self.ops = h.site_operators()
        self.coeffs = h.coeffs.astype(complex)
        nt = len(self.coeffs)
        self.left = [None] * (n + 1)
        self.right = [None] * (n + 1)
        self.left_src = [None] * n
        self.right_src = [None] * n
        self.left[0] = np.broadcast_to(_dummy(phi.bonds[0])[None, :, :, None], (nt, phi.bonds[0], phi.bonds[0], 1)).copy()
        self.right[n] = np.broadcast_to(_dummy(phi.bonds[-1])[None, :, :, None], (nt, phi.bonds[-1], phi.bonds[-1], 1)).copy()
        for m in range(n):
            self.update_left(phi, m)
        for m in range(n - 1, -1, -1):
            self.update_right(phi, m)

    def update_left(self, phi: Mpc, m: int) -> None:
        self.left[m + 1] = np.einsum("tlLa,ijlxIJLy,ajJb,tIi->txyb", self.left[m], phi.core_tensor(m), self.rho[m],
                                     self.ops[:, m], optimize=True)
        self.left_src[m] = phi.cores[m]

    def update_right(self, phi: Mpc, m: int) -> None:
        self.right[m] = np.einsum("ijlxIJLy,ajJb,tIi,txyb->tlLa", phi.core_tensor(m), self.rho[m], self.ops[:, m],
                                  self.right[m + 1], optimize=True)
        self.right_src[m] = phi.cores[m]

    def check(self, phi: Mpc, m: int) -> None:
        for k in range(m):
            if not tp._same(self.left_src[k], phi.cores[k]):
                raise tp.StaleCacheError(f"left environment at floor {m} is stale (core {k} changed)")
        for k in range(m + 1, self.n):
            if not tp._same(self.right_src[k], phi.cores[k]):
                raise tp.StaleCacheError(f"right environment at floor {m} is stale (core {k} changed)")

    def tensor(self, phi: Mpc, m: int) -> np.ndarray:
        """Hermitian ``E`` with training energy ``tr[E X^[m]]``."""
        self.check(phi, m)
        e = np.einsum("t,tlLa,ajJb,tIi,txyb->IJLyijlx", self.coeffs, self.left[m], self.rho[m], self.ops[:, m],
                      self.right[m + 1], optimize=True)
        dim = phi.core_dim(m)
        return hermitize(e.reshape(dim, dim))

    def energy(self, phi: Mpc, m: int = 0) -> float:
        return float(np.real(np.trace(self.tensor(phi, m) @ phi.cores[m])))


def environment(phi: Mpc, rho_tr, h: PauliHamiltonian, m: int) -> np.ndarray:
    """One-off environment tensor of floor ``m`` (builds all caches)."""
    return Environment(phi, rho_tr, h).tensor(phi, m)


@dataclass
class SweepConfig:
    r: int = 2
    eta: float = 0.05
    max_sweeps: int = 10
    patience: int = 2
    seed: int = 0
    null_cutoff: float = tp.NULL_CUTOFF
    sdp_tol: float = 1e-8

    def __post_init__(self):
        if self.r < 1 or self.max_sweeps < 0 or self.patience < 1 or self.eta < 0:
            raise ValueError(f"invalid sweep configuration {self}")


@dataclass
class TrajectoryRecord:
    sweep: int
    floor: int
    direction: str
    e_train: float
    e_val: float
    tp_residual_v: float
    tp_residual_norm: float
    solver_status: str


CSV_COLUMNS = [f for f in TrajectoryRecord.__dataclass_fields__]


@dataclass
class SweepResult:
    records: list[TrajectoryRecord]
    e_est: float
    e_init_train: float
    e_init_val: float
    best_val: float
    best_mpc: Mpc
    best_sweep: int
    accepted: bool
    sweeps_run: int
    stop_reason: str
    final_mpc: Mpc = field(repr=False, default=None)

    @property
    def initial_jolt(self) -> float:
        return self.e_init_val - self.e_est

    def summary(self) -> dict:
        return {
            "e_est": self.e_est,
            "e_init_train": self.e_init_train,
            "e_init_val": self.e_init_val,
            "initial_jolt": self.initial_jolt,
            "best_val": self.best_val,
            "best_sweep": self.best_sweep,
            "accepted": self.accepted,
            "sweeps_run": self.sweeps_run,
            "stop_reason": self.stop_reason,
            "final_train": self.records[-1].e_train if self.records else self.e_init_train,
        }


def write_trajectory_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for rec in records:
            w.writerow(asdict(rec))


class SweepState:
    """An MPC with consistent boundary and environment caches."""

    def __init__(self, phi: Mpc, rho_tr, h: PauliHamiltonian, config: SweepConfig | None = None):
        self.phi = phi
        self.h = h
        self.config = config or SweepConfig()
        self.bc = tp.BoundaryContractions.build(phi)
        self.env = Environment(phi, rho_tr, h)
        self.target = float(phi.d**phi.n)

    def train_energy(self) -> float:
        return self.env.energy(self.phi, 0)

    def floor_update(self, m: int, direction: str):
        """Solve the floor SDP at ``m`` and refresh the caches on the leading side.

        Returns ``(e_train, criterion_after, status)``.
        """
        phi = self.phi
        v = tp.variance_matrix(phi, m, self.bc)
        problem = sdp.FloorSdp(
            cost=self.env.tensor(phi, m),
            null=tp.null_basis(v, self.config.null_cutoff),
            w=tp.normalization_vector(phi, m, self.bc),
            target=self.target,
            x0=phi.cores[m],
            anchored=tp.tp_criterion(phi, m, self.bc, v).holds,
        )
        status = None
        if sdp.affine_residual(problem.x0, problem) > sdp.FEASIBILITY_TOL or sdp.psd_residual(problem.x0) > sdp.FEASIBILITY_TOL:
            repaired, report = sdp.nearest_feasible(problem.x0, problem)
            if report.converged:
                problem.x0 = repaired
            else:
                log.warning("floor %d: drift repair did not converge (%s)", m, report)
                status = sdp.STATUS_FALLBACK
        if status is None:
            sol = sdp.solve(problem, tol=self.config.sdp_tol)
            status = sol.status
            if sol.status == sdp.STATUS_FALLBACK:
                log.info("floor %d: solver fallback (%s)", m, sol.message)
            x = sol.x
            if status != sdp.STATUS_FALLBACK and tp.deviation(phi, m, self.bc, x) > MAX_FLOOR_DEVIATION:
                t = backtrack(phi, m, self.bc, problem.x0, x)
                log.info("floor %d: step shortened to t = %.3g to stay trace preserving", m, t)
                x = problem.x0 + t * (x - problem.x0)
                status = STATUS_BACKTRACKED
            self.phi = phi.replace(m, x)
        if direction == "down":
            self.bc.update_top(self.phi, m)
            self.env.update_left(self.phi, m)
        else:
            self.bc.update_bottom(self.phi, m)
            self.env.update_right(self.phi, m)
        crit = tp.tp_criterion(self.phi, m, self.bc, v)
        e_train = float(np.real(np.trace(problem.cost @ self.phi.cores[m])))
        return e_train, crit, status


def sweep_floors(n: int, direction: str) -> list[int]:
    if n == 1:
        return [0]
    return list(range(0, n - 1)) if direction == "down" else list(range(n - 1, 0, -1))


def run(rho_tr, rho_val, h: PauliHamiltonian, config: SweepConfig | None = None, init: Mpc | None = None,
        progress=None) -> SweepResult:
    """Alternate down/up sweeps until validation stalls for ``patience`` sweeps."""
    config = config or SweepConfig()
    mat_val = rho_val.matrix if isinstance(rho_val, QuasiState) else np.asarray(rho_val)
    mat_tr = rho_tr.matrix if isinstance(rho_tr, QuasiState) else np.asarray(rho_tr)
    n = h.n
    if mat_val.shape != (2**n, 2**n) or mat_tr.shape != mat_val.shape:
        raise ValueError("quasistates do not match the Hamiltonian size")

    def validate(phi: Mpc) -> float:
        return energy_estimate(apply(phi, mat_val), h)

    e_est = energy_estimate(mat_val, h)
    phi = init if init is not None else init_identity_perturbation(n, config.r, config.eta, config.seed)
    state = SweepState(phi, mat_tr, h, config)
    e_init_train = state.train_energy()
    e_init_val = validate(phi)
    best_val, best_mpc, best_sweep = e_init_val, phi, -1
    records: list[TrajectoryRecord] = []
    stale = 0
    stop_reason = "max_sweeps"
    sweeps_run = 0
    for s in range(config.max_sweeps):
        direction = "down" if s % 2 == 0 else "up"
        improved = False
        for m in sweep_floors(n, direction):
            e_train, crit, status = state.floor_update(m, direction)
            e_val = validate(state.phi)
            rec = TrajectoryRecord(s, m, direction, e_train, e_val, crit.residual_v, crit.residual_norm, status)
            records.append(rec)
            if progress is not None:
                progress(rec)
            if e_val < best_val:
                best_val, best_mpc, best_sweep = e_val, state.phi, s
                improved = True
        sweeps_run = s + 1
        stale = 0 if improved else stale + 1
        if stale >= config.patience:
            stop_reason = "patience"
            break
    return SweepResult(records, e_est, e_init_train, e_init_val, best_val, best_mpc, best_sweep,
                       best_val < e_est - ACCEPT_TOL * max(1.0, abs(e_est)), sweeps_run, stop_reason, state.phi)
