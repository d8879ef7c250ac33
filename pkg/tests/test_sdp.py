import numpy as np
import pytest
import scipy.linalg as sla

from mpchannel import hamiltonian as ham
from mpchannel import mpc, sdp, tp
from mpchannel.sweep import Environment
from mpchannel.tensor import random_density, random_hermitian
from mpchannel.verify import random_tp_instance


def floor_problem(rng, m=1, n=3):
    phi = random_tp_instance(rng, n=n)
    bc = tp.BoundaryContractions.build(phi)
    h = ham.heisenberg(n, field=0.7)
    env = Environment(phi, random_density(2**n, rng), h)
    v = tp.variance_matrix(phi, m, bc)
    prob = sdp.FloorSdp(env.tensor(phi, m), tp.null_basis(v), tp.normalization_vector(phi, m, bc), float(2**n),
                        phi.cores[m])
    return prob, v


def scs_oracle(prob, v):
    """Independent conic solve of the same floor problem (SCS, tight tolerances)."""
    cp = pytest.importorskip("cvxpy")
    dim = prob.dim
    x = cp.Variable((dim, dim), hermitian=True)
    comp = sla.null_space(prob.null.T)
    basis = tp._basis_flat(dim)
    yr = cp.real(basis.conj() @ cp.vec(x, order="C"))
    cons = [comp.T @ yr == 0, cp.real(cp.trace(prob.w.conj().T @ x)) == prob.target, x >> 0,
            cp.real(cp.trace(x)) <= sdp.CAP_FACTOR * np.trace(prob.x0).real]
    p = cp.Problem(cp.Minimize(cp.real(cp.trace(prob.cost @ x))), cons)
    p.solve(solver=cp.SCS, eps=1e-11, max_iters=200_000)
    return p.value


def test_toy_problem_analytic():
    prob = sdp.FloorSdp(np.diag([1.0, -1.0]).astype(complex), np.eye(4), np.eye(2, dtype=complex), 1.0,
                        np.eye(2, dtype=complex) / 2)
    sol = sdp.solve(prob)
    assert sol.status == sdp.STATUS_OPTIMAL
    assert sol.objective == pytest.approx(-1, abs=1e-7)
    assert np.allclose(sol.x, np.diag([0, 1]), atol=1e-6)


def test_zero_cost_keeps_feasible_point(rng):
    prob, _ = floor_problem(rng)
    prob.cost = np.zeros_like(prob.cost)
    sol = sdp.solve(prob)
    assert sol.objective == 0
    assert sdp.affine_residual(sol.x, prob) <= 1e-9 and sdp.psd_residual(sol.x) <= 1e-9


def test_trivial_variance_gives_full_basis():
    assert tp.null_basis(np.zeros((16, 16))).shape == (16, 16)


def test_warm_start_in_span(rng):
    phi = mpc.identity_mpc(3, 2)
    bc = tp.BoundaryContractions.build(phi)
    prob = sdp.FloorSdp(random_hermitian(16, rng), tp.null_basis(tp.variance_matrix(phi, 1, bc)),
                        tp.normalization_vector(phi, 1, bc), 8.0, phi.cores[1])
    assert np.linalg.norm(sdp.project_affine(prob.x0, prob) - prob.x0) <= 1e-10


def test_reduced_points_are_in_the_null_space(rng):
    prob, v = floor_problem(rng)
    red = sdp.reduce(prob)
    x = red.xp + np.tensordot(rng.normal(size=red.dirs.shape[0]), red.dirs, axes=1)
    assert np.linalg.norm(v @ x.reshape(-1)) <= 1e-9 * np.linalg.norm(v, 2) * np.linalg.norm(x)
    assert np.vdot(prob.w, x).real == pytest.approx(prob.target, rel=1e-10)


def test_matches_independent_conic_solver(rng):
    prob, v = floor_problem(rng)
    assert prob.dim == 16
    sol = sdp.solve(prob)
    assert sol.status == sdp.STATUS_OPTIMAL
    ref = scs_oracle(prob, v)
    assert abs(sol.objective - ref) <= 1e-6 * max(1.0, abs(ref))
    assert sdp.affine_residual(sol.x, prob) <= 1e-8
    assert np.linalg.eigvalsh(sol.x).min() >= -1e-10


def test_solution_improves_warm_start_and_is_deterministic(rng):
    prob, _ = floor_problem(rng)
    a, b = sdp.solve(prob), sdp.solve(prob)
    assert a.objective <= np.trace(prob.cost @ prob.x0).real + 1e-12
    assert np.abs(a.x - b.x).max() <= 1e-12


def test_infeasible_warm_start_rejected(rng):
    prob, _ = floor_problem(rng)
    prob.x0 = -prob.x0
    with pytest.raises(sdp.InfeasibleWarmStart):
        sdp.solve(prob)


def test_empty_basis_reported():
    prob = sdp.FloorSdp(np.diag([1.0, -1.0]).astype(complex), np.zeros((4, 0)), np.eye(2, dtype=complex), 1.0,
                        np.eye(2, dtype=complex) / 2)
    with pytest.raises(sdp.EmptyBasisError):
        sdp.reduce(prob)


def test_single_point_feasible_set_keeps_warm_start():
    eye = np.eye(2, dtype=complex)
    null = (tp.to_real(eye) / np.sqrt(2))[:, None]
    prob = sdp.FloorSdp(np.diag([1.0, -1.0]).astype(complex), null, eye, 1.0, eye / 2)
    sol = sdp.solve(prob)
    assert sol.status == sdp.STATUS_FALLBACK and np.array_equal(sol.x, prob.x0)


def test_nearest_feasible_cases(rng):
    prob, _ = floor_problem(rng)
    same, rep = sdp.nearest_feasible(prob.x0, prob)
    assert rep.converged and np.abs(same - prob.x0).max() <= 1e-12
    noisy = prob.x0 + 1e-6 * random_hermitian(prob.dim, rng)
    fixed, rep = sdp.nearest_feasible(noisy, prob)
    assert rep.converged and sdp.affine_residual(fixed, prob) <= 1e-8 and sdp.psd_residual(fixed) <= 1e-8
    start, rep = sdp.nearest_feasible(np.zeros_like(prob.x0), prob)
    assert rep.converged
    assert np.vdot(prob.w, start).real == pytest.approx(prob.target, rel=1e-8)
    assert np.linalg.eigvalsh(start).min() >= -1e-12


def test_anchored_problem_keeps_off_span_component(rng):
    prob, _ = floor_problem(rng)
    # drop one basis direction that the warm start uses
    y = tp.to_real(prob.x0)
    coef = prob.null.T @ y
    keep = np.ones(prob.null.shape[1], bool)
    keep[np.argmax(np.abs(coef))] = False
    prob.null = prob.null[:, keep]
    with pytest.raises(sdp.InfeasibleWarmStart):
        sdp.solve(prob)
    prob.anchored = True
    sol = sdp.solve(prob)
    assert sol.status == sdp.STATUS_OPTIMAL and sol.objective < np.trace(prob.cost @ prob.x0).real
    step = tp.to_real(sol.x - prob.x0)
    assert np.linalg.norm(step - prob.null @ (prob.null.T @ step)) <= 1e-9 * np.linalg.norm(y)
    assert sdp.affine_residual(sol.x, prob) <= 1e-9 and sdp.psd_residual(sol.x) <= 1e-9
