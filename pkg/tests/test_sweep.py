import csv

import numpy as np
import pytest

from mpchannel import hamiltonian as ham
from mpchannel import mpc, sim, sweep, tp
from mpchannel.povm import energy_estimate
from mpchannel.sweep import Environment, SweepConfig, SweepState
from mpchannel.tensor import random_density, random_hermitian


def zero_state(n):
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1
    return rho


def test_state_mpo_reconstructs(rng):
    rho = random_density(8, rng)
    t = sweep.state_mpo(rho, 3)
    full = np.einsum("aijb,bklc,cmnd->ikmjln", *t).reshape(8, 8)
    assert np.allclose(full, rho, atol=1e-13)


def test_identity_environment_z_field():
    phi = mpc.identity_mpc(3, 2)
    env = Environment(phi, zero_state(3), ham.z_field(3))
    for m in range(3):
        e = env.tensor(phi, m)
        assert np.trace(e @ phi.cores[m]).real == pytest.approx(3)
        assert np.trace(e @ (2 * phi.cores[m])).real == pytest.approx(6)


def test_environment_is_exact_gradient(rng):
    phi = mpc.random_mpc(3, 2, rng)
    rho = random_density(8, rng)
    h = ham.heisenberg(3, field=0.3)
    env = Environment(phi, rho, h)
    for m in range(3):
        y = random_hermitian(phi.core_dim(m), rng)
        eps = 1e-3
        de = (energy_estimate(mpc.apply(phi.replace(m, phi.cores[m] + eps * y), rho), h)
              - energy_estimate(mpc.apply(phi, rho), h)) / eps
        assert np.trace(env.tensor(phi, m) @ y).real == pytest.approx(de, rel=1e-8, abs=1e-10)


def test_environment_errors(rng):
    phi = mpc.random_mpc(3, 2, rng)
    env = Environment(phi, random_density(8, rng), ham.tfim(3))
    with pytest.raises(tp.StaleCacheError):
        env.tensor(phi.replace(2, 2 * phi.cores[2]), 0)
    with pytest.raises(ValueError):
        Environment(phi, random_density(4, rng), ham.tfim(3))


def test_floor_update_decreases_energy_and_stays_tp():
    n = 3
    phi = mpc.init_identity_perturbation(n, 2, 0.1, seed=1)
    rho = sim.simulate(sim.build_ansatz(n, 1, np.zeros(12)), sim.NoiseSpec(0.0, 0.01, 0.01))
    state = SweepState(phi, rho, ham.z_field(n))
    e0 = state.train_energy()
    e1, crit, status = state.floor_update(0, "down")
    assert status == "optimal"
    assert e1 < e0
    assert crit.holds
    assert tp.global_tp_residual(state.phi) <= 1e-7
    for m in (1, 2):
        e2, _, _ = state.floor_update(m, "up" if m == 2 else "down")
        assert e2 <= e1 + 1e-9 * abs(e1)
        e1 = e2
        assert tp.global_tp_residual(state.phi) <= 1e-7


def test_zero_hamiltonian_keeps_zero_energy(rng):
    h = ham.PauliHamiltonian.from_terms([], 3)
    state = SweepState(mpc.init_identity_perturbation(3, 2, 0.05), random_density(8, rng), h)
    e, crit, _ = state.floor_update(1, "down")
    assert e == 0
    assert crit.residual_v <= 1e-7 and crit.residual_norm <= 1e-7


def test_sweep_floor_order():
    assert sweep.sweep_floors(4, "down") == [0, 1, 2]
    assert sweep.sweep_floors(4, "up") == [3, 2, 1]
    assert sweep.sweep_floors(1, "up") == [0]


def test_ground_state_nothing_to_gain(frozen):
    from mpchannel.baselines import exact_ground
    h = ham.tfim(3)
    g = exact_ground(h)
    rho = np.outer(g.vector, g.vector.conj())
    res = sweep.run(rho, rho, h, SweepConfig(eta=0.0, max_sweeps=2))
    assert res.best_val == pytest.approx(g.energy, abs=1e-9)
    assert not res.accepted


def test_tfim_demo_improves(tmp_path, frozen):
    h = ham.tfim(4)
    theta, _ = sim.vqe_optimize(h, 4, 1)
    rho = sim.simulate(sim.build_ansatz(4, 1, theta), sim.NoiseSpec(0.01, 0.5e-3, 1.5e-3, 0))
    res = sweep.run(rho, rho, h, SweepConfig(r=2, max_sweeps=4))
    assert res.best_val < res.e_est
    assert res.accepted
    assert res.best_val >= frozen["tfim4_e0"] - 1e-9
    train = [rec.e_train for rec in res.records]
    assert all(b <= a + 1e-6 * abs(a) for a, b in zip(train, train[1:]))
    sweep.write_trajectory_csv(res.records, tmp_path / "t.csv")
    rows = list(csv.DictReader(open(tmp_path / "t.csv")))
    assert list(rows[0]) == sweep.CSV_COLUMNS and len(rows) == len(res.records)


def test_run_rejects_mismatched_sizes(rng):
    with pytest.raises(ValueError):
        sweep.run(random_density(4, rng), random_density(8, rng), ham.tfim(3))
    with pytest.raises(ValueError):
        SweepConfig(r=0)


def test_backtrack_limits_trace_violation(rng):
    from mpchannel.verify import random_tp_instance
    phi = random_tp_instance(rng)
    m = 1
    bc = tp.BoundaryContractions.build(phi)
    x0 = phi.cores[m]
    assert sweep.backtrack(phi, m, bc, x0, 2 * x0 - x0) == 1.0
    kick = random_hermitian(x0.shape[0], rng)
    x1 = x0 + 1e-2 * np.linalg.norm(x0) / np.linalg.norm(kick) * kick
    assert tp.deviation(phi, m, bc, x1) > 1e-4
    t = sweep.backtrack(phi, m, bc, x0, x1)
    assert 0 < t < 1
    assert tp.deviation(phi, m, bc, x0 + t * (x1 - x0)) <= sweep.MAX_FLOOR_DEVIATION * (1 + 1e-6)


def test_deviation_matches_dense(rng):
    phi = mpc.random_mpc(3, 2, rng)
    bc = tp.BoundaryContractions.build(phi)
    for m in range(3):
        assert tp.deviation(phi, m, bc) == pytest.approx(tp.global_tp_residual(phi), rel=1e-9)
