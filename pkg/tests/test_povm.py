import numpy as np
import pytest

from mpchannel import hamiltonian as ham
from mpchannel import povm
from mpchannel.tensor import random_density


@pytest.fixture(scope="module")
def frame():
    return povm.pauli6_povm()


def test_effects_sum_to_identity(frame):
    assert np.abs(frame.effects.sum(axis=0) - np.eye(2)).max() <= 4 * np.finfo(float).eps


def test_duals_match_pseudo_inverse_oracle(frame):
    # frame superoperator on column-stacked 2x2 matrices, inverted directly
    e = frame.effects.reshape(6, 4)
    s = sum(np.outer(v.conj(), v) for v in e).T  # S(X) = sum_k E_k tr[E_k X]
    vecs = e.conj() @ np.eye(4)
    duals = np.array([(np.linalg.pinv(s.T) @ v.conj()).reshape(2, 2) for v in vecs])
    assert np.allclose(frame.duals, duals, atol=1e-12)
    # closed form for this frame: three times the projector minus the identity
    assert np.allclose(frame.duals, 9 * frame.effects - np.eye(2), atol=1e-12)


def test_reconstruct_zero_state(frame):
    rho = np.diag([1.0, 0.0]).astype(complex)
    p = povm.outcome_probabilities(rho, frame)
    assert np.abs(povm.quasistate_from_weights(p, frame, 1) - rho).max() <= 1e-12


def test_maximally_mixed_uniform(frame):
    assert np.allclose(povm.outcome_probabilities(np.eye(2) / 2, frame), 1 / 6)


def test_impossible_outcome_never_drawn(frame):
    rec = povm.sample_shots(np.diag([1.0, 0.0]), frame, 10_000, seed=0)
    assert not np.any(rec.outcomes == 1)


def test_bell_frequencies_within_five_standard_errors(frame):
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    s = 100_000
    p = povm.outcome_probabilities(bell, frame)
    codes, counts = povm.sample_shots(bell, frame, s, seed=7).histogram()
    freq = np.zeros(36)
    freq[codes] = counts / s
    p = np.clip(p, 0, 1)
    se = np.sqrt(p * (1 - p) / s)
    assert np.all(np.abs(freq - p) <= 5 * se + 1e-12)


def test_infinite_shot_weighting_is_exact(frame, rng):
    rho = random_density(8, rng)
    q = povm.quasistate_from_weights(povm.outcome_probabilities(rho, frame), frame, 3)
    assert np.abs(q - rho).max() <= 1e-10
    h = ham.heisenberg(3, field=0.4)
    assert povm.energy_estimate(q, h) == pytest.approx(np.trace(rho @ ham.dense(h)).real, abs=1e-10)


def test_single_shot_gives_dual(frame):
    for k in range(6):
        q = povm.estimate_quasistate(povm.ShotRecord(np.array([[k]])), frame)
        assert np.allclose(q.matrix, frame.duals[k], atol=1e-15)


def test_energy_of_zero_state():
    rho = np.zeros((8, 8))
    rho[0, 0] = 1
    assert povm.energy_estimate(rho, ham.z_field(3)) == pytest.approx(3)


def test_estimator_unbiased(frame, rng):
    rho = random_density(4, rng)
    h = ham.tfim(2)
    exact = np.trace(rho @ ham.dense(h)).real
    est = [povm.energy_estimate(povm.estimate_quasistate(povm.sample_shots(rho, frame, 2000, seed=s), frame), h)
           for s in range(50)]
    assert abs(np.mean(est) - exact) <= 3 * np.std(est, ddof=1) / np.sqrt(len(est))


def test_quasistate_error_scales_as_inverse_sqrt(frame, rng):
    rho = random_density(8, rng)
    sizes = [100, 1000, 10_000]
    errs = []
    for s in sizes:
        errs.append(np.mean([np.linalg.norm(povm.estimate_quasistate(povm.sample_shots(rho, frame, s, seed=1000 * s + k),
                                                                   frame).matrix - rho) for k in range(20)]))
    slope = np.polyfit(np.log10(sizes), np.log10(errs), 1)[0]
    assert -0.65 <= slope <= -0.35


def test_errors(frame):
    with pytest.raises(ValueError):
        povm.sample_shots(np.diag([1.5, -0.5]), frame, 10, seed=0)
    with pytest.raises(ValueError):
        povm.estimate_quasistate(povm.ShotRecord(np.zeros((0, 2), dtype=int)), frame)
    with pytest.raises(ValueError):
        povm.energy_estimate(np.eye(4) / 4, ham.z_field(3))
    with pytest.raises(ValueError):
        povm.ShotRecord(np.array([[6]]))


def test_shot_csv_and_quasistate_round_trip(frame, tmp_path, rng):
    rec = povm.sample_shots(random_density(4, rng), frame, 50, seed=2)
    rec.to_csv(tmp_path / "s.csv")
    back = povm.ShotRecord.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.outcomes, rec.outcomes)
    q = povm.estimate_quasistate(rec, frame)
    q.save(tmp_path / "q.npz")
    q2 = povm.QuasiState.load(tmp_path / "q.npz")
    assert q2.shots == 50 and np.array_equal(q2.matrix, q.matrix)
    assert np.trace(q.matrix).real == pytest.approx(1)
