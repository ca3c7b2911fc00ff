import numpy as np
import pytest

from uqdiscord import randgen
from uqdiscord.qcore import DensityOperator, PureState


def test_haar_pure_is_deterministic_per_seed():
    a = randgen.haar_pure((2, 2, 2), seed=11, stream=3)
    b = randgen.haar_pure((2, 2, 2), seed=11, stream=3)
    assert np.array_equal(a.vector, b.vector)


def test_distinct_seeds_give_distinct_states():
    vecs = [randgen.haar_pure((2, 2), seed=s).vector for s in range(100)]
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            assert not np.allclose(vecs[i], vecs[j])


def test_streams_are_independent():
    a = randgen.haar_pure((2, 2), seed=1, stream=0)
    b = randgen.haar_pure((2, 2), seed=1, stream=1)
    assert not np.allclose(a.vector, b.vector)


def test_haar_pure_norm_and_labels():
    for s in range(50):
        psi = randgen.haar_pure((2, 3, 2), seed=s)
        assert abs(np.linalg.norm(psi.vector) - 1) <= 1e-12
        assert psi.labels == ("A", "B", "C")


def test_mean_reduced_purity_of_haar_two_qubit_states():
    # E Tr(rho_A^2) = (dA + dB) / (dA dB + 1) = 4/5 for Haar 2x2 pure states
    purities = []
    for i in range(10_000):
        v = randgen.haar_pure((2, 2), seed=2024, stream=i).vector.reshape(2, 2)
        ra = v @ v.conj().T
        purities.append(np.trace(ra @ ra).real)
    assert np.mean(purities) == pytest.approx(0.8, abs=0.02)


def test_haar_statistics_invariant_under_fixed_unitary():
    # first and second moments of |<0|U psi>|^2 match those of |<0|psi>|^2
    u = randgen.haar_unitary(4, seed=99)
    raw, rotated = [], []
    for i in range(4000):
        v = randgen.haar_pure((2, 2), seed=7, stream=i).vector
        raw.append(abs(v[0]) ** 2)
        rotated.append(abs((u @ v)[0]) ** 2)
    # Dirichlet(1,1,1,1) marginal: mean 1/4, variance 3/80
    for xs in (raw, rotated):
        assert np.mean(xs) == pytest.approx(0.25, abs=0.01)
        assert np.var(xs) == pytest.approx(3 / 80, abs=0.005)


def test_haar_unitary_is_unitary():
    u = randgen.haar_unitary(5, seed=3)
    assert np.allclose(u.conj().T @ u, np.eye(5), atol=1e-12)


@pytest.mark.parametrize("rank", [1, 2, 3, 4])
def test_random_density_rank(rank):
    rho = randgen.random_density((2, 2), rank, seed=rank)
    assert isinstance(rho, DensityOperator)
    assert rho.rank() == rank
    assert abs(np.trace(rho.matrix).real - 1) <= 1e-12


def test_random_density_full_rank_is_positive_definite():
    rho = randgen.random_density((2, 3), 6, seed=8)
    assert np.linalg.eigvalsh(rho.matrix).min() > 0


def test_random_density_rank_one_is_pure():
    rho = randgen.random_density((2, 2), 1, seed=8)
    assert np.trace(rho.matrix @ rho.matrix).real == pytest.approx(1.0, abs=1e-12)


def test_fixtures_are_textbook_states():
    ghz = randgen.ghz().vector
    assert np.allclose(ghz, np.array([1, 0, 0, 0, 0, 0, 0, 1]) / np.sqrt(2))
    w = randgen.w_state().vector
    expected = np.zeros(8)
    expected[[4, 2, 1]] = 1 / np.sqrt(3)
    assert np.allclose(w, expected)
    bell = randgen.bell().vector
    assert np.allclose(randgen.werner(1.0).matrix, np.outer(bell, bell.conj()))
    assert np.allclose(randgen.werner(0.0).matrix, np.eye(4) / 4)


def test_werner_rejects_out_of_range():
    with pytest.raises(ValueError):
        randgen.werner(1.5)


def test_family_lookup():
    assert isinstance(randgen.family("ghz"), PureState)
    assert randgen.family("werner", p=0.3).dims == (2, 2)
    with pytest.raises(ValueError):
        randgen.family("nope")


def test_sampler_spec_validation_and_draws():
    with pytest.raises(ValueError):
        randgen.SamplerSpec((2, 2), count=0)
    with pytest.raises(ValueError):
        randgen.SamplerSpec((2, 2), kind="hs-mixed", rank=5)
    spec = randgen.SamplerSpec((2, 2), kind="hs-mixed", seed=4, count=3, rank=2)
    states = list(spec)
    assert len(states) == 3
    assert np.array_equal(states[1].matrix, spec.draw(1).matrix)
    assert all(s.rank() == 2 for s in states)
