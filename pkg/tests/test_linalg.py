import numpy as np
import pytest
from hypothesis import given, strategies as st

from modmesh.errors import DegenerateMeasurementError, DimensionError, ModeIndexError
from modmesh.linalg import (
    amplitude_fidelity,
    column_normalize,
    dft_matrix,
    embed_two_mode,
    haar_random_unitary,
    intensities,
    is_unitary,
    spawn_seeds,
    unitarity_error,
)

seeds = st.integers(0, 2**32 - 1)


def test_haar_one_mode_is_a_phase():
    u = haar_random_unitary(1, seed=3)
    assert u.shape == (1, 1)
    assert abs(abs(u[0, 0]) - 1.0) < 1e-15


def test_haar_three_modes_seed7_unitary_and_deterministic():
    a = haar_random_unitary(3, seed=7)
    b = haar_random_unitary(3, seed=7)
    assert unitarity_error(a) < 1e-10
    assert np.array_equal(a, b)


def test_haar_zero_modes_rejected():
    with pytest.raises(DimensionError):
        haar_random_unitary(0, seed=1)


@pytest.mark.parametrize("n", range(1, 21))
def test_haar_unitary_many_seeds(n):
    for s in range(100):
        assert unitarity_error(haar_random_unitary(n, s)) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 5])
def test_haar_first_entry_mean(n):
    # Haar invariance: E|M00|^2 = 1/n, Var = (n-1)/(n^2 (n+1))
    m = 20000
    rng = np.random.default_rng(99)
    x = np.array([abs(haar_random_unitary(n, rng)[0, 0]) ** 2 for _ in range(m)])
    se = np.sqrt((n - 1) / (n**2 * (n + 1)) / m)
    assert abs(x.mean() - 1.0 / n) < 3 * se


def test_haar_phase_fix_removes_qr_bias():
    # without the rephasing the diagonal of Q from LAPACK would be biased;
    # with it, the mean of M00 itself vanishes
    rng = np.random.default_rng(5)
    z = np.array([haar_random_unitary(2, rng)[0, 0] for _ in range(20000)])
    assert abs(z.mean()) < 4 * np.sqrt(0.5 / 20000)


def test_embed_identity():
    assert np.array_equal(embed_two_mode(3, 0, np.eye(2)), np.eye(3))


def test_embed_cross_block():
    t = np.array([[0, 1j], [1j, 0]])
    m = embed_two_mode(3, 1, t)
    expected = np.array([[1, 0, 0], [0, 0, 1j], [0, 1j, 0]])
    assert np.array_equal(m, expected)


def test_embed_out_of_range():
    with pytest.raises(ModeIndexError):
        embed_two_mode(3, 2, np.eye(2))
    with pytest.raises(ModeIndexError):
        embed_two_mode(3, -1, np.eye(2))


@given(seeds)
def test_embed_preserves_unitarity(s):
    t = haar_random_unitary(2, s)
    assert is_unitary(embed_two_mode(4, 2, t))


@given(seeds, st.integers(4, 10))
def test_disjoint_embeddings_commute(s, n):
    a, b = haar_random_unitary(2, s), haar_random_unitary(2, s + 1)
    ea, eb = embed_two_mode(n, 0, a), embed_two_mode(n, 2, b)
    assert np.array_equal(ea @ eb, eb @ ea)


@given(seeds, st.integers(1, 8))
def test_self_fidelity_is_one(s, n):
    u = haar_random_unitary(n, s)
    assert abs(amplitude_fidelity(intensities(u), u) - 1.0) < 1e-12


def test_identity_vs_dft_fidelity():
    # each column: sum_i sqrt(delta_ij * 1/3) = 1/sqrt(3)
    f = amplitude_fidelity(np.eye(3), dft_matrix(3))
    assert abs(f - 1 / np.sqrt(3)) < 1e-12


def test_dft_is_unitary_and_flat():
    f = dft_matrix(5)
    assert is_unitary(f)
    assert np.allclose(np.abs(f) ** 2, 0.2)


def test_fidelity_continuity():
    u = haar_random_unitary(4, 11)
    h = haar_random_unitary(4, 12)
    h = (h + h.conj().T) / 2
    prev = 0.0
    for eps in [0.3, 0.1, 0.03, 0.01, 0.0]:
        w, v = np.linalg.eigh(h)
        up = u @ (v @ np.diag(np.exp(1j * eps * w)) @ v.conj().T)
        f = amplitude_fidelity(intensities(up), u)
        assert f >= prev - 1e-12
        prev = f
        if eps > 0:
            assert f < 1.0
    assert abs(prev - 1.0) < 1e-12


@given(seeds, seeds, st.permutations(range(4)))
def test_fidelity_symmetric_and_permutation_invariant(s1, s2, perm):
    u, v = haar_random_unitary(4, s1), haar_random_unitary(4, s2)
    f_uv = amplitude_fidelity(intensities(u), v)
    f_vu = amplitude_fidelity(intensities(v), u)
    assert abs(f_uv - f_vu) < 1e-12
    p = list(perm)
    f_perm = amplitude_fidelity(intensities(u)[:, p], v[:, p])
    assert abs(f_uv - f_perm) < 1e-12
    assert 0.0 <= f_uv <= 1.0


def test_fidelity_ignores_column_scaling():
    u = haar_random_unitary(3, 2)
    p = intensities(u) * np.array([0.1, 0.5, 2.0])
    assert abs(amplitude_fidelity(p, u) - 1.0) < 1e-12


def test_fidelity_zero_column_rejected():
    p = np.eye(3)
    p[:, 1] = 0
    with pytest.raises(DegenerateMeasurementError):
        amplitude_fidelity(p, np.eye(3))


def test_column_normalize_sums_to_one():
    p = np.abs(np.random.default_rng(0).standard_normal((4, 4)))
    assert np.allclose(column_normalize(p).sum(axis=0), 1.0, atol=1e-12)


def test_unitarity_error_requires_square():
    with pytest.raises(DimensionError):
        unitarity_error(np.ones((2, 3)))


def test_spawn_seeds_are_independent_and_reproducible():
    a = [np.random.default_rng(s).random() for s in spawn_seeds(4, 3)]
    b = [np.random.default_rng(s).random() for s in spawn_seeds(4, 3)]
    assert a == b
    assert len(set(a)) == 3
