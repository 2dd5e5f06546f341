import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindspin.linalg import (
    HADAMARD,
    I2,
    X,
    Y,
    Z,
    basis_state,
    check_density,
    check_state,
    embed,
    expm_hermitian,
    fidelity_unitary,
    kron,
    operator_norm,
    partial_trace,
    state_fidelity,
    trace_distance,
)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def test_kron_identities():
    assert np.array_equal(kron(I2, I2), np.eye(4))
    assert np.array_equal(kron(Z, I2), np.diag([1, 1, -1, -1]).astype(complex))


def test_kron_xx_flips_both_bits():
    psi00 = basis_state([0, 0])
    assert np.allclose(kron(X, X) @ psi00, basis_state([1, 1]))


def test_kron_associative():
    rng = np.random.default_rng(0)
    a, b, c = (rng.normal(size=(2, 2)) for _ in range(3))
    assert np.array_equal(kron(kron(a, b), c), kron(a, kron(b, c)))


def test_embed_single_site_examples():
    assert np.array_equal(embed(Z, [0], 2), np.diag([1, 1, -1, -1]).astype(complex))
    assert np.allclose(embed(X, [1], 2) @ basis_state([0, 0]), basis_state([0, 1]))
    assert np.array_equal(embed(Z, [0], 1), Z)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_embed_matches_kron_chain(q):
    for site in range(q):
        direct = kron(np.eye(2**site), kron(X, np.eye(2 ** (q - 1 - site))))
        assert np.allclose(embed(X, [site], q), direct)


def test_embed_two_site_reversed_targets():
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    u = embed(cnot, [2, 0], 3)  # control on site 2, target on site 0
    out = u @ basis_state([0, 1, 1])
    assert np.allclose(out, basis_state([1, 1, 1]))


def test_embed_rejects_bad_targets():
    with pytest.raises(ValueError):
        embed(np.eye(4), [0, 0], 2)
    with pytest.raises(ValueError):
        embed(X, [2], 2)


def test_expm_analytic_cases():
    assert np.allclose(expm_hermitian(Z, np.pi / 2), np.diag([-1j, 1j]))
    assert np.allclose(expm_hermitian(X, 0.0), I2)
    assert np.allclose(expm_hermitian(X, np.pi), -I2, atol=1e-12)


def test_expm_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expm_hermitian(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


@settings(deadline=None, max_examples=20)
@given(st.integers(1, 3), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_expm_group_properties(q, s, t, seed):
    h = random_hermitian(np.random.default_rng(seed), 2**q)
    u, v = expm_hermitian(h, s), expm_hermitian(h, t)
    assert operator_norm(u @ expm_hermitian(h, -s) - np.eye(2**q)) < 1e-9
    assert operator_norm(u @ v - expm_hermitian(h, s + t)) < 1e-9


def test_expm_inverse_dim64():
    h = random_hermitian(np.random.default_rng(7), 64)
    u = expm_hermitian(h, 1.3)
    assert operator_norm(u @ expm_hermitian(h, -1.3) - np.eye(64)) < 1e-9


def test_operator_norm_cases():
    assert operator_norm(np.eye(4)) == pytest.approx(1.0)
    assert operator_norm(2 * Z) == pytest.approx(2.0)
    assert operator_norm(np.zeros((4, 4))) == 0.0


def test_operator_norm_of_unitary_is_one():
    h = random_hermitian(np.random.default_rng(3), 16)
    assert operator_norm(expm_hermitian(h, 0.7)) == pytest.approx(1.0, abs=1e-9)


def test_partial_trace_product_and_bell():
    psi00 = basis_state([0, 0])
    rho = np.outer(psi00, psi00.conj())
    assert np.allclose(partial_trace(rho, {0}, 2), np.diag([1, 0]))

    bell = (basis_state([0, 0]) + basis_state([1, 1])) / np.sqrt(2)
    rho_b = np.outer(bell, bell.conj())
    assert np.allclose(partial_trace(rho_b, {0}, 2), np.eye(2) / 2)

    rng = np.random.default_rng(5)
    a = check_density(_random_density(rng, 2))
    b = check_density(_random_density(rng, 2))
    assert np.allclose(partial_trace(kron(a, b), {0}, 2), a)
    assert np.allclose(partial_trace(kron(a, b), {1}, 2), b)


def _random_density(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


@settings(deadline=None, max_examples=20)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_partial_trace_preserves_trace_and_psd(q, seed):
    rng = np.random.default_rng(seed)
    rho = _random_density(rng, 2**q)
    keep = sorted(rng.choice(q, size=rng.integers(1, q + 1), replace=False))
    red = partial_trace(rho, keep, q)
    assert abs(np.trace(red).real - 1.0) < 1e-10
    assert np.linalg.eigvalsh(red).min() > -1e-9


def test_partial_trace_empty_keep_rejected():
    with pytest.raises(ValueError):
        partial_trace(np.eye(4) / 4, set(), 2)


def test_fidelity_unitary():
    u = expm_hermitian(random_hermitian(np.random.default_rng(2), 4), 0.3)
    assert fidelity_unitary(u, u) == pytest.approx(1.0)
    assert fidelity_unitary(u, np.exp(1j * 0.77) * u) == pytest.approx(1.0)
    assert fidelity_unitary(I2, X) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        fidelity_unitary(I2, np.eye(4))


def test_state_and_density_checks():
    check_state(basis_state([0, 1]))
    with pytest.raises(ValueError):
        check_state(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        check_density(np.array([[1.5, 0], [0, -0.5]]))


def test_trace_distance():
    assert trace_distance(np.diag([1.0, 0]), np.diag([1.0, 0])) == pytest.approx(0.0)
    assert trace_distance(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(1.0)
    plus = HADAMARD @ np.array([1, 0])
    rho = np.outer(plus, plus.conj())
    assert trace_distance(rho, np.eye(2) / 2) == pytest.approx(0.5)
