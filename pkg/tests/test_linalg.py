import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qembench import linalg
from qembench.linalg import I2, X, Y, Z
from qembench.noise import make_channel


def test_matmul_identity_and_paulis():
    m = np.array([[1 + 2j, 3], [4j, -1]])
    assert linalg.allclose(linalg.matmul(I2, m), m)
    assert linalg.allclose(linalg.matmul(X, X), I2)
    assert linalg.allclose(linalg.matmul(X, Z), [[0, -1], [1, 0]])
    assert linalg.allclose(linalg.matmul(X, Z), -1j * Y)


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError, match="2x3.*2x2"):
        linalg.matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_dagger():
    assert linalg.allclose(linalg.dagger(I2), I2)
    assert linalg.allclose(linalg.dagger(Y), Y)
    e1 = make_channel("amplitude_damping", 0.5).kraus[1]
    assert linalg.allclose(linalg.dagger(e1), [[0, 0], [np.sqrt(0.5), 0]])


def test_kron():
    assert linalg.allclose(linalg.kron(I2, I2), np.eye(4))
    rho00 = linalg.ket_density("00")
    xi = linalg.kron(X, I2)
    assert linalg.allclose(xi @ rho00 @ xi.conj().T, linalg.ket_density("10"))
    assert np.allclose(np.diag(linalg.kron(Z, Z)), [1, -1, -1, 1])


def test_trace():
    assert linalg.trace(np.eye(8)) == 8
    assert linalg.trace(linalg.ket_density("0")) == 1
    assert linalg.trace(X) == 0
    with pytest.raises(ValueError):
        linalg.trace(np.ones((2, 3)))


def test_partial_trace():
    assert linalg.allclose(linalg.partial_trace(linalg.ket_density("00"), [0], 2), linalg.ket_density("0"))
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    rho = np.outer(bell, bell.conj())
    assert linalg.allclose(linalg.partial_trace(rho, [0], 2), I2 / 2)
    rng = np.random.default_rng(0)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    assert linalg.allclose(linalg.partial_trace(a, [0, 1, 2], 3), a)
    with pytest.raises(ValueError):
        linalg.partial_trace(rho, [2], 2)


def test_partial_trace_keeps_order_of_qubits():
    rho = linalg.kron(linalg.ket_density("1"), linalg.ket_density("0"), linalg.ket_density("1"))
    assert linalg.allclose(linalg.partial_trace(rho, [0, 2], 3), linalg.ket_density("11"))
    assert linalg.allclose(linalg.partial_trace(rho, [1], 3), linalg.ket_density("0"))


def test_embed_matches_kron():
    assert linalg.allclose(linalg.embed(X, [1], 3), linalg.kron(I2, X, I2))
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    assert linalg.allclose(linalg.embed(cz, [0, 1], 3), linalg.kron(cz, I2))
    # reversed targets swap the roles of the operator's factors
    assert linalg.allclose(linalg.embed(linalg.kron(X, Z), [1, 0], 2), linalg.kron(Z, X))


_cplx = arrays(np.complex128, (2, 2), elements=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))


@settings(max_examples=50, deadline=None)
@given(_cplx, _cplx)
def test_trace_cyclic(a, b):
    assert abs(linalg.trace(linalg.matmul(a, b)) - linalg.trace(linalg.matmul(b, a))) < 1e-10 * max(1.0, np.abs(a).max() * np.abs(b).max())


@settings(max_examples=50, deadline=None)
@given(_cplx)
def test_double_dagger_exact(a):
    assert np.array_equal(linalg.dagger(linalg.dagger(a)), a)


@settings(max_examples=30, deadline=None)
@given(_cplx, _cplx, _cplx)
def test_kron_associative(a, b, c):
    left = linalg.kron(linalg.kron(a, b), c)
    right = linalg.kron(a, linalg.kron(b, c))
    assert np.abs(left - right).max() <= 1e-12 * max(1.0, np.abs(left).max())


@settings(max_examples=30, deadline=None)
@given(_cplx, _cplx)
def test_kron_preserves_hermiticity(a, b):
    ha, hb = a + a.conj().T, b + b.conj().T
    k = linalg.kron(ha, hb)
    assert linalg.is_hermitian(k, atol=1e-9 * max(1.0, np.abs(k).max()))
