import numpy as np
import pytest

from qembench.circuit import build_moments, cz, pauli, rot, ry, rz


def random_density(rng, n_qubits=1, rank=None):
    """Random full-rank (or given rank) density matrix."""
    d = 2**n_qubits
    k = rank or d
    a = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_circuit(rng, n_qubits=3, n_gates=12):
    gates = []
    for _ in range(n_gates):
        c = rng.integers(5)
        q = int(rng.integers(n_qubits))
        if c == 0:
            gates.append(ry(q, rng.uniform(-np.pi, np.pi)))
        elif c == 1:
            gates.append(rz(q, rng.uniform(-np.pi, np.pi)))
        elif c == 2:
            gates.append(rot(q, *rng.uniform(-np.pi, np.pi, size=3)))
        elif c == 3 and n_qubits > 1:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            gates.append(cz(int(a), int(b)))
        else:
            gates.append(pauli(str(rng.choice(["X", "Y", "Z"])), q))
    return build_moments(gates, n_qubits)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
