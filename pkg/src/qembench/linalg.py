"""Small dense complex linear algebra used by every quantum-math module.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. The
helpers here add the shape checks and tolerance conventions the rest of the
package relies on; nothing mutates its inputs.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

DEFAULT_ATOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, X, Y, Z)


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: cannot multiply {a.shape[0]}x{a.shape[1]} "
            f"by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def dagger(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(a).conj().T.copy()


def kron(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor most significant."""
    if not factors:
        raise ValueError("kron needs at least one factor")
    out = as_matrix(factors[0])
    for f in factors[1:]:
        out = np.kron(out, as_matrix(f))
    return out


def trace(a) -> complex:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"trace of non-square {a.shape[0]}x{a.shape[1]} matrix")
    return complex(np.trace(a))


def partial_trace(rho, keep: Iterable[int], n_qubits: int) -> np.ndarray:
    """Reduced density matrix on the qubits in ``keep``.

    Qubit 0 is the most significant tensor factor. Kept qubits stay in
    ascending order in the result.
    """
    rho = as_matrix(rho)
    dim = 2**n_qubits
    if rho.shape != (dim, dim):
        raise ValueError(f"rho must be {dim}x{dim} for {n_qubits} qubits, got {rho.shape}")
    keep = sorted(set(keep))
    for q in keep:
        if not 0 <= q < n_qubits:
            raise ValueError(f"qubit index {q} out of range for {n_qubits} qubits")
    traced = [q for q in range(n_qubits) if q not in keep]
    t = rho.reshape((2,) * (2 * n_qubits))
    # trace out from the highest index down so axis positions stay valid
    for q in reversed(traced):
        n_left = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + n_left)
    k = 2 ** len(keep)
    return t.reshape(k, k)


def embed(op, targets: Iterable[int], n_qubits: int) -> np.ndarray:
    """Lift an operator on adjacent-ordered ``targets`` to the full register.

    ``op`` acts on ``targets`` in the order given (first target is the most
    significant index of ``op``).
    """
    targets = list(targets)
    op = as_matrix(op)
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} target qubits")
    if len(set(targets)) != k or any(not 0 <= q < n_qubits for q in targets):
        raise ValueError(f"invalid targets {targets} for {n_qubits} qubits")
    rest = [q for q in range(n_qubits) if q not in targets]
    full = kron(op, np.eye(2 ** len(rest)))
    # full acts on ordering targets + rest; permute back to natural order
    order = targets + rest
    perm = [order.index(q) for q in range(n_qubits)]
    t = full.reshape((2,) * (2 * n_qubits))
    t = t.transpose(perm + [p + n_qubits for p in perm])
    return t.reshape(2**n_qubits, 2**n_qubits)


def allclose(a, b, atol: float = DEFAULT_ATOL) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= atol))


def is_hermitian(a, atol: float = DEFAULT_ATOL) -> bool:
    a = as_matrix(a)
    return allclose(a, a.conj().T, atol)


def ket_density(bits: str) -> np.ndarray:
    """Density matrix of the computational basis state ``|bits><bits|``."""
    dim = 2 ** len(bits)
    rho = np.zeros((dim, dim), dtype=complex)
    idx = int(bits, 2)
    rho[idx, idx] = 1.0
    return rho
