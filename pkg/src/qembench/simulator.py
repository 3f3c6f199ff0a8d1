"""Reference density-matrix simulation of noisy circuits.

This is the literal path: full ``2^n x 2^n`` matrices, Kraus operators
embedded by Kronecker products. It is exact and easy to audit; training uses
the vectorized :mod:`qembench.batch` engine, which is checked against it.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .circuit import Gate, GateKind, QuantumCircuit
from .noise import NoiseModel, apply_channel

MAX_QUBITS = 10
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rot_matrix(phi: float, theta: float, omega: float) -> np.ndarray:
    """``RZ(omega) RY(theta) RZ(phi)``; ``phi`` acts first."""
    return rz_matrix(omega) @ ry_matrix(theta) @ rz_matrix(phi)


_FIXED = {
    GateKind.X: linalg.X,
    GateKind.Y: linalg.Y,
    GateKind.Z: linalg.Z,
    GateKind.I: linalg.I2,
    GateKind.CZ: CZ_MATRIX,
}


def gate_unitary(gate: Gate, bindings=None) -> np.ndarray:
    """Unitary of ``gate`` on its own qubits, angles resolved from ``bindings``."""
    if gate.kind in _FIXED:
        return _FIXED[gate.kind]
    angles = gate.angles(bindings or {})
    if gate.kind is GateKind.RY:
        return ry_matrix(*angles)
    if gate.kind is GateKind.RZ:
        return rz_matrix(*angles)
    return rot_matrix(*angles)


def zero_state(n_qubits: int) -> np.ndarray:
    return linalg.ket_density("0" * n_qubits)


def iter_density(
    circuit: QuantumCircuit,
    noise: NoiseModel | None = None,
    max_qubits: int = MAX_QUBITS,
    noiseless_tags: Sequence[str] = ("pec",),
) -> Iterator[np.ndarray]:
    """Yield the state after every gate step (noise, unitary, noise).

    Gates whose ``tag`` is in ``noiseless_tags`` are applied without the
    surrounding channel; sampled error-cancellation corrections use this.
    """
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"circuit width {n} exceeds simulator maximum {max_qubits}")
    noise = noise or NoiseModel.noiseless()
    channel = noise.channel
    noisy = not channel.is_identity
    rho = zero_state(n)
    yield rho
    for moment in circuit.moments:
        for gate in moment:
            with_noise = noisy and gate.tag not in noiseless_tags
            if with_noise:
                for q in gate.qubits:
                    rho = apply_channel(rho, channel, q, n)
            u = linalg.embed(gate_unitary(gate, circuit.param_bindings), gate.qubits, n)
            rho = u @ rho @ u.conj().T
            if with_noise:
                for q in gate.qubits:
                    rho = apply_channel(rho, channel, q, n)
            yield rho


def run_density(circuit: QuantumCircuit, noise: NoiseModel | None = None, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    """Final density matrix of ``circuit`` started from ``|0...0>``."""
    rho = None
    for rho in iter_density(circuit, noise, max_qubits):
        pass
    return rho


@dataclass
class ExpectationResult:
    """Z-basis expectation values, one per measured qubit.

    ``values`` may carry leading batch axes; the last axis indexes qubits.
    """

    values: np.ndarray
    variance_estimate: np.ndarray | None = None
    flags: dict[str, int] = field(default_factory=dict)
    eval_count: int = 0


def _n_qubits_of(rho: np.ndarray) -> int:
    n = int(round(np.log2(rho.shape[0])))
    if rho.shape != (2**n, 2**n):
        raise ValueError(f"not a qubit density matrix: shape {rho.shape}")
    return n


def z_signs(n_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """``(len(qubits), 2^n)`` table of Z eigenvalues per basis state."""
    idx = np.arange(2**n_qubits)
    return np.array([1 - 2 * ((idx >> (n_qubits - 1 - q)) & 1) for q in qubits], dtype=float)


def expectation_z(rho: np.ndarray, qubits: Sequence[int]) -> ExpectationResult:
    rho = linalg.as_matrix(rho)
    n = _n_qubits_of(rho)
    for q in qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for {n} qubits")
    diag = np.real(np.diag(rho))
    return ExpectationResult(z_signs(n, qubits) @ diag)


def basis_probabilities(rho: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    diag = np.real(np.diag(linalg.as_matrix(rho))).copy()
    if diag.min() < -tol:
        raise ValueError(f"invalid state: negative population {diag.min():.3g}")
    diag = np.clip(diag, 0.0, None)
    total = diag.sum()
    if abs(total - 1) > 1e-6:
        raise ValueError(f"invalid state: populations sum to {total}")
    return diag / total


def sample_z(rho: np.ndarray, qubits: Sequence[int], shots: int, seed) -> ExpectationResult:
    """Estimate ``<Z_q>`` from ``shots`` joint computational-basis draws."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rho = linalg.as_matrix(rho)
    n = _n_qubits_of(rho)
    probs = basis_probabilities(rho)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    values = z_signs(n, qubits) @ counts / shots
    return ExpectationResult(values, (1 - values**2) / shots)


@dataclass(frozen=True)
class SimulatorConfig:
    shots: int | None = None
    seed: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel.noiseless)
    max_qubits: int = MAX_QUBITS

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive or None")


def execute(circuit: QuantumCircuit, config: SimulatorConfig, qubits: Sequence[int] | None = None) -> ExpectationResult:
    """Run one bound circuit and measure Z on ``qubits`` (default all)."""
    qubits = list(range(circuit.n_qubits)) if qubits is None else list(qubits)
    rho = run_density(circuit, config.noise, config.max_qubits)
    if config.shots is None:
        res = expectation_z(rho, qubits)
    else:
        res = sample_z(rho, qubits, config.shots, config.seed)
    res.eval_count = 1
    return res


def statevector(circuit: QuantumCircuit) -> np.ndarray:
    """Noiseless pure-state evolution, used as an independent oracle."""
    n = circuit.n_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g in circuit.gates:
        u = gate_unitary(g, circuit.param_bindings).reshape((2,) * (2 * len(g.qubits)))
        k = len(g.qubits)
        psi = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), list(g.qubits)))
        psi = np.moveaxis(psi, list(range(k)), list(g.qubits))
    return psi.reshape(-1)
