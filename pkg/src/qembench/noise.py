"""Single-qubit Kraus channels and the gate-attached noise model."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import linalg
from .linalg import I2, X, Y, Z


class NoiseKind(str, enum.Enum):
    DEPOLARIZING = "depolarizing"
    AMPLITUDE_DAMPING = "amplitude_damping"
    PHASE_DAMPING = "phase_damping"
    BIT_FLIP = "bit_flip"
    PHASE_FLIP = "phase_flip"
    NONE = "none"


CHANNEL_KINDS = (
    NoiseKind.DEPOLARIZING,
    NoiseKind.AMPLITUDE_DAMPING,
    NoiseKind.PHASE_DAMPING,
    NoiseKind.BIT_FLIP,
    NoiseKind.PHASE_FLIP,
)


def _kraus(kind: NoiseKind, p: float) -> tuple[np.ndarray, ...]:
    if kind is NoiseKind.NONE:
        return (I2.copy(),)
    if kind is NoiseKind.DEPOLARIZING:
        a, b = np.sqrt(1 - p), np.sqrt(p / 3)
        return (a * I2, b * X, b * Y, b * Z)
    if kind is NoiseKind.BIT_FLIP:
        return (np.sqrt(1 - p) * I2, np.sqrt(p) * X)
    if kind is NoiseKind.PHASE_FLIP:
        return (np.sqrt(1 - p) * I2, np.sqrt(p) * Z)
    e0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    if kind is NoiseKind.AMPLITUDE_DAMPING:
        e1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    else:
        e1 = np.array([[0, 0], [0, np.sqrt(p)]], dtype=complex)
    return (e0, e1)


@dataclass(frozen=True, eq=False)
class NoiseChannel:
    kind: NoiseKind
    p: float
    kraus: tuple[np.ndarray, ...]

    def __repr__(self) -> str:
        return f"NoiseChannel({self.kind.value}, p={self.p:g})"

    def __eq__(self, other) -> bool:
        return isinstance(other, NoiseChannel) and (self.kind, self.p) == (other.kind, other.p)

    def __hash__(self) -> int:
        return hash((self.kind, self.p))

    @property
    def is_identity(self) -> bool:
        return self.kind is NoiseKind.NONE or self.p == 0

    def completeness(self) -> np.ndarray:
        return sum(e.conj().T @ e for e in self.kraus)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Act on a single-qubit density matrix."""
        return sum(e @ rho @ e.conj().T for e in self.kraus)

    def transfer_matrix(self) -> np.ndarray:
        """Real 4x4 Pauli transfer matrix ``R[i, j] = tr(P_i E(P_j)) / 2``."""
        return pauli_transfer(self.apply)


def pauli_transfer(channel) -> np.ndarray:
    """Pauli transfer matrix of a single-qubit linear map given as a callable."""
    r = np.empty((4, 4))
    for j, pj in enumerate(linalg.PAULIS):
        out = channel(pj)
        for i, pi in enumerate(linalg.PAULIS):
            r[i, j] = 0.5 * np.trace(pi @ out).real
    return r


def make_channel(kind: NoiseKind | str, p: float) -> NoiseChannel:
    """Kraus set for one of the five gate-noise channels (or ``none``).

    Raises:
        ValueError: if ``p`` is not a probability.
    """
    kind = NoiseKind(kind)
    p = float(p)
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise ValueError(f"noise probability must lie in [0, 1], got {p}")
    return NoiseChannel(kind, p, _kraus(kind, p))


def apply_channel(rho: np.ndarray, channel: NoiseChannel, target: int, n_qubits: int) -> np.ndarray:
    """``sum_i E_i rho E_i^dag`` with each ``E_i`` embedded on ``target``."""
    if not 0 <= target < n_qubits:
        raise ValueError(f"target qubit {target} out of range for {n_qubits} qubits")
    rho = linalg.as_matrix(rho)
    out = np.zeros_like(rho)
    for e in channel.kraus:
        big = linalg.embed(e, [target], n_qubits)
        out += big @ rho @ big.conj().T
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Channel fired on every acted qubit immediately before and after each gate."""

    channel: NoiseChannel
    placement: str = "before_and_after_each_gate"

    def __post_init__(self):
        if self.placement != "before_and_after_each_gate":
            raise ValueError(f"unsupported noise placement {self.placement!r}")

    @classmethod
    def of(cls, kind: NoiseKind | str, p: float) -> NoiseModel:
        return cls(make_channel(kind, p))

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls(make_channel(NoiseKind.NONE, 0.0))

    @property
    def kind(self) -> NoiseKind:
        return self.channel.kind

    @property
    def p(self) -> float:
        return self.channel.p
