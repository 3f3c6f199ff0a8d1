"""Vectorized noisy simulation in the Pauli-transfer representation.

A state on ``n`` qubits is stored as the real tensor ``r[i_0, ..., i_{n-1}] =
tr(rho P_{i_0} x ... x P_{i_{n-1}})`` with Pauli order (I, X, Y, Z). Every
gate step (noise, unitary, noise) becomes a small real matrix acting on one or
two axes, so a whole batch of parameter bindings moves through the circuit in
one pass. Pauli corrections are sign flips on an axis.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from itertools import product

import numba
import numpy as np

from . import linalg
from .circuit import Gate, GateKind, ParamRef, QuantumCircuit
from .noise import NoiseModel
from .simulator import MAX_QUBITS, gate_unitary

# PAULI_SIGNS[k, j] = +1 if P_k commutes with P_j else -1
PAULI_SIGNS = np.array(
    [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]], dtype=float
)
_H2 = np.array([[1.0, 1.0], [1.0, -1.0]])


def _ry_ptm(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    r = np.zeros(theta.shape + (4, 4))
    r[..., 0, 0] = 1
    r[..., 2, 2] = 1
    r[..., 1, 1] = c
    r[..., 3, 3] = c
    r[..., 1, 3] = s
    r[..., 3, 1] = -s
    return r


def _rz_ptm(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    r = np.zeros(theta.shape + (4, 4))
    r[..., 0, 0] = 1
    r[..., 3, 3] = 1
    r[..., 1, 1] = c
    r[..., 2, 2] = c
    r[..., 1, 2] = -s
    r[..., 2, 1] = s
    return r


def unitary_ptm(u: np.ndarray) -> np.ndarray:
    """PTM of a (possibly multi-qubit) unitary, indices in tensor-product order."""
    k = int(round(np.log2(u.shape[0])))
    return pauli_transfer_n(lambda m: u @ m @ u.conj().T, k)


def pauli_transfer_n(channel, k: int) -> np.ndarray:
    """PTM of a ``k``-qubit map, reshaped to ``(4,)*2k`` axes."""
    strings = list(product(range(4), repeat=k))
    mats = [linalg.kron(*(linalg.PAULIS[i] for i in s)) for s in strings]
    r = np.empty((len(strings), len(strings)))
    for j, pj in enumerate(mats):
        out = channel(pj)
        for i, pi in enumerate(mats):
            r[i, j] = np.trace(pi @ out).real / 2**k
    return r.reshape((4,) * (2 * k))


_OP_FIXED1, _OP_PARAM1, _OP_FIXED2 = 0, 1, 2


@numba.njit(cache=True)
def _apply1(v, m, q, n):
    stride = 4 ** (n - 1 - q)
    block = 4 * stride
    m00, m01, m02, m03 = m[0, 0], m[0, 1], m[0, 2], m[0, 3]
    m10, m11, m12, m13 = m[1, 0], m[1, 1], m[1, 2], m[1, 3]
    m20, m21, m22, m23 = m[2, 0], m[2, 1], m[2, 2], m[2, 3]
    m30, m31, m32, m33 = m[3, 0], m[3, 1], m[3, 2], m[3, 3]
    for base in range(0, v.shape[0], block):
        for off in range(base, base + stride):
            t0 = v[off]
            t1 = v[off + stride]
            t2 = v[off + 2 * stride]
            t3 = v[off + 3 * stride]
            v[off] = m00 * t0 + m01 * t1 + m02 * t2 + m03 * t3
            v[off + stride] = m10 * t0 + m11 * t1 + m12 * t2 + m13 * t3
            v[off + 2 * stride] = m20 * t0 + m21 * t1 + m22 * t2 + m23 * t3
            v[off + 3 * stride] = m30 * t0 + m31 * t1 + m32 * t2 + m33 * t3


@numba.njit(cache=True)
def _apply2(v, nz_i, nz_j, nz_v, nnz, bases, offsets, tmp_in, tmp_out):
    # nz_* hold the nonzeros of a 16x16 transfer matrix; offsets[k] is the
    # flat displacement of two-qubit basis index k from a base index
    for base in bases:
        for k in range(16):
            tmp_in[k] = v[base + offsets[k]]
            tmp_out[k] = 0.0
        for e in range(nnz):
            tmp_out[nz_i[e]] += nz_v[e] * tmp_in[nz_j[e]]
        for k in range(16):
            v[base + offsets[k]] = tmp_out[k]


@numba.njit(cache=True)
def _run_program(ops, qa, qb, slot, loc, fixed1, nz_i, nz_j, nz_v, nnz, bases, offsets,
                 param, row_index, frames, signvec, init, init_index, out):
    n = int(np.round(np.log(init.shape[1]) / np.log(4)))
    use_frames = frames.shape[1] > 0
    v = np.empty(init.shape[1])
    tmp_in = np.empty(16)
    tmp_out = np.empty(16)
    for s in range(out.shape[0]):
        row = row_index[s]
        v[:] = init[init_index[s]]
        for t in range(ops.shape[0]):
            two = ops[t] == 2
            if use_frames:
                k = frames[s, loc[t]]
                if k != 0:
                    v *= signvec[qa[t], k]
                if two:
                    k = frames[s, loc[t] + 1]
                    if k != 0:
                        v *= signvec[qb[t], k]
            if ops[t] == 0:
                _apply1(v, fixed1[slot[t]], qa[t], n)
            elif ops[t] == 1:
                _apply1(v, param[slot[t], row], qa[t], n)
            else:
                j = slot[t]
                _apply2(v, nz_i[j], nz_j[j], nz_v[j], nnz[j], bases[t], offsets[t], tmp_in, tmp_out)
            if use_frames:
                k = frames[s, loc[t] + (2 if two else 1)]
                if k != 0:
                    v *= signvec[qa[t], k]
                if two:
                    k = frames[s, loc[t] + 3]
                    if k != 0:
                        v *= signvec[qb[t], k]
        out[s, :] = v


def _sign_vectors(n: int) -> np.ndarray:
    """``out[q, k]`` is the sign pattern over the flat state for Pauli ``k`` on ``q``."""
    out = np.ones((n, 4, 4**n))
    digits = np.arange(4**n)
    for q in range(n):
        d = (digits // 4 ** (n - 1 - q)) % 4
        for k in range(4):
            out[q, k] = PAULI_SIGNS[k, d]
    return out


def _pair_layout(a: int, b: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    sa, sb = 4 ** (n - 1 - a), 4 ** (n - 1 - b)
    digits = np.arange(4**n)
    free = ((digits // sa) % 4 == 0) & ((digits // sb) % 4 == 0)
    offsets = np.array([(k // 4) * sa + (k % 4) * sb for k in range(16)], dtype=np.int64)
    return digits[free].astype(np.int64), offsets


class _Program:
    __slots__ = ("ops", "qa", "qb", "slot", "loc", "fixed1", "fixed2", "param_gates")

    def __init__(self, ops, qa, qb, slot, loc, fixed1, fixed2, param_gates):
        self.ops, self.qa, self.qb, self.slot, self.loc = ops, qa, qb, slot, loc
        self.fixed1, self.fixed2, self.param_gates = fixed1, fixed2, param_gates


class PtmSimulator:
    """Batched simulator for one noise model.

    The noise channel fires on each acted qubit before and after every gate.
    Sampled error-cancellation corrections are passed as ``pauli_frames``
    and are applied noiselessly.
    """

    def __init__(self, noise: NoiseModel | None = None, max_qubits: int = MAX_QUBITS):
        self.noise = noise or NoiseModel.noiseless()
        self.max_qubits = max_qubits
        self._n1 = self.noise.channel.transfer_matrix()
        self._n2 = np.kron(self._n1, self._n1)
        self._fixed_cache: dict[GateKind, np.ndarray] = {}

    def _fixed_ptm(self, kind: GateKind) -> np.ndarray:
        if kind not in self._fixed_cache:
            u = gate_unitary(Gate(kind, (0, 1) if kind is GateKind.CZ else (0,)))
            r = unitary_ptm(u)
            if kind is GateKind.CZ:
                self._fixed_cache[kind] = self._n2 @ r.reshape(16, 16) @ self._n2
            else:
                self._fixed_cache[kind] = self._n1 @ r @ self._n1
        return self._fixed_cache[kind]

    def compile(self, circuit: QuantumCircuit) -> _Program:
        if circuit.n_qubits > self.max_qubits:
            raise ValueError(f"circuit width {circuit.n_qubits} exceeds simulator maximum {self.max_qubits}")
        ops, qa, qb, slot, loc = [], [], [], [], []
        fixed1: list[np.ndarray] = []
        fixed2: list[np.ndarray] = []
        kinds1: dict[GateKind, int] = {}
        kinds2: dict[GateKind, int] = {}
        param_gates: list[Gate] = []
        site = 0
        for moment in circuit.moments:
            for g in moment:
                if g.tag == "pec":
                    raise ValueError("explicit correction gates are not supported here; use pauli_frames")
                qa.append(g.qubits[0])
                qb.append(g.qubits[-1])
                loc.append(site)
                site += 2 * len(g.qubits)
                if g.params:
                    ops.append(_OP_PARAM1)
                    slot.append(len(param_gates))
                    param_gates.append(g)
                elif len(g.qubits) == 2:
                    if g.kind not in kinds2:
                        kinds2[g.kind] = len(fixed2)
                        fixed2.append(self._fixed_ptm(g.kind))
                    ops.append(_OP_FIXED2)
                    slot.append(kinds2[g.kind])
                else:
                    if g.kind not in kinds1:
                        kinds1[g.kind] = len(fixed1)
                        fixed1.append(self._fixed_ptm(g.kind))
                    ops.append(_OP_FIXED1)
                    slot.append(kinds1[g.kind])
        as_i = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
        f1 = np.array(fixed1) if fixed1 else np.zeros((1, 4, 4))
        f2 = np.array(fixed2) if fixed2 else np.zeros((1, 16, 16))
        return _Program(as_i(ops), as_i(qa), as_i(qb), as_i(slot), as_i(loc), f1, f2, param_gates)

    @staticmethod
    def _sparse(mats: np.ndarray):
        nnz = np.array([np.count_nonzero(np.abs(m) > 1e-15) for m in mats], dtype=np.int64)
        width = max(int(nnz.max()), 1)
        nz_i = np.zeros((len(mats), width), dtype=np.int64)
        nz_j = np.zeros((len(mats), width), dtype=np.int64)
        nz_v = np.zeros((len(mats), width))
        for k, m in enumerate(mats):
            i, j = np.nonzero(np.abs(m) > 1e-15)
            nz_i[k, : len(i)], nz_j[k, : len(i)], nz_v[k, : len(i)] = i, j, m[i, j]
        return nz_i, nz_j, nz_v, nnz

    def _param_ptm(self, gate: Gate, bindings: Mapping[str, np.ndarray], n_rows: int) -> np.ndarray:
        angles = []
        for a in gate.params:
            if isinstance(a, ParamRef):
                if a.slot not in bindings:
                    raise KeyError(f"unbound parameter slot {a.slot!r}")
                angles.append(a.sign * np.broadcast_to(np.asarray(bindings[a.slot], float), (n_rows,)))
            else:
                angles.append(np.full(n_rows, float(a)))
        if gate.kind is GateKind.RY:
            r = _ry_ptm(angles[0])
        elif gate.kind is GateKind.RZ:
            r = _rz_ptm(angles[0])
        else:
            phi, theta, omega = angles
            r = _rz_ptm(omega) @ _ry_ptm(theta) @ _rz_ptm(phi)
        return self._n1 @ r @ self._n1

    def run(
        self,
        circuit: QuantumCircuit,
        bindings: Mapping[str, np.ndarray] | None = None,
        row_index: np.ndarray | None = None,
        pauli_frames: np.ndarray | None = None,
        init_states: np.ndarray | None = None,
    ) -> np.ndarray:
        """Final Pauli-coefficient tensors, shape ``(N,) + (4,)*n``.

        Args:
            circuit: circuit whose ``ParamRef`` slots are resolved from
                ``bindings`` first, then from ``circuit.param_bindings``.
            bindings: slot name to per-row angle array (all the same length).
            row_index: optional map from each simulated state to a bindings
                row, so many states can share one set of angles.
            pauli_frames: optional ``(N, L)`` integer array of Pauli indices
                applied right at each of the circuit's ``L`` noise locations.
            init_states: optional ``(N,) + (4,)*n`` starting states (default
                ``|0...0>``), e.g. the output of an earlier segment.
        """
        n = circuit.n_qubits
        merged: dict[str, np.ndarray] = {k: np.asarray(v, float) for k, v in circuit.param_bindings.items()}
        for k, v in (bindings or {}).items():
            merged[k] = np.atleast_1d(np.asarray(v, float))
        sizes = {np.atleast_1d(v).shape[0] for v in (bindings or {}).values()}
        if len(sizes) > 1:
            raise ValueError(f"binding arrays have different lengths {sorted(sizes)}")
        n_rows = sizes.pop() if sizes else 1
        if row_index is None:
            row_index = np.arange(n_rows)
        row_index = np.asarray(row_index, dtype=np.int64)
        n_states = row_index.shape[0]
        if pauli_frames is None:
            frames = np.zeros((n_states, 0), dtype=np.int64)
        else:
            frames = np.asarray(pauli_frames, dtype=np.int64)
            if frames.shape != (n_states, circuit.noise_locations()):
                raise ValueError(
                    f"pauli_frames must have shape {(n_states, circuit.noise_locations())}, got {frames.shape}"
                )

        prog = self.compile(circuit)
        if prog.param_gates:
            param = np.stack([self._param_ptm(g, merged, n_rows) for g in prog.param_gates])
        else:
            param = np.zeros((1, 1, 4, 4))
        if init_states is None:
            init = np.zeros((4,) * n)
            for combo in np.ndindex(*(2,) * n):
                init[tuple(3 * c for c in combo)] = 1.0
            init = init.reshape(1, -1)
            init_index = np.zeros(n_states, dtype=np.int64)
        else:
            init = np.ascontiguousarray(np.asarray(init_states, dtype=float).reshape(-1, 4**n))
            if init.shape[0] != n_states:
                raise ValueError(f"init_states holds {init.shape[0]} states for {n_states} rows")
            init_index = np.arange(n_states, dtype=np.int64)
        nz_i, nz_j, nz_v, nnz = self._sparse(prog.fixed2)
        n_free = 4 ** (n - 2) if n >= 2 else 1
        bases = np.zeros((len(prog.ops), n_free), dtype=np.int64)
        offsets = np.zeros((len(prog.ops), 16), dtype=np.int64)
        for t in np.flatnonzero(prog.ops == _OP_FIXED2):
            bases[t], offsets[t] = _pair_layout(prog.qa[t], prog.qb[t], n)
        out = np.empty((n_states, 4**n))
        _run_program(
            prog.ops, prog.qa, prog.qb, prog.slot, prog.loc, prog.fixed1, nz_i, nz_j, nz_v, nnz,
            bases, offsets, np.ascontiguousarray(param), row_index, frames, _sign_vectors(n),
            init, init_index, out,
        )
        return out.reshape((n_states,) + (4,) * n)


def z_expectations(state: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    n = state.ndim - 1
    out = []
    for q in qubits:
        idx = [0] * n
        idx[q] = 3
        out.append(state[(slice(None),) + tuple(idx)])
    return np.stack(out, axis=-1)


def basis_probabilities(state: np.ndarray) -> np.ndarray:
    """Computational-basis probabilities, shape ``(N, 2^n)``, qubit 0 most significant."""
    n = state.ndim - 1
    sub = state
    for ax in range(1, n + 1):
        sub = np.take(sub, [0, 3], axis=ax)
        sub = np.moveaxis(np.tensordot(sub, _H2, axes=([ax], [1])), -1, ax)
    probs = sub.reshape(state.shape[0], -1) / 2**n
    return probs


class Executor:
    """Noisy batched evaluator of Z expectation values.

    This is the callable every mitigation technique wraps. In shot mode each
    simulated circuit is sampled ``shots`` times from ``rng``; analytic mode
    returns exact expectations. ``eval_count`` tallies circuit executions.
    """

    def __init__(
        self,
        noise: NoiseModel | None = None,
        shots: int | None = None,
        rng: np.random.Generator | None = None,
        qubits: Sequence[int] | None = None,
    ):
        if shots is not None and shots < 1:
            raise ValueError("shots must be positive or None")
        self.sim = PtmSimulator(noise)
        self.shots = shots
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.qubits = None if qubits is None else list(qubits)
        self.eval_count = 0

    @property
    def noise(self) -> NoiseModel:
        return self.sim.noise

    def evolve(
        self,
        circuit: QuantumCircuit,
        bindings: Mapping[str, np.ndarray] | None = None,
        row_index: np.ndarray | None = None,
        pauli_frames: np.ndarray | None = None,
        init_states: np.ndarray | None = None,
    ) -> np.ndarray:
        """Noisy final states without measuring or counting an evaluation."""
        return self.sim.run(circuit, bindings, row_index, pauli_frames, init_states)

    def measure(self, state: np.ndarray) -> np.ndarray:
        """Z expectations (exact or sampled) of ``(N,) + (4,)*n`` states; counts ``N`` evaluations."""
        n = state.ndim - 1
        qubits = list(range(n)) if self.qubits is None else self.qubits
        self.eval_count += state.shape[0]
        if self.shots is None:
            return z_expectations(state, qubits)
        probs = np.clip(basis_probabilities(state), 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        counts = self.rng.multinomial(self.shots, probs)
        idx = np.arange(2**n)
        signs = np.array([1 - 2 * ((idx >> (n - 1 - q)) & 1) for q in qubits], dtype=float)
        return counts @ signs.T / self.shots

    def __call__(
        self,
        circuit: QuantumCircuit,
        bindings: Mapping[str, np.ndarray] | None = None,
        row_index: np.ndarray | None = None,
        pauli_frames: np.ndarray | None = None,
    ) -> np.ndarray:
        return self.measure(self.evolve(circuit, bindings, row_index, pauli_frames))
