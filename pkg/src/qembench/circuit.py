"""Parameterized circuits as moment lists, plus the transforms mitigation needs.

Gate angles are either plain floats or :class:`ParamRef` slots. A slot is
looked up in a bindings mapping at simulation time, so a folded or decoupled
circuit can be re-evaluated at shifted parameters without being rebuilt.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np


class GateKind(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"
    I = "I"  # noqa: E741
    RY = "RY"
    RZ = "RZ"
    ROT = "Rot"
    CZ = "CZ"


ARITY = {GateKind.CZ: 2}
N_PARAMS = {GateKind.RY: 1, GateKind.RZ: 1, GateKind.ROT: 3}
SELF_INVERSE = {GateKind.X, GateKind.Y, GateKind.Z, GateKind.I, GateKind.CZ}


@dataclass(frozen=True)
class ParamRef:
    """Symbolic angle: ``sign * bindings[slot]``."""

    slot: str
    sign: float = 1.0

    def __neg__(self) -> ParamRef:
        return ParamRef(self.slot, -self.sign)


Angle = Union[float, ParamRef]


def _neg(a: Angle) -> Angle:
    return -a if isinstance(a, ParamRef) else -float(a)


def resolve_angle(a: Angle, bindings: Mapping[str, float]) -> float:
    if isinstance(a, ParamRef):
        if a.slot not in bindings:
            raise KeyError(f"unbound parameter slot {a.slot!r}")
        return a.sign * float(bindings[a.slot])
    return float(a)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[Angle, ...] = ()
    tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(self.params))
        arity = ARITY.get(self.kind, 1)
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind.value} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.kind.value} qubits must be distinct, got {self.qubits}")
        n = N_PARAMS.get(self.kind, 0)
        if len(self.params) != n:
            raise ValueError(f"{self.kind.value} takes {n} parameter(s), got {len(self.params)}")

    def inverse(self) -> Gate:
        if self.kind in SELF_INVERSE:
            return self
        if self.kind is GateKind.ROT:
            phi, theta, omega = self.params
            return replace(self, params=(_neg(omega), _neg(theta), _neg(phi)))
        return replace(self, params=tuple(_neg(a) for a in self.params))

    def angles(self, bindings: Mapping[str, float]) -> tuple[float, ...]:
        return tuple(resolve_angle(a, bindings) for a in self.params)

    def slots(self) -> list[str]:
        return [a.slot for a in self.params if isinstance(a, ParamRef)]


# convenience constructors
def ry(q: int, theta: Angle) -> Gate:
    return Gate(GateKind.RY, (q,), (theta,))


def rz(q: int, theta: Angle) -> Gate:
    return Gate(GateKind.RZ, (q,), (theta,))


def rot(q: int, phi: Angle, theta: Angle, omega: Angle) -> Gate:
    return Gate(GateKind.ROT, (q,), (phi, theta, omega))


def cz(a: int, b: int) -> Gate:
    return Gate(GateKind.CZ, (a, b))


def pauli(kind: str, q: int, tag: str | None = None) -> Gate:
    return Gate(GateKind(kind), (q,), (), tag)


@dataclass(frozen=True)
class QuantumCircuit:
    """Immutable moment-structured circuit.

    ``group_starts`` marks the first moment of each layer group; it always
    begins with 0 and is used by layerwise folding.
    """

    n_qubits: int
    moments: tuple[tuple[Gate, ...], ...]
    param_bindings: Mapping[str, float] = field(default_factory=dict)
    group_starts: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        moments = tuple(tuple(m) for m in self.moments)
        object.__setattr__(self, "moments", moments)
        object.__setattr__(self, "param_bindings", dict(self.param_bindings))
        object.__setattr__(self, "group_starts", tuple(int(g) for g in self.group_starts))
        for i, m in enumerate(moments):
            seen: set[int] = set()
            for g in m:
                for q in g.qubits:
                    if not 0 <= q < self.n_qubits:
                        raise ValueError(f"gate {g.kind.value} on qubit {q} outside width {self.n_qubits}")
                    if q in seen:
                        raise ValueError(f"moment {i} uses qubit {q} twice")
                    seen.add(q)
        gs = self.group_starts
        ok = bool(gs) and gs[0] == 0 and list(gs) == sorted(set(gs))
        ok = ok and (gs[-1] < len(moments) if moments else gs == (0,))
        if not ok:
            raise ValueError(f"malformed group boundaries {gs} for {len(moments)} moments")

    @property
    def gates(self) -> list[Gate]:
        return [g for m in self.moments for g in m]

    @property
    def depth(self) -> int:
        return len(self.moments)

    @property
    def slots(self) -> list[str]:
        """Parameter slot names in order of first appearance."""
        out: dict[str, None] = {}
        for g in self.gates:
            for s in g.slots():
                out.setdefault(s, None)
        return list(out)

    @property
    def n_groups(self) -> int:
        return len(self.group_starts)

    def group_ranges(self) -> list[tuple[int, int]]:
        ends = list(self.group_starts[1:]) + [self.depth]
        return list(zip(self.group_starts, ends))

    def bind(self, values: Mapping[str, float]) -> QuantumCircuit:
        merged = dict(self.param_bindings)
        merged.update({k: float(v) for k, v in values.items()})
        return replace(self, param_bindings=merged)

    def noise_locations(self) -> int:
        """Count of gate-qubit noise sites, two per acted qubit."""
        return 2 * sum(len(g.qubits) for g in self.gates)


def build_moments(
    gates: Iterable[Gate],
    n_qubits: int,
    param_bindings: Mapping[str, float] | None = None,
) -> QuantumCircuit:
    """Greedy left-aligned scheduling of ``gates`` into moments."""
    moments: list[list[Gate]] = []
    occupied: list[set[int]] = []
    frontier = [0] * n_qubits  # first moment each qubit may use
    for g in gates:
        for q in g.qubits:
            if not 0 <= q < n_qubits:
                raise ValueError(f"gate {g.kind.value} on qubit {q} outside width {n_qubits}")
        t = max(frontier[q] for q in g.qubits)
        while t < len(moments) and occupied[t] & set(g.qubits):
            t += 1
        if t == len(moments):
            moments.append([])
            occupied.append(set())
        moments[t].append(g)
        occupied[t].update(g.qubits)
        for q in g.qubits:
            frontier[q] = t + 1
    return QuantumCircuit(n_qubits, tuple(tuple(m) for m in moments), param_bindings or {})


def concatenate(circuits: Sequence[QuantumCircuit], as_groups: bool = True) -> QuantumCircuit:
    """Join circuits moment-wise; each input becomes one group if ``as_groups``."""
    if not circuits:
        raise ValueError("nothing to concatenate")
    n = circuits[0].n_qubits
    moments: list[tuple[Gate, ...]] = []
    starts: list[int] = []
    bindings: dict[str, float] = {}
    for c in circuits:
        if c.n_qubits != n:
            raise ValueError("circuits have different widths")
        if as_groups:
            starts.append(len(moments))
        else:
            starts.extend(len(moments) + s for s in c.group_starts)
        moments.extend(c.moments)
        bindings.update(c.param_bindings)
    # empty pieces would create duplicate starts
    starts = sorted(set(s for s in starts if s < len(moments))) or [0]
    return QuantumCircuit(n, tuple(moments), bindings, tuple(starts))


def inverse(circuit: QuantumCircuit) -> QuantumCircuit:
    moments = tuple(tuple(g.inverse() for g in m) for m in reversed(circuit.moments))
    return QuantumCircuit(circuit.n_qubits, moments, circuit.param_bindings)


def _check_odd_scale(scale) -> int:
    if isinstance(scale, (bool, np.bool_)) or float(scale) != int(scale):
        raise ValueError(f"fold scale must be an odd integer, got {scale}")
    s = int(scale)
    if s < 1 or s % 2 == 0:
        raise ValueError(f"fold scale must be an odd integer >= 1, got {scale}")
    return s


def fold_global(circuit: QuantumCircuit, scale: int) -> QuantumCircuit:
    """Return ``G (G^dag G)^((scale-1)/2)``."""
    s = _check_odd_scale(scale)
    if s == 1:
        return circuit
    inv = inverse(circuit)
    moments = list(circuit.moments)
    for _ in range((s - 1) // 2):
        moments.extend(inv.moments)
        moments.extend(circuit.moments)
    return QuantumCircuit(circuit.n_qubits, tuple(moments), circuit.param_bindings)


@dataclass(frozen=True)
class FoldSpec:
    """Noise-scaling request for :func:`fold_groups`.

    Either a single ``scale`` applied to every group, or ``per_group_scales``
    with one odd factor per group. ``group_boundaries`` lists the first moment
    of each group; when omitted the circuit's own groups are used.
    """

    scale: float = 1
    mode: str = "global"
    per_group_scales: tuple[int, ...] | None = None
    group_boundaries: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mode != "global":
            raise ValueError(f"unsupported fold mode {self.mode!r}")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if self.per_group_scales is not None:
            object.__setattr__(self, "per_group_scales", tuple(self.per_group_scales))
            if self.group_boundaries is not None and len(self.per_group_scales) != len(self.group_boundaries):
                raise ValueError("per_group_scales length must equal the number of groups")


def fold_groups(circuit: QuantumCircuit, spec: FoldSpec) -> QuantumCircuit:
    """Fold each contiguous moment group by its own odd factor."""
    starts = tuple(spec.group_boundaries) if spec.group_boundaries is not None else circuit.group_starts
    if not starts or starts[0] != 0 or list(starts) != sorted(set(starts)) or starts[-1] >= max(circuit.depth, 1):
        raise ValueError(f"group boundaries {starts} do not partition {circuit.depth} moments")
    scales = spec.per_group_scales if spec.per_group_scales is not None else (spec.scale,) * len(starts)
    if len(scales) != len(starts):
        raise ValueError(f"{len(scales)} scales given for {len(starts)} groups")
    ends = list(starts[1:]) + [circuit.depth]
    pieces = []
    for (a, b), s in zip(zip(starts, ends), scales):
        sub = QuantumCircuit(circuit.n_qubits, circuit.moments[a:b], circuit.param_bindings)
        pieces.append(fold_global(sub, s))
    return concatenate(pieces, as_groups=True)


class DddSequence(str, enum.Enum):
    XX = "XX"
    XYXY = "XYXY"


def idle_windows(circuit: QuantumCircuit) -> dict[int, list[tuple[int, int]]]:
    """Maximal idle runs per qubit as ``(start_moment, length)``."""
    busy = np.zeros((circuit.n_qubits, circuit.depth), dtype=bool)
    for t, m in enumerate(circuit.moments):
        for g in m:
            busy[list(g.qubits), t] = True
    out: dict[int, list[tuple[int, int]]] = {}
    for q in range(circuit.n_qubits):
        runs, t = [], 0
        while t < circuit.depth:
            if busy[q, t]:
                t += 1
                continue
            start = t
            while t < circuit.depth and not busy[q, t]:
                t += 1
            runs.append((start, t - start))
        out[q] = runs
    return out


def ddd_pulses(k: int, sequence: DddSequence | str = DddSequence.XX) -> list[str]:
    """Pulse names filling a ``k``-slot idle window (left-aligned)."""
    sequence = DddSequence(sequence)
    pulses: list[str] = []
    if sequence is DddSequence.XYXY:
        pulses += ["X", "Y", "X", "Y"] * (k // 4)
        k -= 4 * (k // 4)
    pulses += ["X", "X"] * (k // 2)
    return pulses


def insert_ddd(circuit: QuantumCircuit, sequence: DddSequence | str = DddSequence.XX) -> QuantumCircuit:
    """Fill idle windows of two or more moments with identity-equivalent pulses."""
    sequence = DddSequence(sequence)
    extra: dict[int, list[Gate]] = {}
    for q, runs in idle_windows(circuit).items():
        for start, k in runs:
            for offset, name in enumerate(ddd_pulses(k, sequence)):
                extra.setdefault(start + offset, []).append(pauli(name, q, tag="ddd"))
    if not extra:
        return circuit
    moments = tuple(m + tuple(extra.get(t, ())) for t, m in enumerate(circuit.moments))
    return replace(circuit, moments=moments)


def to_text(circuit: QuantumCircuit) -> str:
    """Plain-text moment table, one line per moment."""
    lines = []
    for t, m in enumerate(circuit.moments):
        parts = []
        for g in m:
            qs = ",".join(f"q{q}" for q in g.qubits)
            if g.params:
                vals = []
                for a in g.params:
                    try:
                        vals.append(f"{resolve_angle(a, circuit.param_bindings):.6f}")
                    except KeyError:
                        vals.append(("-" if a.sign < 0 else "") + a.slot)
                parts.append(f"{g.kind.value}({qs}; {', '.join(vals)})")
            else:
                parts.append(f"{g.kind.value}({qs})")
        lines.append(f"{t:3d}: " + " ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")
