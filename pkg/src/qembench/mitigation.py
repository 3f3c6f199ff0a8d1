"""Error-mitigation wrappers around a batched executor.

Each technique takes a circuit, a bindings mapping (slot -> per-row angles)
and an :class:`~qembench.batch.Executor`, and returns mitigated Z expectations
of shape ``(rows, observables)``. Estimates that leave ``[-1, 1]`` are clipped
and counted in ``flags`` so a softmax head never sees unphysical inputs.
"""

from __future__ import annotations

import enum
import itertools
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from .batch import Executor
from .circuit import DddSequence, FoldSpec, QuantumCircuit, fold_global, fold_groups, insert_ddd
from .noise import NoiseKind
from .simulator import ExpectationResult


class MitigationKind(str, enum.Enum):
    NONE = "none"
    ZNE = "zne"
    PEC = "pec"
    DDD = "ddd"
    LRE = "lre"


class NotRepresentableError(ValueError):
    """The noise channel has no bounded quasi-probability inverse."""


def _clip(values: np.ndarray, flags: dict[str, int], name: str) -> np.ndarray:
    outside = np.abs(values) > 1
    if outside.any():
        flags[name] = flags.get(name, 0) + int(outside.sum())
    return np.clip(values, -1.0, 1.0)


# --------------------------------------------------------------------------- ZNE


@dataclass(frozen=True)
class ZneConfig:
    scale_factors: tuple[int, ...] = (1, 3, 5)
    extrapolation: str = "richardson"

    def __post_init__(self):
        object.__setattr__(self, "scale_factors", tuple(int(s) for s in self.scale_factors))
        if len(set(self.scale_factors)) != len(self.scale_factors):
            raise ValueError(f"duplicate scale factors {self.scale_factors}")
        if len(self.scale_factors) < 2:
            raise ValueError("need at least two scale factors")
        if self.extrapolation not in ("richardson", "linear"):
            raise ValueError(f"unknown extrapolation {self.extrapolation!r}")


def richardson_extrapolate(scales: Sequence[float], values: np.ndarray) -> np.ndarray:
    """Value at zero of the degree ``k-1`` polynomial through ``k`` points.

    ``values`` has the scale index as its first axis; any trailing shape is
    extrapolated independently.
    """
    scales = np.asarray(scales, dtype=float)
    if len(np.unique(scales)) != len(scales):
        raise ValueError(f"duplicate scale factors {scales.tolist()}")
    vander = np.vander(scales, increasing=True)
    values = np.asarray(values, dtype=float)
    coeffs = np.linalg.solve(vander, values.reshape(len(scales), -1))
    return coeffs[0].reshape(values.shape[1:])


def linear_extrapolate(scales: Sequence[float], values: np.ndarray) -> np.ndarray:
    """Intercept of the least-squares line through ``(scale, value)`` points."""
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    design = np.stack([np.ones_like(scales), scales], axis=1)
    coeffs, *_ = np.linalg.lstsq(design, values.reshape(len(scales), -1), rcond=None)
    return coeffs[0].reshape(values.shape[1:])


def zne_expectation(
    circuit: QuantumCircuit,
    config: ZneConfig,
    executor: Executor,
    bindings: Mapping[str, np.ndarray] | None = None,
) -> ExpectationResult:
    before = executor.eval_count
    raw = np.stack([executor(fold_global(circuit, s), bindings) for s in config.scale_factors])
    if config.extrapolation == "richardson":
        est = richardson_extrapolate(config.scale_factors, raw)
    else:
        est = linear_extrapolate(config.scale_factors, raw)
    flags: dict[str, int] = {}
    est = _clip(est, flags, "zne_clamped")
    return ExpectationResult(est, flags=flags, eval_count=executor.eval_count - before)


# --------------------------------------------------------------------------- PEC


@dataclass(frozen=True)
class PecRepresentation:
    """Quasi-probability inverse of the depolarizing channel at strength ``p``.

    ``eta`` holds the signed weights of the Pauli corrections in the order
    (I, X, Y, Z); ``gamma`` is their one-norm.
    """

    p: float
    eta: tuple[float, float, float, float]
    gamma: float

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(np.asarray(self.eta)) / self.gamma

    @property
    def signs(self) -> np.ndarray:
        return np.sign(np.asarray(self.eta))

    def as_dict(self) -> dict[str, float]:
        return dict(zip("IXYZ", self.eta))


def pec_representation(p: float) -> PecRepresentation:
    """Invert depolarizing noise with Pauli corrections.

    In the Pauli-transfer picture the channel keeps the identity component and
    shrinks X, Y, Z by ``1 - 4p/3``; the inverse is a signed Pauli mixture.

    Raises:
        NotRepresentableError: for ``p >= 3/4`` where the inverse does not exist
            or is unbounded.
    """
    p = float(p)
    if not 0 <= p <= 1:
        raise ValueError(f"noise probability must lie in [0, 1], got {p}")
    if p >= 0.75:
        raise NotRepresentableError(f"depolarizing p={p:g} is not representable (requires p < 3/4)")
    d = 3 - 4 * p
    eta_i = (3 - p) / d
    eta_p = -p / d
    gamma = (3 + 2 * p) / d
    if p >= 0.5:
        warnings.warn(f"PEC at p={p:g} has gamma={gamma:.3g} per location; expect very high variance", stacklevel=2)
    return PecRepresentation(p, (eta_i, eta_p, eta_p, eta_p), gamma)


@dataclass(frozen=True)
class PecConfig:
    representation: PecRepresentation | None = None
    num_samples: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")


def _pec_rep_for(executor: Executor, config: PecConfig) -> PecRepresentation:
    noise = executor.noise
    if noise.kind is NoiseKind.NONE:
        p = 0.0
    elif noise.kind is NoiseKind.DEPOLARIZING:
        p = noise.p
    else:
        raise ValueError(f"PEC is only defined for depolarizing noise, not {noise.kind.value}")
    rep = config.representation
    if rep is None:
        return pec_representation(p)
    if abs(rep.p - p) > 1e-12:
        raise ValueError(f"PEC representation built for p={rep.p:g} but executor noise has p={p:g}")
    return rep


def pec_expectation(
    circuit: QuantumCircuit,
    config: PecConfig,
    executor: Executor,
    bindings: Mapping[str, np.ndarray] | None = None,
    rng: np.random.Generator | None = None,
) -> ExpectationResult:
    """Monte-Carlo quasi-probability estimate of the noiseless expectations.

    For every sample a Pauli correction is drawn independently at each noise
    location (two per acted qubit per gate) from ``|eta|/gamma`` and applied
    noiselessly there. The estimate is ``gamma^L * mean(sign * value)``.
    """
    rep = _pec_rep_for(executor, config)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n_rows = max((np.atleast_1d(v).shape[0] for v in (bindings or {}).values()), default=1)
    n_loc = circuit.noise_locations()
    s = config.num_samples
    before = executor.eval_count
    if rep.gamma == 1.0:
        frames = np.zeros((n_rows * s, n_loc), dtype=np.int64)
    else:
        frames = rng.choice(4, size=(n_rows * s, n_loc), p=rep.probabilities)
    parity = (frames != 0).sum(axis=1) % 2
    # all non-identity weights share one sign
    sign_nonid = rep.signs[1] if rep.p > 0 else 1.0
    sample_sign = np.where(parity == 1, sign_nonid, 1.0)
    row_index = np.repeat(np.arange(n_rows), s)
    values = executor(circuit, bindings, row_index=row_index, pauli_frames=frames)
    scale = rep.gamma**n_loc
    weighted = (sample_sign[:, None] * values).reshape(n_rows, s, -1) * scale
    est = weighted.mean(axis=1)
    var = weighted.var(axis=1, ddof=1) / s if s > 1 else np.full_like(est, np.nan)
    flags: dict[str, int] = {}
    est = _clip(est, flags, "pec_clamped")
    return ExpectationResult(est, var, flags, executor.eval_count - before)


# --------------------------------------------------------------------------- DDD


@dataclass(frozen=True)
class DddConfig:
    sequence: DddSequence = DddSequence.XX

    def __post_init__(self):
        object.__setattr__(self, "sequence", DddSequence(self.sequence))


def ddd_expectation(
    circuit: QuantumCircuit,
    config: DddConfig,
    executor: Executor,
    bindings: Mapping[str, np.ndarray] | None = None,
) -> ExpectationResult:
    before = executor.eval_count
    values = executor(insert_ddd(circuit, config.sequence), bindings)
    return ExpectationResult(values, eval_count=executor.eval_count - before)


# --------------------------------------------------------------------------- LRE


@dataclass(frozen=True)
class LreConfig:
    degree: int = 2
    fold_multiplier: int = 3
    groups: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.fold_multiplier < 3 or self.fold_multiplier % 2 == 0:
            raise ValueError("fold_multiplier must be an odd integer >= 3")
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(self.groups))


def monomial_exponents(n_vars: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors of total degree <= ``degree`` in graded-lex order."""
    out = []
    for total in range(degree + 1):
        for e in itertools.product(range(total, -1, -1), repeat=n_vars):
            if sum(e) == total:
                out.append(e)
    return out


def lre_scale_vectors(n_groups: int, degree: int, fold_multiplier: int = 3) -> list[tuple[int, ...]]:
    exps = monomial_exponents(n_groups, degree)
    vecs = [tuple(fold_multiplier**k for k in e) for e in exps]
    if len(set(vecs)) != len(vecs):
        vecs = [tuple(1 + 2 * k for k in e) for e in exps]
    return vecs


def lre_sample_matrix(scale_vectors: Sequence[Sequence[int]], degree: int) -> np.ndarray:
    """Monomials (columns, graded-lex) evaluated at each scale vector (rows)."""
    lam = np.asarray(scale_vectors, dtype=float)
    exps = np.asarray(monomial_exponents(lam.shape[1], degree))
    return np.prod(lam[:, None, :] ** exps[None, :, :], axis=2)


def lre_extrapolate(scale_vectors, values: np.ndarray, degree: int, max_cond: float = 1e12) -> np.ndarray:
    """Constant term of the multivariate polynomial through the samples."""
    m = lre_sample_matrix(scale_vectors, degree)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"need {m.shape[1]} scale vectors for degree {degree}, got {m.shape[0]}")
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > max_cond:
        raise np.linalg.LinAlgError(f"singular LRE sample matrix (cond={cond:.3g}) for scale vectors {list(scale_vectors)}")
    values = np.asarray(values, dtype=float)
    coeffs = np.linalg.solve(m, values.reshape(m.shape[0], -1))
    return coeffs[0].reshape(values.shape[1:])


def lre_samples(circuit: QuantumCircuit, groups: Sequence[int], vectors, executor: Executor,
                bindings: Mapping[str, np.ndarray] | None = None, share_prefixes: bool = True) -> np.ndarray:
    """Noisy expectations of the layerwise-folded circuits, one per scale vector.

    Folded circuits that agree on their leading groups share the simulated
    prefix state; results equal folding and executing each circuit whole.
    """
    if not share_prefixes:
        return np.stack([
            executor(fold_groups(circuit, FoldSpec(per_group_scales=v, group_boundaries=groups)), bindings)
            for v in vectors
        ])
    starts = tuple(groups)
    if not starts or starts[0] != 0 or list(starts) != sorted(set(starts)) or starts[-1] >= max(circuit.depth, 1):
        raise ValueError(f"group boundaries {starts} do not partition {circuit.depth} moments")
    ends = list(starts[1:]) + [circuit.depth]
    pieces = [QuantumCircuit(circuit.n_qubits, circuit.moments[a:b], circuit.param_bindings)
              for a, b in zip(starts, ends)]
    finals: list = [None] * len(vectors)

    def walk(depth, state, members):
        if depth == len(pieces):
            for i in members:
                finals[i] = state
            return
        branches: dict[int, list[int]] = {}
        for i in members:
            branches.setdefault(int(vectors[i][depth]), []).append(i)
        for lam, sub in branches.items():
            walk(depth + 1, executor.evolve(fold_global(pieces[depth], lam), bindings, init_states=state), sub)

    walk(0, None, list(range(len(vectors))))
    return np.stack([executor.measure(st) for st in finals])


def lre_expectation(
    circuit: QuantumCircuit,
    config: LreConfig,
    executor: Executor,
    bindings: Mapping[str, np.ndarray] | None = None,
) -> ExpectationResult:
    groups = config.groups if config.groups is not None else circuit.group_starts
    vectors = lre_scale_vectors(len(groups), config.degree, config.fold_multiplier)
    before = executor.eval_count
    raw = lre_samples(circuit, groups, vectors, executor, bindings)
    est = lre_extrapolate(vectors, raw, config.degree)
    flags: dict[str, int] = {}
    est = _clip(est, flags, "lre_clamped")
    return ExpectationResult(est, flags=flags, eval_count=executor.eval_count - before)


# --------------------------------------------------------------------------- plans


@dataclass(frozen=True)
class MitigationPlan:
    """One technique plus its settings; the other settings are ignored."""

    kind: MitigationKind = MitigationKind.NONE
    zne: ZneConfig = field(default_factory=ZneConfig)
    pec: PecConfig = field(default_factory=PecConfig)
    ddd: DddConfig = field(default_factory=DddConfig)
    lre: LreConfig = field(default_factory=LreConfig)

    def __post_init__(self):
        object.__setattr__(self, "kind", MitigationKind(self.kind))

    def settings(self) -> dict:
        """JSON-ready settings of the active technique."""
        if self.kind is MitigationKind.NONE:
            return {}
        cfg = getattr(self, self.kind.value)
        out = asdict(cfg)
        out.pop("representation", None)
        for k, v in out.items():
            if isinstance(v, enum.Enum):
                out[k] = v.value
            elif isinstance(v, tuple):
                out[k] = list(v)
        return out

    @classmethod
    def from_settings(cls, kind: MitigationKind | str, settings: Mapping | None = None) -> MitigationPlan:
        kind = MitigationKind(kind)
        settings = dict(settings or {})
        if kind is MitigationKind.NONE:
            return cls()
        cfg_cls = {
            MitigationKind.ZNE: ZneConfig,
            MitigationKind.PEC: PecConfig,
            MitigationKind.DDD: DddConfig,
            MitigationKind.LRE: LreConfig,
        }[kind]
        if kind is MitigationKind.ZNE and "scale_factors" in settings:
            settings["scale_factors"] = tuple(settings["scale_factors"])
        return cls(kind=kind, **{kind.value: cfg_cls(**settings)})

    def expectation(
        self,
        circuit: QuantumCircuit,
        executor: Executor,
        bindings: Mapping[str, np.ndarray] | None = None,
        rng: np.random.Generator | None = None,
    ) -> ExpectationResult:
        if self.kind is MitigationKind.NONE:
            before = executor.eval_count
            values = executor(circuit, bindings)
            return ExpectationResult(values, eval_count=executor.eval_count - before)
        if self.kind is MitigationKind.ZNE:
            return zne_expectation(circuit, self.zne, executor, bindings)
        if self.kind is MitigationKind.PEC:
            return pec_expectation(circuit, self.pec, executor, bindings, rng)
        if self.kind is MitigationKind.DDD:
            return ddd_expectation(circuit, self.ddd, executor, bindings)
        return lre_expectation(circuit, self.lre, executor, bindings)

    def evaluations_per_circuit(self, circuit: QuantumCircuit) -> int:
        """Circuit executions one mitigated expectation costs."""
        if self.kind is MitigationKind.ZNE:
            return len(self.zne.scale_factors)
        if self.kind is MitigationKind.PEC:
            return self.pec.num_samples
        if self.kind is MitigationKind.LRE:
            n_groups = len(self.lre.groups) if self.lre.groups is not None else circuit.n_groups
            return len(monomial_exponents(n_groups, self.lre.degree))
        return 1
