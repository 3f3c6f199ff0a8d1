import numpy as np
import pytest

from conftest import random_circuit
from qembench.batch import Executor
from qembench.circuit import ParamRef, build_moments, concatenate, insert_ddd, pauli, ry
from qembench.mitigation import (
    DddConfig,
    LreConfig,
    MitigationKind,
    MitigationPlan,
    NotRepresentableError,
    PecConfig,
    ZneConfig,
    ddd_expectation,
    linear_extrapolate,
    lre_expectation,
    lre_extrapolate,
    lre_samples,
    lre_sample_matrix,
    lre_scale_vectors,
    monomial_exponents,
    pec_expectation,
    pec_representation,
    richardson_extrapolate,
    zne_expectation,
)
from qembench.model import model_bindings, model_template
from qembench.noise import NoiseModel, make_channel
from qembench.simulator import execute, SimulatorConfig, run_density

GRID_BELOW = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5)


class ScaleExecutor:
    """Returns ``f(lambda)`` where lambda is the folded depth over the base depth."""

    def __init__(self, base_depth, f):
        self.base_depth, self.f = base_depth, f
        self.eval_count = 0
        self.noise = NoiseModel.noiseless()

    def __call__(self, circuit, bindings=None, row_index=None, pauli_frames=None):
        self.eval_count += 1
        return np.atleast_2d(self.f(circuit.depth / self.base_depth))


class GroupScaleExecutor:
    """Returns ``f(lambda_vector)`` from per-group fold factors, via evolve/measure."""

    def __init__(self, group_depths, f):
        self.group_depths, self.f = group_depths, f
        self.eval_count = 0

    def evolve(self, circuit, bindings=None, row_index=None, pauli_frames=None, init_states=None):
        prefix = [] if init_states is None else list(init_states)
        return prefix + [circuit.depth / self.group_depths[len(prefix)]]

    def measure(self, state):
        self.eval_count += 1
        return np.atleast_2d(self.f(np.array(state)))


def test_richardson_examples():
    lam = [1, 3, 5]
    assert abs(richardson_extrapolate(lam, np.array([1 - 0.1 * x for x in lam])) - 1.0) < 1e-12
    vals = np.array([0.9 - 0.05 * x - 0.01 * x**2 for x in lam])
    assert abs(richardson_extrapolate(lam, vals) - 0.9) < 1e-12
    assert abs(linear_extrapolate(lam, np.array([1 - 0.1 * x for x in lam])) - 1.0) < 1e-12


def test_richardson_exact_for_low_degree(rng):
    for k in (2, 3, 4):
        scales = [1, 3, 5, 7][:k]
        for _ in range(20):
            coeffs = rng.normal(size=k)
            vals = np.array([np.polyval(coeffs[::-1], s) for s in scales])
            assert abs(richardson_extrapolate(scales, vals) - coeffs[0]) < 1e-9


def test_zne_with_scale_executor():
    c = build_moments([ry(0, 0.3), ry(0, 0.4)], 1)
    ex = ScaleExecutor(c.depth, lambda x: [0.9 - 0.05 * x - 0.01 * x**2])
    res = zne_expectation(c, ZneConfig(), ex)
    assert abs(res.values[0, 0] - 0.9) < 1e-12
    assert ex.eval_count == 3


def test_zne_clamps_and_flags():
    c = build_moments([ry(0, 0.3)], 1)
    ex = ScaleExecutor(c.depth, lambda x: [1.2 - 0.1 * x])
    res = zne_expectation(c, ZneConfig(extrapolation="linear"), ex)
    assert res.values[0, 0] == 1.0
    assert res.flags == {"zne_clamped": 1}


def test_zne_config_validation():
    with pytest.raises(ValueError):
        ZneConfig(scale_factors=(1, 1, 3))
    with pytest.raises(ValueError):
        ZneConfig(scale_factors=(1,))
    with pytest.raises(ValueError):
        ZneConfig(extrapolation="cubic")


def test_zne_noiseless_constant(rng):
    c = random_circuit(rng)
    ex = Executor()
    assert np.allclose(zne_expectation(c, ZneConfig(), ex).values, ex(c), atol=1e-12)


def test_pec_representation_values():
    r0 = pec_representation(0.0)
    assert r0.eta == (1.0, 0.0, 0.0, 0.0) and r0.gamma == 1.0
    r = pec_representation(0.1)
    assert abs(r.eta[0] - 2.9 / 2.6) < 1e-12
    assert all(abs(e + 0.1 / 2.6) < 1e-12 for e in r.eta[1:])
    assert abs(r.gamma - 3.2 / 2.6) < 1e-12
    assert r.as_dict()["X"] == r.eta[1]


def test_pec_representation_identities():
    gammas = []
    for p in GRID_BELOW:
        r = pec_representation(p) if p < 0.5 else pytest.warns(UserWarning, pec_representation, p)
        assert abs(sum(r.eta) - 1) < 1e-12
        assert abs(r.gamma - (3 + 2 * p) / (3 - 4 * p)) < 1e-12
        assert abs(r.gamma - sum(abs(e) for e in r.eta)) < 1e-12
        gammas.append(r.gamma)
    assert gammas[0] == 1.0
    assert all(b > a for a, b in zip(gammas, gammas[1:]))


@pytest.mark.parametrize("p", [0.75, 0.9, 1.0])
def test_pec_not_representable(p):
    with pytest.raises(NotRepresentableError, match="not representable"):
        pec_representation(p)


def test_pec_inverts_channel_exactly():
    # sum_k eta_k P_k (N(rho)) P_k = rho for depolarizing N
    rng = np.random.default_rng(0)
    from qembench.linalg import PAULIS

    for p in (0.05, 0.3, 0.6):
        ch = make_channel("depolarizing", p)
        eta = pec_representation(p).eta if p < 0.5 else pytest.warns(UserWarning, pec_representation, p).eta
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        noisy = ch.apply(rho)
        back = sum(e * P @ noisy @ P.conj().T for e, P in zip(eta, PAULIS))
        assert np.abs(back - rho).max() < 1e-12


def test_pec_zero_noise_is_plain(rng):
    c = random_circuit(rng)
    ex = Executor()
    res = pec_expectation(c, PecConfig(num_samples=5), ex)
    assert np.allclose(res.values[0], Executor()(c)[0], atol=1e-12)
    assert ex.eval_count == 5


def test_pec_unbiased_single_gate():
    c = build_moments([ry(0, np.pi / 3)], 1)
    ex = Executor(NoiseModel.of("depolarizing", 0.1))
    res = pec_expectation(c, PecConfig(num_samples=10_000, seed=11), ex)
    se = np.sqrt(res.variance_estimate[0, 0])
    assert abs(res.values[0, 0] - 0.5) < 4 * se
    # the unmitigated value is far outside that band
    assert abs(ex(c)[0, 0] - 0.5) > 4 * se


def test_pec_standard_error_grows_with_depth():
    # X-only circuits: every sampled value is +-f^L exactly, so
    # S * Var = (gamma f)^(2L) - 1 with f = 1 - 4p/3
    p = 0.1
    gamma = pec_representation(p).gamma
    f = 1 - 4 * p / 3
    s = 40_000
    ses = []
    for depth in (1, 2, 4):
        c = build_moments([pauli("X", 0)] * depth, 1)
        res = pec_expectation(c, PecConfig(num_samples=s, seed=3), Executor(NoiseModel.of("depolarizing", p)))
        ses.append(np.sqrt(res.variance_estimate[0, 0]))
        predicted = np.sqrt(((gamma * f) ** (4 * depth) - 1) / s)
        assert abs(ses[-1] / predicted - 1) < 0.05
    assert ses[0] < ses[1] < ses[2]


def test_pec_rejects_other_channels(rng):
    with pytest.raises(ValueError, match="depolarizing"):
        pec_expectation(random_circuit(rng), PecConfig(num_samples=2), Executor(NoiseModel.of("bit_flip", 0.1)))


def test_pec_representation_mismatch(rng):
    cfg = PecConfig(representation=pec_representation(0.2), num_samples=2)
    with pytest.raises(ValueError, match="p=0.2"):
        pec_expectation(random_circuit(rng), cfg, Executor(NoiseModel.of("depolarizing", 0.1)))


def test_pec_batched_rows_independent():
    c = build_moments([ry(0, ParamRef("t"))], 1)
    ex = Executor(NoiseModel.of("depolarizing", 0.05))
    res = pec_expectation(c, PecConfig(num_samples=4000, seed=2), ex, {"t": np.array([0.0, np.pi / 2, np.pi])})
    se = np.sqrt(res.variance_estimate[:, 0])
    assert np.all(np.abs(res.values[:, 0] - [1, 0, -1]) < 4 * se + 1e-12)


def test_ddd_noiseless_identical(rng):
    for _ in range(5):
        c = build_moments([ry(0, 0.2)] * 5 + [ry(1, 0.4), ry(2, 0.1)], 3)
        ex = Executor()
        assert np.abs(ddd_expectation(c, DddConfig(), ex).values - ex(c)).max() < 1e-10


def test_ddd_noop_on_model_bit_identical():
    tmpl = model_template()
    b = model_bindings(np.ones((2, 3)), np.linspace(0, 1, 36))
    noise = NoiseModel.of("phase_flip", 0.1)
    a = ddd_expectation(tmpl, DddConfig(), Executor(noise, 8192, np.random.default_rng(1)), b).values
    plain = Executor(noise, 8192, np.random.default_rng(1))(tmpl, b)
    assert np.array_equal(a, plain)


def test_ddd_phase_flip_echo():
    # qubit 1 idles for two moments after RY(pi/2); pulses are noisy gates
    p = 0.1
    c = build_moments([ry(1, np.pi / 2), ry(0, 0.1), ry(0, 0.2), ry(0, 0.3)], 2)
    noise = NoiseModel.of("phase_flip", p)
    coh_plain = abs(run_density(c, noise)[0b00, 0b01])
    coh_ddd = abs(run_density(insert_ddd(c), noise)[0b00, 0b01])
    assert abs(coh_ddd / coh_plain - (1 - 2 * p) ** 4) < 1e-12


def test_monomials_graded_lex():
    assert monomial_exponents(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(monomial_exponents(5, 2)) == 21
    assert lre_scale_vectors(2, 1, 3) == [(1, 1), (3, 1), (1, 3)]
    vecs = lre_scale_vectors(5, 2, 3)
    assert len(set(vecs)) == 21
    assert all(v % 2 == 1 for vec in vecs for v in vec)


def test_lre_matrix_well_conditioned():
    vecs = lre_scale_vectors(5, 2, 3)
    m = lre_sample_matrix(vecs, 2)
    assert np.isfinite(np.linalg.cond(m)) and np.linalg.cond(m) < 1e8


def test_lre_recovers_polynomials(rng):
    vecs = lre_scale_vectors(5, 2, 3)
    exps = monomial_exponents(5, 2)
    lam = np.asarray(vecs, dtype=float)
    for _ in range(10):
        c = rng.normal(size=len(exps))
        vals = np.array([sum(ci * np.prod(l**np.array(e)) for ci, e in zip(c, exps)) for l in lam])
        assert abs(lre_extrapolate(vecs, vals, 2) - c[0]) < 1e-8


def test_lre_singular_names_vectors():
    with pytest.raises(np.linalg.LinAlgError, match=r"\(1, 1\)"):
        lre_extrapolate([(1, 1), (3, 3), (5, 5)], np.zeros(3), 1)


def test_lre_linear_model_via_executor():
    tmpl = model_template()
    depths = [b - a for a, b in tmpl.group_ranges()]
    ex = GroupScaleExecutor(depths, lambda l: [0.7 - 0.01 * l.sum() + 0.002 * l[0] * l[3]])
    res = lre_expectation(tmpl, LreConfig(), ex)
    assert abs(res.values[0, 0] - 0.7) < 1e-9
    assert ex.eval_count == 21


def test_lre_one_group_equals_linear_zne(rng):
    c = random_circuit(rng)
    noise = NoiseModel.of("amplitude_damping", 0.05)
    lre = lre_expectation(c, LreConfig(degree=1, groups=(0,)), Executor(noise)).values
    zne = zne_expectation(c, ZneConfig(scale_factors=(1, 3), extrapolation="linear"), Executor(noise)).values
    assert np.abs(lre - zne).max() < 1e-12


def test_lre_prefix_sharing_matches_whole_circuits(rng):
    tmpl = model_template()
    b = model_bindings(rng.normal(size=(4, 3)), rng.uniform(0, 6, size=(4, 36)))
    vecs = lre_scale_vectors(5, 2, 3)
    noise = NoiseModel.of("depolarizing", 0.05)
    shared = lre_samples(tmpl, tmpl.group_starts, vecs, Executor(noise, 8192, np.random.default_rng(0)), b)
    whole = lre_samples(tmpl, tmpl.group_starts, vecs, Executor(noise, 8192, np.random.default_rng(0)), b, share_prefixes=False)
    assert np.array_equal(shared, whole)


def test_lre_config_validation():
    with pytest.raises(ValueError):
        LreConfig(fold_multiplier=2)
    with pytest.raises(ValueError):
        LreConfig(degree=0)


@pytest.mark.parametrize("kind", list(MitigationKind))
def test_all_techniques_noop_without_noise(kind):
    rng = np.random.default_rng(5)
    tmpl = model_template()
    b = model_bindings(rng.normal(size=(20, 3)), rng.uniform(0, 2 * np.pi, size=(20, 36)))
    plan = MitigationPlan.from_settings(kind, {"num_samples": 3} if kind is MitigationKind.PEC else None)
    base = Executor()(tmpl, b)
    assert np.abs(plan.expectation(tmpl, Executor(), b).values - base).max() < 1e-8


def test_plan_round_trip():
    plan = MitigationPlan.from_settings("zne", {"scale_factors": [1, 3, 5, 7]})
    assert plan.settings() == {"scale_factors": [1, 3, 5, 7], "extrapolation": "richardson"}
    again = MitigationPlan.from_settings(plan.kind.value, plan.settings())
    assert again == plan
    assert MitigationPlan.from_settings("ddd", {"sequence": "XYXY"}).settings() == {"sequence": "XYXY"}
    assert MitigationPlan().settings() == {}


def test_evaluation_counts(rng):
    tmpl = model_template()
    b = model_bindings(rng.normal(size=(3, 3)), rng.uniform(0, 6, size=(3, 36)))
    noise = NoiseModel.of("depolarizing", 0.02)
    for kind, factor in (("none", 1), ("zne", 3), ("ddd", 1), ("lre", 21), ("pec", 200)):
        plan = MitigationPlan.from_settings(kind)
        ex = Executor(noise)
        res = plan.expectation(tmpl, ex, b)
        assert res.eval_count == ex.eval_count == 3 * factor
        assert plan.evaluations_per_circuit(tmpl) == factor


def test_reference_simulator_agrees_with_zne_inputs(rng):
    # the folded circuits the wrapper builds run the same on the dense simulator
    from qembench.circuit import fold_global

    c = random_circuit(rng, n_gates=6)
    noise = NoiseModel.of("bit_flip", 0.05)
    for s in (1, 3, 5):
        dense = execute(fold_global(c, s), SimulatorConfig(noise=noise)).values
        assert np.abs(Executor(noise)(fold_global(c, s))[0] - dense).max() < 1e-12


def test_concatenated_groups_for_custom_lre(rng):
    a, b = random_circuit(rng, n_gates=4), random_circuit(rng, n_gates=4)
    c = concatenate([a, b])
    res = lre_expectation(c, LreConfig(degree=1), Executor())
    assert np.abs(res.values - Executor()(c)).max() < 1e-10
