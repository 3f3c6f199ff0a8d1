import numpy as np
import pytest

from conftest import random_density
from qembench import linalg
from qembench.linalg import I2, X, Y, Z
from qembench.noise import CHANNEL_KINDS, NoiseKind, NoiseModel, apply_channel, make_channel

GRID = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
PLUS = np.full((2, 2), 0.5, dtype=complex)


@pytest.mark.parametrize("kind", list(NoiseKind))
@pytest.mark.parametrize("p", GRID)
def test_completeness(kind, p):
    assert np.abs(make_channel(kind, p).completeness() - I2).max() < 1e-12


@pytest.mark.parametrize("kind", CHANNEL_KINDS)
def test_zero_p_is_identity(kind, rng):
    ch = make_channel(kind, 0.0)
    assert np.abs(ch.apply(PLUS) - PLUS).max() < 1e-12
    rho = random_density(rng)
    assert np.abs(ch.apply(rho) - rho).max() < 1e-12


def test_bit_flip_full():
    out = make_channel("bit_flip", 1.0).apply(linalg.ket_density("0"))
    assert linalg.allclose(out, linalg.ket_density("1"))


def test_amplitude_damping_full_decay():
    out = make_channel("amplitude_damping", 1.0).apply(linalg.ket_density("1"))
    assert linalg.allclose(out, linalg.ket_density("0"))


def test_depolarizing_three_quarters_twirls(rng):
    ch = make_channel("depolarizing", 0.75)
    for _ in range(10):
        assert np.abs(ch.apply(random_density(rng)) - I2 / 2).max() < 1e-10


def test_kraus_sets():
    dep = make_channel("depolarizing", 0.3).kraus
    assert np.allclose(dep[0], np.sqrt(0.7) * I2)
    for k, pm in zip(dep[1:], (X, Y, Z)):
        assert np.allclose(k, np.sqrt(0.1) * pm)
    pd = make_channel("phase_damping", 0.36).kraus
    assert np.allclose(pd[0], [[1, 0], [0, 0.8]])
    assert np.allclose(pd[1], [[0, 0], [0, 0.6]])
    ad = make_channel("amplitude_damping", 0.36).kraus
    assert np.allclose(ad[1], [[0, 0.6], [0, 0]])


@pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
def test_bad_probability(p):
    with pytest.raises(ValueError):
        make_channel("bit_flip", p)


def test_phase_damping_attenuates_coherence():
    a, b, c = 0.7, 0.3, 0.2 - 0.1j
    rho = np.array([[a, c], [np.conj(c), b]])
    p = 0.19
    out = apply_channel(rho, make_channel("phase_damping", p), 0, 1)
    expected = np.array([[a, c * np.sqrt(1 - p)], [np.conj(c) * np.sqrt(1 - p), b]])
    assert np.abs(out - expected).max() < 1e-12


@pytest.mark.parametrize("p", [0.1, 0.5, 1.0])
def test_phase_flip_keeps_diagonal(p):
    rho = np.diag([0.3, 0.7]).astype(complex)
    assert linalg.allclose(apply_channel(rho, make_channel("phase_flip", p), 0, 1), rho)


def test_depolarizing_off_diagonal_factor():
    out = apply_channel(PLUS, make_channel("depolarizing", 0.1), 0, 1)
    assert abs(out[0, 1] - 0.5 * 13 / 15) < 1e-12
    assert abs(out[0, 0] - 0.5) < 1e-12


def test_apply_channel_target_range():
    with pytest.raises(ValueError):
        apply_channel(np.eye(4) / 4, make_channel("bit_flip", 0.1), 2, 2)


def test_apply_channel_acts_on_target_only():
    rho = linalg.ket_density("00")
    out = apply_channel(rho, make_channel("bit_flip", 1.0), 1, 2)
    assert linalg.allclose(out, linalg.ket_density("01"))


@pytest.mark.parametrize("p", [0.05, 0.3, 0.9])
def test_phase_damping_composition(p, rng):
    once = make_channel("phase_damping", 1 - (1 - p) ** 2)
    twice = make_channel("phase_damping", p)
    rho = random_density(rng)
    assert np.abs(twice.apply(twice.apply(rho)) - once.apply(rho)).max() < 1e-10


def test_transfer_matrix_of_depolarizing():
    r = make_channel("depolarizing", 0.3).transfer_matrix()
    assert np.allclose(r, np.diag([1, 0.6, 0.6, 0.6]))


def test_noise_model():
    m = NoiseModel.of("bit_flip", 0.2)
    assert m.kind is NoiseKind.BIT_FLIP and m.p == 0.2
    assert NoiseModel.noiseless().channel.is_identity
    with pytest.raises(ValueError):
        NoiseModel(make_channel("bit_flip", 0.1), placement="after")


def test_kind_names():
    assert [k.value for k in NoiseKind] == [
        "depolarizing", "amplitude_damping", "phase_damping", "bit_flip", "phase_flip", "none",
    ]
