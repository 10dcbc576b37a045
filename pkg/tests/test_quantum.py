import numpy as np
import pytest

from qtdoa.core import ValidationError
from qtdoa.quantum import (PhaseModel, ShotRecord, decode_distance, estimate_phase, outcome_probability,
                           phase_from_distance, sample_shots)


def test_phase_examples():
    assert phase_from_distance(np.pi / 2, PhaseModel(1.0)) == pytest.approx(np.pi / 2)
    assert phase_from_distance(0.0, PhaseModel(2.0)) == 0.0
    assert phase_from_distance(-1.5, PhaseModel(1.0)) == -1.5


def test_phase_model_from_energies():
    model = PhaseModel.from_energies(0.0, 1e-19, hbar=1.0, c=2.0)
    assert model.kappa == pytest.approx(1e-19)
    with pytest.raises(ValidationError):
        PhaseModel(0.0)
    with pytest.raises(ValidationError):
        PhaseModel(np.inf)


@pytest.mark.parametrize("theta, p0", [(0.0, 1.0), (np.pi, 0.0), (np.pi / 2, 0.5)])
def test_outcome_probability_examples(theta, p0):
    a, b = outcome_probability(theta)
    assert a == pytest.approx(p0, abs=1e-15)
    assert b == pytest.approx(1 - p0, abs=1e-15)


def test_probabilities_normalized(rng):
    theta = rng.uniform(-10, 10, 10_000)
    p0, p1 = outcome_probability(theta)
    np.testing.assert_allclose(p0 + p1, 1.0, atol=1e-15, rtol=0)


def test_sample_shots_extremes(rng):
    assert sample_shots(0.0, 1000, rng).zeros == 1000
    assert sample_shots(np.pi, 1000, rng).zeros == 0
    with pytest.raises(ValidationError):
        sample_shots(1.0, 0, rng)


def test_sample_shots_concentration():
    # binomial sd at N=1e6 is 5e-4; the window is three sd wide each side
    rec = sample_shots(np.pi / 2, 10**6, np.random.default_rng(7))
    assert 0.4985 <= rec.zeros / rec.shots <= 0.5015


def test_sample_shots_deterministic():
    a = sample_shots(1.1, 5000, np.random.default_rng(3))
    b = sample_shots(1.1, 5000, np.random.default_rng(3))
    assert a == b


def test_estimate_phase_examples():
    assert estimate_phase(ShotRecord(100, 100)) == 0.0
    assert estimate_phase(ShotRecord(100, 0)) == pytest.approx(np.pi)
    assert estimate_phase(ShotRecord(100, 50)) == pytest.approx(np.pi / 2)
    with pytest.raises(ValidationError):
        ShotRecord(10, 11)


def test_decode_examples():
    assert decode_distance(np.pi / 2, PhaseModel(1.0)) == pytest.approx(np.pi / 2)
    model = PhaseModel(np.pi)
    theta = phase_from_distance(0.5, model)
    assert theta == pytest.approx(np.pi / 2)
    p0, _ = outcome_probability(theta)
    big = 10**9
    assert decode_distance(estimate_phase(ShotRecord(big, round(p0 * big))), model) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("theta", np.linspace(-np.pi, np.pi, 25))
def test_branch_identity(theta):
    # expected counts at N = 2**40 carry a rounding error of at most 1e-12 in p0
    p0, _ = outcome_probability(theta)
    N = 2**40
    assert estimate_phase(ShotRecord(N, int(round(p0 * N)))) == pytest.approx(abs(theta), abs=1e-5)


def test_round_trip_principal_branch():
    model = PhaseModel(1.3)
    for D in np.linspace(0, np.pi / 1.3, 11):
        p0, _ = outcome_probability(phase_from_distance(D, model))
        N = 2**40
        rec = ShotRecord(N, int(round(p0 * N)))
        assert decode_distance(estimate_phase(rec), model) == pytest.approx(D, abs=1e-5)
