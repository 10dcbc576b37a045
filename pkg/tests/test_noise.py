import numpy as np
import pytest

from qtdoa.core import ValidationError
from qtdoa.noise import NoiseMode, NoiseSpec, measure, measure_classical, measure_quantum, standard_normals

X = np.array([0.7, -1.3, 0.4])


def _legs(anchors, scenario, x=X):
    plus, minus = scenario.pair_indices()
    dist = anchors.distances(x)
    return dist[plus], dist[minus]


def test_noiseless_equals_truth(anchors, scenario):
    for mode in NoiseMode:
        batch = measure(X, anchors, scenario, NoiseSpec(0.0, mode, 1, 0))
        np.testing.assert_array_equal(batch.values, batch.truth)


def test_wrong_mode_rejected(anchors, scenario):
    with pytest.raises(ValidationError):
        measure_quantum(X, anchors, scenario, NoiseSpec(0.01, "classical", 1))
    with pytest.raises(ValidationError):
        measure_classical(X, anchors, scenario, NoiseSpec(0.01, "quantum", 1))


def test_spec_validation():
    with pytest.raises(ValidationError):
        NoiseSpec(1.5, "quantum", 0)
    with pytest.raises(ValidationError):
        NoiseSpec(-0.1, "quantum", 0)
    with pytest.raises(ValueError):
        NoiseMode.parse("bogus")
    assert NoiseMode.parse("Classical") is NoiseMode.CLASSICAL


def test_deterministic(anchors, scenario):
    for mode in NoiseMode:
        spec = NoiseSpec(0.03, mode, 99, 4)
        a = measure(X, anchors, scenario, spec)
        b = measure(X, anchors, scenario, spec)
        assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(standard_normals(99, 4, 8), standard_normals(99, 5, 8))


def _draws(anchors, scenario, mode, eta, count):
    return np.array([measure(X, anchors, scenario, NoiseSpec(eta, mode, 2024, t)).values
                     for t in range(count)])


def test_quantum_mean_and_variance(anchors, scenario):
    eta, count = 0.02, 20_000
    l1, l2 = _legs(anchors, scenario)
    truth = l1 - l2
    d = _draws(anchors, scenario, NoiseMode.QUANTUM, eta, count)
    assert np.all(np.abs(d.mean(axis=0) - truth) <= 3 * eta * np.abs(truth) / np.sqrt(count))
    np.testing.assert_allclose(d.var(axis=0, ddof=1), eta**2 * truth**2, rtol=0.05)


def test_classical_variance_and_dominance(anchors, scenario):
    eta, count = 0.02, 20_000
    l1, l2 = _legs(anchors, scenario)
    d = _draws(anchors, scenario, NoiseMode.CLASSICAL, eta, count)
    assert np.all(np.abs(d.mean(axis=0) - (l1 - l2)) <= 3 * eta * np.hypot(l1, l2) / np.sqrt(count))
    np.testing.assert_allclose(d.var(axis=0, ddof=1), eta**2 * (l1**2 + l2**2), rtol=0.05)
    q = _draws(anchors, scenario, NoiseMode.QUANTUM, eta, count)
    assert np.all(d.var(axis=0) >= q.var(axis=0))


def test_equal_legs_analytic_variance():
    # Var of l(1 + eta e1) - l(1 + eta e2) is 2 eta^2 l^2
    rng = np.random.default_rng(0)
    eta, leg = 0.05, 1.7
    eps = rng.standard_normal((200_000, 2))
    vals = leg * (1 + eta * eps[:, 0]) - leg * (1 + eta * eps[:, 1])
    assert vals.var() == pytest.approx(2 * eta**2 * leg**2, rel=0.02)
