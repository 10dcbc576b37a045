import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtdoa.core import (AnchorSet, RangingRow, RangingScenario, ValidationError, build_incidence,
                        combined_distance, truth_vector)

coords = st.floats(-5, 5, allow_nan=False)
points3 = st.tuples(coords, coords, coords)


def test_incidence_two_pairs():
    scen = RangingScenario.from_pairs([(1, 2), (3, 4)], n=4)
    np.testing.assert_array_equal(build_incidence(scen), [[1, -1, 0, 0], [0, 0, 1, -1]])


def test_incidence_smallest_row():
    np.testing.assert_array_equal(build_incidence(RangingScenario.from_pairs([(1, 2)], n=2)), [[1, -1]])


def test_incidence_testbed(scenario):
    P = build_incidence(scenario)
    assert P.shape == (8, 16)
    for k in range(8):
        expected = np.zeros(16)
        expected[2 * k], expected[2 * k + 1] = 1, -1
        np.testing.assert_array_equal(P[k], expected)
    np.testing.assert_array_equal(P @ np.ones(16), 0)


def test_out_of_range_index_rejected():
    with pytest.raises(ValidationError):
        RangingScenario.from_pairs([(1, 5)], n=4)


def test_bad_rows_rejected():
    with pytest.raises(ValidationError):
        RangingRow((1, 1), (1, -1))
    with pytest.raises(ValidationError):
        RangingRow((1, 2), (1, 2))
    with pytest.raises(ValidationError):
        RangingRow((1, 2), (1,))


def test_duplicate_anchors_rejected():
    with pytest.raises(ValidationError):
        AnchorSet(np.array([[0.0, 0, 0], [1, 1, 1], [0, 0, 0]]))
    with pytest.raises(ValidationError):
        AnchorSet(np.array([[0.0, np.nan, 0]]))


def test_combined_distance_examples():
    anchors = AnchorSet(np.array([[1.0, 1, 1], [-1, -1, -1]]))
    row = RangingRow.pair(1, 2)
    assert combined_distance([0, 0, 0], anchors, row) == pytest.approx(0, abs=1e-15)
    assert combined_distance([2, 2, 2], anchors, row) == pytest.approx(-2 * np.sqrt(3), rel=1e-14)
    single = RangingRow((1,), (1,))
    assert combined_distance([1, 1, 1], anchors, single) == 0.0


def test_truth_at_origin_is_zero(anchors, scenario):
    np.testing.assert_allclose(truth_vector([0, 0, 0], anchors, scenario), 0, atol=1e-15)


def test_truth_single_row_matches_combined(anchors):
    scen = RangingScenario.from_pairs([(3, 9)], n=16)
    x = [0.3, -1.2, 0.8]
    assert truth_vector(x, anchors, scen)[0] == combined_distance(x, anchors, scen.rows[0])


def test_row_permutation(anchors, scenario):
    perm = [3, 0, 7, 5, 1, 2, 6, 4]
    shuffled = RangingScenario([scenario.rows[k] for k in perm], 16)
    x = [0.4, 1.1, -0.6]
    np.testing.assert_array_equal(truth_vector(x, anchors, shuffled), truth_vector(x, anchors, scenario)[perm])


def test_two_dimensional_geometry():
    anchors = AnchorSet(np.array([[0.0, 0], [3, 0], [0, 4]]))
    scen = RangingScenario.from_pairs([(1, 2), (3, 1)], n=3)
    np.testing.assert_allclose(truth_vector([0, 0], anchors, scen), [-3, 4])


@settings(max_examples=200, deadline=None)
@given(points3)
def test_incidence_times_distances_is_truth(x):
    from qtdoa.core import reference_anchors, reference_scenario
    anchors, scenario = reference_anchors(), reference_scenario()
    P = build_incidence(scenario)
    y = anchors.distances(np.array(x))
    truth = truth_vector(x, anchors, scenario)
    np.testing.assert_allclose(P @ y, truth, rtol=1e-12, atol=1e-12)
    # shift invariance of difference rows
    np.testing.assert_allclose(P @ (y + 3.7), truth, rtol=1e-12, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(points3, points3, points3)
def test_pair_difference_bounded_by_anchor_gap(x, a, b):
    pos = np.array([a, b], dtype=float)
    if np.linalg.norm(pos[0] - pos[1]) < 1e-6:
        return
    anchors = AnchorSet(pos)
    val = combined_distance(x, anchors, RangingRow.pair(1, 2))
    assert abs(val) <= np.linalg.norm(pos[0] - pos[1]) * (1 + 1e-12) + 1e-12
