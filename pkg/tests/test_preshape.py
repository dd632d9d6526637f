import numpy as np
import pytest

from conftest import centered_unit, orthonormal_pair, random_preshape
from fagstyle.errors import DegenerateInputError, ShapeError
from fagstyle.preshape import (
    PreShape,
    geodesic_distance,
    project,
    project_keep_shape,
    reshape_to_landmarks,
)
from oracles import project_ref


def test_reshape_split_half():
    lm = reshape_to_landmarks(np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(lm, [[1.0, 2.0], [3.0, 4.0]])


def test_reshape_row_major_3d():
    t = np.arange(8, dtype=np.float64).reshape(2, 2, 2)
    lm = reshape_to_landmarks(t)
    assert np.array_equal(lm, [[0, 1, 2, 3], [4, 5, 6, 7]])


def test_reshape_odd_count():
    with pytest.raises(ShapeError):
        reshape_to_landmarks(np.arange(5, dtype=np.float64))


def test_project_hand_case():
    tau = project(np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(tau.landmarks, [[-0.5, 0.5], [-0.5, 0.5]])


def test_project_similarity_invariance(rng):
    for _ in range(50):
        t = rng.normal(size=rng.integers(2, 6) * 2)
        tau = project(t).landmarks
        half = t.size // 2
        shifted = 3.7 * t.copy()
        shifted[:half] += -2.2
        shifted[half:] += 5.9
        tau2 = project(shifted).landmarks
        assert np.max(np.abs(tau - tau2)) < 1e-9


def test_project_degenerate():
    with pytest.raises(DegenerateInputError):
        project(np.array([5.0, 5.0, 5.0, 5.0]))


def test_project_idempotent(rng):
    for _ in range(20):
        tau = project(rng.normal(size=16))
        again = project(tau.landmarks)
        assert np.max(np.abs(again.landmarks - tau.landmarks)) < 1e-12


def test_project_matches_reference(rng):
    for _ in range(20):
        t = rng.normal(size=(3, 2, 2))
        assert np.max(np.abs(project(t).landmarks - project_ref(t))) < 1e-14


def test_project_keep_shape(rng):
    t = rng.normal(size=(3, 2, 2))
    kept = project_keep_shape(t)
    assert kept.shape == t.shape
    assert np.array_equal(kept.reshape(2, -1), project(t).landmarks)


def test_preshape_invariants_fuzz(rng):
    for _ in range(200):
        size = int(rng.integers(2, 40)) * 2
        tau = project(rng.normal(size=size))
        assert abs(np.linalg.norm(tau.landmarks) - 1.0) <= 1e-12
        assert np.max(np.abs(tau.landmarks.mean(axis=1))) <= 1e-12


def test_preshape_validation():
    with pytest.raises(ShapeError):
        PreShape(np.ones((3, 4)))
    with pytest.raises(ShapeError):
        PreShape(np.array([[0.5, -0.5], [0.5, -0.5]]) * 2)  # norm 2
    with pytest.raises(ShapeError):
        PreShape(np.array([[1.0, 0.0], [0.0, 0.0]]))  # uncentered


def test_distance_identity(rng):
    tau = random_preshape(8, rng)
    assert geodesic_distance(tau, tau) == 0.0


def test_distance_orthogonal(rng):
    a, b = orthonormal_pair(10, rng)
    assert abs(geodesic_distance(a, b) - np.pi / 2) < 1e-12
    assert abs(geodesic_distance(a, b) - 1.5707963268) < 1e-9


def test_distance_clamps_above_one(rng):
    # norm 1 + 5e-13 passes construction tolerance; the self inner product
    # then exceeds 1 and must clamp to zero distance instead of NaN
    lm = centered_unit(6, rng) * (1.0 + 5e-13)
    tau = PreShape(lm)
    d = geodesic_distance(tau, tau)
    assert d == 0.0 and not np.isnan(d)


def test_distance_mismatched_k(rng):
    with pytest.raises(ShapeError):
        geodesic_distance(random_preshape(4, rng), random_preshape(5, rng))


def test_metric_properties(rng):
    for _ in range(50):
        a = random_preshape(7, rng)
        b = random_preshape(7, rng)
        c = random_preshape(7, rng)
        assert geodesic_distance(a, b) == geodesic_distance(b, a)
        assert geodesic_distance(a, c) <= (
            geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-9
        )
    a = random_preshape(7, rng)
    same = PreShape(a.landmarks.copy())
    assert geodesic_distance(a, same) <= 1e-12
