import numpy as np
import pytest

from conftest import orthonormal_pair, pair_at_distance, random_preshape
from fagstyle.errors import ConfigError, DegenerateGeodesicError, ShapeError
from fagstyle.geodesic import (
    AugmentConfig,
    WeightSet,
    augment,
    curve_point,
    generate_weight_sets,
    surface_point,
)
from fagstyle.preshape import PreShape, geodesic_distance
from oracles import surface_ref


def test_curve_s_zero_returns_start(rng):
    a = random_preshape(6, rng)
    b = random_preshape(6, rng)
    assert np.array_equal(curve_point(a, b, 0.0).landmarks, a.landmarks)


def test_curve_orthogonal_quarter(rng):
    a, b = orthonormal_pair(9, rng)
    got = curve_point(a, b, np.pi / 4).landmarks
    want = (np.sqrt(2) / 2) * (a.landmarks + b.landmarks)
    assert np.max(np.abs(got - want)) < 1e-12


def test_curve_endpoint_recovery(rng):
    for _ in range(30):
        a = random_preshape(8, rng)
        b = random_preshape(8, rng)
        d = geodesic_distance(a, b)
        end = curve_point(a, b, d)
        assert geodesic_distance(end, b) < 1e-9


def test_curve_arc_length(rng):
    for _ in range(50):
        a = random_preshape(10, rng)
        b = random_preshape(10, rng)
        d = geodesic_distance(a, b)
        for frac in (0.1, 0.5, 0.9):
            s = frac * d
            p = curve_point(a, b, s)
            assert abs(geodesic_distance(a, p) - s) <= 1e-9


def test_curve_output_is_valid_preshape(rng):
    for _ in range(30):
        a = random_preshape(12, rng)
        b = random_preshape(12, rng)
        p = curve_point(a, b, 0.3, beyond="allow").landmarks
        assert abs(np.linalg.norm(p) - 1.0) <= 1e-12
        assert np.max(np.abs(p.mean(axis=1))) <= 1e-12


def test_curve_warns_beyond_distance(rng):
    a, b = pair_at_distance(8, 0.2, rng)
    with pytest.warns(UserWarning):
        curve_point(a, b, 1.0)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        curve_point(a, b, 1.0, beyond="allow")


def test_curve_coincident_short_circuit(rng):
    a = random_preshape(6, rng)
    same = PreShape(a.landmarks.copy())
    assert np.array_equal(curve_point(a, same, 0.4).landmarks, a.landmarks)


def test_curve_antipodal_error(rng):
    a = random_preshape(6, rng)
    b = PreShape(-a.landmarks)
    with pytest.raises(DegenerateGeodesicError):
        curve_point(a, b, 0.5)


def test_curve_s_out_of_range(rng):
    a = random_preshape(6, rng)
    b = random_preshape(6, rng)
    with pytest.raises(ConfigError):
        curve_point(a, b, -0.1)
    with pytest.raises(ConfigError):
        curve_point(a, b, 3.5)


def test_surface_unit_weight_collapse(rng):
    taus = [random_preshape(8, rng) for _ in range(5)]
    w = WeightSet(np.array([1.0, 0, 0, 0, 0]))
    assert np.array_equal(surface_point(taus, w).landmarks, taus[0].landmarks)


def test_surface_identical_inputs(rng):
    tau = random_preshape(8, rng)
    taus = [PreShape(tau.landmarks.copy()) for _ in range(4)]
    out = surface_point(taus, WeightSet(np.ones(4)))
    assert np.array_equal(out.landmarks, taus[0].landmarks)


def test_surface_two_point_half_radian(rng):
    a, b = orthonormal_pair(10, rng)
    out = surface_point([a, b], WeightSet(np.array([1.0, 1.0])))
    want = np.cos(0.5) * a.landmarks + np.sin(0.5) * b.landmarks
    assert np.max(np.abs(out.landmarks - want)) < 1e-12


def test_surface_zero_weight_append_invariance(rng):
    taus = [random_preshape(6, rng) for _ in range(3)]
    base = surface_point(taus, WeightSet(np.array([0.5, 1.0, 2.0])))
    extended = surface_point(
        taus + [random_preshape(6, rng)], WeightSet(np.array([0.5, 1.0, 2.0, 0.0]))
    )
    assert np.array_equal(base.landmarks, extended.landmarks)


def test_surface_matches_reference_chain(rng):
    taus = [random_preshape(9, rng) for _ in range(5)]
    w = np.array([0.3, 1.2, 0.8, 0.0, 2.0])
    got = surface_point(taus, WeightSet(w)).landmarks
    want = surface_ref([t.landmarks for t in taus], list(w))
    assert np.max(np.abs(got - want)) < 1e-10


def test_surface_antipodal_reports_index(rng):
    a = random_preshape(6, rng)
    taus = [a, PreShape(-a.landmarks), random_preshape(6, rng)]
    with pytest.raises(DegenerateGeodesicError) as exc:
        surface_point(taus, WeightSet(np.ones(3)))
    assert exc.value.index == 2


def test_surface_shape_checks(rng):
    taus = [random_preshape(6, rng)]
    with pytest.raises(ShapeError):
        surface_point(taus, WeightSet(np.array([1.0])))
    taus = [random_preshape(6, rng), random_preshape(7, rng)]
    with pytest.raises(ShapeError):
        surface_point(taus, WeightSet(np.ones(2)))


def test_weight_sets_emphasis_example():
    sets = generate_weight_sets(4, AugmentConfig(m=4, gamma=0.5))
    assert np.array_equal(sets[1].weights, [0.125, 0.625, 0.125, 0.125])
    for s in sets:
        assert abs(s.weights.sum() - 1.0) < 1e-15


def test_weight_sets_gamma_zero_uniform():
    for s in generate_weight_sets(5, AugmentConfig(gamma=0.0)):
        assert np.allclose(s.weights, 0.2, rtol=0, atol=1e-15)


def test_weight_sets_dirichlet_deterministic():
    a = generate_weight_sets(4, AugmentConfig(scheme="dirichlet", seed=9))
    b = generate_weight_sets(4, AugmentConfig(scheme="dirichlet", seed=9))
    for x, y in zip(a, b):
        assert np.array_equal(x.weights, y.weights)
    c = generate_weight_sets(4, AugmentConfig(scheme="dirichlet", seed=10))
    assert not np.array_equal(a[0].weights, c[0].weights)


def test_weight_set_validation():
    with pytest.raises(ConfigError):
        WeightSet(np.array([0.0, 0.0]))
    with pytest.raises(ConfigError):
        WeightSet(np.array([1.0, -0.5]))
    with pytest.raises(ConfigError):
        AugmentConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        AugmentConfig(m=0)
    with pytest.raises(ConfigError):
        AugmentConfig(scheme="magic")


def test_augment_default_m_equals_n(rng):
    taus = [random_preshape(8, rng) for _ in range(49)]
    outs = augment(taus, AugmentConfig())
    assert len(outs) == 49


def test_augment_gamma_one_selects_patch(rng):
    taus = [random_preshape(8, rng) for _ in range(4)]
    outs = augment(taus, AugmentConfig(gamma=1.0))
    assert np.array_equal(outs[0].landmarks, taus[0].landmarks)


def test_augment_identical_inputs_collapse(rng):
    tau = random_preshape(8, rng)
    taus = [PreShape(tau.landmarks.copy()) for _ in range(5)]
    for out in augment(taus, AugmentConfig()):
        assert np.array_equal(out.landmarks, tau.landmarks)


def test_augment_outputs_valid(rng):
    taus = [random_preshape(16, rng) for _ in range(6)]
    for out in augment(taus, AugmentConfig(scheme="dirichlet", seed=3)):
        lm = out.landmarks
        assert abs(np.linalg.norm(lm) - 1.0) <= 1e-12
        assert np.max(np.abs(lm.mean(axis=1))) <= 1e-12
