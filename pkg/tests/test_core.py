import math

import numpy as np
import pytest

from lightrec.core import (
    GrayImage,
    LightingVector,
    Rotation3,
    SphericalPose,
    cartesian_to_spherical,
    make_rng,
    spherical_to_cartesian,
    wrap_angle_difference,
)


def test_pole_points_along_camera_axis():
    p = SphericalPose(1.0, 0.0, 0.0)
    assert np.allclose(spherical_to_cartesian(p), [0.0, 0.0, 1.0], atol=1e-12)


def test_equator_case():
    p = SphericalPose(2.0, 0.0, math.pi / 2)
    assert np.allclose(spherical_to_cartesian(p), [2.0, 0.0, 0.0], atol=1e-12)


def test_cartesian_norm_matches_radius():
    rng = make_rng(0)
    for _ in range(100):
        p = SphericalPose(rng.uniform(0.1, 50), rng.uniform(-4, 4), rng.uniform(0, math.pi))
        assert abs(np.linalg.norm(spherical_to_cartesian(p)) - p.r) < 1e-12


def test_round_trip_identity_bulk():
    rng = make_rng(1)
    worst = 0.0
    for _ in range(10_000):
        p = SphericalPose(
            rng.uniform(0.05, 100.0),
            rng.uniform(-math.pi, math.pi),
            rng.uniform(0.0, math.pi),
        )
        q = cartesian_to_spherical(spherical_to_cartesian(p))
        worst = max(
            worst,
            abs(q.r - p.r) / p.r,
            abs(wrap_angle_difference(q.theta, p.theta)) * math.sin(p.phi),
            abs(q.phi - p.phi),
        )
    assert worst < 1e-9


def test_pose_invariants():
    with pytest.raises(ValueError):
        SphericalPose(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        SphericalPose(-1.0, 0.0, 0.0)
    p = SphericalPose(1.0, 3.0 * math.pi, 4.0)
    assert -math.pi < p.theta <= math.pi
    assert 0.0 <= p.phi <= math.pi


def test_wrap_angle_difference_basic():
    assert wrap_angle_difference(0.1, -0.1) == pytest.approx(0.2, abs=1e-15)


def test_wrap_angle_difference_seam():
    assert wrap_angle_difference(math.pi - 0.1, -math.pi + 0.1) == pytest.approx(-0.2, abs=1e-12)


def test_wrap_angle_difference_identity_and_range():
    rng = make_rng(2)
    for _ in range(1000):
        x = rng.uniform(-10, 10)
        assert wrap_angle_difference(x, x) == 0.0
        d = wrap_angle_difference(x, rng.uniform(-10, 10))
        assert -math.pi < d <= math.pi


def test_wrap_angle_difference_congruence():
    rng = make_rng(3)
    for _ in range(1000):
        a, b = rng.uniform(-10, 10, size=2)
        d = wrap_angle_difference(a, b)
        rem = (d - (a - b)) % (2 * math.pi)
        assert min(rem, 2 * math.pi - rem) < 1e-9


def test_lighting_vector_accessors():
    l = LightingVector([0.0, 0.0, 2.0])
    assert l.magnitude == pytest.approx(2.0)
    assert np.allclose(l.direction, [0, 0, 1])
    theta, phi = l.angles()
    assert phi == pytest.approx(0.0)
    with pytest.raises(ValueError):
        LightingVector([np.inf, 0, 0])


def test_lighting_vector_from_pose():
    pose = SphericalPose(2.0, 0.3, 0.7)
    l = LightingVector.from_pose(pose, 5.0)
    assert l.magnitude == pytest.approx(5.0)
    assert np.allclose(l.direction * 2.0, spherical_to_cartesian(pose))


def test_gray_image_mask_statistics():
    data = np.array([[1.0, 2.0], [3.0, 100.0]])
    mask = np.array([[True, True], [True, False]])
    img = GrayImage(data, mask)
    assert img.median() == pytest.approx(2.0)
    assert img.max() == pytest.approx(3.0)
    assert img.pixel_count == 4
    with pytest.raises(ValueError):
        GrayImage(np.array([[-1.0]]))


def test_rotation_axis_angle_round_trip():
    rng = make_rng(4)
    for _ in range(200):
        axis = rng.normal(size=3)
        beta = rng.uniform(1e-3, math.pi - 1e-3)
        rot = Rotation3.from_axis_angle(axis, beta)
        beta2, e2 = rot.axis_angle()
        assert abs(beta2 - beta) < 1e-9
        assert np.allclose(e2, axis / np.linalg.norm(axis), atol=1e-9)


def test_rotation_half_turn_axis_up_to_sign():
    rot = Rotation3.from_axis_angle([1.0, 2.0, -0.5], math.pi)
    beta, e = rot.axis_angle()
    assert beta == pytest.approx(math.pi, abs=1e-9)
    ref = np.array([1.0, 2.0, -0.5])
    ref /= np.linalg.norm(ref)
    assert min(np.linalg.norm(e - ref), np.linalg.norm(e + ref)) < 1e-9


def test_rotation_identity_and_validation():
    beta, _ = Rotation3.identity().axis_angle()
    assert beta == 0.0
    with pytest.raises(ValueError):
        Rotation3(np.diag([1.0, 1.0, -1.0]))  # reflection
    with pytest.raises(ValueError):
        Rotation3(np.full((3, 3), 0.5))


def test_rotation_preserves_norm():
    rng = make_rng(5)
    for _ in range(100):
        rot = Rotation3.random(rng)
        v = rng.normal(size=3)
        assert abs(np.linalg.norm(rot.apply(v)) - np.linalg.norm(v)) < 1e-12
        assert np.allclose(rot.inverse().apply(rot.apply(v)), v, atol=1e-12)
