import math

import numpy as np
import pytest

from lightrec.core import GrayImage, LightingVector, Rotation3, SphericalPose, make_rng
from lightrec.estimation import (
    EmptyShadingError,
    RankDeficientError,
    inject_ambiguity,
    load_ps,
    photometric_stereo,
    ps_summary,
    save_ps,
    shading_from_image,
    solve_lighting,
)
from lightrec.metrics import mean_angle_error
from lightrec.scene import KIND_NPL, LightSourceSpec, make_scene, render_apl, render_npl

# mutually orthogonal unit lights that all illuminate an upward-facing scene
TILTED_TRIAD = [
    LightingVector([2 / math.sqrt(6), 0.0, 1 / math.sqrt(3)]),
    LightingVector([-1 / math.sqrt(6), 1 / math.sqrt(2), 1 / math.sqrt(3)]),
    LightingVector([-1 / math.sqrt(6), -1 / math.sqrt(2), 1 / math.sqrt(3)]),
]


def ring_lights(k, strength=1.0, phi_deg=45.0):
    phi = math.radians(phi_deg)
    out = []
    for i in range(k - 1):
        theta = -math.pi + 2 * math.pi * (i + 1) / (k - 1)
        out.append(
            LightingVector.from_pose(SphericalPose(1.0, theta, phi), strength)
        )
    out.append(LightingVector([0.0, 0.0, strength]))
    return out


def render_stack(scene, lights, sigma=0.0, seed=0):
    rng = make_rng(seed)
    frames = []
    for l in lights:
        img = render_apl(scene, l)
        if sigma > 0:
            data = np.maximum(img.data + rng.normal(0, sigma, img.data.shape), 0.0)
            img = GrayImage(data, img.mask)
        frames.append(img)
    return frames


# -- shading ----------------------------------------------------------------------


def test_shading_identity_reflectance():
    scene = make_scene("bumpy", 32, seed=1)
    img = render_apl(scene, LightingVector([0.1, 0.2, 1.0]))
    shading = shading_from_image(img, np.ones(scene.shape))
    assert np.array_equal(shading.data[shading.mask], img.data[shading.mask])


def test_shading_exact_inversion():
    scene = make_scene("relief", 32)
    img = render_apl(scene, LightingVector([0.3, -0.2, 1.1]))
    shading = shading_from_image(img, scene.reflectance)
    expect = np.maximum(scene.normals @ np.array([0.3, -0.2, 1.1]), 0.0)
    assert np.max(np.abs(shading.data[shading.mask] - expect[shading.mask])) < 1e-12


def test_shading_noise_bound_propagates():
    scene = make_scene("bumpy", 32, seed=2)
    l = np.array([0.2, 0.1, 1.0])
    clean = render_apl(scene, LightingVector(l))
    rng = make_rng(3)
    noise = rng.normal(0.0, 0.01, clean.data.shape)
    noisy = GrayImage(np.maximum(clean.data + noise, 0.0), clean.mask)
    shading = shading_from_image(noisy, scene.reflectance)
    true_s = np.maximum(scene.normals @ l, 0.0)
    sel = shading.mask
    bound = np.abs(noise[sel]) / scene.reflectance[sel] + 1e-12
    # clamping can only pull the noisy value toward the true one
    assert np.all(np.abs(shading.data[sel] - true_s[sel]) <= bound)


def test_shading_empty_error():
    img = GrayImage(np.ones((4, 4)), np.zeros((4, 4), dtype=bool))
    with pytest.raises(EmptyShadingError):
        shading_from_image(img, np.ones((4, 4)))


# -- photometric stereo -------------------------------------------------------------


def test_ps_flat_scene_three_orthogonal_lights_exact():
    scene = make_scene("flat", 24)
    frames = render_stack(scene, TILTED_TRIAD)
    ps = photometric_stereo(frames, TILTED_TRIAD)
    assert np.all(ps.mask)
    assert np.max(np.abs(ps.normals - np.array([0.0, 0.0, 1.0]))) < 1e-9
    assert np.max(np.abs(ps.reflectance - scene.reflectance)) < 1e-9


def test_ps_thirteen_random_lights_sub_half_degree():
    scene = make_scene("bumpy", 64, seed=4)
    rng = make_rng(5)
    lights = []
    for _ in range(13):
        theta = rng.uniform(-math.pi, math.pi)
        phi = rng.uniform(math.radians(15), math.radians(55))
        lights.append(LightingVector.from_pose(SphericalPose(1.0, theta, phi), rng.uniform(0.7, 1.3)))
    ps = photometric_stereo(render_stack(scene, lights), lights)
    mae = mean_angle_error(ps.normals, scene.normals, ps.mask)
    assert math.degrees(mae) < 0.5


def test_ps_twelve_ring_lights_with_one_percent_noise():
    scene = make_scene("bumpy", 64, seed=6)
    lights = ring_lights(12)
    peak = 1.0  # unit-strength lights on reflectance <= 1 scenes
    frames = render_stack(scene, lights, sigma=0.01 * peak, seed=7)
    ps = photometric_stereo(frames, lights)
    mae = mean_angle_error(ps.normals, scene.normals, ps.mask)
    assert mae < math.pi / 3
    clean = photometric_stereo(render_stack(scene, lights), lights)
    assert math.degrees(mean_angle_error(clean.normals, scene.normals, clean.mask)) < 2.0


def test_ps_round_trip_reproduces_frames():
    scene = make_scene("relief", 48)
    lights = ring_lights(8, strength=1.2)
    frames = render_stack(scene, lights)
    ps = photometric_stereo(frames, lights)
    recovered = ps.normals * ps.reflectance[..., None]
    for frame, l in zip(frames, lights):
        sel = frame.mask & ps.mask
        redone = np.maximum(np.einsum("hwk,k->hw", recovered, l.vec) / np.maximum(ps.reflectance, 1e-12), 0)
        redone = redone * ps.reflectance
        assert np.max(np.abs(redone[sel] - frame.data[sel])) < 1e-7


def test_ps_rejects_rank_deficient_lights():
    scene = make_scene("flat", 16)
    lights = [LightingVector([1, 0, 0.4]), LightingVector([0, 1, 0.4]), LightingVector([1, 1, 0.8])]
    frames = render_stack(scene, lights)
    with pytest.raises(RankDeficientError):
        photometric_stereo(frames, lights)


def test_ps_masks_underobserved_pixels():
    scene = make_scene("flat", 16)
    frames = render_stack(scene, TILTED_TRIAD)
    # kill one frame's observations in a corner: those pixels drop below 3 views
    frames[0].mask[:4, :4] = False
    ps = photometric_stereo(frames, TILTED_TRIAD)
    assert not ps.mask[:4, :4].any()
    assert ps.mask[8:, 8:].all()


# -- ambiguity -----------------------------------------------------------------------


def test_inject_identity_is_noop():
    scene = make_scene("bumpy", 32, seed=8)
    lights = ring_lights(6)
    ps = photometric_stereo(render_stack(scene, lights), lights)
    same = inject_ambiguity(ps, Rotation3.identity())
    assert np.allclose(same.normals, ps.normals)
    assert same.mode == "ambiguity-injected"


def test_inject_preserves_shading_and_rerender():
    scene = make_scene("bumpy", 32, seed=9)
    lights = ring_lights(6)
    ps = photometric_stereo(render_stack(scene, lights), lights)
    rng = make_rng(10)
    for _ in range(100):
        z = Rotation3.random(rng)
        twisted = inject_ambiguity(ps, z)
        for k in (0, 3):
            before = np.einsum("hwk,k->hw", ps.normals, ps.lights[k].vec)
            after = np.einsum("hwk,k->hw", twisted.normals, twisted.lights[k].vec)
            assert np.max(np.abs(before - after)) < 1e-9


def test_inject_preserves_light_norms():
    scene = make_scene("bumpy", 32, seed=11)
    lights = ring_lights(5, strength=2.3)
    ps = photometric_stereo(render_stack(scene, lights), lights)
    rng = make_rng(12)
    for _ in range(50):
        z = Rotation3.random(rng)
        twisted = inject_ambiguity(ps, z)
        for a, b in zip(ps.lights, twisted.lights):
            assert abs(a.magnitude - b.magnitude) < 1e-12


def test_rerendered_clamped_images_match():
    scene = make_scene("bumpy", 24, seed=13)
    lights = ring_lights(5)
    ps = photometric_stereo(render_stack(scene, lights), lights)
    z = Rotation3.from_axis_angle([0.3, 1.0, 0.2], math.pi / 4)
    twisted = inject_ambiguity(ps, z)
    from lightrec.scene import SceneMaps

    def rebuild(p):
        return SceneMaps(p.normals, p.reflectance, scene.positions, p.mask)

    for l0, l1 in zip(ps.lights, twisted.lights):
        a = render_apl(rebuild(ps), l0)
        b = render_apl(rebuild(twisted), l1)
        assert np.max(np.abs(a.data - b.data)) < 1e-9


# -- lighting solve --------------------------------------------------------------------


def test_solve_lighting_exact_inversion():
    scene = make_scene("bumpy", 48, seed=14)
    l = LightingVector([0.4, -0.1, 1.2])
    img = render_apl(scene, l)
    shading = shading_from_image(img, scene.reflectance)
    got, rms = solve_lighting(shading, scene.normals)
    assert np.max(np.abs(got.vec - l.vec)) < 1e-9
    assert rms < 1e-9


def test_solve_lighting_flat_scene_rank_deficient():
    scene = make_scene("flat", 24)
    img = render_apl(scene, LightingVector([0, 0, 1.0]))
    shading = shading_from_image(img, scene.reflectance)
    with pytest.raises(RankDeficientError):
        solve_lighting(shading, scene.normals)


def test_solve_lighting_on_npl_render_points_at_source():
    scene = make_scene("bumpy", 64, seed=15)
    pose = SphericalPose(5.7, 0.9, 0.7)  # r >= 4x the sqrt(2) grid radius
    src = LightSourceSpec(KIND_NPL, pose, 20.0)
    img = render_npl(scene, src)
    shading = shading_from_image(img, scene.reflectance)
    got, _ = solve_lighting(shading, scene.normals)
    true_dir = src.position / pose.r
    ang = math.degrees(math.acos(float(np.clip(got.direction @ true_dir, -1, 1))))
    assert ang < 5.0


def test_solve_then_render_identity_on_lighting():
    scene = make_scene("hemisphere", 64)
    rng = make_rng(16)
    for _ in range(10):
        l = LightingVector(rng.normal(0, 0.5, 3) + [0, 0, 1.5])
        img = render_apl(scene, l)
        shading = shading_from_image(img, scene.reflectance)
        got, _ = solve_lighting(shading, scene.normals)
        assert np.max(np.abs(got.vec - l.vec)) < 1e-8


# -- persistence ------------------------------------------------------------------------


def test_sidecar_round_trip(tmp_path):
    scene = make_scene("bumpy", 32, seed=17)
    lights = ring_lights(6)
    ps = photometric_stereo(render_stack(scene, lights), lights)
    save_ps(ps, tmp_path / "ps.bin")
    back = load_ps(tmp_path / "ps.bin")
    assert back.shape == ps.shape
    assert back.mode == ps.mode
    assert np.array_equal(back.mask, ps.mask)
    assert np.max(np.abs(back.normals - ps.normals)) < 1e-6  # float32 payload
    assert mean_angle_error(back.normals, ps.normals, ps.mask) < 1e-6
    summary = ps_summary(back, scene.normals)
    assert summary["k"] == 6
    assert summary["mae_normals_rad"] < math.radians(1.0)
