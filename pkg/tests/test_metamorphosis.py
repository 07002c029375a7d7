import numpy as np
import pytest

from metamorph.grid import GridSpec, Image, VectorImage, image_l2_norm_sq, sample_bilinear
from metamorph.flow import DeformationMap, TimeGrid, TimeVaryingVectorField
from metamorph.kernel import KernelSpec, kernel_apply
from metamorph.metamorphosis import (
    TimeVaryingScalarField,
    evolve_template,
    group_action,
    trajectories,
)

SPEC = GridSpec(16.0, 32, 32)


def smooth_vec(rng, scale, spec=SPEC, sigma=3.0):
    raw = VectorImage(spec, rng.normal(size=spec.shape), rng.normal(size=spec.shape))
    sm = kernel_apply(raw, KernelSpec(sigma))
    m = max(np.abs(sm.vx).max(), np.abs(sm.vy).max())
    return VectorImage(spec, sm.vx * scale / m, sm.vy * scale / m)


def smooth_img(rng, scale, spec=SPEC, sigma=3.0):
    raw = VectorImage(spec, rng.normal(size=spec.shape), np.zeros(spec.shape))
    sm = kernel_apply(raw, KernelSpec(sigma)).vx
    return Image(spec, sm * scale / np.abs(sm).max())


def test_group_action_identity_returns_image():
    rng = np.random.default_rng(0)
    img = Image(SPEC, rng.normal(size=SPEC.shape))
    out = group_action(DeformationMap.identity(SPEC), img)
    assert np.array_equal(out.values, img.values)


def test_group_action_translation_shift_oracle():
    img = Image.from_function(SPEC, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 8))
    c = 2.0
    pts = SPEC.identity_points()
    pts = pts - np.array([c, 0.0])
    shifted = group_action(DeformationMap(SPEC, pts), img)
    # oracle: direct resampling of the image at shifted sample points
    expect = sample_bilinear(img, np.stack(
        [SPEC.identity_points()[..., 0] - c, SPEC.identity_points()[..., 1]], axis=-1))
    assert np.array_equal(shifted.values, expect)


def test_group_action_constant_invariant():
    img = Image.full(SPEC, 2.5)
    rng = np.random.default_rng(1)
    pts = SPEC.identity_points() + rng.normal(0, 0.5, SPEC.shape + (2,))
    # stay on the node hull where interpolation is a convex combination
    hull = SPEC.half_width - SPEC.h / 2
    pts = np.clip(pts, -hull, hull)
    out = group_action(DeformationMap(SPEC, pts), img)
    assert np.allclose(out.values, 2.5)


def test_evolve_zero_intensity_keeps_template():
    tg = TimeGrid(6)
    rng = np.random.default_rng(2)
    v = TimeVaryingVectorField(tg, [smooth_vec(rng, 0.8) for _ in range(7)])
    zeta = TimeVaryingScalarField.zeros(tg, SPEC)
    I0 = Image(SPEC, rng.normal(size=SPEC.shape))
    for entry in evolve_template(v, zeta, I0):
        assert np.array_equal(entry.values, I0.values)


def test_evolve_constant_intensity_no_flow():
    tg = TimeGrid(5)
    v = TimeVaryingVectorField.zeros(tg, SPEC)
    c = 0.7
    zeta = TimeVaryingScalarField(tg, [Image.full(SPEC, c) for _ in range(6)])
    I0 = Image.full(SPEC, 1.0)
    out = evolve_template(v, zeta, I0)
    for i, entry in enumerate(out):
        assert np.allclose(entry.values, 1.0 + c * i / 5, atol=1e-13)


def test_evolve_self_refinement_first_order():
    # analytic space-time fields sampled at N and at a fine reference N
    def v_of(t):
        return VectorImage.from_function(
            SPEC, lambda x, y: (0.8 * np.cos(np.pi * t) * np.exp(-(x ** 2 + y ** 2) / 50) * (-y / 8),
                                0.8 * np.cos(np.pi * t) * np.exp(-(x ** 2 + y ** 2) / 50) * (x / 8)))

    def z_of(t):
        return Image.from_function(
            SPEC, lambda x, y: np.sin(2 * np.pi * t) * np.exp(-((x - 2) ** 2 + y ** 2) / 30))

    def final_template(n):
        tg = TimeGrid(n)
        v = TimeVaryingVectorField(tg, [v_of(i / n) for i in range(n + 1)])
        zeta = TimeVaryingScalarField(tg, [z_of(i / n) for i in range(n + 1)])
        I0 = Image.from_function(SPEC, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 40))
        return evolve_template(v, zeta, I0)[-1].values

    ref = final_template(512)
    err8 = np.abs(final_template(8) - ref).max()
    err16 = np.abs(final_template(16) - ref).max()
    assert err16 < err8
    assert 1.3 <= err8 / err16 <= 2.8


def test_trajectories_start_at_template():
    tg = TimeGrid(4)
    rng = np.random.default_rng(3)
    v = TimeVaryingVectorField(tg, [smooth_vec(rng, 0.5) for _ in range(5)])
    zeta = TimeVaryingScalarField(tg, [smooth_img(rng, 0.5) for _ in range(5)])
    I0 = Image(SPEC, rng.normal(size=SPEC.shape))
    traj = trajectories(v, zeta, I0)
    for t in (traj.image_traj, traj.deformation_traj, traj.template_traj):
        assert np.array_equal(t[0].values, I0.values)


def test_zero_intensity_reduces_to_pure_transport():
    tg = TimeGrid(5)
    rng = np.random.default_rng(4)
    v = TimeVaryingVectorField(tg, [smooth_vec(rng, 1.0) for _ in range(6)])
    zeta = TimeVaryingScalarField.zeros(tg, SPEC)
    I0 = Image(SPEC, rng.normal(size=SPEC.shape))
    traj = trajectories(v, zeta, I0)
    for a, b in zip(traj.image_traj, traj.deformation_traj):
        assert np.array_equal(a.values, b.values)


def test_zero_flow_reduces_to_intensity_only():
    tg = TimeGrid(5)
    rng = np.random.default_rng(5)
    v = TimeVaryingVectorField.zeros(tg, SPEC)
    zeta = TimeVaryingScalarField(tg, [smooth_img(rng, 0.5) for _ in range(6)])
    I0 = Image(SPEC, rng.normal(size=SPEC.shape))
    traj = trajectories(v, zeta, I0)
    for a, b in zip(traj.image_traj, traj.template_traj):
        assert np.array_equal(a.values, b.values)


def test_total_intensity_change_bounded_by_control_norm():
    # |I(1) - I0| <= 2 |zeta|_2 for moderate flows (change of variables slack)
    tg = TimeGrid(6)
    rng = np.random.default_rng(6)
    for _ in range(5):
        v = TimeVaryingVectorField(tg, [smooth_vec(rng, 0.5) for _ in range(7)])
        zeta = TimeVaryingScalarField(tg, [smooth_img(rng, 0.8) for _ in range(7)])
        I0 = Image.zeros(SPEC)
        final = evolve_template(v, zeta, I0)[-1]
        lhs = np.sqrt(image_l2_norm_sq(final))
        znorm = np.sqrt(sum(image_l2_norm_sq(s) for s in zeta.samples[:-1]) / 6)
        assert lhs <= 2.0 * znorm
