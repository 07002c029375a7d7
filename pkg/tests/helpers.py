"""Shared builders for the gradient finite-difference checks.

The fields are kernel-smoothed noise, tapered to vanish near the boundary
(velocities are compactly supported in the model), and the template/target
are broad smooth bumps so the central-difference factors inside the gradient
stay within their accuracy range on the coarse 32x32 check grid.
"""

import numpy as np

from metamorph.grid import GridSpec, Image, VectorImage, image_l2_inner
from metamorph.kernel import KernelSpec, kernel_apply, vfield_l2_inner
from metamorph.flow import TimeGrid, TimeVaryingVectorField
from metamorph.metamorphosis import TimeVaryingScalarField

FD_SPEC = GridSpec(16.0, 32, 32)
FD_KERNEL = KernelSpec(4.0)


def _taper(spec):
    xx, yy = np.meshgrid(spec.xs(), spec.ys(), indexing="ij")

    def smooth01(t):
        t = np.clip(t, 0.0, 1.0)
        return t * t * (3.0 - 2.0 * t)

    return smooth01((13.0 - np.abs(xx)) / 5.0) * smooth01((13.0 - np.abs(yy)) / 5.0)


TAPER = _taper(FD_SPEC)


def smooth_bump(cx, cy, width, height, spec=FD_SPEC):
    return Image.from_function(
        spec, lambda x, y: height * np.exp(-(((x - cx) ** 2 + (y - cy) ** 2)) / (2 * width ** 2)))


def smooth_vec(rng, scale, spec=FD_SPEC, kernel=FD_KERNEL, taper=None):
    if taper is None:
        taper = TAPER if spec == FD_SPEC else _taper(spec)
    raw = VectorImage(spec, rng.normal(size=spec.shape), rng.normal(size=spec.shape))
    sm = kernel_apply(raw, kernel)
    m = max(np.abs(sm.vx).max(), np.abs(sm.vy).max())
    return VectorImage(spec, sm.vx * taper * scale / m, sm.vy * taper * scale / m)


def smooth_img(rng, scale, spec=FD_SPEC, kernel=FD_KERNEL, taper=None):
    if taper is None:
        taper = TAPER if spec == FD_SPEC else _taper(spec)
    raw = VectorImage(spec, rng.normal(size=spec.shape), np.zeros(spec.shape))
    sm = kernel_apply(raw, kernel).vx
    return Image(spec, sm * taper * scale / np.abs(sm).max())


def random_state(n_steps, seed, amp_v=1e-4, amp_z=0.25):
    tg = TimeGrid(n_steps)
    rng = np.random.default_rng(seed)
    v = TimeVaryingVectorField(tg, [smooth_vec(rng, amp_v) for _ in range(n_steps + 1)])
    zeta = TimeVaryingScalarField(tg, [smooth_img(rng, amp_z) for _ in range(n_steps + 1)])
    return v, zeta


def smoothed_direction(rng, n_steps):
    """Raw direction r and the kernel-smoothed perturbation K*r (for v),
    plus a smooth intensity direction, normalised to unit max displacement."""
    rs = [smooth_vec(rng, 1.0) for _ in range(n_steps + 1)]
    dirs = [kernel_apply(r, FD_KERNEL) for r in rs]
    dmax = max(max(np.abs(d.vx).max(), np.abs(d.vy).max()) for d in dirs)
    dirs = [VectorImage(FD_SPEC, d.vx / dmax, d.vy / dmax) for d in dirs]
    rs = [VectorImage(FD_SPEC, r.vx / dmax, r.vy / dmax) for r in rs]
    etas = [smooth_img(rng, 1.0) for _ in range(n_steps + 1)]
    return rs, dirs, etas


def pair_gradient(grad, rs, etas, n_steps):
    """Directional derivative predicted by the gradient.

    For directions K*r in the velocity space the reproducing property turns
    the smoothed metric pairing into the plain grid pairing with the raw r,
    so no kernel inverse is needed.
    """
    return (1.0 / n_steps) * sum(
        vfield_l2_inner(grad.grad_v.samples[i], rs[i])
        + image_l2_inner(grad.grad_zeta.samples[i], etas[i])
        for i in range(n_steps))


def central_fd(objective, eps):
    """Four-point central difference along a parametrised line."""
    return (8.0 * (objective(eps) - objective(-eps))
            - (objective(2.0 * eps) - objective(-2.0 * eps))) / (12.0 * eps)
