"""Phantoms, calibrated noise injection, and image-quality metrics.

Phantoms are rasterised with 4x4 supersampling per pixel so partial pixel
coverage is anti-aliased; shape intensities add on top of a constant
background.  Noise injection solves the scale from the drawn sample's own
norm, so the realised variance-ratio PSNR hits the target exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, Image
from .ray import Sinogram

_SUPER = 4  # supersampling factor per axis


@dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    r: float
    intensity: float = 1.0


@dataclass(frozen=True)
class Triangle:
    verts: tuple[tuple[float, float], ...]
    intensity: float = 1.0

    def __post_init__(self):
        if len(self.verts) != 3:
            raise ValueError("triangle needs exactly three vertices")


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    angle_deg: float = 0.0
    intensity: float = 1.0


@dataclass(frozen=True)
class PhantomSpec:
    """Shape list plus background; kind 'evolving_sequence' animates it.

    For the evolving kind, the base shapes drift by t * drift and scale by
    (1 + t * growth) about their centres, and `appear` fades in with weight
    clip((t - appear_time) / appear_ramp, 0, 1).
    """

    kind: str
    background: float = 0.0
    discs: tuple[Disc, ...] = ()
    triangles: tuple[Triangle, ...] = ()
    ellipses: tuple[Ellipse, ...] = ()
    times: tuple[float, ...] = ()
    drift: tuple[float, float] = (0.0, 0.0)
    growth: float = 0.0
    appear: Disc | None = None
    appear_time: float = 0.5
    appear_ramp: float = 0.2

    def __post_init__(self):
        kinds = ("discs", "triangle_pair", "shepp_like", "evolving_sequence")
        if self.kind not in kinds:
            raise ValueError(f"unknown phantom kind {self.kind!r}, expected one of {kinds}")


def _subgrid(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    sub = GridSpec(grid.half_width, grid.nx * _SUPER, grid.ny * _SUPER)
    return np.meshgrid(sub.xs(), sub.ys(), indexing="ij")


def _downsample(fine: np.ndarray, grid: GridSpec) -> np.ndarray:
    return fine.reshape(grid.nx, _SUPER, grid.ny, _SUPER).mean(axis=(1, 3))


def _disc_mask(xx, yy, d: Disc) -> np.ndarray:
    return ((xx - d.cx) ** 2 + (yy - d.cy) ** 2 <= d.r ** 2).astype(np.float64)


def _triangle_mask(xx, yy, tri: Triangle) -> np.ndarray:
    (x0, y0), (x1, y1), (x2, y2) = tri.verts
    # consistent half-plane test via signed areas
    d0 = (xx - x1) * (y0 - y1) - (x0 - x1) * (yy - y1)
    d1 = (xx - x2) * (y1 - y2) - (x1 - x2) * (yy - y2)
    d2 = (xx - x0) * (y2 - y0) - (x2 - x0) * (yy - y0)
    neg = (d0 < 0) & (d1 < 0) & (d2 < 0)
    pos = (d0 > 0) & (d1 > 0) & (d2 > 0)
    return (neg | pos).astype(np.float64)


def _ellipse_mask(xx, yy, e: Ellipse) -> np.ndarray:
    phi = math.radians(e.angle_deg)
    dx = xx - e.cx
    dy = yy - e.cy
    xr = dx * math.cos(phi) + dy * math.sin(phi)
    yr = -dx * math.sin(phi) + dy * math.cos(phi)
    return ((xr / e.a) ** 2 + (yr / e.b) ** 2 <= 1.0).astype(np.float64)


def _check_inside(grid: GridSpec, spec: PhantomSpec):
    L = grid.half_width
    for d in spec.discs:
        if abs(d.cx) + d.r > L or abs(d.cy) + d.r > L:
            raise ValueError(f"disc at ({d.cx}, {d.cy}) r={d.r} leaves the domain")
    for t in spec.triangles:
        for x, y in t.verts:
            if abs(x) > L or abs(y) > L:
                raise ValueError(f"triangle vertex ({x}, {y}) leaves the domain")
    for e in spec.ellipses:
        reach = max(e.a, e.b)
        if abs(e.cx) + reach > L or abs(e.cy) + reach > L:
            raise ValueError(f"ellipse at ({e.cx}, {e.cy}) leaves the domain")
    if spec.appear is not None:
        d = spec.appear
        if abs(d.cx) + d.r > L or abs(d.cy) + d.r > L:
            raise ValueError(f"appearing disc at ({d.cx}, {d.cy}) leaves the domain")


def _rasterise(grid: GridSpec, background: float, discs, triangles, ellipses) -> Image:
    xx, yy = _subgrid(grid)
    fine = np.full(xx.shape, float(background))
    for d in discs:
        fine += d.intensity * _disc_mask(xx, yy, d)
    for t in triangles:
        fine += t.intensity * _triangle_mask(xx, yy, t)
    for e in ellipses:
        fine += e.intensity * _ellipse_mask(xx, yy, e)
    return Image(grid, _downsample(fine, grid))


def _frame_at(spec: PhantomSpec, t: float):
    discs = tuple(
        Disc(d.cx + t * spec.drift[0], d.cy + t * spec.drift[1],
             d.r * (1.0 + t * spec.growth), d.intensity)
        for d in spec.discs
    )
    ellipses = tuple(
        Ellipse(e.cx + t * spec.drift[0], e.cy + t * spec.drift[1],
                e.a * (1.0 + t * spec.growth), e.b * (1.0 + t * spec.growth),
                e.angle_deg, e.intensity)
        for e in spec.ellipses
    )
    if spec.appear is not None:
        if spec.appear_ramp > 0:
            w = min(max((t - spec.appear_time) / spec.appear_ramp, 0.0), 1.0)
        else:
            w = 1.0 if t >= spec.appear_time else 0.0
        if w > 0:
            a = spec.appear
            discs = discs + (Disc(a.cx, a.cy, a.r, a.intensity * w),)
    return discs, ellipses


def make_phantom(spec: PhantomSpec, grid: GridSpec):
    """Rasterise a phantom; returns a list of Images for the evolving kind."""
    _check_inside(grid, spec)
    if spec.kind == "evolving_sequence":
        times = spec.times if spec.times else (0.0, 1.0)
        frames = []
        for t in times:
            discs, ellipses = _frame_at(spec, t)
            frames.append(_rasterise(grid, spec.background, discs, spec.triangles, ellipses))
        return frames
    return _rasterise(grid, spec.background, spec.discs, spec.triangles, spec.ellipses)


def _values_of(x) -> np.ndarray:
    if isinstance(x, (Image, Sinogram)):
        return x.values
    return np.asarray(x, dtype=np.float64)


def psnr(reference, test) -> float:
    """Variance-ratio PSNR in dB: 10 log10(|ref - mean|^2 / |err - mean|^2)."""
    ref = _values_of(reference)
    tst = _values_of(test)
    if ref.shape != tst.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {tst.shape}")
    sig = ref - ref.mean()
    s_power = float(np.sum(sig * sig))
    if s_power == 0.0:
        raise ValueError("reference is constant, PSNR undefined")
    err = tst - ref
    if not np.any(err):
        return math.inf
    err = err - err.mean()
    n_power = float(np.sum(err * err))
    if n_power == 0.0:
        return math.inf
    return 10.0 * math.log10(s_power / n_power)


def add_noise(sino: Sinogram, target_psnr_db: float, seed: int) -> Sinogram:
    """Add seeded white Gaussian noise scaled so the realised PSNR is exact.

    A target of +inf returns the data unchanged.
    """
    if math.isinf(target_psnr_db) and target_psnr_db > 0:
        return sino.copy()
    sig = sino.values - sino.values.mean()
    s_power = float(np.sum(sig * sig))
    if s_power == 0.0:
        raise ValueError("constant sinogram has undefined PSNR")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(sino.values.shape)
    centred = raw - raw.mean()
    n_power = float(np.sum(centred * centred))
    alpha = math.sqrt(s_power / (n_power * 10.0 ** (target_psnr_db / 10.0)))
    return Sinogram(sino.geometry, sino.values + alpha * raw)


def ssim(a, b, window: int = 8, dynamic_range: float | None = None) -> float:
    """Mean local SSIM over sliding windows (uniform weights).

    The stabilising constants use C1 = (0.01 R)^2, C2 = (0.03 R)^2 with R the
    dynamic range of the first argument unless given explicitly.
    """
    av = _values_of(a)
    bv = _values_of(b)
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch {av.shape} vs {bv.shape}")
    if min(av.shape) < window:
        raise ValueError(f"images smaller than the {window}x{window} SSIM window")
    if dynamic_range is None:
        dynamic_range = float(av.max() - av.min())
        if dynamic_range == 0.0:
            raise ValueError("constant reference image, pass dynamic_range explicitly")
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2

    def win_mean(x):
        view = np.lib.stride_tricks.sliding_window_view(x, (window, window))
        return view.mean(axis=(2, 3))

    mu_a = win_mean(av)
    mu_b = win_mean(bv)
    var_a = win_mean(av * av) - mu_a * mu_a
    var_b = win_mean(bv * bv) - mu_b * mu_b
    cov = win_mean(av * bv) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
