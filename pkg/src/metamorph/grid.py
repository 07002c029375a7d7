"""Regular pixel grids on the square domain [-L, L]^2.

Images are scalar fields sampled at pixel centres, vector fields carry one
array per component.  Everything downstream (flows, ray transform, gradients)
builds on the bilinear sampling and the central-difference operators defined
here.  Fields are treated as zero outside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Square pixel grid covering [-half_width, half_width]^2.

    Node (i, j) sits at the pixel centre (-L + (i+1/2)h, -L + (j+1/2)h) with
    spacing h = 2L/nx.  Pixels must be square, so nx == ny.
    """

    half_width: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ValueError(f"half_width must be finite and positive, got {self.half_width}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2x2 pixels, got {self.nx}x{self.ny}")
        if self.nx != self.ny:
            raise ValueError(f"square pixels require nx == ny, got {self.nx}x{self.ny}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def xs(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.nx) + 0.5) * self.h

    def ys(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.ny) + 0.5) * self.h

    def identity_points(self) -> np.ndarray:
        """Node coordinates as an (nx, ny, 2) point array."""
        pts = np.empty((self.nx, self.ny, 2))
        pts[:, :, 0] = self.xs()[:, None]
        pts[:, :, 1] = self.ys()[None, :]
        return pts


@dataclass
class Image:
    """Scalar field on a grid; values[i, j] is the sample at node (x_i, y_j)."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError(
                f"image shape {self.values.shape} does not match grid {self.spec.shape}"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("image values must be finite")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "Image":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def full(cls, spec: GridSpec, value: float) -> "Image":
        return cls(spec, np.full(spec.shape, float(value)))

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "Image":
        xx, yy = np.meshgrid(spec.xs(), spec.ys(), indexing="ij")
        return cls(spec, np.asarray(fn(xx, yy), dtype=np.float64))

    def copy(self) -> "Image":
        return Image(self.spec, self.values.copy())


@dataclass
class VectorImage:
    """2-vector field on a grid, stored as separate x/y component arrays."""

    spec: GridSpec
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        self.vx = np.asarray(self.vx, dtype=np.float64)
        self.vy = np.asarray(self.vy, dtype=np.float64)
        if self.vx.shape != self.spec.shape or self.vy.shape != self.spec.shape:
            raise ValueError("vector field components must match the grid shape")
        if not (np.isfinite(self.vx).all() and np.isfinite(self.vy).all()):
            raise ValueError("vector field components must be finite")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "VectorImage":
        return cls(spec, np.zeros(spec.shape), np.zeros(spec.shape))

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "VectorImage":
        xx, yy = np.meshgrid(spec.xs(), spec.ys(), indexing="ij")
        vx, vy = fn(xx, yy)
        return cls(spec, np.broadcast_to(vx, spec.shape).copy(),
                   np.broadcast_to(vy, spec.shape).copy())

    def copy(self) -> "VectorImage":
        return VectorImage(self.spec, self.vx.copy(), self.vy.copy())


def _check_points(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    if pts.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of size 2")
    if not np.isfinite(pts).all():
        raise ValueError("point coordinates must be finite")
    return pts


def sample_values_xy(values: np.ndarray, spec: GridSpec,
                     px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Bilinear sample of a nodal value array at physical coordinates.

    Missing neighbours outside the grid contribute zero, and points outside
    the domain itself return exactly zero.
    """
    L = spec.half_width
    h = spec.h
    nx, ny = spec.nx, spec.ny
    u = (px + L) / h - 0.5
    w = (py + L) / h - 0.5
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(w).astype(np.int64)
    fu = u - i0
    fw = w - j0
    flat = values.ravel()
    out = None
    for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1)):
        ii = i0 + di if di else i0
        jj = j0 + dj if dj else j0
        wt = (fu if di else 1.0 - fu) * (fw if dj else 1.0 - fw)
        wt *= (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
        iic = np.minimum(np.maximum(ii, 0), nx - 1)
        jjc = np.minimum(np.maximum(jj, 0), ny - 1)
        term = wt * flat[iic * ny + jjc]
        out = term if out is None else out + term
    outside = (px < -L) | (px > L) | (py < -L) | (py > L)
    if np.any(outside):
        out = np.where(outside, 0.0, out)
    return out


def sample_points_xy(points: np.ndarray, spec: GridSpec,
                     px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Bilinear sample of an (nx, ny, 2) point array at physical coordinates.

    Queries are clamped onto the node hull, so the lookup is always a convex
    combination of stored points (used for composing deformation maps).
    """
    L = spec.half_width
    h = spec.h
    nx, ny = spec.nx, spec.ny
    u = np.clip((px + L) / h - 0.5, 0.0, nx - 1.0)
    w = np.clip((py + L) / h - 0.5, 0.0, ny - 1.0)
    i0 = np.minimum(np.floor(u).astype(np.int64), nx - 2)
    j0 = np.minimum(np.floor(w).astype(np.int64), ny - 2)
    fu = (u - i0)[..., None]
    fw = (w - j0)[..., None]
    p00 = points[i0, j0]
    p10 = points[i0 + 1, j0]
    p01 = points[i0, j0 + 1]
    p11 = points[i0 + 1, j0 + 1]
    return ((1.0 - fu) * (1.0 - fw) * p00 + fu * (1.0 - fw) * p10
            + (1.0 - fu) * fw * p01 + fu * fw * p11)


def sample_bilinear(img: Image, pts) -> np.ndarray:
    """Sample an image at arbitrary points; zero outside the domain."""
    pts = _check_points(pts)
    return sample_values_xy(img.values, img.spec, pts[..., 0], pts[..., 1])


def sample_bilinear_vec(vimg: VectorImage, pts) -> np.ndarray:
    """Componentwise bilinear sample of a vector field; zero outside the domain."""
    pts = _check_points(pts)
    px, py = pts[..., 0], pts[..., 1]
    out = np.empty(pts.shape)
    out[..., 0] = sample_values_xy(vimg.vx, vimg.spec, px, py)
    out[..., 1] = sample_values_xy(vimg.vy, vimg.spec, px, py)
    return out


def gradient_central(img: Image) -> VectorImage:
    """Central-difference gradient, one-sided at the boundary, scaled by 1/h."""
    h = img.spec.h
    gx = np.gradient(img.values, h, axis=0, edge_order=1)
    gy = np.gradient(img.values, h, axis=1, edge_order=1)
    return VectorImage(img.spec, gx, gy)


def divergence(v: VectorImage) -> Image:
    """Central-difference divergence, one-sided at the boundary."""
    h = v.spec.h
    d = np.gradient(v.vx, h, axis=0, edge_order=1) + np.gradient(v.vy, h, axis=1, edge_order=1)
    return Image(v.spec, d)


def image_l2_inner(a: Image, b: Image) -> float:
    """Grid L2 inner product sum(a*b) h^2."""
    if a.spec != b.spec:
        raise ValueError("images must share one grid")
    return float(np.sum(a.values * b.values)) * a.spec.h ** 2


def image_l2_norm_sq(a: Image) -> float:
    return float(np.sum(a.values * a.values)) * a.spec.h ** 2
