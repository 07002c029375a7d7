"""Euler discretisation of velocity flows on [0, 1].

A time-varying velocity field v is sampled at N+1 uniform instants; its flow
maps phi_{s,t} (transporting points from time s to time t) are approximated
by chaining one-step small deformations Id -+ (1/N) v(t_k, .).  Maps are
stored as node-wise point arrays and composed by bilinearly resampling the
outer map at the inner map's points.  Three builders cover what the gradient
needs:

* maps_from_zero:   phi_{t_i,0} = phi_{t_{i-1},0} o (Id - (1/N) v(t_{i-1}))
* maps_to_index:    phi_{t_i,t_M} = phi_{t_{i+1},t_M} o (Id + (1/N) v(t_i)),
                    seeded with the identity at i = M (maps_to_one is M = N)
* intermediate_map: forward maps advect node points through the per-step
                    displacements; backward maps reuse the maps_from_zero
                    recursion with an arbitrary lower endpoint

The Jacobian determinant of phi_{t_i,t_M} follows the first-order recursion
|det| ~= (1 + (1/N) div v(t_i)) |det|_{i+1} o (Id + (1/N) v(t_i)), seeded
with 1, and is clamped away from zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridSpec,
    Image,
    VectorImage,
    divergence,
    sample_points_xy,
    sample_values_xy,
)

# lower clamp for Jacobian-determinant entries; the continuum determinant of a
# flow map is positive, dips below this are discretisation artifacts
DET_FLOOR = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, 1] into n_steps intervals, nodes i/n_steps."""

    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"need at least one time step, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) / self.n_steps


def _check_samples(samples, tgrid, kind):
    if len(samples) != tgrid.n_steps + 1:
        raise ValueError(
            f"{kind} needs {tgrid.n_steps + 1} samples, got {len(samples)}"
        )
    spec = samples[0].spec
    for s in samples:
        if s.spec != spec:
            raise ValueError(f"all {kind} samples must share one grid")
    return spec


@dataclass
class TimeVaryingVectorField:
    """Velocity samples v(t_i, .), i = 0..N."""

    tgrid: TimeGrid
    samples: list[VectorImage]

    def __post_init__(self):
        self.samples = list(self.samples)
        _check_samples(self.samples, self.tgrid, "velocity")

    @property
    def spec(self) -> GridSpec:
        return self.samples[0].spec

    @classmethod
    def zeros(cls, tgrid: TimeGrid, spec: GridSpec) -> "TimeVaryingVectorField":
        return cls(tgrid, [VectorImage.zeros(spec) for _ in range(tgrid.n_steps + 1)])

    def add_scaled(self, other: "TimeVaryingVectorField", alpha: float) -> "TimeVaryingVectorField":
        return TimeVaryingVectorField(
            self.tgrid,
            [VectorImage(s.spec, s.vx + alpha * o.vx, s.vy + alpha * o.vy)
             for s, o in zip(self.samples, other.samples)],
        )


@dataclass
class DeformationMap:
    """Images of the grid nodes under one flow map, as an (nx, ny, 2) array."""

    spec: GridSpec
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (self.spec.nx, self.spec.ny, 2):
            raise ValueError("deformation map points must have shape (nx, ny, 2)")
        if not np.isfinite(self.points).all():
            raise ValueError("deformation map points must be finite")

    @classmethod
    def identity(cls, spec: GridSpec) -> "DeformationMap":
        return cls(spec, spec.identity_points())


@dataclass
class JacobianChain:
    """Entry i approximates |det d phi_{t_i, t_end}| as an Image."""

    entries: list[Image]


def _clamp_points(pts: np.ndarray, spec: GridSpec) -> np.ndarray:
    # stored map points stay on the closed domain; fields vanish near the
    # boundary so drift outside is a discretisation artifact
    L = spec.half_width
    return np.clip(pts, -L, L)


def _one_step_queries(v_i: VectorImage, sign: float) -> tuple[np.ndarray, np.ndarray]:
    """Node coordinates displaced by sign * (1/N) v(t_i) (exact node values)."""
    spec = v_i.spec
    qx = spec.xs()[:, None] + sign * v_i.vx
    qy = spec.ys()[None, :] + sign * v_i.vy
    return qx, qy


def _advect(points: np.ndarray, v_i: VectorImage, dt_signed: float,
            spec: GridSpec) -> np.ndarray:
    """points + dt * v(points), sampling v with zero extension outside."""
    px, py = points[..., 0], points[..., 1]
    out = np.empty_like(points)
    out[..., 0] = px + dt_signed * sample_values_xy(v_i.vx, spec, px, py)
    out[..., 1] = py + dt_signed * sample_values_xy(v_i.vy, spec, px, py)
    return _clamp_points(out, spec)


def maps_from_zero(v: TimeVaryingVectorField) -> list[DeformationMap]:
    """Maps phi_{t_i,0} for i = 0..N (entry 0 is the identity)."""
    return _maps_backward_to(v, v.tgrid.n_steps, 0)


def _maps_backward_to(v: TimeVaryingVectorField, i_top: int, j: int) -> list[DeformationMap]:
    """phi_{t_k,t_j} for k = j..i_top via the small-deformation recursion."""
    spec = v.spec
    dt = v.tgrid.dt
    pts = spec.identity_points()
    out = [DeformationMap(spec, pts)]
    for k in range(j + 1, i_top + 1):
        qx, qy = _one_step_queries(v.samples[k - 1], -dt)
        pts = _clamp_points(sample_points_xy(pts, spec, qx, qy), spec)
        out.append(DeformationMap(spec, pts))
    return out


def maps_to_index(v: TimeVaryingVectorField, end: int) -> list[DeformationMap]:
    """Maps phi_{t_i, t_end} for i = 0..end, filled backward from the identity."""
    if not 0 <= end <= v.tgrid.n_steps:
        raise IndexError(f"end index {end} outside 0..{v.tgrid.n_steps}")
    spec = v.spec
    dt = v.tgrid.dt
    pts = spec.identity_points()
    out = [DeformationMap(spec, pts)]
    for i in range(end - 1, -1, -1):
        qx, qy = _one_step_queries(v.samples[i], dt)
        pts = _clamp_points(sample_points_xy(pts, spec, qx, qy), spec)
        out.append(DeformationMap(spec, pts))
    out.reverse()
    return out


def maps_to_one(v: TimeVaryingVectorField) -> list[DeformationMap]:
    """Maps phi_{t_i,1} for i = 0..N (entry N is the identity)."""
    return maps_to_index(v, v.tgrid.n_steps)


def forward_maps(v: TimeVaryingVectorField, end: int | None = None) -> list[DeformationMap]:
    """Maps phi_{0,t_j} for j = 0..end, built by advecting the node points."""
    if end is None:
        end = v.tgrid.n_steps
    spec = v.spec
    dt = v.tgrid.dt
    pts = spec.identity_points()
    out = [DeformationMap(spec, pts)]
    for k in range(end):
        pts = _advect(pts, v.samples[k], dt, spec)
        out.append(DeformationMap(spec, pts))
    return out


def intermediate_map(v: TimeVaryingVectorField, i: int, j: int) -> DeformationMap:
    """Map phi_{t_i,t_j}; identity when i == j."""
    n = v.tgrid.n_steps
    if not (0 <= i <= n and 0 <= j <= n):
        raise IndexError(f"time indices ({i}, {j}) outside 0..{n}")
    spec = v.spec
    dt = v.tgrid.dt
    if i == j:
        return DeformationMap.identity(spec)
    if i < j:
        pts = spec.identity_points()
        for k in range(i, j):
            pts = _advect(pts, v.samples[k], dt, spec)
        return DeformationMap(spec, pts)
    return _maps_backward_to(v, i, j)[-1]


def backward_advected_points(v: TimeVaryingVectorField, i: int):
    """Yield (j, points of phi_{t_i,t_j}) for j = i-1 down to 0.

    Each step advects the current points by -(1/N) v(t_j); used for the
    per-instant transport of the intensity control inside the gradient.
    """
    spec = v.spec
    dt = v.tgrid.dt
    pts = spec.identity_points()
    for j in range(i - 1, -1, -1):
        pts = _advect(pts, v.samples[j], -dt, spec)
        yield j, pts


def jacobian_chain_to_index(v: TimeVaryingVectorField, end: int) -> JacobianChain:
    """|det d phi_{t_i, t_end}| for i = 0..end via the divergence recursion."""
    if not 0 <= end <= v.tgrid.n_steps:
        raise IndexError(f"end index {end} outside 0..{v.tgrid.n_steps}")
    spec = v.spec
    dt = v.tgrid.dt
    det = np.ones(spec.shape)
    out = [Image(spec, det)]
    for i in range(end - 1, -1, -1):
        qx, qy = _one_step_queries(v.samples[i], dt)
        carried = sample_values_xy(det, spec, qx, qy)
        det = (1.0 + dt * divergence(v.samples[i]).values) * carried
        det = np.maximum(det, DET_FLOOR)
        out.append(Image(spec, det))
    out.reverse()
    return JacobianChain(out)


def jacobian_chain(v: TimeVaryingVectorField) -> JacobianChain:
    """|det d phi_{t_i,1}| for i = 0..N, all entries clamped positive."""
    return jacobian_chain_to_index(v, v.tgrid.n_steps)
