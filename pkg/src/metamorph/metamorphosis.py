"""Template evolution under an intensity control and the geometric action.

The intensity control zeta adds material along the flow: in the frame moving
with the template the solution is the running sum

    I(t_i) = I_0 + (1/N) * sum_{j < i} zeta(t_j, .) o phi_{0, t_j}

and the observable image at time t is the template pushed through the flow,
f_t = I(t) o phi_{t,0}.  Three trajectories are exposed: the image (geometry
and intensity), the deformation part (geometry only), and the template part
(intensity only).
"""

from __future__ import annotations

from dataclasses import dataclass

from .flow import DeformationMap, TimeGrid, TimeVaryingVectorField, forward_maps, maps_from_zero
from .grid import GridSpec, Image, sample_values_xy


@dataclass
class TimeVaryingScalarField:
    """Intensity-control samples zeta(t_i, .), i = 0..N."""

    tgrid: TimeGrid
    samples: list[Image]

    def __post_init__(self):
        self.samples = list(self.samples)
        if len(self.samples) != self.tgrid.n_steps + 1:
            raise ValueError(
                f"intensity control needs {self.tgrid.n_steps + 1} samples, got {len(self.samples)}"
            )
        spec = self.samples[0].spec
        for s in self.samples:
            if s.spec != spec:
                raise ValueError("all intensity samples must share one grid")

    @property
    def spec(self) -> GridSpec:
        return self.samples[0].spec

    @classmethod
    def zeros(cls, tgrid: TimeGrid, spec: GridSpec) -> "TimeVaryingScalarField":
        return cls(tgrid, [Image.zeros(spec) for _ in range(tgrid.n_steps + 1)])

    def add_scaled(self, other: "TimeVaryingScalarField", alpha: float) -> "TimeVaryingScalarField":
        return TimeVaryingScalarField(
            self.tgrid,
            [Image(s.spec, s.values + alpha * o.values)
             for s, o in zip(self.samples, other.samples)],
        )


@dataclass
class Trajectories:
    """Image, deformation-only and template-only evolutions, each N+1 images."""

    image_traj: list[Image]
    deformation_traj: list[Image]
    template_traj: list[Image]


def group_action(phi_inv: DeformationMap, img: Image) -> Image:
    """Pull an image back through a map: result(x) = img(phi_inv(x))."""
    if phi_inv.spec != img.spec:
        raise ValueError("map and image must share one grid")
    pts = phi_inv.points
    return Image(img.spec, sample_values_xy(img.values, img.spec, pts[..., 0], pts[..., 1]))


def evolve_template(v: TimeVaryingVectorField, zeta: TimeVaryingScalarField,
                    I0: Image) -> list[Image]:
    """Template values I(t_i) in the co-moving frame, i = 0..N."""
    if zeta.tgrid != v.tgrid or zeta.spec != v.spec or I0.spec != v.spec:
        raise ValueError("velocity, intensity control and template must be consistent")
    spec = v.spec
    dt = v.tgrid.dt
    fmaps = forward_maps(v)
    out = [I0.copy()]
    acc = I0.values
    for i in range(1, v.tgrid.n_steps + 1):
        pts = fmaps[i - 1].points
        carried = sample_values_xy(zeta.samples[i - 1].values, spec,
                                   pts[..., 0], pts[..., 1])
        acc = acc + dt * carried
        out.append(Image(spec, acc))
    return out


def trajectories(v: TimeVaryingVectorField, zeta: TimeVaryingScalarField,
                 I0: Image) -> Trajectories:
    """All three output trajectories; entry 0 of each equals the template."""
    template = evolve_template(v, zeta, I0)
    back = maps_from_zero(v)
    # phi_{0,0} is the identity, so entry 0 needs no resampling
    image = [template[0].copy()]
    deformation = [I0.copy()]
    for i in range(1, len(back)):
        image.append(group_action(back[i], template[i]))
        deformation.append(group_action(back[i], I0))
    return Trajectories(image, deformation, template)
