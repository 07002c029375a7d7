"""Desk-scale experiment presets shared by the scripts and the test suite.

Each case builds a (template, target, data) triple from the phantom
generator, runs the solver, and reports structural similarity against the
known target.  Sizes default to 64x64 so a full case runs in seconds to
minutes; parameters scale up to the 256x256 setting via the CLI config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow import TimeGrid
from .grid import GridSpec, Image
from .harness import Disc, Ellipse, PhantomSpec, add_noise, make_phantom, ssim
from .kernel import KernelSpec
from .objective import RegParams
from .optimizer import SolveConfig, SolveReport, reconstruct
from .ray import Geometry, Sinogram, fbp, forward_project
from .spatiotemporal import GatedData, gate_angles, reconstruct_gated

DEFAULT_HALF_WIDTH = 16.0


def default_geometry(spec: GridSpec, n_angles: int = 60, n_det: int | None = None) -> Geometry:
    if n_det is None:
        n_det = 2 * spec.nx
    return Geometry.uniform(n_angles, n_det, spec.half_width * math.sqrt(2.0))


def project_with_noise(img: Image, geo: Geometry, psnr_db: float, seed: int) -> Sinogram:
    return add_noise(forward_project(img, geo), psnr_db, seed)


@dataclass
class Case:
    spec: GridSpec
    template: Image
    target: Image
    geometry: Geometry
    data: Sinogram


def shifted_disc_case(nx: int = 64, n_angles: int = 60,
                      shift_pixels: float = 2.0) -> Case:
    """Template and target are the same disc, offset by a couple of pixels."""
    spec = GridSpec(DEFAULT_HALF_WIDTH, nx, nx)
    shift = shift_pixels * spec.h
    target = make_phantom(PhantomSpec("discs", discs=(Disc(0.0, 0.0, 5.0, 1.0),)), spec)
    template = make_phantom(PhantomSpec("discs", discs=(Disc(shift, 0.0, 5.0, 1.0),)), spec)
    geo = default_geometry(spec, n_angles)
    return Case(spec, template, target, geo, forward_project(target, geo))


def intensity_mismatch_case(nx: int = 64, n_angles: int = 60,
                            psnr_db: float = 15.0, seed: int = 11) -> Case:
    """Matching geometry, wrong template background (0.2 instead of 0)."""
    spec = GridSpec(DEFAULT_HALF_WIDTH, nx, nx)
    disc = Disc(0.5, -0.5, 5.0, 1.0)
    target = make_phantom(PhantomSpec("discs", background=0.0, discs=(disc,)), spec)
    template = make_phantom(
        PhantomSpec("discs", background=0.2,
                    discs=(Disc(disc.cx - spec.h, disc.cy + spec.h, disc.r, 0.8),)),
        spec,
    )
    geo = default_geometry(spec, n_angles)
    return Case(spec, template, target, geo,
                project_with_noise(target, geo, psnr_db, seed))


def head_phantom_case(nx: int = 64, n_angles: int = 60,
                      psnr_db: float = 15.0, seed: int = 23) -> Case:
    """Head-style phantom: target is deformed and grows a bright disc."""
    spec = GridSpec(DEFAULT_HALF_WIDTH, nx, nx)
    template = make_phantom(PhantomSpec(
        "shepp_like",
        ellipses=(
            Ellipse(0.0, 0.0, 9.5, 11.5, 0.0, 1.0),
            Ellipse(-3.0, 2.5, 2.0, 3.2, 18.0, -0.45),
            Ellipse(3.0, 2.5, 2.0, 3.2, -18.0, -0.45),
        ),
    ), spec)
    target = make_phantom(PhantomSpec(
        "shepp_like",
        ellipses=(
            Ellipse(0.4, -0.5, 10.0, 11.0, 6.0, 1.0),
            Ellipse(-4.2, 1.2, 2.4, 3.4, 40.0, -0.45),
            Ellipse(4.4, 3.4, 1.7, 2.9, -40.0, -0.45),
        ),
        discs=(Disc(0.0, -5.5, 1.8, 0.55),),
    ), spec)
    geo = default_geometry(spec, n_angles)
    return Case(spec, template, target, geo,
                project_with_noise(target, geo, psnr_db, seed))


def solve_case(case: Case, sigma: float = 2.0, gamma: float = 1e-5,
               tau: float = 1e-5, n_steps: int = 10, mode: str = "metamorphosis",
               max_iters: int = 120, step_v: float = 2e-5,
               step_zeta: float = 2e-3) -> tuple[SolveReport, float]:
    """Run one reconstruction; returns the report and the final-image SSIM."""
    report = reconstruct(
        case.template, case.data, case.geometry,
        KernelSpec(sigma), RegParams(gamma, tau), TimeGrid(n_steps),
        SolveConfig(max_iters=max_iters, step_v=step_v, step_zeta=step_zeta, mode=mode),
    )
    recon = report.trajectories.image_traj[-1]
    return report, ssim(case.target, recon)


def kernel_size_sweep(case: Case, sigmas, gamma: float = 1e-5, tau: float = 1e-5,
                      step_v: float = 5e-4, ref_sigma: float = 2.0,
                      **solve_kw) -> list[tuple[float, float]]:
    """(sigma, SSIM) rows for a sweep over kernel sizes.

    The velocity step is scaled by (ref_sigma/sigma)^2 because the smoothing
    gain grows with the kernel mass; without this the comparison confounds
    kernel size with effective step length.
    """
    rows = []
    for s in sigmas:
        sv = step_v * (ref_sigma / s) ** 2
        rows.append((s, solve_case(case, sigma=s, gamma=gamma, tau=tau,
                                   step_v=sv, **solve_kw)[1]))
    return rows


def regularizer_sweep(case: Case, gammas, taus, sigma: float = 3.0,
                      **solve_kw) -> list[tuple[float, float, float]]:
    """(gamma, tau, SSIM) rows over the regularisation grid."""
    rows = []
    for gamma in gammas:
        for tau in taus:
            rows.append((gamma, tau,
                         solve_case(case, sigma=sigma, gamma=gamma, tau=tau, **solve_kw)[1]))
    return rows


@dataclass
class GatedCase:
    spec: GridSpec
    template: Image
    frames: list[Image]
    gated: GatedData
    tgrid: TimeGrid


def evolving_gated_case(nx: int = 64, n_gates: int = 10, per_gate: int = 10,
                        seed: int = 5, psnr_db: float = 25.0,
                        n_det: int | None = None) -> GatedCase:
    """Drifting disc plus an appearing disc, observed through gated data."""
    spec = GridSpec(DEFAULT_HALF_WIDTH, nx, nx)
    if n_det is None:
        n_det = 2 * spec.nx
    tgrid = TimeGrid(n_gates)
    times = tuple(tgrid.times())
    phantom = PhantomSpec(
        "evolving_sequence",
        discs=(Disc(-3.0, -2.0, 4.0, 1.0),),
        drift=(5.0, 3.0),
        growth=0.1,
        appear=Disc(4.5, 4.0, 2.2, 0.9),
        appear_time=0.45,
        appear_ramp=0.25,
        times=times,
    )
    frames = make_phantom(phantom, spec)
    det_extent = spec.half_width * math.sqrt(2.0)
    gates = []
    for i, angles in enumerate(gate_angles(n_gates, per_gate, seed), start=1):
        geo = Geometry(angles, n_det, det_extent)
        sino = project_with_noise(frames[i], geo, psnr_db, seed + i)
        gates.append((i, sino))
    return GatedCase(spec, frames[0], frames, GatedData(gates), tgrid)


def concatenated_fbp(case: GatedCase, cutoff: float = 0.8) -> Image:
    """Static FBP from all gate angles lumped into one acquisition."""
    angles = np.concatenate([s.geometry.angles for _, s in case.gated.gates])
    order = np.argsort(angles)
    values = np.concatenate([s.values for _, s in case.gated.gates])[order]
    geo = Geometry(angles[order], case.gated.gates[0][1].geometry.n_det,
                   case.gated.gates[0][1].geometry.det_extent)
    return fbp(Sinogram(geo, values), case.spec, cutoff)


def solve_gated(case: GatedCase, sigma: float = 2.0, gamma: float = 1e-5,
                tau: float = 1e-5, max_iters: int = 150, step_v: float = 2e-5,
                step_zeta: float = 2e-3) -> tuple[SolveReport, list[float]]:
    """Gated reconstruction; returns the report and per-gate SSIM values."""
    report = reconstruct_gated(
        case.template, case.gated, KernelSpec(sigma), RegParams(gamma, tau),
        case.tgrid, SolveConfig(max_iters=max_iters, step_v=step_v, step_zeta=step_zeta),
    )
    scores = [ssim(case.frames[k], report.trajectories.image_traj[k])
              for k, _ in case.gated.gates]
    return report, scores
