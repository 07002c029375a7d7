"""Metamorphosis-style indirect image registration for 2D tomography.

A template image is matched against (possibly gated) parallel-beam sinogram
data by jointly estimating a velocity flow that deforms geometry and an
intensity control that creates or removes material along the flow.
"""

from .flow import (
    DeformationMap,
    JacobianChain,
    TimeGrid,
    TimeVaryingVectorField,
    intermediate_map,
    jacobian_chain,
    maps_from_zero,
    maps_to_one,
)
from .grid import (
    GridSpec,
    Image,
    VectorImage,
    divergence,
    gradient_central,
    sample_bilinear,
    sample_bilinear_vec,
)
from .harness import Disc, Ellipse, PhantomSpec, Triangle, add_noise, make_phantom, psnr, ssim
from .kernel import KernelSpec, kernel_apply, vfield_l2_inner
from .metamorphosis import (
    TimeVaryingScalarField,
    Trajectories,
    evolve_template,
    group_action,
    trajectories,
)
from .objective import (
    GradientPair,
    RegParams,
    data_discrepancy,
    discrepancy_gradient,
    evaluate,
    gradient,
)
from .optimizer import DivergenceError, SolveConfig, SolveReport, reconstruct
from .ray import Geometry, Sinogram, back_project, fbp, forward_project
from .spatiotemporal import (
    GatedData,
    gate_angles,
    gated_evaluate,
    gated_gradient,
    reconstruct_gated,
)

__version__ = "0.1.0"
