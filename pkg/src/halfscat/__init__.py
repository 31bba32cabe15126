"""Forward and inverse acoustic scattering from a locally perturbed ground
plane, plus the electromagnetic image-field checks that go with it."""

from .geometry import (
    GROUND_PLANE,
    PanelMesh,
    Plane,
    SurfaceProfile,
    build_profile,
    mesh_perturbation,
    mirror,
)
from .incident import (
    BoundaryCondition,
    IncidentWave,
    PlaneWave,
    PointSource,
    eval_plane_pair,
    eval_point_pair,
    grad_plane_pair,
    grad_point_pair,
)
from .kernels import GreenKernel, eval_G, farfield_kernel, farfield_kernel_grad_y, grad_G_y
from .solver import (
    DirectionGrid,
    FarFieldPattern,
    LayerDensity,
    SolveReport,
    eval_farfield,
    eval_scattered,
    solve_scattered,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "DirectionGrid",
    "FarFieldPattern",
    "GreenKernel",
    "GROUND_PLANE",
    "IncidentWave",
    "LayerDensity",
    "PanelMesh",
    "Plane",
    "PlaneWave",
    "PointSource",
    "SolveReport",
    "SurfaceProfile",
    "build_profile",
    "eval_farfield",
    "eval_G",
    "eval_plane_pair",
    "eval_point_pair",
    "eval_scattered",
    "farfield_kernel",
    "farfield_kernel_grad_y",
    "grad_G_y",
    "grad_plane_pair",
    "grad_point_pair",
    "mesh_perturbation",
    "mirror",
    "solve_scattered",
    "__version__",
]
