"""Porous-medium / Hele-Shaw front tracking.

Solvers for the degenerate diffusion model with drift and source and for
its incompressible limit, plus the free-boundary geometry and convergence
diagnostics that probe support expansion, interior lower bounds, Hausdorff
convergence along the exponent sweep, and frontier covering dimensions.
"""

from .errors import (
    EmptyMaskError,
    GridMismatchError,
    MarginViolationError,
    NegativeDensityError,
    NonFiniteFieldError,
    PmeFrontError,
    ScenarioError,
    UnsupportedRegimeError,
)
from .forcing import (
    ConstantDrift,
    ConstantSource,
    LogisticSource,
    PolynomialSource,
    PotentialDrift,
    RotationDrift,
    ShearDrift,
    ZeroDrift,
    ZeroSource,
    drift_from_config,
    source_from_config,
)
from .grids import (
    Field,
    Grid,
    Mask,
    VectorField,
    divergence,
    gradient,
    inner,
    l1_distance,
    l1_norm,
    laplacian,
    linf_norm,
    mass,
    read_mask_rle,
    read_snapshot,
    write_mask_rle,
    write_snapshot,
)
from .model import (
    InitialData,
    ModelSpec,
    AssumptionReport,
    ab_constant,
    audit_assumptions,
    default_p_max,
    density_from_pressure,
    pressure_from_density,
    theoretical_support_radius,
)
from .pme import SolveConfig, Trajectory, run, stable_dt, step
from .heleshaw import (
    LimitConfig,
    LimitState,
    LimitTrajectory,
    PsorConfig,
    complementarity_solve,
    run_limit,
    transport_growth_step,
)
from .geometry import (
    ConvolutionParams,
    FrontierRecord,
    SpacetimeDistance,
    StreamlineTrace,
    dilate,
    erode,
    extract_frontier,
    flow_map_set,
    hausdorff_distance,
    inf_convolve,
    integrate_streamline,
    modified_convolutions,
    spacetime_frontier_distance,
    sup_convolve,
)
from .scenarios import (
    PRESET_NAMES,
    RunManifest,
    Scenario,
    load_scenario,
    preset,
    run_scenario,
    save_scenario,
)

__version__ = "0.1.0"
