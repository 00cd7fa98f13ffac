"""Near-field line-of-sight MIMO: channel construction and array placement design."""

from .geometry import (
    ArrayGeometry,
    DeploymentRegime,
    ElementLayout,
    GeometryError,
    SubArrayPartition,
    SubArraySpec,
    Waveband,
    classify_paraxial,
    expand_partition,
    expand_uniform,
)
from .channel import (
    ChannelError,
    ChannelMatrix,
    QuarticFactors,
    exact_channel,
    quartic_channel,
    subarray_channel,
)
from .spectral_metrics import (
    SpectralReport,
    capacity,
    effective_rank,
    effective_rank_of,
    gram,
    gram_eigenvalues,
    orthogonality_ratio,
    spectral_report,
    waterfilling_powers,
)
from .paraxial_design import (
    ParaxialCoefficients,
    ParaxialSolution,
    compute_tau_gamma,
    solve_spacings,
    verify_orthogonality_condition,
)
from .nonparaxial_design import (
    EtaGamma,
    NonParaxialSolution,
    nonparaxial_orthogonality_residual,
    paraxial_limit_check,
    solve_chain,
    solve_four_subarrays,
    solve_two_subarrays,
)
from .grid_optimizer import GridAxis, GridResult, GridSpec, grid_search

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
