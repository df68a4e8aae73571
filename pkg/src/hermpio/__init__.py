"""Recovery of point masses from finitely many Hermite moments.

The moments may be given for the measure itself or for its Fourier
transform.  A filtered Hermite expansion (the point-mass isolation operator)
concentrates near every point mass; thresholding, clustering and a local
argmax search give the count, locations and amplitudes.
"""

from .basis import (
    Box,
    christoffel_darboux,
    enumerate_indices,
    hermite_eval_multivariate,
    hermite_eval_univariate,
    hermite_table,
    index_count,
    mehler_closed_form,
    total_degree,
)
from .detect import (
    DetectConfig,
    DetectedSpike,
    DetectionResult,
    amplitude_at,
    cluster,
    coarse_grid,
    detect,
    noise_bound,
    refine_argmax,
    super_level_set,
)
from .filters import FilterSpec, filter_eval
from .group import Group, group_report, group_report_csv, group_spikes
from .moments import (
    GriddedDensity,
    MomentSet,
    PerturbationSpec,
    PointMass,
    Scenario,
    as_spatial,
    convert_side,
    moments_from_density,
    moments_from_masses,
    perturb,
)
from .pio import (
    GridEvaluation,
    PioConfig,
    kernel_diag,
    kernel_eval,
    kernel_pairs,
    lattice_axes,
    pio_eval,
    pio_eval_grid,
    pio_eval_points,
)
from .verify import CHECKS, CheckReport, run_suite

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
