"""Rapid data-driven optimization of 1D Cartesian undersampling masks."""

from .cost import CostConfig, CostContext, psf_sidelobe, surrogate_cost
from .grappa import build_table, calibrate, pseudo_reconstruct
from .kspace import (
    AcsSpec,
    GridSpec,
    SamplingMask,
    apply_mask,
    error_map,
    fft2_centered,
    ifft2_centered,
    nrmse,
    sos_combine,
)
from .optimizer import OptimizerConfig, OptimizationTrace, optimize
from .phantom import CoilModel, PhantomSpec, make_dataset
from .recon import ReconConfig, evaluate_trajectory, pics_reconstruct
from .trajectories import (
    TrajectoryBudget,
    psf_optimized_mask,
    uniform_mask,
    variable_density_mask,
)

__version__ = "0.1.0"
