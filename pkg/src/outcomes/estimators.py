"""scikit-learn style wrappers around the mask design and reconstruction pipeline.

Every estimator takes multi-coil k-space ``X`` of shape ``(n_lines, n_readout, n_coils)``
as its sample. Masks are learned in :meth:`fit` and applied by :meth:`transform`, which
zeroes the unsampled phase-encode lines; :class:`PicsReconstructor` turns undersampled
k-space into an image with :meth:`predict`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .cost import CostConfig, CostContext
from .grappa import build_table
from .kspace import AcsSpec, SamplingMask, apply_mask, check_kspace, ifft2_centered, nrmse
from .optimizer import OptimizerConfig, optimize
from .recon import ReconConfig, estimate_sensitivities, pics_reconstruct, sense_combine
from .trajectories import (
    DEFAULT_VD_ALPHA,
    TrajectoryBudget,
    psf_optimized_mask,
    uniform_mask,
    variable_density_mask,
)

STRATEGIES = ("uniform", "variable-density", "psf")


def _budget(X, reduction, acs_width) -> TrajectoryBudget:
    return TrajectoryBudget(X.shape[0], reduction, AcsSpec(acs_width))


class _MaskTransformerMixin(TransformerMixin):
    def transform(self, X):
        """Zero every phase-encode line outside the learned mask."""
        check_is_fitted(self, "mask_")
        X = check_kspace(X, "X")
        if X.shape[0] != self.mask_.n_lines:
            raise ValueError(f"X has {X.shape[0]} lines, the mask was fitted on {self.mask_.n_lines}")
        return apply_mask(X, self.mask_)


class BaselineSampler(_MaskTransformerMixin, BaseEstimator):
    """Fixed-budget baseline masks: uniform, variable density or PSF-optimized.

    Parameters
    ----------
    strategy : {"uniform", "variable-density", "psf"}
    reduction : float
        Undersampling factor R.
    acs_width : int
        Width of the fully sampled center block.
    alpha : float
        Density exponent of the variable-density sampler.
    n_trials : int
        Candidates drawn by the PSF strategy.
    seed : int
    """

    def __init__(self, strategy="uniform", reduction=4.0, acs_width=24, alpha=DEFAULT_VD_ALPHA, n_trials=200, seed=0):
        self.strategy = strategy
        self.reduction = reduction
        self.acs_width = acs_width
        self.alpha = alpha
        self.n_trials = n_trials
        self.seed = seed

    def fit(self, X, y=None):
        X = check_kspace(X, "X")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        self.budget_ = _budget(X, self.reduction, self.acs_width)
        if self.strategy == "uniform":
            self.mask_ = uniform_mask(self.budget_)
        elif self.strategy == "variable-density":
            self.mask_ = variable_density_mask(self.budget_, self.alpha, self.seed)
        else:
            self.mask_ = psf_optimized_mask(self.budget_, self.n_trials, self.seed)
        return self


class MaskOptimizer(_MaskTransformerMixin, BaseEstimator):
    """Learn an undersampling mask from fully sampled reference k-space.

    :meth:`fit` calibrates the GRAPPA extrapolation table on the reference ACS block
    once, then runs the annealing/genetic search on the surrogate cost.

    Parameters
    ----------
    reduction, acs_width
        Budget definition, as in :class:`BaselineSampler`.
    d_max, kx_window
        Extrapolation reach and readout kernel width of the GRAPPA table.
    p, cost_transform, combine
        Surrogate cost settings (see :class:`~outcomes.cost.CostConfig`).
    n_iterations, n_candidates, mutation_swaps_mean, t_initial, t_decay, init, seed, n_jobs
        Search settings (see :class:`~outcomes.optimizer.OptimizerConfig`).

    Attributes
    ----------
    mask_ : SamplingMask
    trace_ : OptimizationTrace
    cost_context_ : CostContext
    budget_ : TrajectoryBudget
    """

    def __init__(
        self,
        reduction=4.0,
        acs_width=24,
        d_max=4,
        kx_window=3,
        p=8.0,
        cost_transform="identity",
        combine="sos",
        n_iterations=20,
        n_candidates=50,
        mutation_swaps_mean=2.0,
        t_initial=None,
        t_decay=0.85,
        init="uniform",
        seed=0,
        n_jobs=1,
    ):
        self.reduction = reduction
        self.acs_width = acs_width
        self.d_max = d_max
        self.kx_window = kx_window
        self.p = p
        self.cost_transform = cost_transform
        self.combine = combine
        self.n_iterations = n_iterations
        self.n_candidates = n_candidates
        self.mutation_swaps_mean = mutation_swaps_mean
        self.t_initial = t_initial
        self.t_decay = t_decay
        self.init = init
        self.seed = seed
        self.n_jobs = n_jobs

    def _optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            n_iterations=self.n_iterations,
            n_candidates=self.n_candidates,
            mutation_swaps_mean=self.mutation_swaps_mean,
            t_initial=self.t_initial,
            t_decay=self.t_decay,
            seed=self.seed,
            init=self.init,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        X = check_kspace(X, "X")
        cost_cfg = CostConfig(p=self.p, transform=self.cost_transform, combine=self.combine)
        opt_cfg = self._optimizer_config()
        self.budget_ = _budget(X, self.reduction, self.acs_width)
        table = build_table(X, AcsSpec(self.acs_width), self.d_max, self.kx_window)
        self.cost_context_ = CostContext(X, table, cost_cfg)
        self.mask_, self.trace_ = optimize(self.cost_context_, self.budget_, opt_cfg)
        return self

    def score(self, X=None, y=None):
        """Negative surrogate cost of the learned mask on the reference data."""
        check_is_fitted(self, "mask_")
        return -self.cost_context_(self.mask_)


class PicsReconstructor(BaseEstimator):
    """l1-Haar regularized SENSE reconstruction with ACS-estimated sensitivities.

    ``fit`` estimates the sensitivities from the ACS lines of ``X`` and fixes the mask;
    ``predict`` reconstructs an image from k-space sampled on that mask.

    Parameters
    ----------
    mask : SamplingMask or None
        Lines to use; ``None`` infers the mask from the nonzero lines of ``X``.
    acs_width : int
    lam : float or None
        l1 weight; ``None`` means ``1e-3`` of the zero-filled image peak.
    n_fista_iterations, wavelet_levels : int
    """

    def __init__(self, mask=None, acs_width=24, lam=None, n_fista_iterations=60, wavelet_levels=3):
        self.mask = mask
        self.acs_width = acs_width
        self.lam = lam
        self.n_fista_iterations = n_fista_iterations
        self.wavelet_levels = wavelet_levels

    @staticmethod
    def _infer_mask(X) -> SamplingMask:
        return SamplingMask.from_indicator(np.any(X != 0, axis=(1, 2)))

    def fit(self, X, y=None):
        X = check_kspace(X, "X")
        mask = self.mask if self.mask is not None else self._infer_mask(X)
        if not isinstance(mask, SamplingMask):
            raise TypeError(f"mask must be a SamplingMask, got {type(mask).__name__}")
        if mask.n_lines != X.shape[0]:
            raise ValueError(f"mask has {mask.n_lines} lines, X has {X.shape[0]}")
        self.config_ = ReconConfig(self.lam, self.n_fista_iterations, self.wavelet_levels)
        self.config_.check_grid(X.shape)
        self.mask_ = mask
        self.sensitivities_ = estimate_sensitivities(apply_mask(X, mask), AcsSpec(self.acs_width))
        return self

    def predict(self, X):
        check_is_fitted(self, "sensitivities_")
        X = check_kspace(X, "X")
        if X.shape != self.sensitivities_.shape:
            raise ValueError(f"X shape {X.shape} does not match the fitted grid {self.sensitivities_.shape}")
        return pics_reconstruct(X, self.mask_, self.sensitivities_, self.config_)

    def score(self, X, y=None):
        """Negative NRMSE against the fully sampled ``y`` (or ``X``) combined with the fitted sensitivities."""
        reference = check_kspace(X if y is None else y, "y")
        truth = sense_combine(ifft2_centered(reference), self.sensitivities_)
        return -nrmse(self.predict(X), truth)
