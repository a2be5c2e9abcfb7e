"""Baseline 1D Cartesian masks and budget repair.

Every generator returns a mask with exactly ``budget`` lines, the ACS block included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import psf_sidelobe
from .kspace import AcsSpec, SamplingMask

DEFAULT_VD_ALPHA = 1.0


@dataclass(frozen=True)
class TrajectoryBudget:
    n_lines: int
    reduction: float
    acs: AcsSpec = AcsSpec(0)

    def __post_init__(self):
        if self.n_lines < 1:
            raise ValueError(f"n_lines must be positive, got {self.n_lines}")
        if not self.reduction >= 1:
            raise ValueError(f"reduction factor must be >= 1, got {self.reduction}")
        if self.acs.width > self.n_lines:
            raise ValueError(f"ACS width {self.acs.width} exceeds n_lines {self.n_lines}")
        if self.budget < self.acs.width:
            raise ValueError(
                f"budget {self.budget} (n_lines={self.n_lines}, R={self.reduction}) "
                f"is smaller than the ACS width {self.acs.width}"
            )

    @property
    def budget(self) -> int:
        return max(1, min(self.n_lines, math.floor(self.n_lines / self.reduction + 0.5)))

    @property
    def acs_indicator(self) -> np.ndarray:
        return self.acs.indicator(self.n_lines)

    def is_valid(self, mask: SamplingMask) -> bool:
        ind = mask.indicator
        return (
            mask.n_lines == self.n_lines
            and mask.n_sampled == self.budget
            and bool(np.all(ind[self.acs_indicator]))
        )


def uniform_mask(b: TrajectoryBudget) -> SamplingMask:
    """ACS block plus equally spaced outer lines.

    The ``m`` non-ACS lines are split into ``k = budget - acs`` gaps of ``m // k``
    lines, the first ``m % k`` gaps one line longer.
    """
    ind = b.acs_indicator
    outer = np.flatnonzero(~ind)
    k = b.budget - b.acs.width
    if k > 0:
        q, r = divmod(outer.size, k)
        j = np.arange(k)
        ind[outer[j * q + np.minimum(j, r)]] = True
    return SamplingMask.from_indicator(ind)


def density_weights(n_lines: int, alpha: float) -> np.ndarray:
    """Sampling weights ``(1 - |k| / k_max)^alpha`` over centered line offsets ``k``.

    ``k_max = n_lines / 2 + 1`` keeps the outermost line's weight positive.
    """
    offsets = np.abs(np.arange(n_lines) - n_lines // 2)
    return (1.0 - offsets / (n_lines / 2 + 1)) ** alpha


def variable_density_mask(b: TrajectoryBudget, alpha: float = DEFAULT_VD_ALPHA, seed: int = 0) -> SamplingMask:
    """ACS block plus outer lines drawn without replacement from a polynomial density."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    ind = b.acs_indicator
    outer = np.flatnonzero(~ind)
    k = b.budget - b.acs.width
    if k > 0:
        w = density_weights(b.n_lines, alpha)[outer]
        rng = np.random.default_rng(seed)
        ind[rng.choice(outer, size=k, replace=False, p=w / w.sum())] = True
    return SamplingMask.from_indicator(ind)


def psf_optimized_mask(b: TrajectoryBudget, n_trials: int = 200, seed: int = 0) -> SamplingMask:
    """Best of ``n_trials`` variable-density (alpha = 1) masks by PSF sidelobe level.

    Trial ``t`` uses seed ``seed + t``; ties keep the earliest trial.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    best, best_score = None, np.inf
    for t in range(n_trials):
        mask = variable_density_mask(b, alpha=1.0, seed=seed + t)
        score = psf_sidelobe(mask)
        if score < best_score:
            best, best_score = mask, score
    return best


def repair_mask(candidate, b: TrajectoryBudget, seed=0, prefer=None) -> SamplingMask:
    """Force ACS lines on and add or remove random lines until the budget is met.

    Removals pick uniformly among sampled non-ACS lines. Additions pick uniformly
    among unsampled lines, drawing from ``prefer`` (an indicator) first when given.
    ``seed`` may be an int or a :class:`numpy.random.Generator`.
    """
    ind = np.array(candidate, dtype=bool).ravel()
    if ind.size != b.n_lines:
        raise ValueError(f"candidate has {ind.size} lines, budget expects {b.n_lines}")
    acs = b.acs_indicator
    ind |= acs
    excess = int(ind.sum()) - b.budget
    if excess == 0:
        return SamplingMask.from_indicator(ind)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if excess > 0:
        removable = np.flatnonzero(ind & ~acs)
        ind[rng.choice(removable, size=excess, replace=False)] = False
    else:
        need = -excess
        if prefer is not None:
            pool = np.flatnonzero(np.asarray(prefer, dtype=bool) & ~ind)
            take = min(need, pool.size)
            ind[rng.choice(pool, size=take, replace=False)] = True
            need -= take
        if need:
            pool = np.flatnonzero(~ind)
            ind[rng.choice(pool, size=need, replace=False)] = True
    return SamplingMask.from_indicator(ind)


def random_mask(b: TrajectoryBudget, seed=0) -> SamplingMask:
    """ACS block plus uniformly random outer lines."""
    return variable_density_mask(b, alpha=0.0, seed=seed)
