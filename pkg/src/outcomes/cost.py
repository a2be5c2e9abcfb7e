"""Surrogate reconstruction-error cost and the PSF sidelobe metric.

The surrogate fills the missing lines of a candidate mask from the precomputed
GRAPPA table, transforms to image space and measures a count-normalized L_p norm
of the (optionally wavelet-transformed) deviation from the reference image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grappa import GrappaExtrapolationTable, fill_plan
from .kspace import SamplingMask, check_kspace, ifft1_centered, sos_combine
from .wavelet import haar_dwt2

TRANSFORMS = ("identity", "wavelet-haar-2level")
COMBINES = ("sos", "per-coil")


@dataclass(frozen=True)
class CostConfig:
    p: float = 8.0
    transform: str = "identity"
    combine: str = "sos"

    def __post_init__(self):
        if not (self.p >= 2):
            raise ValueError(f"p must be >= 2 or inf, got {self.p}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        if self.combine not in COMBINES:
            raise ValueError(f"combine must be one of {COMBINES}, got {self.combine!r}")


def lp_normalized(err: np.ndarray, p: float) -> float:
    """``(mean |err|^p)^(1/p)``; the max modulus for ``p = inf``."""
    mag = np.abs(err).ravel()
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        return 0.0
    if math.isinf(p):
        return peak
    # Scale by the peak so |err|^p cannot under- or overflow.
    mag /= peak
    if p == 8:
        mag *= mag
        mag *= mag
        mag *= mag
    else:
        mag **= p
    return peak * float(np.mean(mag)) ** (1.0 / p)


class CostContext:
    """Immutable state shared by every surrogate evaluation for one reference dataset.

    The reference and table are converted once to the hybrid (ky, x) domain, where
    line filling commutes with the readout transform; each evaluation then needs
    only a phase-encode inverse FFT.
    """

    def __init__(self, reference_kspace, table: GrappaExtrapolationTable, config: CostConfig | None = None):
        reference_kspace = check_kspace(reference_kspace, "reference_kspace")
        if reference_kspace.shape != table.grid.shape:
            raise ValueError(f"reference shape {reference_kspace.shape} does not match table grid {table.grid.shape}")
        self.reference_kspace = reference_kspace
        self.table = table
        self.config = config or CostConfig()
        self.grid = table.grid
        n = self.grid.n_lines
        # Lines are stored in transform order: line i sits at row (i - n/2) mod n, so the
        # plain inverse FFT along ky applies and the image comes out rolled by n/2 in y.
        # Norms are permutation invariant, so the target is rolled the same way instead.
        self._row_of_line = (np.arange(n) - n // 2) % n
        self._ref_hybrid = ifft1_centered(reference_kspace, axis=1)
        self._entries_hybrid = ifft1_centered(table.entries, axis=2)
        self._ref_hybrid.setflags(write=False)
        self._entries_hybrid.setflags(write=False)
        coil_images = ifft1_centered(self._ref_hybrid, axis=0)
        self.ground_truth_image = sos_combine(coil_images)
        self._target = np.roll(self._combine(coil_images), -(n // 2), axis=0)
        self._target.setflags(write=False)

    @property
    def n_lines(self) -> int:
        return self.grid.n_lines

    def _combine(self, coil_images):
        if self.config.combine == "sos":
            return np.sqrt(
                np.einsum("yxc,yxc->yx", coil_images.real, coil_images.real)
                + np.einsum("yxc,yxc->yx", coil_images.imag, coil_images.imag)
            )
        return coil_images

    def _transform(self, err):
        if self.config.transform == "identity":
            return err
        # Undo the internal roll so the Haar blocks line up with the image grid.
        return haar_dwt2(np.roll(err, self.n_lines // 2, axis=0), levels=2)

    def _pseudo_rolled(self, mask: SamplingMask, workers=None):
        if mask.n_lines != self.n_lines:
            raise ValueError(f"mask has {mask.n_lines} lines, context grid has {self.n_lines}")
        targets, sources = fill_plan(mask.indicator, self.table.d_max)
        d = targets - sources
        k = np.where(d < 0, d + self.table.d_max, d + self.table.d_max - 1)
        filled = np.zeros_like(self._ref_hybrid)
        rows = self._row_of_line
        filled[rows[mask.sampled]] = self._ref_hybrid[mask.sampled]
        filled[rows[targets]] = self._entries_hybrid[k, sources]
        coil_images = sfft.ifft(filled, axis=0, norm="ortho", workers=workers, overwrite_x=True)
        return self._combine(coil_images)

    def pseudo_image(self, mask: SamplingMask, workers: int | None = None) -> np.ndarray:
        """Coil-combined image of the pseudo-reconstruction ``x(u)``."""
        return np.roll(self._pseudo_rolled(mask, workers), self.n_lines // 2, axis=0)

    def __call__(self, mask: SamplingMask, workers: int | None = None) -> float:
        return surrogate_cost(mask, self, workers=workers)


def surrogate_cost(mask: SamplingMask, ctx: CostContext, workers: int | None = None) -> float:
    """``||Phi(x - x(u))||_p / N^(1/p)`` for the pseudo-reconstruction ``x(u)`` of ``mask``."""
    err = ctx._target - ctx._pseudo_rolled(mask, workers=workers)
    return lp_normalized(ctx._transform(err), ctx.config.p)


def psf_sidelobe(mask: SamplingMask) -> float:
    """Peak sidelobe-to-mainlobe ratio of the 1D point-spread function of ``mask``."""
    psf = np.abs(ifft1_centered(mask.indicator.astype(np.complex128), axis=0))
    center = mask.n_lines // 2
    main = psf[center]
    side = np.delete(psf, center)
    if side.size == 0:
        return 0.0
    return float(side.max() / main)
