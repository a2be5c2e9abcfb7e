"""Grid conventions, centered unitary FFTs, masking, coil combination and metrics.

Multi-coil arrays are ``(n_lines, n_readout, n_coils)`` complex arrays with the
phase-encode (ky) axis first. Coil-combined images are 2D ``(n_lines, n_readout)``.
All transforms are orthonormal and centered: DC sits at ``(n_lines // 2, n_readout // 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "SamplingMask",
    "AcsSpec",
    "fft2_centered",
    "ifft2_centered",
    "fft1_centered",
    "ifft1_centered",
    "apply_mask",
    "sos_combine",
    "nrmse",
    "error_map",
    "check_kspace",
    "check_image",
]


@dataclass(frozen=True)
class GridSpec:
    n_lines: int
    n_readout: int
    n_coils: int = 1

    def __post_init__(self):
        for name in ("n_lines", "n_readout", "n_coils"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.n_lines % 2:
            raise ValueError(f"n_lines must be even, got {self.n_lines}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_lines, self.n_readout, self.n_coils)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "GridSpec":
        if arr.ndim == 2:
            return cls(arr.shape[0], arr.shape[1], 1)
        return cls(*arr.shape)


@dataclass(frozen=True)
class AcsSpec:
    """Contiguous block of ``width`` fully sampled center lines."""

    width: int

    def __post_init__(self):
        if int(self.width) != self.width or self.width < 0 or self.width % 2:
            raise ValueError(f"ACS width must be a non-negative even integer, got {self.width!r}")

    def lines(self, n_lines: int) -> np.ndarray:
        if self.width > n_lines:
            raise ValueError(f"ACS width {self.width} exceeds n_lines {n_lines}")
        start = n_lines // 2 - self.width // 2
        return np.arange(start, start + self.width)

    def indicator(self, n_lines: int) -> np.ndarray:
        ind = np.zeros(n_lines, dtype=bool)
        ind[self.lines(n_lines)] = True
        return ind


class SamplingMask:
    """Set of acquired phase-encode lines on an ``n_lines`` grid.

    Instances are immutable; ``sampled`` is a read-only sorted int array.
    """

    __slots__ = ("n_lines", "sampled")

    def __init__(self, n_lines: int, sampled):
        n_lines = int(n_lines)
        if n_lines < 1:
            raise ValueError(f"n_lines must be positive, got {n_lines}")
        idx = np.asarray(sorted(int(i) for i in sampled), dtype=np.int64)
        if idx.size == 0:
            raise ValueError("a sampling mask needs at least one sampled line")
        if np.any(np.diff(idx) == 0):
            raise ValueError("sampled line indices must be unique")
        if idx[0] < 0 or idx[-1] >= n_lines:
            raise ValueError(f"sampled line indices must lie in [0, {n_lines})")
        idx.setflags(write=False)
        object.__setattr__(self, "n_lines", n_lines)
        object.__setattr__(self, "sampled", idx)

    def __setattr__(self, name, value):
        raise AttributeError("SamplingMask is immutable")

    @classmethod
    def from_indicator(cls, indicator) -> "SamplingMask":
        indicator = np.asarray(indicator, dtype=bool)
        return cls(indicator.size, np.flatnonzero(indicator))

    @classmethod
    def full(cls, n_lines: int) -> "SamplingMask":
        return cls(n_lines, range(n_lines))

    @property
    def indicator(self) -> np.ndarray:
        ind = np.zeros(self.n_lines, dtype=bool)
        ind[self.sampled] = True
        return ind

    @property
    def n_sampled(self) -> int:
        return int(self.sampled.size)

    @property
    def reduction(self) -> float:
        return self.n_lines / self.n_sampled

    def to_dict(self) -> dict:
        return {"n_lines": self.n_lines, "sampled": [int(i) for i in self.sampled]}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingMask":
        return cls(d["n_lines"], d["sampled"])

    def __eq__(self, other):
        if not isinstance(other, SamplingMask):
            return NotImplemented
        return self.n_lines == other.n_lines and np.array_equal(self.sampled, other.sampled)

    def __hash__(self):
        return hash((self.n_lines, self.sampled.tobytes()))

    def __len__(self):
        return self.n_sampled

    def __repr__(self):
        return f"SamplingMask(n_lines={self.n_lines}, n_sampled={self.n_sampled})"


def check_kspace(arr, name: str = "kspace") -> np.ndarray:
    """Validate a multi-coil array and return it as complex128 ``(ky, kx, coil)``.

    A 2D input is treated as single-coil.
    """
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"{name} must have shape (n_lines, n_readout, n_coils), got {arr.shape}")
    if 0 in arr.shape:
        raise ValueError(f"{name} has an empty dimension: {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_image(arr, name: str = "image") -> np.ndarray:
    """Validate a coil-combined 2D image (a trailing singleton coil axis is dropped)."""
    arr = np.asarray(arr)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2D single-coil image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def fft2_centered(img, workers: int | None = None) -> np.ndarray:
    """Per-coil unitary 2D DFT over the first two axes with DC at the grid center."""
    img = np.asarray(img)
    axes = (0, 1)
    x = sfft.ifftshift(img, axes=axes)
    x = sfft.fft2(x, axes=axes, norm="ortho", workers=workers)
    return sfft.fftshift(x, axes=axes)


def ifft2_centered(ksp, workers: int | None = None) -> np.ndarray:
    """Inverse of :func:`fft2_centered`."""
    ksp = np.asarray(ksp)
    axes = (0, 1)
    x = sfft.ifftshift(ksp, axes=axes)
    x = sfft.ifft2(x, axes=axes, norm="ortho", workers=workers)
    return sfft.fftshift(x, axes=axes)


def fft1_centered(x, axis: int, workers: int | None = None) -> np.ndarray:
    x = sfft.ifftshift(np.asarray(x), axes=axis)
    x = sfft.fft(x, axis=axis, norm="ortho", workers=workers)
    return sfft.fftshift(x, axes=axis)


def ifft1_centered(x, axis: int, workers: int | None = None) -> np.ndarray:
    x = sfft.ifftshift(np.asarray(x), axes=axis)
    x = sfft.ifft(x, axis=axis, norm="ortho", workers=workers)
    return sfft.fftshift(x, axes=axis)


def apply_mask(ksp, mask: SamplingMask) -> np.ndarray:
    """Zero every phase-encode line not in ``mask``; returns a new array."""
    ksp = np.asarray(ksp)
    if mask.n_lines != ksp.shape[0]:
        raise ValueError(
            f"mask has {mask.n_lines} lines but k-space has {ksp.shape[0]} phase-encode lines"
        )
    out = np.zeros_like(ksp)
    out[mask.sampled] = ksp[mask.sampled]
    return out


def sos_combine(img, axis: int = -1) -> np.ndarray:
    """Root-sum-of-squares over the coil axis. 2D inputs are taken as single-coil."""
    img = np.asarray(img)
    if img.ndim == 2:
        return np.abs(img)
    return np.sqrt(np.sum(np.abs(img) ** 2, axis=axis))


def _roi_values(arr, roi):
    if roi is None:
        return arr.ravel()
    roi = np.asarray(roi)
    if roi.dtype == bool:
        if roi.shape != arr.shape:
            raise ValueError(f"ROI shape {roi.shape} does not match image shape {arr.shape}")
        return arr[roi]
    return arr.ravel()[roi.ravel()]


def nrmse(candidate, reference, roi=None, magnitude: bool = False) -> float:
    """``||candidate - reference|| / ||reference||`` over ``roi`` (default: all pixels).

    Computed on complex values unless ``magnitude`` is set, in which case both
    images are replaced by their moduli first.
    """
    candidate = np.asarray(candidate)
    reference = np.asarray(reference)
    if candidate.shape != reference.shape:
        raise ValueError(f"shape mismatch: {candidate.shape} vs {reference.shape}")
    if magnitude:
        candidate, reference = np.abs(candidate), np.abs(reference)
    c = _roi_values(candidate, roi)
    r = _roi_values(reference, roi)
    ref_norm = np.linalg.norm(r)
    if ref_norm == 0:
        raise ValueError("reference has zero norm on the ROI")
    return float(np.linalg.norm(c - r) / ref_norm)


def error_map(candidate, reference) -> np.ndarray:
    """Per-pixel ``|candidate - reference|``."""
    candidate = np.asarray(candidate)
    reference = np.asarray(reference)
    if candidate.shape != reference.shape:
        raise ValueError(f"shape mismatch: {candidate.shape} vs {reference.shape}")
    return np.abs(candidate - reference)
