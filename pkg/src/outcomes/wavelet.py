"""Orthonormal multi-level 2D Haar transform (coarse band in the top-left corner)."""

from __future__ import annotations

import numpy as np

_S = 1.0 / np.sqrt(2.0)


def _check_levels(shape, levels):
    if levels < 0:
        raise ValueError(f"levels must be non-negative, got {levels}")
    block = 2**levels
    if shape[0] % block or shape[1] % block:
        raise ValueError(f"image shape {shape[:2]} is not divisible by 2**{levels}")


def haar_dwt2(img, levels: int = 3) -> np.ndarray:
    """Analysis transform over the first two axes; output has the input's shape."""
    img = np.asarray(img)
    _check_levels(img.shape, levels)
    out = np.array(img, dtype=np.result_type(img.dtype, np.float64), copy=True)
    h, w = out.shape[:2]
    for _ in range(levels):
        blk = out[:h, :w]
        even, odd = blk[0::2], blk[1::2]
        blk = np.concatenate([(even + odd) * _S, (even - odd) * _S], axis=0)
        even, odd = blk[:, 0::2], blk[:, 1::2]
        out[:h, :w] = np.concatenate([(even + odd) * _S, (even - odd) * _S], axis=1)
        h, w = h // 2, w // 2
    return out


def haar_idwt2(coeffs, levels: int = 3) -> np.ndarray:
    """Exact inverse of :func:`haar_dwt2`."""
    coeffs = np.asarray(coeffs)
    _check_levels(coeffs.shape, levels)
    out = np.array(coeffs, dtype=np.result_type(coeffs.dtype, np.float64), copy=True)
    H, W = out.shape[:2]
    for lev in reversed(range(levels)):
        h, w = H >> lev, W >> lev
        blk = out[:h, :w]
        lo, hi = blk[:, : w // 2], blk[:, w // 2 :]
        tmp = np.empty_like(blk)
        tmp[:, 0::2] = (lo + hi) * _S
        tmp[:, 1::2] = (lo - hi) * _S
        lo, hi = tmp[: h // 2], tmp[h // 2 :]
        blk = np.empty_like(tmp)
        blk[0::2] = (lo + hi) * _S
        blk[1::2] = (lo - hi) * _S
        out[:h, :w] = blk
    return out


def max_levels(shape) -> int:
    """Largest level count the Haar transform accepts for ``shape``."""
    n = min(shape[0], shape[1])
    levels = 0
    while shape[0] % (2 ** (levels + 1)) == 0 and shape[1] % (2 ** (levels + 1)) == 0 and 2 ** (levels + 1) <= n:
        levels += 1
    return levels
