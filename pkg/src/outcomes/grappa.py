"""GRAPPA shift operators, the precomputed extrapolation table and pseudo-reconstruction.

A shift operator for offset ``d`` maps the ``kx_window`` neighbourhood (all coils) of
a phase-encode line ``i`` to line ``i + d`` at the window's center readout position.
One operator is calibrated directly per shift; nothing is obtained by composing
unit shifts. The table stores every ``operator(d)`` applied to every reference line,
so pseudo-reconstruction is only lookups and copies.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .kspace import AcsSpec, GridSpec, SamplingMask, check_kspace

logger = logging.getLogger(__name__)

__all__ = [
    "GrappaOperator",
    "GrappaExtrapolationTable",
    "calibrate",
    "apply_operator",
    "build_table",
    "fill_plan",
    "pseudo_reconstruct",
    "save_table",
    "load_table",
    "cached_build_table",
]


@dataclass(frozen=True)
class GrappaOperator:
    shift: int
    kernel: np.ndarray  # (n_coils, kx_window * n_coils), source flattened as (kx, coil)
    kx_window: int
    fit_residual: float

    @property
    def n_coils(self) -> int:
        return self.kernel.shape[0]


@dataclass(frozen=True)
class GrappaExtrapolationTable:
    """``entries[k, i]`` holds line ``i`` extrapolated by ``shifts[k]``.

    Entries whose target ``i + shift`` falls off the grid are zero and flagged
    invalid in ``valid``.
    """

    grid: GridSpec
    d_max: int
    kx_window: int
    shifts: np.ndarray
    entries: np.ndarray  # (2 * d_max, n_lines, n_readout, n_coils)
    valid: np.ndarray  # (2 * d_max, n_lines) bool
    fit_residuals: dict

    @property
    def n_entries(self) -> int:
        return int(self.valid.sum())

    def shift_index(self, d):
        d = np.asarray(d)
        return np.where(d < 0, d + self.d_max, d + self.d_max - 1)

    def entry(self, i: int, d: int) -> np.ndarray:
        if d == 0 or abs(d) > self.d_max:
            raise ValueError(f"shift must satisfy 1 <= |d| <= {self.d_max}, got {d}")
        k = int(self.shift_index(d))
        if not self.valid[k, i]:
            raise IndexError(f"line {i} shifted by {d} leaves the grid")
        return self.entries[k, i]


def _source_windows(lines: np.ndarray, kx_window: int) -> np.ndarray:
    """``(..., n_readout - kx_window + 1, kx_window * n_coils)`` sliding readout windows."""
    win = np.lib.stride_tricks.sliding_window_view(lines, kx_window, axis=-2)
    # sliding_window_view puts the window axis last: (..., n_pos, n_coils, kx_window)
    win = np.swapaxes(win, -1, -2)
    return win.reshape(*win.shape[:-2], kx_window * lines.shape[-1])


def calibrate(
    reference,
    acs: AcsSpec,
    d: int,
    kx_window: int = 3,
    regularization: float = 0.0,
) -> GrappaOperator:
    """Least-squares fit of the operator predicting line ``i + d`` from line ``i``.

    Every ACS source/target pair and every interior readout position contributes one
    equation per target coil. With ``regularization == 0`` the system is solved by an
    SVD-based least-squares solver that returns the minimum-norm solution for
    rank-deficient data. A positive value instead solves the normal equations with
    Tikhonov damping ``regularization * mean(diag(A^H A))``.
    """
    reference = check_kspace(reference, "reference")
    d = int(d)
    if d == 0:
        raise ValueError("shift d must be non-zero")
    if kx_window < 1 or kx_window % 2 == 0:
        raise ValueError(f"kx_window must be an odd positive integer, got {kx_window}")
    n_lines, n_readout, n_coils = reference.shape
    if acs.width < abs(d) + 4:
        raise ValueError(f"ACS width {acs.width} is too small for shift {d} (needs >= {abs(d) + 4})")
    if kx_window > n_readout:
        raise ValueError(f"kx_window {kx_window} exceeds n_readout {n_readout}")

    acs_lines = acs.lines(n_lines)
    src = acs_lines[(acs_lines + d >= acs_lines[0]) & (acs_lines + d <= acs_lines[-1])]
    half = kx_window // 2
    A = _source_windows(reference[src], kx_window).reshape(-1, kx_window * n_coils)
    T = reference[src + d, half : n_readout - half, :].reshape(-1, n_coils)
    n_unknowns = kx_window * n_coils
    if A.shape[0] < n_unknowns:
        raise ValueError(
            f"underdetermined calibration: {A.shape[0]} equations for {n_unknowns} unknowns"
        )

    if regularization > 0:
        AhA = A.conj().T @ A
        lam = regularization * np.real(np.trace(AhA)) / n_unknowns
        X = scipy.linalg.solve(AhA + lam * np.eye(n_unknowns), A.conj().T @ T, assume_a="pos")
    else:
        X, *_ = scipy.linalg.lstsq(A, T, cond=1e-12, lapack_driver="gelsd")

    t_norm = np.linalg.norm(T)
    resid = np.linalg.norm(A @ X - T) / t_norm if t_norm > 0 else 0.0
    return GrappaOperator(shift=d, kernel=X.T.copy(), kx_window=kx_window, fit_residual=float(resid))


def apply_operator(op: GrappaOperator, lines: np.ndarray, edge_lines: np.ndarray) -> np.ndarray:
    """Extrapolate ``lines`` (``(..., n_readout, n_coils)``) by ``op.shift``.

    Readout samples within ``kx_window // 2`` of either edge have no full source
    window and are copied from ``edge_lines`` instead.
    """
    half = op.kx_window // 2
    out = np.array(edge_lines, dtype=np.complex128, copy=True)
    n_readout = lines.shape[-2]
    out[..., half : n_readout - half, :] = _source_windows(lines, op.kx_window) @ op.kernel.T
    return out


def build_table(reference, acs: AcsSpec, d_max: int = 4, kx_window: int = 3, regularization: float = 0.0):
    """Calibrate ``2 * d_max`` operators and apply each to every reference line."""
    build_table.n_calls += 1
    reference = check_kspace(reference, "reference")
    if d_max < 1:
        raise ValueError(f"d_max must be >= 1, got {d_max}")
    n_lines, n_readout, n_coils = reference.shape
    shifts = np.array([*range(-d_max, 0), *range(1, d_max + 1)])
    entries = np.zeros((shifts.size, n_lines, n_readout, n_coils), dtype=np.complex128)
    valid = np.zeros((shifts.size, n_lines), dtype=bool)
    residuals = {}
    for k, d in enumerate(shifts):
        op = calibrate(reference, acs, int(d), kx_window, regularization)
        residuals[int(d)] = op.fit_residual
        src = np.arange(max(0, -d), min(n_lines, n_lines - d))
        entries[k, src] = apply_operator(op, reference[src], reference[src + d])
        valid[k, src] = True
        logger.debug("shift %+d: calibration residual %.3e", d, op.fit_residual)
    entries.setflags(write=False)
    valid.setflags(write=False)
    return GrappaExtrapolationTable(
        grid=GridSpec(n_lines, n_readout, n_coils),
        d_max=int(d_max),
        kx_window=int(kx_window),
        shifts=shifts,
        entries=entries,
        valid=valid,
        fit_residuals=residuals,
    )


build_table.n_calls = 0


def fill_plan(indicator: np.ndarray, d_max: int):
    """Source assignment for the missing lines of a mask.

    Returns ``(targets, sources)``: each missing line ``targets[n]`` is extrapolated
    from the nearest sampled line ``sources[n]`` within ``d_max`` (lower index on
    ties). Missing lines with no sampled line in reach are absent and stay zero.
    """
    indicator = np.asarray(indicator, dtype=bool)
    n = indicator.size
    sampled = np.flatnonzero(indicator)
    if sampled.size == 0:
        raise ValueError("mask must contain at least one sampled line")
    missing = np.flatnonzero(~indicator)
    pos = np.searchsorted(sampled, missing)
    below = sampled[np.clip(pos - 1, 0, sampled.size - 1)]
    above = sampled[np.clip(pos, 0, sampled.size - 1)]
    dist_below = np.where(pos > 0, missing - below, n + 1)
    dist_above = np.where(pos < sampled.size, above - missing, n + 1)
    use_below = dist_below <= dist_above
    src = np.where(use_below, below, above)
    dist = np.where(use_below, dist_below, dist_above)
    reach = dist <= d_max
    return missing[reach], src[reach]


def fill_lines(indicator, reference_lines, entries, d_max):
    """Pseudo-reconstruction over any line-separable representation of the data.

    ``reference_lines`` and ``entries`` may be k-space or readout-transformed
    (hybrid) arrays, since filling acts on whole phase-encode lines.
    """
    targets, sources = fill_plan(indicator, d_max)
    d = targets - sources
    k = np.where(d < 0, d + d_max, d + d_max - 1)
    out = np.zeros_like(reference_lines)
    sampled = np.flatnonzero(indicator)
    out[sampled] = reference_lines[sampled]
    out[targets] = entries[k, sources]
    return out


def pseudo_reconstruct(mask: SamplingMask, reference, table: GrappaExtrapolationTable) -> np.ndarray:
    """Fill the missing lines of ``mask`` from the table; no calibration, FFT or solve."""
    reference = np.asarray(reference)
    if mask.n_lines != table.grid.n_lines or reference.shape[0] != mask.n_lines:
        raise ValueError(
            f"mask has {mask.n_lines} lines, table grid {table.grid.n_lines}, reference {reference.shape[0]}"
        )
    return fill_lines(mask.indicator, reference, table.entries, table.d_max)


def save_table(table: GrappaExtrapolationTable, directory, key: str | None = None) -> Path:
    """Write the table's entries as one binary array per shift plus a JSON index."""
    from .io import write_array

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = key or "table"
    for k, d in enumerate(table.shifts):
        write_array(directory / f"{name}_shift{int(d):+d}", table.entries[k])
    index_path = directory / "index.json"
    index = json.loads(index_path.read_text()) if index_path.exists() else {}
    index[name] = {
        "grid": list(table.grid.shape),
        "d_max": table.d_max,
        "kx_window": table.kx_window,
        "fit_residuals": {str(d): r for d, r in table.fit_residuals.items()},
    }
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True))
    return index_path


def load_table(directory, key: str = "table") -> GrappaExtrapolationTable:
    from .io import read_array

    directory = Path(directory)
    meta = json.loads((directory / "index.json").read_text())[key]
    grid = GridSpec(*meta["grid"])
    d_max = int(meta["d_max"])
    shifts = np.array([*range(-d_max, 0), *range(1, d_max + 1)])
    entries = np.stack([read_array(directory / f"{key}_shift{int(d):+d}") for d in shifts])
    lines = np.arange(grid.n_lines)
    valid = np.stack([(lines + d >= 0) & (lines + d < grid.n_lines) for d in shifts])
    entries.setflags(write=False)
    valid.setflags(write=False)
    return GrappaExtrapolationTable(
        grid=grid,
        d_max=d_max,
        kx_window=int(meta["kx_window"]),
        shifts=shifts,
        entries=entries,
        valid=valid,
        fit_residuals={int(d): r for d, r in meta["fit_residuals"].items()},
    )


def cached_build_table(reference, acs: AcsSpec, d_max: int, kx_window: int, cache_dir) -> GrappaExtrapolationTable:
    """:func:`build_table` backed by an on-disk cache keyed by reference checksum and settings.

    Cached entries round-trip through complex64 storage.
    """
    from .io import array_checksum

    reference = check_kspace(reference, "reference")
    key = f"{array_checksum(reference)[:16]}_acs{acs.width}_d{d_max}_w{kx_window}"
    cache_dir = Path(cache_dir)
    index_path = cache_dir / "index.json"
    if index_path.exists() and key in json.loads(index_path.read_text()):
        logger.info("loading GRAPPA table %s from cache", key)
        return load_table(cache_dir, key)
    table = build_table(reference, acs, d_max, kx_window)
    save_table(table, cache_dir, key)
    return table
