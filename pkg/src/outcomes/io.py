"""On-disk formats: complex arrays, masks and PGM renderings.

A complex array ``foo`` is stored as two files: ``foo.json`` holding the header
``{"shape", "dtype", "layout", "byte_order"}`` and ``foo.raw`` holding
interleaved little-endian float32 (real, imag) pairs in row-major order.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .kspace import SamplingMask

HEADER_SUFFIX = ".json"
DATA_SUFFIX = ".raw"


def _stem(path) -> Path:
    path = Path(path)
    if path.suffix in (HEADER_SUFFIX, DATA_SUFFIX):
        path = path.with_suffix("")
    return path


def array_paths(path) -> tuple[Path, Path]:
    stem = _stem(path)
    return stem.with_name(stem.name + HEADER_SUFFIX), stem.with_name(stem.name + DATA_SUFFIX)


def write_array(path, arr) -> tuple[Path, Path]:
    """Write a complex array; 2D arrays are stored with a trailing coil axis of 1."""
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"expected a (n_lines, n_readout, n_coils) array, got shape {arr.shape}")
    header_path, data_path = array_paths(path)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "shape": [int(s) for s in arr.shape],
        "dtype": "complex64",
        "layout": "row-major",
        "byte_order": "little",
    }
    data = np.ascontiguousarray(arr, dtype="<c8")
    data_path.write_bytes(data.tobytes())
    header_path.write_text(json.dumps(header))
    return header_path, data_path


def read_header(path) -> dict:
    header_path, _ = array_paths(path)
    header = json.loads(header_path.read_text())
    if header.get("dtype") != "complex64" or header.get("byte_order") != "little":
        raise ValueError(f"unsupported array header in {header_path}: {header}")
    if header.get("layout") != "row-major":
        raise ValueError(f"unsupported layout {header.get('layout')!r} in {header_path}")
    return header


def read_array(path) -> np.ndarray:
    """Read an array written by :func:`write_array` as complex128."""
    header = read_header(path)
    _, data_path = array_paths(path)
    shape = tuple(header["shape"])
    raw = np.frombuffer(data_path.read_bytes(), dtype="<c8")
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"{data_path} holds {raw.size} values, header expects shape {shape}")
    return raw.reshape(shape).astype(np.complex128)


def write_mask(path, mask: SamplingMask) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(mask.to_dict()))
    return path


def read_mask(path) -> SamplingMask:
    return SamplingMask.from_dict(json.loads(Path(path).read_text()))


def write_pgm(path, image) -> Path:
    """8-bit binary PGM (P5) of ``|image|`` scaled so that its maximum maps to 255."""
    mag = np.abs(np.asarray(image))
    if mag.ndim == 3 and mag.shape[2] == 1:
        mag = mag[:, :, 0]
    if mag.ndim != 2:
        raise ValueError(f"PGM output needs a 2D image, got shape {mag.shape}")
    peak = mag.max()
    scaled = np.zeros(mag.shape) if peak == 0 else mag / peak
    pixels = np.clip(np.round(scaled * 255), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = pixels.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM file")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def array_checksum(arr) -> str:
    arr = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(str(arr.dtype).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()[:16]
