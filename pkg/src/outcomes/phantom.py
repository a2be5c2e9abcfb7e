"""Synthetic multi-contrast, multi-coil datasets sharing one anatomy.

Anatomy is a label map of nested ellipses (head, brain, white matter, ventricles)
plus a few seed-placed elliptical lesions. A contrast assigns one intensity per
label, so every contrast rendered from the same labels shares the anatomy exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kspace import GridSpec, check_image, fft2_centered

# One row per contrast, one column per tissue label:
# background, scalp, grey matter, white matter, ventricles (CSF), lesion.
DEFAULT_CONTRAST_WEIGHTS = (
    (0.0, 0.30, 0.60, 0.80, 0.15, 0.45),  # T1-like
    (0.0, 0.20, 0.70, 0.50, 1.00, 0.90),  # T2-like
    (0.0, 0.50, 0.85, 0.70, 0.95, 0.80),  # PD-like
    (0.0, 0.25, 0.60, 0.45, 0.05, 1.00),  # FLAIR-like
)
DEFAULT_N_TISSUES = 6

# (center_x, center_y, semi_axis_x, semi_axis_y, angle_deg, label) in [-1, 1] coordinates,
# painted in order so later shapes overwrite earlier ones.
_STRUCTURES = (
    (0.0, 0.0, 0.69, 0.92, 0.0, 1),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, 2),
    (0.0, -0.02, 0.50, 0.68, 0.0, 3),
    (0.22, 0.0, 0.11, 0.31, -18.0, 4),
    (-0.22, 0.0, 0.16, 0.41, 18.0, 4),
    (0.0, 0.35, 0.21, 0.25, 0.0, 2),
    (0.0, 0.1, 0.046, 0.046, 0.0, 4),
)


@dataclass
class PhantomSpec:
    grid: GridSpec = field(default_factory=lambda: GridSpec(256, 256, 8))
    n_tissues: int = DEFAULT_N_TISSUES
    contrast_weights: tuple | None = None
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_tissues < 1:
            raise ValueError(f"n_tissues must be positive, got {self.n_tissues}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be non-negative, got {self.noise_std}")
        if self.contrast_weights is None:
            self.contrast_weights = default_contrast_weights(self.n_tissues, 4, self.seed)
        self.contrast_weights = tuple(tuple(float(w) for w in row) for row in self.contrast_weights)
        for row in self.contrast_weights:
            if len(row) != self.n_tissues:
                raise ValueError(f"each contrast needs {self.n_tissues} weights, got {len(row)}")
            if any(w < 0 for w in row):
                raise ValueError("contrast weights must be non-negative")

    @property
    def n_contrasts(self) -> int:
        return len(self.contrast_weights)


def default_contrast_weights(n_tissues: int, n_contrasts: int, seed: int = 0) -> tuple:
    """Built-in weights when ``n_tissues`` is 6, seeded random weights otherwise.

    Extra contrasts beyond the four built-in ones are also seeded; background stays 0.
    """
    rows = []
    rng = np.random.default_rng([seed, 0xC0])
    for c in range(n_contrasts):
        if n_tissues == DEFAULT_N_TISSUES and c < len(DEFAULT_CONTRAST_WEIGHTS):
            rows.append(DEFAULT_CONTRAST_WEIGHTS[c])
        else:
            w = rng.uniform(0.1, 1.0, size=n_tissues)
            if n_tissues > 1:
                w[0] = 0.0
            rows.append(tuple(float(v) for v in w))
    return tuple(rows)


@dataclass
class CoilModel:
    """Gaussian receive-coil bumps with per-coil linear phase ramps.

    ``centers`` are ``(x, y)`` positions on the unit square; ``phase_cycles`` is the
    number of phase cycles each ramp spans across the field of view. By default the
    coils sit on a ring of radius 0.6 just outside the field of view, and the 0.7
    width leaves each coil roughly a tenth of its peak sensitivity at the far edge,
    similar to a conventional head array.
    """

    n_coils: int = 8
    centers: np.ndarray | None = None
    widths: np.ndarray | None = None
    phase_cycles: float = 0.5

    def __post_init__(self):
        if self.n_coils < 1:
            raise ValueError(f"n_coils must be positive, got {self.n_coils}")
        if self.centers is None:
            angles = 2 * np.pi * np.arange(self.n_coils) / self.n_coils
            self.centers = 0.5 + 0.6 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        if self.widths is None:
            self.widths = np.full(self.n_coils, 0.7)
        self.centers = np.asarray(self.centers, dtype=float).reshape(self.n_coils, 2)
        self.widths = np.asarray(self.widths, dtype=float).reshape(self.n_coils)
        if np.any(self.widths <= 0):
            raise ValueError("coil widths must be positive")


def _pixel_coords(grid: GridSpec):
    """Pixel-center coordinates ``(x, y)`` in [-1, 1], y along the phase-encode axis."""
    y = (np.arange(grid.n_lines) + 0.5) / grid.n_lines * 2 - 1
    x = (np.arange(grid.n_readout) + 0.5) / grid.n_readout * 2 - 1
    return np.meshgrid(x, y)


def _inside_ellipse(xx, yy, cx, cy, ax, ay, angle_deg):
    t = np.deg2rad(angle_deg)
    dx, dy = xx - cx, yy - cy
    u = dx * np.cos(t) + dy * np.sin(t)
    v = -dx * np.sin(t) + dy * np.cos(t)
    return (u / ax) ** 2 + (v / ay) ** 2 <= 1.0


def _fold_label(label: int, n_tissues: int) -> int:
    if n_tissues == 1:
        return 0
    if label < n_tissues:
        return label
    return 1 + (label - 1) % (n_tissues - 1)


def generate_anatomy(spec: PhantomSpec) -> np.ndarray:
    """Integer tissue-label map of shape ``(n_lines, n_readout)``."""
    grid = spec.grid
    labels = np.zeros((grid.n_lines, grid.n_readout), dtype=np.int64)
    if spec.n_tissues == 1:
        return labels
    xx, yy = _pixel_coords(grid)
    for cx, cy, ax, ay, angle, label in _STRUCTURES:
        labels[_inside_ellipse(xx, yy, cx, cy, ax, ay, angle)] = _fold_label(label, spec.n_tissues)

    rng = np.random.default_rng([spec.seed, 0x1E5])
    lesion_labels = list(range(5, spec.n_tissues)) or [spec.n_tissues - 1]
    n_lesions = max(3, len(lesion_labels))
    for k in range(n_lesions):
        # Lesions live inside the white-matter ellipse, clear of its boundary.
        r = 0.6 * np.sqrt(rng.uniform())
        phi = rng.uniform(0, 2 * np.pi)
        cx, cy = 0.45 * r * np.cos(phi), -0.02 + 0.62 * r * np.sin(phi)
        ax, ay = rng.uniform(0.04, 0.09, size=2)
        angle = rng.uniform(0, 180)
        inside = _inside_ellipse(xx, yy, cx, cy, ax, ay, angle)
        labels[inside] = lesion_labels[k % len(lesion_labels)]
    return labels


def render_contrast(labels, weights) -> np.ndarray:
    """Real image with pixel value ``weights[label]``."""
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=float)
    if labels.min() < 0 or labels.max() >= weights.size:
        raise ValueError(f"labels must lie in [0, {weights.size}), got range [{labels.min()}, {labels.max()}]")
    return weights[labels].astype(np.complex128)


def generate_sensitivities(model: CoilModel, grid: GridSpec) -> np.ndarray:
    """Complex coil sensitivities of shape ``(n_lines, n_readout, n_coils)``."""
    x = (np.arange(grid.n_readout) + 0.5) / grid.n_readout
    y = (np.arange(grid.n_lines) + 0.5) / grid.n_lines
    xx, yy = np.meshgrid(x, y)
    sens = np.empty((grid.n_lines, grid.n_readout, model.n_coils), dtype=np.complex128)
    for c in range(model.n_coils):
        cx, cy = model.centers[c]
        mag = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / model.widths[c] ** 2)
        theta = 2 * np.pi * c / model.n_coils
        ramp = model.phase_cycles * (np.cos(theta) * (xx - 0.5) + np.sin(theta) * (yy - 0.5))
        sens[:, :, c] = mag * np.exp(2j * np.pi * (ramp + c / model.n_coils))
    return sens


def synthesize_kspace(image, sensitivities, noise_std: float = 0.0, seed: int = 0) -> np.ndarray:
    """Fully sampled multi-coil k-space of ``sensitivities * image`` plus complex Gaussian noise."""
    image = check_image(image)
    sensitivities = np.asarray(sensitivities)
    if sensitivities.shape[:2] != image.shape:
        raise ValueError(f"image shape {image.shape} does not match sensitivities {sensitivities.shape}")
    ksp = fft2_centered(sensitivities * image[:, :, np.newaxis])
    if noise_std > 0:
        rng = np.random.default_rng([seed, 0x0015E])
        scale = noise_std / np.sqrt(2.0)
        ksp = ksp + scale * (rng.standard_normal(ksp.shape) + 1j * rng.standard_normal(ksp.shape))
    return ksp


@dataclass
class Dataset:
    """All contrasts of one phantom, with their ground truth pieces."""

    spec: PhantomSpec
    coils: CoilModel
    labels: np.ndarray
    sensitivities: np.ndarray
    images: list
    kspaces: list


def make_dataset(spec: PhantomSpec | None = None, coils: CoilModel | None = None) -> Dataset:
    spec = spec or PhantomSpec()
    coils = coils or CoilModel(n_coils=spec.grid.n_coils)
    if coils.n_coils != spec.grid.n_coils:
        raise ValueError(f"coil model has {coils.n_coils} coils, grid expects {spec.grid.n_coils}")
    labels = generate_anatomy(spec)
    sens = generate_sensitivities(coils, spec.grid)
    images, kspaces = [], []
    for c, weights in enumerate(spec.contrast_weights):
        img = render_contrast(labels, weights)
        images.append(img)
        kspaces.append(synthesize_kspace(img, sens, spec.noise_std, seed=spec.seed + 1000 * (c + 1)))
    return Dataset(spec, coils, labels, sens, images, kspaces)
