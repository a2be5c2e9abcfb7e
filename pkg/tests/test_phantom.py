import numpy as np
import pytest

from outcomes.kspace import GridSpec, ifft2_centered, sos_combine
from outcomes.phantom import (
    CoilModel,
    PhantomSpec,
    generate_anatomy,
    generate_sensitivities,
    make_dataset,
    render_contrast,
    synthesize_kspace,
)


def test_anatomy_deterministic_and_in_range():
    spec = PhantomSpec(seed=11)
    a, b = generate_anatomy(spec), generate_anatomy(spec)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() < spec.n_tissues


def test_single_tissue_is_constant():
    labels = generate_anatomy(PhantomSpec(n_tissues=1, contrast_weights=[[1.0]]))
    assert np.all(labels == 0)


def test_default_anatomy_covers_all_tissues():
    labels = generate_anatomy(PhantomSpec())
    counts = np.bincount(labels.ravel(), minlength=6)
    assert labels.shape == (256, 256)
    assert np.all(counts > 0), counts


def test_lesions_depend_on_seed():
    a = generate_anatomy(PhantomSpec(seed=0))
    b = generate_anatomy(PhantomSpec(seed=1))
    assert not np.array_equal(a, b)


def test_spec_validation():
    with pytest.raises(ValueError):
        PhantomSpec(contrast_weights=[[1.0, 2.0]])
    with pytest.raises(ValueError):
        PhantomSpec(noise_std=-1)


def test_render_contrast():
    labels = np.array([[0, 1], [2, 1]])
    np.testing.assert_array_equal(render_contrast(labels, [0.7, 0.7, 0.7]), np.full((2, 2), 0.7))
    np.testing.assert_array_equal(render_contrast(labels, [0, 1, 0]), labels == 1)
    with pytest.raises(ValueError):
        render_contrast(labels, [1.0, 2.0])


def test_swapping_weights_permutes_label_pixels():
    labels = generate_anatomy(PhantomSpec())
    w = np.array([0.0, 0.3, 0.6, 0.8, 0.15, 0.45])
    swapped = w.copy()
    swapped[[2, 4]] = swapped[[4, 2]]
    a, b = render_contrast(labels, w), render_contrast(labels, swapped)
    changed = a != b
    np.testing.assert_array_equal(changed, (labels == 2) | (labels == 4))
    np.testing.assert_array_equal(a[labels == 2], b[labels == 4][0])


def test_flat_sensitivity_limit():
    grid = GridSpec(16, 16, 1)
    sens = generate_sensitivities(CoilModel(n_coils=1, widths=[1e6]), grid)
    np.testing.assert_allclose(np.abs(sens), 1.0, atol=1e-3)


def test_default_coils_cover_every_pixel():
    grid = GridSpec(256, 256, 8)
    model = CoilModel()
    sens = generate_sensitivities(model, grid)
    assert np.all(sos_combine(sens) > 0)
    np.testing.assert_array_equal(sens, generate_sensitivities(model, grid))


def test_noise_statistics():
    grid = GridSpec(256, 256, 8)
    sens = generate_sensitivities(CoilModel(), grid)
    ksp = synthesize_kspace(np.zeros((256, 256)), sens, noise_std=0.01, seed=5)
    empirical = np.sqrt(np.mean(np.abs(ksp) ** 2))
    assert abs(empirical - 0.01) <= 0.05 * 0.01
    np.testing.assert_array_equal(ksp, synthesize_kspace(np.zeros((256, 256)), sens, noise_std=0.01, seed=5))


def test_noiseless_roundtrip(small_dataset):
    ds = small_dataset
    coil_images = ifft2_centered(ds.kspaces[1])
    np.testing.assert_allclose(coil_images, ds.sensitivities * ds.images[1][:, :, None], atol=1e-6)


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError):
        synthesize_kspace(np.zeros((8, 8)), np.zeros((8, 4, 2)))


def test_contrasts_share_anatomy(small_dataset):
    labels = small_dataset.labels
    for img in small_dataset.images:
        for t in np.unique(labels):
            assert np.ptp(img[labels == t].real) == 0
