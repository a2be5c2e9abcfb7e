import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outcomes.kspace import (
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


def rand_complex(shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_gridspec_rejects_odd_lines_and_zero():
    with pytest.raises(ValueError):
        GridSpec(5, 4, 1)
    with pytest.raises(ValueError):
        GridSpec(4, 0, 1)


def test_acs_lines_centered():
    assert list(AcsSpec(4).lines(16)) == [6, 7, 8, 9]
    assert AcsSpec(0).lines(16).size == 0
    with pytest.raises(ValueError):
        AcsSpec(3)
    with pytest.raises(ValueError):
        AcsSpec(20).lines(16)


def test_mask_validation():
    with pytest.raises(ValueError):
        SamplingMask(4, [])
    with pytest.raises(ValueError):
        SamplingMask(4, [1, 1])
    with pytest.raises(ValueError):
        SamplingMask(4, [4])
    m = SamplingMask(8, [5, 1, 3])
    assert list(m.sampled) == [1, 3, 5]
    assert SamplingMask.from_dict(m.to_dict()) == m
    with pytest.raises(AttributeError):
        m.n_lines = 3


def test_fft_of_zeros_is_zero():
    assert np.all(fft2_centered(np.zeros((4, 4, 1))) == 0)
    assert np.all(ifft2_centered(np.zeros((4, 4, 1))) == 0)


def test_fft_of_center_delta_is_flat():
    img = np.zeros((4, 4, 1), dtype=complex)
    img[2, 2, 0] = 1.0
    ksp = fft2_centered(img)
    np.testing.assert_allclose(np.abs(ksp), 0.25, atol=1e-15)
    # DC sample sits at the grid center
    assert np.isclose(ksp[2, 2, 0], 0.25)


def test_ifft_of_flat_is_center_delta():
    img = ifft2_centered(np.full((4, 4, 1), 0.25, dtype=complex))
    expected = np.zeros((4, 4, 1))
    expected[2, 2, 0] = 1.0
    np.testing.assert_allclose(img, expected, atol=1e-15)


def test_fft_parseval_and_roundtrip():
    x = rand_complex((8, 8, 2))
    assert np.linalg.norm(fft2_centered(x)) == pytest.approx(np.linalg.norm(x), rel=1e-6)
    y = rand_complex((8, 8, 3), seed=1)
    np.testing.assert_allclose(ifft2_centered(fft2_centered(y)), y, atol=1e-6 * np.abs(y).max())


@settings(max_examples=25, deadline=None)
@given(
    n_lines=st.sampled_from([2, 4, 8, 16]),
    n_readout=st.integers(1, 12),
    n_coils=st.integers(1, 3),
    seed=st.integers(0, 2**32 - 1),
)
def test_unitarity_property(n_lines, n_readout, n_coils, seed):
    x = rand_complex((n_lines, n_readout, n_coils), seed)
    ratio = np.linalg.norm(fft2_centered(x)) / np.linalg.norm(x)
    assert 1 - 1e-6 <= ratio <= 1 + 1e-6
    err = np.abs(ifft2_centered(fft2_centered(x)) - x).max()
    assert err <= 1e-6 * np.abs(x).max()


def test_apply_mask():
    x = rand_complex((4, 3, 2))
    np.testing.assert_array_equal(apply_mask(x, SamplingMask.full(4)), x)
    out = apply_mask(x, SamplingMask(4, [0]))
    np.testing.assert_array_equal(out[0], x[0])
    assert np.all(out[1:] == 0)
    with pytest.raises(ValueError, match="lines"):
        apply_mask(x, SamplingMask(6, [0]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), data=st.data())
def test_apply_mask_is_projection(seed, data):
    n = 8
    sampled = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    mask = SamplingMask(n, sampled)
    x = rand_complex((n, 5, 2), seed)
    once = apply_mask(x, mask)
    np.testing.assert_array_equal(apply_mask(once, mask), once)


def test_sos_combine():
    assert sos_combine(np.array([[[3 + 4j]]]))[0, 0] == pytest.approx(5.0)
    assert sos_combine(np.array([[[3.0, 4.0]]]))[0, 0] == pytest.approx(5.0)
    out = sos_combine(np.zeros((2, 2, 3)))
    assert out.shape == (2, 2) and np.all(out == 0)


def test_nrmse_examples():
    ref = np.array([[3.0, 4.0]])
    assert nrmse(ref, ref) == 0.0
    assert nrmse(np.zeros_like(ref), ref) == 1.0
    assert nrmse(np.array([[3.0, 0.0]]), ref) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        nrmse(ref, np.zeros_like(ref))


def test_nrmse_roi_and_magnitude_mode():
    ref = np.array([[1.0, 2.0], [0.0, 4.0]])
    cand = np.array([[1.0, 0.0], [9.0, 4.0]])
    roi = np.array([[True, True], [False, False]])
    assert nrmse(cand, ref, roi=roi) == pytest.approx(2 / np.sqrt(5))
    assert nrmse(-ref, ref, magnitude=True) == 0.0
    assert nrmse(-ref, ref) == pytest.approx(2.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(1e-3, 1e3))
def test_nrmse_joint_scale_invariance(seed, alpha):
    ref = rand_complex((4, 4), seed)
    cand = ref + 0.1 * rand_complex((4, 4), seed + 1)
    assert nrmse(alpha * cand, alpha * ref) == pytest.approx(nrmse(cand, ref), abs=1e-9)


def test_error_map():
    a = rand_complex((4, 4), 2)
    assert np.all(error_map(a, a) == 0)
    cand = np.zeros((2, 2), dtype=complex)
    cand[1, 0] = 2j
    emap = error_map(cand, np.zeros((2, 2)))
    assert emap[1, 0] == 2.0 and emap.sum() == 2.0
    b = rand_complex((4, 4), 3)
    assert np.sum(error_map(a, b) ** 2) == pytest.approx(np.linalg.norm(a - b) ** 2, rel=1e-9)
    with pytest.raises(ValueError):
        error_map(a, b[:2])
