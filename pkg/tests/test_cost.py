import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outcomes.cost import CostConfig, CostContext, lp_normalized, psf_sidelobe, surrogate_cost
from outcomes.grappa import build_table, pseudo_reconstruct
from outcomes.kspace import AcsSpec, SamplingMask, ifft2_centered, sos_combine
from outcomes.trajectories import TrajectoryBudget, random_mask, uniform_mask
from outcomes.wavelet import haar_dwt2

ACS = AcsSpec(12)


@pytest.fixture(scope="module")
def small_table(small_dataset):
    return build_table(small_dataset.kspaces[0], ACS, d_max=4, kx_window=3)


def naive_cost(mask, reference, table, config):
    pseudo = ifft2_centered(pseudo_reconstruct(mask, reference, table))
    truth = ifft2_centered(reference)
    if config.combine == "sos":
        err = sos_combine(truth) - sos_combine(pseudo)
    else:
        err = truth - pseudo
    if config.transform != "identity":
        err = haar_dwt2(err, levels=2)
    mag = np.abs(err)
    if math.isinf(config.p):
        return mag.max()
    return np.mean(mag**config.p) ** (1 / config.p)


def test_config_validation():
    with pytest.raises(ValueError):
        CostConfig(p=1.5)
    with pytest.raises(ValueError):
        CostConfig(transform="fourier")
    with pytest.raises(ValueError):
        CostConfig(combine="max")
    assert CostConfig(p=math.inf).p == math.inf


def test_lp_normalized_constant_and_limits():
    err = np.full((4, 5), 3.0 - 4.0j)
    for p in (2, 4, 8, 13.5, math.inf):
        assert lp_normalized(err, p) == pytest.approx(5.0, rel=1e-12)
    assert lp_normalized(np.zeros(7), 8) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3).filter(lambda v: v == 0 or abs(v) > 1e-30), min_size=1, max_size=50), st.sampled_from([2.0, 3.0, 8.0, 10.0]))
def test_lp_normalized_matches_definition(values, p):
    err = np.array(values)
    expected = np.mean(np.abs(err) ** p) ** (1 / p)
    assert lp_normalized(err.copy(), p) == pytest.approx(expected, rel=1e-9)


def test_lp_is_nondecreasing_in_p():
    err = np.random.default_rng(0).standard_normal(500)
    values = [lp_normalized(err, p) for p in (2, 4, 8, 16, math.inf)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(values, values[1:]))


def test_shape_mismatch_rejected(small_dataset, small_table):
    with pytest.raises(ValueError):
        CostContext(small_dataset.kspaces[0][:32], small_table)
    ctx = CostContext(small_dataset.kspaces[0], small_table)
    with pytest.raises(ValueError):
        ctx(SamplingMask.full(32))


@pytest.mark.parametrize(
    "config",
    [
        CostConfig(),
        CostConfig(p=2),
        CostConfig(p=math.inf),
        CostConfig(transform="wavelet-haar-2level"),
        CostConfig(combine="per-coil"),
        CostConfig(p=4, transform="wavelet-haar-2level", combine="per-coil"),
    ],
)
def test_cost_matches_direct_evaluation(small_dataset, small_table, config):
    ref = small_dataset.kspaces[0]
    ctx = CostContext(ref, small_table, config)
    b = TrajectoryBudget(64, 3, ACS)
    for seed in range(3):
        mask = random_mask(b, seed=seed)
        expected = naive_cost(mask, ref, small_table, config)
        assert surrogate_cost(mask, ctx) == pytest.approx(expected, rel=1e-9)


def test_pseudo_image_matches_direct(small_dataset, small_table):
    ref = small_dataset.kspaces[0]
    ctx = CostContext(ref, small_table)
    mask = uniform_mask(TrajectoryBudget(64, 4, ACS))
    direct = sos_combine(ifft2_centered(pseudo_reconstruct(mask, ref, small_table)))
    np.testing.assert_allclose(ctx.pseudo_image(mask), direct, atol=1e-12 * direct.max())
    np.testing.assert_allclose(ctx.ground_truth_image, sos_combine(ifft2_centered(ref)), atol=1e-12)


@pytest.mark.parametrize("transform", ["identity", "wavelet-haar-2level"])
def test_full_mask_costs_zero(small_dataset, small_table, transform):
    ctx = CostContext(small_dataset.kspaces[0], small_table, CostConfig(transform=transform))
    assert ctx(SamplingMask.full(64)) == pytest.approx(0.0, abs=1e-12)


def test_cost_is_deterministic_and_nonnegative(small_dataset, small_table):
    ctx = CostContext(small_dataset.kspaces[0], small_table)
    b = TrajectoryBudget(64, 4, ACS)
    for seed in range(5):
        m = random_mask(b, seed=seed)
        c = ctx(m)
        assert c >= 0 and c == ctx(m)


def test_adding_lines_does_not_raise_cost(small_dataset, small_table):
    ctx = CostContext(small_dataset.kspaces[0], small_table)
    b = TrajectoryBudget(64, 4, ACS)
    rng = np.random.default_rng(1)
    for seed in range(10):
        base = random_mask(b, seed=seed)
        free = np.flatnonzero(~base.indicator)
        extra = base.indicator
        extra[rng.choice(free, size=8, replace=False)] = True
        assert ctx(SamplingMask.from_indicator(extra)) <= ctx(base)


def test_psf_sidelobe_examples():
    assert psf_sidelobe(SamplingMask.full(64)) == pytest.approx(0.0, abs=1e-12)
    uniform = uniform_mask(TrajectoryBudget(256, 4))
    assert psf_sidelobe(uniform) == pytest.approx(1.0, abs=1e-12)
    acs_uniform = uniform_mask(TrajectoryBudget(256, 4, AcsSpec(24)))
    assert 0 < psf_sidelobe(acs_uniform) < 1


def test_consistent_data_cost_vanishes(consistent):
    ksp, _ = consistent
    table = build_table(ksp, AcsSpec(12), d_max=4, kx_window=3)
    ctx = CostContext(ksp, table)
    rng = np.random.default_rng(3)
    for _ in range(20):
        ind = AcsSpec(12).indicator(32)
        ind[rng.choice(32, size=6, replace=False)] = True
        ind[::8] = True  # with the last line, every line lies within 4 of a sampled one
        ind[-1] = True
        assert ctx(SamplingMask.from_indicator(ind)) <= 1e-5


def test_p_ordering(small_dataset, small_table):
    n = 64 * 64
    for seed in range(5):
        mask = random_mask(TrajectoryBudget(64, 4, ACS), seed=seed)
        finite = CostContext(small_dataset.kspaces[0], small_table, CostConfig(p=8))(mask)
        inf = CostContext(small_dataset.kspaces[0], small_table, CostConfig(p=math.inf))(mask)
        assert finite <= inf <= n ** (1 / 8) * finite * (1 + 1e-12)


def test_single_line_psf_is_flat():
    assert psf_sidelobe(SamplingMask(64, [20])) == pytest.approx(1.0, abs=1e-12)


def test_thousand_evaluations_use_one_table(small_dataset):
    ref = small_dataset.kspaces[0]
    before = build_table.n_calls
    ctx = CostContext(ref, build_table(ref, ACS, d_max=4, kx_window=3))
    b = TrajectoryBudget(64, 4, ACS)
    costs = [ctx(random_mask(b, seed=s)) for s in range(1000)]
    assert build_table.n_calls == before + 1
    assert all(np.isfinite(costs))
