import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from outcomes.estimators import BaselineSampler, MaskOptimizer, PicsReconstructor
from outcomes.kspace import AcsSpec, SamplingMask
from outcomes.recon import evaluate_trajectory
from outcomes.trajectories import TrajectoryBudget, psf_optimized_mask, uniform_mask


def test_get_params_and_clone():
    est = MaskOptimizer(reduction=3, n_iterations=2, seed=5)
    params = est.get_params()
    assert params["reduction"] == 3 and params["seed"] == 5 and params["init"] == "uniform"
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(n_candidates=8)
    assert est.n_candidates == 8


@pytest.mark.parametrize("strategy", ["uniform", "variable-density", "psf"])
def test_baseline_sampler(small_dataset, strategy):
    X = small_dataset.kspaces[0]
    sampler = BaselineSampler(strategy, reduction=4, acs_width=12, n_trials=5, seed=1).fit(X)
    assert sampler.budget_.is_valid(sampler.mask_)
    out = sampler.transform(X)
    kept = sampler.mask_.indicator
    np.testing.assert_array_equal(out[kept], X[kept])
    assert not np.any(out[~kept])


def test_baseline_sampler_matches_functions(small_dataset):
    X = small_dataset.kspaces[0]
    b = TrajectoryBudget(64, 4, AcsSpec(12))
    assert BaselineSampler("uniform", 4, 12).fit(X).mask_ == uniform_mask(b)
    assert BaselineSampler("psf", 4, 12, n_trials=7, seed=3).fit(X).mask_ == psf_optimized_mask(b, 7, 3)


def test_validation_errors(small_dataset):
    X = small_dataset.kspaces[0]
    with pytest.raises(ValueError):
        BaselineSampler("spiral").fit(X)
    with pytest.raises(ValueError):
        BaselineSampler(reduction=8, acs_width=12).fit(X)
    with pytest.raises(ValueError):
        BaselineSampler().fit(np.zeros((3, 4)))
    with pytest.raises(NotFittedError):
        BaselineSampler().transform(X)
    with pytest.raises(NotFittedError):
        PicsReconstructor().predict(X)
    fitted = BaselineSampler(acs_width=12).fit(X)
    with pytest.raises(ValueError):
        fitted.transform(X[:32])


def test_mask_optimizer_fit_transform(small_dataset):
    X = small_dataset.kspaces[0]
    est = MaskOptimizer(reduction=4, acs_width=12, n_iterations=4, n_candidates=10, seed=2)
    out = est.fit_transform(X)
    assert est.budget_.is_valid(est.mask_)
    assert len(est.trace_.records) == 5
    assert est.score() == -est.trace_.best_costs[-1]
    assert est.score() >= -est.cost_context_(uniform_mask(est.budget_))
    np.testing.assert_array_equal(out[est.mask_.sampled], X[est.mask_.sampled])
    again = clone(est).fit(X)
    assert again.mask_ == est.mask_


def test_pics_reconstructor(small_dataset):
    X = small_dataset.kspaces[1]
    sampler = BaselineSampler("uniform", reduction=3, acs_width=12).fit(X)
    Xu = sampler.transform(X)
    est = PicsReconstructor(acs_width=12).fit(Xu)
    assert est.mask_ == sampler.mask_
    image = est.predict(Xu)
    assert image.shape == X.shape[:2]
    report = evaluate_trajectory(X, sampler.mask_, AcsSpec(12))
    assert -est.score(Xu, X) == pytest.approx(report.nrmse, rel=1e-12)


def test_pics_full_mask_scores_near_zero(small_dataset):
    X = small_dataset.kspaces[0]
    est = PicsReconstructor(mask=SamplingMask.full(64), acs_width=12, lam=0.0).fit(X)
    assert -est.score(X) <= 1e-3
    with pytest.raises(TypeError):
        PicsReconstructor(mask=[1, 2, 3]).fit(X)
