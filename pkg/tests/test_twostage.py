import numpy as np
import pytest

import twostage
from armodel import ARCoefficients, simulate_ar_errors
from data import TimeSeriesDataset, build_lagged_design, standardize
from errors import NonStationaryError
from rng import make_rng
from sampler import GibbsConfig
from twostage import (
    Stage2Fit,
    TwoStageConfig,
    autocorrelations,
    fit_stage1,
    fit_stage2,
    fit_two_stage,
    select_by_threshold,
)

BETA = np.array([2.0, 0.0, -1.0, 0.0, 0.0])


def _ar_problem(seed=0, n=400, phi=(0.6,), beta=BETA):
    rng = make_rng(seed, 99)
    X = rng.standard_normal((n, beta.size))
    y = X @ beta + simulate_ar_errors(phi, 1.0, n, seed=seed, burn_in=50)
    ds = TimeSeriesDataset(y=y, X=X, feature_names=tuple(f"x{k + 1}" for k in range(beta.size)))
    problem, _ = standardize(build_lagged_design(ds, r=0))
    return problem


def _noise_problem(seed, n=300, p=30):
    rng = make_rng(seed, 7)
    X = rng.standard_normal((n, p))
    ds = TimeSeriesDataset(y=rng.standard_normal(n), X=X, feature_names=tuple(f"x{k}" for k in range(p)))
    problem, _ = standardize(build_lagged_design(ds, r=0))
    return problem


# --- helpers ----------------------------------------------------------------


def test_select_by_threshold_is_strict():
    np.testing.assert_array_equal(select_by_threshold(np.array([0.2, 0.5, 0.7]), 0.5), [2])
    assert select_by_threshold(np.zeros(0), 0.1).size == 0


def test_autocorrelations():
    assert autocorrelations(np.ones(10), 3) == [0.0, 0.0, 0.0]
    alternating = np.tile([1.0, -1.0], 50)
    acf = autocorrelations(alternating, 2)
    assert acf[0] == pytest.approx(-0.99, abs=1e-12)
    assert acf[1] == pytest.approx(0.98, abs=1e-12)


@pytest.mark.parametrize("kwargs", [dict(q_max=-1), dict(beta_threshold_scale=0.0), dict(phi_threshold_scale=-1.0)])
def test_two_stage_config_validation(kwargs):
    with pytest.raises(ValueError):
        TwoStageConfig(**kwargs)


# --- stage 1 ----------------------------------------------------------------


def test_stage1_requires_standardized_problem(sparse_dataset):
    with pytest.raises(ValueError, match="standardized"):
        fit_stage1(build_lagged_design(sparse_dataset, r=0))


def test_stage1_selects_sparse_signal(sparse_dataset, fast_gibbs):
    problem, _ = standardize(build_lagged_design(sparse_dataset, r=0))
    fit = fit_stage1(problem, fast_gibbs)
    np.testing.assert_array_equal(fit.t_beta, [0, 2])
    unselected = np.setdiff1d(np.arange(problem.p), fit.t_beta)
    np.testing.assert_array_equal(fit.beta_hat[unselected], 0.0)
    np.testing.assert_allclose(fit.beta_hat[fit.t_beta], fit.summary.beta_mean_given_incl[fit.t_beta])
    np.testing.assert_allclose(fit.residuals, problem.y - problem.X @ fit.beta_hat)


def test_stage1_noiseless_recovers_support(fast_gibbs):
    rng = make_rng(31)
    n, p = 150, 20
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[[1, 4, 7, 11, 16]] = [3.0, -3.0, 1.0, -1.0, 0.5]
    ds = TimeSeriesDataset(y=X @ beta, X=X, feature_names=tuple(f"x{k}" for k in range(p)))
    problem, _ = standardize(build_lagged_design(ds, r=0))
    fit = fit_stage1(problem, fast_gibbs)
    assert {1, 4, 7, 11, 16} <= set(fit.t_beta.tolist())


def test_stage1_pure_noise_selects_little():
    cfg = GibbsConfig(iterations=600, burn_in=100, seed=5)
    sizes = [fit_stage1(_noise_problem(seed), cfg).t_beta.size for seed in range(20)]
    assert np.median(sizes) <= 2


# --- stage 2 ----------------------------------------------------------------


def test_stage2_without_lags_is_empty(fast_gibbs):
    fit = fit_stage2(np.arange(10.0), 0, fast_gibbs)
    assert fit.t_phi.size == 0
    assert fit.phi_hat.q == 0
    assert fit.summary.incl_prob.size == 0


def test_stage2_white_noise_selects_no_lags():
    cfg = GibbsConfig(iterations=600, burn_in=100, seed=8)
    sizes = [fit_stage2(make_rng(seed, 5).standard_normal(200), 10, cfg).t_phi.size for seed in range(20)]
    assert np.median(sizes) == 0


def test_stage2_recovers_ar1(fast_gibbs):
    eps = simulate_ar_errors([0.6], 1.0, 400, seed=12, burn_in=50)
    fit = fit_stage2(eps, 3, fast_gibbs)
    assert 0 in fit.t_phi
    assert fit.phi_hat.phi[0] == pytest.approx(0.6, abs=0.12)
    assert fit.phi_hat.q == 3
    unselected = np.setdiff1d(np.arange(3), fit.t_phi)
    np.testing.assert_array_equal(fit.phi_hat.phi[unselected], 0.0)


# --- fit_two_stage ----------------------------------------------------------


def test_two_stage_recovers_both_supports(fast_gibbs):
    problem = _ar_problem(seed=1)
    fit = fit_two_stage(problem, 3, TwoStageConfig(q_max=3, gibbs=fast_gibbs))
    assert {0, 2} <= set(fit.t_beta.tolist())
    noise = [1, 3, 4]
    assert np.all(np.abs(fit.beta_hat[noise]) < 0.2)
    assert 0 in fit.t_phi
    assert fit.phi_hat.phi[0] == pytest.approx(0.6, abs=0.12)
    assert fit.q == 3
    assert fit.column_labels == problem.labels
    assert fit.scaling is problem.scaling


def test_two_stage_is_deterministic(fast_gibbs):
    problem = _ar_problem(seed=2, n=200)
    cfg = TwoStageConfig(q_max=2, gibbs=fast_gibbs)
    a = fit_two_stage(problem, cfg=cfg)
    b = fit_two_stage(problem, cfg=cfg)
    np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
    np.testing.assert_array_equal(a.phi_hat.phi, b.phi_hat.phi)


def test_two_stage_white_errors_leave_no_lags(fast_gibbs):
    problem = _ar_problem(seed=4, phi=(0.0,))
    cfg = TwoStageConfig(q_max=2, gibbs=fast_gibbs, phi_threshold_scale=1.8)
    fit = fit_two_stage(problem, cfg=cfg)
    assert fit.t_phi.size == 0
    np.testing.assert_array_equal(fit.phi_hat.phi, 0.0)


def test_two_stage_rejects_non_stationary_estimate(monkeypatch, fast_gibbs):
    def explosive(residuals, q, cfg=None, threshold_scale=1.0):
        return Stage2Fit(twostage._empty_summary(), np.array([0]), ARCoefficients([1.2]))

    monkeypatch.setattr(twostage, "fit_stage2", explosive)
    with pytest.raises(NonStationaryError) as excinfo:
        fit_two_stage(_ar_problem(seed=3, n=120), 1, TwoStageConfig(q_max=1, gibbs=fast_gibbs))
    assert "smaller number of error lags" in str(excinfo.value)
    assert excinfo.value.phi == [1.2]


def test_refinement_pass_keeps_the_signal(fast_gibbs):
    problem = _ar_problem(seed=6)
    fit = fit_two_stage(problem, 3, TwoStageConfig(q_max=3, gibbs=fast_gibbs, refine=True))
    assert {0, 2} <= set(fit.t_beta.tolist())
    np.testing.assert_allclose(fit.residuals, problem.y - problem.X @ fit.beta_hat)
    assert 0 in fit.t_phi


def test_report_structure(fast_gibbs):
    problem = _ar_problem(seed=1)
    fit = fit_two_stage(problem, 3, TwoStageConfig(q_max=3, gibbs=fast_gibbs))
    report = fit.report()

    assert report["n"] == problem.n
    assert report["p"] == problem.p
    assert report["q"] == 3
    assert 1 in report["t_phi"]
    assert len(report["phi_hat"]) == 3
    assert set(report["inclusion_probabilities"]) == set(problem.labels)

    probs = [entry["inclusion_probability"] for entry in report["t_beta"]]
    assert probs == sorted(probs, reverse=True)
    first = report["t_beta"][0]
    j = problem.labels.index(first["column"])
    expected = problem.scaling.unscale_coefficients(fit.beta_hat)[j]
    assert first["beta_original_units"] == pytest.approx(expected)

    diag = report["residual_diagnostics"]
    assert len(diag["residual_autocorrelation"]) == 3
    # whitening by the fitted AR filter removes most of the lag-1 correlation
    assert abs(diag["shock_autocorrelation"][0]) < abs(diag["residual_autocorrelation"][0])
    assert diag["shock_variance"] < diag["residual_variance"]
