import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from qec_sense import closedform, inference
from qec_sense.errors import ConfigError, InsufficientDataError, ParameterError
from qec_sense.inference import FitResult, ShotRecord, SignalModel
from qec_sense.lindblad import SensorParams

TAUS = np.array([0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0])
SENSITIVITY_GRID = np.linspace(0.005, 100.0, 20000)


# ------------------------------
# 信号模型
# ------------------------------
def test_get_model():
    assert isinstance(inference.get_model("conjectured"), inference.ConjecturedModel)
    reduced = inference.get_model("proposed_reduced", gamma_qec=16.6, order=2)
    assert reduced.order == 2 and reduced.gamma_qec == 16.6
    with pytest.raises(ConfigError):
        inference.get_model("exact")
    with pytest.raises(ParameterError):
        inference.ProposedReducedModel(16.6, order=5)


@pytest.mark.parametrize("name", ["ideal", "conjectured", "proposed_full", "proposed_reduced"])
def test_analytic_gradients_match_finite_differences(name):
    model = inference.get_model(name, gamma_qec=16.6, order=3)
    analytic = model.gradient(1.0, 0.2, TAUS)
    numeric = SignalModel.gradient(model, 1.0, 0.2, TAUS)
    assert_allclose(analytic[0], numeric[0], rtol=1e-5, atol=1e-7)
    assert_allclose(analytic[1], numeric[1], rtol=1e-5, atol=1e-7)


def test_forward_difference_near_zero_gamma():
    model = inference.ConjecturedModel()
    _, d_gamma = SignalModel.gradient(model, 1.0, 0.0, TAUS)
    assert_allclose(d_gamma, model.gradient(1.0, 0.0, TAUS)[1], rtol=1e-4, atol=1e-5)


@pytest.mark.parametrize("name", ["conjectured", "proposed_full"])
def test_grid_values_shape_and_content(name):
    model = inference.get_model(name, gamma_qec=16.6)
    omegas, gammas = np.linspace(0.9, 1.1, 4), np.linspace(0.0, 0.5, 3)
    grid = model.grid_values(omegas, gammas, TAUS)
    assert grid.shape == (4, 3, len(TAUS))
    assert_allclose(grid[2, 1], model.value(omegas[2], gammas[1], TAUS), atol=1e-14)


def test_bound_model_is_fixed_parameter_function(sensing_params):
    bound = inference.ProposedFullModel(16.6).at(1.0, 0.2)
    assert bound(1.0) == pytest.approx(closedform.expectation_full(sensing_params, 1.0))


# ------------------------------
# 采样
# ------------------------------
def test_spawn_seeds_are_deterministic_and_distinct():
    seeds = inference.spawn_seeds(7, 50)
    assert seeds == inference.spawn_seeds(7, 50)
    assert len(set(seeds)) == 50
    assert seeds != inference.spawn_seeds(8, 50)


def test_sample_shots_reproducible():
    model = inference.ConjecturedModel().at(1.0, 0.2)
    a = inference.sample_shots(model, 0.7, 1000, seed=99)
    b = inference.sample_shots(model, 0.7, 1000, seed=99)
    c = inference.sample_shots(model, 0.7, 1000, seed=100)
    assert_array_equal(a.outcomes, b.outcomes)
    assert not np.array_equal(a.outcomes, c.outcomes)
    assert a.outcomes.dtype == np.int8
    assert set(np.unique(a.outcomes)) <= {-1, 1}


def test_sample_mean_tracks_expectation():
    record = inference.sample_shots(lambda tau: 0.3, 1.0, 10 ** 4, seed=5)
    assert record.n_shots == 10 ** 4
    # 4 sigma
    assert abs(record.mean - 0.3) < 4 * math.sqrt((1 - 0.09) / 10 ** 4)


def test_sample_shots_clips_small_excess(caplog):
    record = inference.sample_shots(lambda tau: 1.0 + 5e-4, 1.0, 100, seed=1)
    assert np.all(record.outcomes == 1)
    assert "clipped" in caplog.text


def test_sample_shots_rejects_large_excess():
    with pytest.raises(ParameterError):
        inference.sample_shots(lambda tau: 1.01, 1.0, 100, seed=1)
    with pytest.raises(ParameterError):
        inference.sample_shots(lambda tau: 0.5, 1.0, 0, seed=1)


def test_shot_record_validation():
    with pytest.raises(InsufficientDataError):
        ShotRecord(1.0, np.array([], dtype=np.int8), 0)
    with pytest.raises(ParameterError):
        ShotRecord(1.0, np.array([1, 0, -1], dtype=np.int8), 0)


# ------------------------------
# 拟合
# ------------------------------
@pytest.mark.parametrize("name", ["conjectured", "proposed_full"])
def test_fit_recovers_noise_free_parameters(name):
    model = inference.get_model(name, gamma_qec=16.6)
    means = model.value(1.0, 0.2, TAUS)
    fit = inference.fit_means(TAUS, means, model, grid_omega=61, grid_gamma=41)
    assert fit.model == name
    assert fit.omega_hat == pytest.approx(1.0, abs=1e-6)
    assert fit.gamma_hat == pytest.approx(0.2, abs=1e-6)
    assert fit.residual_sum < 1e-12


def test_fit_from_shot_records():
    model = inference.ConjecturedModel()
    truth = model.at(1.0, 0.2)
    seeds = inference.spawn_seeds(3, len(TAUS))
    records = [inference.sample_shots(truth, t, 10 ** 4, s) for t, s in zip(TAUS, seeds)]
    fit = inference.least_squares_fit(records, model, grid_omega=61, grid_gamma=41)
    assert fit.omega_hat == pytest.approx(1.0, abs=0.02)
    assert fit.gamma_hat == pytest.approx(0.2, abs=0.05)


def test_fit_input_checks():
    model = inference.ConjecturedModel()
    with pytest.raises(InsufficientDataError):
        inference.least_squares_fit([], model)
    with pytest.raises(InsufficientDataError):
        inference.fit_means([1.0, 1.0], [0.1, 0.2], model)
    with pytest.raises(InsufficientDataError):
        inference.fit_means(TAUS, np.zeros_like(TAUS), model, omega_bracket=(1.0, 1.0))
    with pytest.raises(ParameterError):
        inference.fit_means(TAUS, np.zeros_like(TAUS), model, omega_bracket=(-1.0, 1.0))


def test_seed_bracket():
    assert inference.seed_bracket(0.2, inference.GAMMA_SCALE) == pytest.approx((0.0, 1.0))
    assert inference.seed_bracket(2.0, inference.OMEGA_SCALE) == pytest.approx((1.0, 3.0))
    assert inference.seed_bracket(0.0, inference.GAMMA_SCALE, fallback=2.0) == pytest.approx((0.0, 10.0))


def test_fit_bracket_follows_seed_frequency():
    model = inference.ConjecturedModel()
    means = model.value(2.0, 0.3, TAUS)
    fit = inference.fit_means(TAUS, means, model, omega_seed=2.0, gamma_seed=0.3, grid_omega=61, grid_gamma=41)
    assert fit.omega_hat == pytest.approx(2.0, abs=1e-6)
    assert fit.gamma_hat == pytest.approx(0.3, abs=1e-6)
    # 以 omega = 1 为种子时括号上限为 1.5
    assert inference.fit_means(TAUS, means, model, grid_omega=61, grid_gamma=41).omega_hat <= 1.5


def test_crb_point_brackets_scale_with_true_frequency():
    p = SensorParams(omega=2.0, gamma_err=0.2, gamma_qec=16.6)
    task = inference.CrbTask(tau=1.0, seed=5, p_true=p, generating="conjectured",
                             fit_models=("conjectured",), order=1, n_shots=10 ** 4, repetitions=100,
                             window=4, omega_scale=inference.OMEGA_SCALE, gamma_scale=inference.GAMMA_SCALE,
                             grid_omega=41, grid_gamma=21)
    row = inference.run_crb_point(task)[0]
    assert row["omega_mean"] == pytest.approx(2.0, abs=0.05)
    assert row["gamma_mean"] < 1.0


# ------------------------------
# Fisher 信息与 CRB
# ------------------------------
def test_fisher_information_conjectured_closed_form():
    model = inference.ConjecturedModel()
    tau, gamma = 0.7, 0.2
    envelope = math.exp(-3 * gamma * tau)
    f = envelope * math.cos(3 * tau)
    expected = (3 * tau * envelope * math.sin(3 * tau)) ** 2 / (1 - f ** 2)
    assert inference.fisher_information(model, "omega", 1.0, gamma, tau) == pytest.approx(expected)


def test_fisher_information_is_infinite_at_unit_expectation():
    model = inference.ConjecturedModel()
    assert inference.fisher_information(model, "omega", 1.0, 0.2, [0.0])[0] == math.inf
    with pytest.raises(ParameterError):
        inference.fisher_information(model, "phase", 1.0, 0.2, 1.0)


def test_fisher_matrix_diagonal(sensing_params):
    model = inference.ProposedFullModel(16.6)
    matrix = inference.fisher_matrix(model, 1.0, 0.2, TAUS, n_shots=100)
    info_w = np.sum(inference.fisher_information(model, "omega", 1.0, 0.2, TAUS))
    info_g = np.sum(inference.fisher_information(model, "gamma", 1.0, 0.2, TAUS))
    assert matrix[0, 0] == pytest.approx(100 * info_w)
    assert matrix[1, 1] == pytest.approx(100 * info_g)
    assert matrix[0, 1] == pytest.approx(matrix[1, 0])


def test_experiment_times():
    assert_allclose(inference.experiment_times(2.0, 4), [0.5, 1.0, 1.5, 2.0])
    with pytest.raises(ParameterError):
        inference.experiment_times(0.0, 4)
    with pytest.raises(ParameterError):
        inference.experiment_times(1.0, 0)


def _fits(omegas, gammas):
    return [FitResult(float(w), float(g), "conjectured", 0.0) for w, g in zip(omegas, gammas)]


def test_crb_audit_needs_enough_repetitions(sensing_params):
    with pytest.raises(InsufficientDataError):
        inference.crb_audit(_fits([1.0] * 10, [0.2] * 10), inference.ConjecturedModel(), sensing_params, 1.0, 100)


def test_crb_audit_flags_too_small_variance(sensing_params):
    fits = _fits(np.full(100, 1.0), np.full(100, 0.2))
    report = inference.crb_audit(fits, inference.ProposedFullModel(16.6), sensing_params, 1.0, 100, window=4)
    assert report.total_variance == 0.0
    assert report.violated
    assert report.repetitions == 100
    assert report.tolerance == pytest.approx(3 * report.crb_rhs * math.sqrt(2 / 99))


def test_bias_statistic():
    estimates = np.full(100, 1.01)
    assert inference.bias_statistic(estimates, 1.0) == pytest.approx(1e-4)
    assert inference.bias_statistic(_fits(estimates, np.zeros(100)), 1.0) == pytest.approx(1e-4)
    spread = np.tile([0.99, 1.01], 50)
    # 无偏时 E[(w - w_hat)^2] - Var = -Var / R
    assert inference.bias_statistic(spread, 1.0) == pytest.approx(-np.var(spread, ddof=1) / 100)
    with pytest.raises(InsufficientDataError):
        inference.bias_statistic(estimates[:50], 1.0)


def test_crb_point_is_reproducible(sensing_params):
    task = inference.CrbTask(tau=2.0, seed=11, p_true=sensing_params, generating="conjectured",
                             fit_models=("conjectured",), order=1, n_shots=10 ** 4, repetitions=100,
                             window=4, omega_scale=(0.5, 1.5), gamma_scale=(0.0, 2.0),
                             grid_omega=21, grid_gamma=11)
    first = inference.run_crb_point(task)
    assert first == inference.run_crb_point(task)
    row = first[0]
    assert row["model"] == "conjectured"
    assert row["omega_mean"] == pytest.approx(1.0, abs=0.05)
    assert row["var_total"] > 0


def test_crb_experiment_requires_repetitions(sensing_params):
    with pytest.raises(InsufficientDataError):
        inference.run_crb_experiment(sensing_params, [1.0], repetitions=10)


@pytest.mark.slow
def test_variance_respects_cramer_rao_bound(sensing_params):
    rows = inference.run_crb_experiment(sensing_params, [1.0, 2.0], n_shots=10 ** 4, repetitions=100,
                                        window=8, seed=2024, grid_omega=61, grid_gamma=41)
    full = [r for r in rows if r["model"] == "proposed_full"]
    assert len(full) == 2
    assert not any(r["violated"] for r in full)
    assert all(r["var_total"] > 0 for r in full)


# ------------------------------
# 最小可探测信号
# ------------------------------
def test_naive_sensitivity_is_inverse_root_fisher(sensing_params):
    taus = np.array([0.3, 1.1, 2.7])
    naive = inference.min_detectable_signal("naive", sensing_params, taus, 100)
    info = inference.fisher_information(inference.ConjecturedModel(), "omega", 1.0, 0.2, taus)
    assert_allclose(naive, 1.0 / np.sqrt(100 * info), rtol=1e-10)


def test_sensitivity_ratio_at_matched_arguments(sensing_params):
    ep = closedform.effective_params(sensing_params, 1)
    taus = np.linspace(0.1, 50.0, 37)
    proposed = inference.min_detectable_signal("proposed_reduced", sensing_params, taus, 10 ** 4, ep=ep)
    naive = inference.min_detectable_signal("naive", SensorParams(omega=ep.omega_eff, gamma_err=ep.gamma_eff),
                                            taus, 10 ** 4)
    ratio = inference.sensitivity_ratio(sensing_params)
    assert ratio == pytest.approx(1.0 - 2.0 * 0.2 / 16.6)
    assert_allclose(naive / proposed, ratio, rtol=1e-10)


def test_sensitivity_diverges_at_zero_time():
    p = SensorParams(gamma_err=0.0, gamma_qec=0.0)
    assert inference.min_detectable_signal("naive", p, 0.0, 100) == math.inf
    with pytest.raises(ConfigError):
        inference.min_detectable_signal("exact", p, 1.0, 100)


def test_sensitivity_respects_standard_quantum_limit(sensing_params):
    curves = inference.sensitivity_curves(sensing_params, SENSITIVITY_GRID, 10 ** 4)
    sql = curves["sql"]
    assert set(curves) == {"tau", "sql", *inference.SENSITIVITY_MODELS}
    for name in ("naive", "proposed_reduced", "proposed_full"):
        assert np.all(curves[name] >= sql * (1.0 - 1e-6)), name


def test_sensitivity_minima_locations(sensing_params):
    curves = inference.sensitivity_curves(sensing_params, SENSITIVITY_GRID, 10 ** 4)
    step = SENSITIVITY_GRID[1] - SENSITIVITY_GRID[0]
    tau_opt, k_opt = inference.optimal_sensing_time(1.0, 0.2)
    assert k_opt == 3

    for name in ("proposed_reduced", "proposed_reduced_full"):
        assert abs(SENSITIVITY_GRID[np.argmin(curves[name])] - tau_opt) <= step, name


def test_sensitivity_curves_share_estimates(sensing_params):
    curves = inference.sensitivity_curves(sensing_params, SENSITIVITY_GRID, 10 ** 4)
    finite = np.isfinite(curves["naive"]) & np.isfinite(curves["proposed_reduced"])
    ratio = curves["naive"][finite] / curves["proposed_reduced"][finite]
    assert_allclose(ratio, inference.sensitivity_ratio(sensing_params), rtol=1e-10)
    assert np.argmin(curves["naive"]) == np.argmin(curves["proposed_reduced"])


def test_sensitivity_at_effective_estimates(sensing_params):
    ep = closedform.effective_params(sensing_params, 1)
    curves = inference.sensitivity_curves(sensing_params, SENSITIVITY_GRID, 10 ** 4,
                                          omega_est=ep.omega_eff, gamma_est=ep.gamma_eff)
    step = SENSITIVITY_GRID[1] - SENSITIVITY_GRID[0]
    tau_eff, k_eff = inference.optimal_sensing_time_effective(sensing_params)
    assert k_eff == 129
    assert tau_eff == pytest.approx(69.212, abs=1e-3)
    assert abs(SENSITIVITY_GRID[np.argmin(curves["proposed_reduced"])] - tau_eff) <= step


def test_sensitivity_rejects_bad_estimates(sensing_params):
    with pytest.raises(ParameterError):
        inference.sensitivity_curves(sensing_params, SENSITIVITY_GRID[:10], 100, omega_est=0.0)
    with pytest.raises(ParameterError):
        inference.sensitivity_curves(sensing_params, SENSITIVITY_GRID[:10], 100, gamma_est=-0.1)


def test_optimal_sensing_time():
    tau, k = inference.optimal_sensing_time(1.0, 0.2)
    assert k == 3
    assert tau == pytest.approx(math.pi / 2)
    assert inference.optimal_sensing_time(1.0, 0.0) == (math.inf, None)
    with pytest.raises(ParameterError):
        inference.optimal_sensing_time(1.0, -0.1)
    with pytest.raises(ParameterError):
        inference.optimal_sensing_time(0.0, 0.1)


@pytest.mark.parametrize("x, expected", [(2.5, 3), (-2.5, -3), (2.49, 2), (0.5, 1)])
def test_round_half_away_from_zero(x, expected):
    assert inference._round_half_away(x) == expected


def test_standard_quantum_limit():
    assert inference.standard_quantum_limit(2.0, 100) == pytest.approx(1.0 / 60.0)
