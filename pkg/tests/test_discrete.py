import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qec_sense import discrete, qcore
from qec_sense.discrete import CycleSpec, NoiseModel
from qec_sense.errors import CommutationError, ParameterError
from qec_sense.lindblad import SensorParams

P = SensorParams(omega=1.0)


# ------------------------------
# CycleSpec
# ------------------------------
def test_realistic_total_probability():
    spec = CycleSpec.realistic(c=10, delta_tau=0.05, p_flip=0.01)
    assert spec.p_noise == pytest.approx(0.030301)
    assert spec.noise_model is NoiseModel.REALISTIC
    assert spec.tau == pytest.approx(0.5)


@pytest.mark.parametrize("kwargs", [
    {"c": -1, "delta_tau": 0.05, "p_noise": 0.01},
    {"c": 2.5, "delta_tau": 0.05, "p_noise": 0.01},
    {"c": 10, "delta_tau": -0.1, "p_noise": 0.01},
    {"c": 10, "delta_tau": 0.05, "p_noise": 1.5},
    {"c": 10, "delta_tau": 0.05, "p_noise": 0.01, "noise_model": "realistic"},
    {"c": 10, "delta_tau": 0.05, "p_noise": 0.05, "noise_model": "realistic", "p_flip": 0.01},
])
def test_cycle_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        CycleSpec(**kwargs)


# ------------------------------
# 信道
# ------------------------------
@pytest.mark.parametrize("spec", [
    CycleSpec.optimal(5, 0.05, 0.03),
    CycleSpec.realistic(5, 0.05, 0.02),
])
def test_noise_channels_are_trace_preserving(spec):
    assert discrete.noise_channel(spec).trace_preservation_error() < 1e-12
    assert discrete.erroneous_part(spec).trace_preservation_error() < 1e-12


def test_correction_channel_undoes_single_flips():
    correction = discrete.correction_channel()
    for b in qcore.logical_basis(3):
        assert_allclose(correction.apply(b), b, atol=1e-15)
        for j in (1, 2, 3):
            x = qcore.single_qubit_op(3, j, "X").matrix
            assert_allclose(correction.apply(x @ b @ x), b, atol=1e-15)


def test_optimal_noise_is_perfectly_corrected():
    spec = CycleSpec.optimal(1, 0.05, 0.1)
    assert discrete.logical_defect(discrete.correction_channel(), discrete.noise_channel(spec)) < 1e-15


@pytest.mark.parametrize("p_flip", [0.01, 0.05, 0.1])
def test_realistic_noise_defect(p_flip):
    spec = CycleSpec.realistic(1, 0.05, p_flip)
    defect = discrete.logical_defect(discrete.correction_channel(), discrete.noise_channel(spec))
    assert defect == pytest.approx(discrete.correction_defect(p_flip), abs=1e-14)
    assert discrete.correction_defect(p_flip) == pytest.approx(3 * p_flip ** 2 + p_flip ** 3)


def test_defect_channel_is_logical_flip():
    rho = qcore.ramsey_state(3).matrix
    flipped = discrete.defect_channel().apply(qcore.logical_basis(3)[0])
    assert flipped[7, 7] == pytest.approx(1.0)
    assert_allclose(discrete.defect_channel().apply(rho), rho, atol=1e-15)


def test_sensing_unitary_phases():
    u = discrete.sensing_unitary(1.0, 0.1)
    assert u[0, 0] == pytest.approx(np.exp(-0.15j))
    assert u[7, 7] == pytest.approx(np.exp(0.15j))


def test_inverse_of_non_unitary_channel():
    with pytest.raises(ParameterError):
        discrete.channel_to_inverse_unitary(discrete.correction_channel())


# ------------------------------
# 周期演化与二项式形式
# ------------------------------
def test_iterated_cycles_match_characteristic_function():
    spec = CycleSpec.optimal(60, 0.05, 0.03)
    rho = discrete.iterate_cycles(spec, P, qcore.ramsey_state(3))
    assert rho.expectation(qcore.logical_x(3)) == pytest.approx(
        discrete.expectation_discrete_exact(spec, P), abs=1e-12)


def test_binomial_form_matches_iteration():
    spec = CycleSpec.optimal(40, 0.05, 0.03)
    rho_tau = discrete.noiseless_state(spec, P, qcore.ramsey_state(3))
    expanded = discrete.binomial_form(spec, P, rho_tau, verify=True)
    iterated = discrete.iterate_cycles(spec, P, qcore.ramsey_state(3))
    assert_allclose(expanded.matrix, iterated.matrix, atol=1e-12)


def test_binomial_commutation():
    optimal = CycleSpec.optimal(10, 0.05, 0.030301)
    realistic = CycleSpec.realistic(10, 0.05, 0.01)
    assert discrete.binomial_commutator_norm(optimal, P) < 1e-10
    assert discrete.binomial_commutator_norm(realistic, P) > 1e-6
    rho_tau = discrete.noiseless_state(realistic, P, qcore.ramsey_state(3))
    with pytest.raises(CommutationError) as info:
        discrete.binomial_form(realistic, P, rho_tau, verify=True)
    assert info.value.norm > 1e-6


def test_normal_approximation():
    spec = CycleSpec.optimal(200, 0.05, 0.03)
    assert discrete.normal_regime_ok(spec)
    exact = discrete.expectation_discrete_exact(spec, P)
    assert abs(exact - discrete.expectation_discrete_normal(spec, P)) < 0.003
    assert not discrete.normal_regime_ok(CycleSpec.optimal(20, 0.05, 0.03))


def test_normal_approximation_warns_outside_regime(caplog):
    discrete.expectation_discrete_normal(CycleSpec.optimal(200, 0.05, 0.03), P)
    assert "normal approximation" not in caplog.text
    discrete.expectation_discrete_normal(CycleSpec.optimal(20, 0.05, 0.03), P)
    assert "normal approximation outside its regime" in caplog.text


def test_discrete_effective_params():
    spec = CycleSpec.optimal(200, 0.05, 0.03)
    ep = discrete.discrete_effective_params(spec, P)
    assert ep.omega_eff == pytest.approx(0.98)
    assert ep.gamma_eff == pytest.approx(2.0 / 3.0 * 0.03 * 0.97 * 0.05)


# ------------------------------
# 偏差
# ------------------------------
def test_biasedness_norm_for_single_flips():
    spec = CycleSpec.optimal(1, 0.1, 0.03)
    report = discrete.biasedness_check(discrete.sensing_channel(P, spec.delta_tau), discrete.erroneous_part(spec))
    assert report.is_biased
    assert report.commutator_norm == pytest.approx(2.0 / 3.0 * math.sin(0.1), rel=1e-9)


def test_no_bias_without_sensing():
    spec = CycleSpec.optimal(1, 0.0, 0.03)
    report = discrete.biasedness_check(discrete.sensing_channel(P, 0.0), discrete.erroneous_part(spec))
    assert not report.is_biased


def test_bias_report_carries_observable_shift():
    spec = CycleSpec.optimal(100, 0.05, 0.03)
    report = discrete.bias_report(spec, P)
    assert report.is_biased
    # beta = 3 次插入各带来 2 w dtau 的相位
    expected = math.cos(3.0 * spec.tau - 2.0 * 0.05 * 3) - math.cos(3.0 * spec.tau)
    assert report.delta_observable == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("c, p_noise, rule, expected", [
    (10, 0.25, "mean", 3),
    (10, 0.25, "mode", 2),
    (200, 0.03, "mean", 6),
    (0, 0.5, "mean", 0),
])
def test_expansion_center(c, p_noise, rule, expected):
    assert discrete.expansion_center(CycleSpec.optimal(c, 0.05, p_noise), rule) == expected


def test_expansion_center_unknown_rule():
    with pytest.raises(ParameterError):
        discrete.expansion_center(CycleSpec.optimal(10, 0.05, 0.1), "median")


# ------------------------------
# 逐周期曲线
# ------------------------------
def test_cycle_trace_optimal():
    spec = CycleSpec.optimal(60, 0.05, 0.03)
    series = discrete.cycle_trace(spec, P)
    assert tuple(series) == discrete.DISCRETE_COLUMNS
    assert len(series["tau"]) == 61
    assert series["corrected"][0] == pytest.approx(1.0)
    assert_allclose(series["ideal"], np.cos(3.0 * series["tau"]), atol=1e-12)

    exact = [discrete.expectation_discrete_exact(spec.with_cycles(c), P) for c in range(61)]
    assert_allclose(series["corrected"], exact, atol=1e-12)

    # 无偏重构只有相位，没有衰减
    betas = np.array([discrete.expansion_center(spec.with_cycles(c)) for c in range(61)])
    expected = np.cos(3.0 * series["tau"] - 2.0 * 0.05 * betas)
    assert_allclose(series["unbiased_reconstruction"], expected, atol=1e-12)


def test_cycle_trace_realistic_decays():
    spec = CycleSpec.realistic(100, 0.05, 0.02)
    series = discrete.cycle_trace(spec, P)
    assert np.all(np.abs(series["uncorrected"]) <= 1.0 + 1e-12)
    assert np.max(np.abs(series["corrected"][-10:])) < 1.0


@pytest.mark.parametrize("p_noise", [0.01, 0.1, 0.5])
@pytest.mark.parametrize("omega_dtau", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("c", [1, 7, 20])
def test_binomial_form_equivalence_grid(p_noise, omega_dtau, c):
    spec = CycleSpec.optimal(c, omega_dtau, p_noise)
    rho_tau = discrete.noiseless_state(spec, P, qcore.ramsey_state(3))
    expanded = discrete.binomial_form(spec, P, rho_tau, verify=True)
    iterated = discrete.iterate_cycles(spec, P, qcore.ramsey_state(3))
    assert np.max(np.abs(expanded.matrix - iterated.matrix)) < 1e-10
