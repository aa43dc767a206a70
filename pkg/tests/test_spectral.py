import numpy as np
import pytest

from qec_sense import closedform, lindblad, spectral
from qec_sense.errors import GridError, ParameterError
from qec_sense.lindblad import ExpectationTrace, Provenance, SensorParams

LONG_GRID = lindblad.time_grid(200.0, 4001)


def _exact_omega_eff(p: SensorParams) -> float:
    return -closedform.eigen_solution(p).lambda_plus.imag / 3.0


# ------------------------------
# 峰值提取
# ------------------------------
@pytest.mark.parametrize("window", ["rect", "hann"])
def test_pure_cosine_peak(window):
    t = 0.05 * np.arange(2000)
    spec = spectral.peak_from_samples(np.cos(2.5 * t), 0.05, window=window)
    assert abs(spec.peak_freq - 2.5) < spec.peak_uncertainty
    assert spec.n_samples == 2000
    assert spec.bin_width == pytest.approx(2 * np.pi / (8 * 2000 * 0.05))


def test_constant_offset_is_removed():
    t = 0.05 * np.arange(1000)
    spec = spectral.peak_from_samples(3.0 + np.cos(1.7 * t), 0.05)
    assert spec.peak_freq == pytest.approx(1.7, abs=spec.peak_uncertainty)


@pytest.mark.parametrize("values, dt", [(np.zeros(10), 0.05), (np.zeros(100), 0.0), (np.zeros(100), -0.1)])
def test_bad_sampling_raises_grid_error(values, dt):
    with pytest.raises(GridError):
        spectral.peak_from_samples(values, dt)


@pytest.mark.parametrize("kwargs", [{"window": "blackman"}, {"zero_pad_factor": 0}])
def test_bad_spectral_options(kwargs):
    with pytest.raises(ParameterError):
        spectral.peak_from_samples(np.cos(np.arange(100)), 0.1, **kwargs)


def test_non_uniform_trace_rejected():
    taus = np.concatenate([np.linspace(0.0, 1.0, 50), np.linspace(1.5, 5.0, 50)])
    trace = ExpectationTrace(taus, np.cos(3 * taus), Provenance.ANALYTIC_FULL, SensorParams())
    with pytest.raises(GridError):
        spectral.spectrum(trace)


# ------------------------------
# 例子参数下的有效频率
# ------------------------------
def test_corrected_peak_matches_dominant_eigenvalue(example_params):
    trace = closedform.analytic_trace(example_params, LONG_GRID, "full")
    omega_eff, uncertainty = spectral.effective_frequency_from_trace(trace)
    assert uncertainty < 0.001
    assert omega_eff == pytest.approx(_exact_omega_eff(example_params), abs=0.005 / 3)

    spec = spectral.spectrum(trace)
    third = closedform.effective_params(example_params, 3).omega_eff
    assert spec.peak_freq == pytest.approx(3 * third, rel=0.01)
    assert spec.peak_freq == pytest.approx(2.88, rel=0.01)


def test_uncorrected_and_ideal_peaks(example_params):
    uncorrected = closedform.expectation_uncorrected(example_params.replace(gamma_qec=0.0), LONG_GRID)
    assert spectral.peak_from_samples(uncorrected, 0.05).peak_freq == pytest.approx(2.985, rel=0.01)

    ideal = spectral.peak_from_samples(closedform.expectation_ideal(1.0, LONG_GRID), 0.05)
    assert ideal.peak_freq == pytest.approx(3.0, abs=0.005)

    corrected = spectral.spectrum(closedform.analytic_trace(example_params, LONG_GRID, "full"))
    assert corrected.peak_freq < ideal.peak_freq


# ------------------------------
# 自动延长
# ------------------------------
def test_auto_extension_doubles_until_target(example_params):
    spec = spectral.auto_extended_spectrum(spectral.full_solution_values, example_params)
    assert spec.n_samples == 1601
    assert spec.peak_uncertainty / 3 < 0.002


def test_auto_extension_stops_at_sample_cap(example_params, caplog):
    spec = spectral.auto_extended_spectrum(spectral.full_solution_values, example_params, max_samples=1000)
    assert spec.n_samples == 801
    assert "sample cap" in caplog.text


def test_sweep_has_interior_minimum():
    base = SensorParams(gamma_err=0.1)
    gamma_qec_values = [1.0, 2.0, 3.0, 5.0, 10.0, 20.0]
    sweep = spectral.effective_frequency_sweep(base, gamma_qec_values)
    assert [gq for gq, _ in sweep] == gamma_qec_values
    omegas = np.array([w for _, w in sweep])
    assert int(np.argmin(omegas)) == 1
    assert np.all(np.diff(omegas[1:]) > 0)


def test_sweep_with_worker_pool_keeps_order():
    base = SensorParams(gamma_err=0.1)
    serial = spectral.effective_frequency_sweep(base, [5.0, 20.0], workers=1)
    pooled = spectral.effective_frequency_sweep(base, [5.0, 20.0], workers=2)
    assert pooled == serial


def test_strong_correction_recovers_signal_frequency():
    omega_eff, _ = spectral.effective_frequency_point(SensorParams(gamma_err=0.1, gamma_qec=100.0))
    assert omega_eff > 0.995


@pytest.mark.parametrize("omega, gamma", [(2.0, 0.1), (3.0, 0.05), (1.0, 0.01)])
def test_damped_cosine_peak_shift_is_small(omega, gamma):
    t = 0.05 * np.arange(4000)
    spec = spectral.peak_from_samples(np.exp(-gamma * t) * np.cos(omega * t), 0.05)
    assert spec.peak_freq == pytest.approx(omega, rel=0.005)


def test_longer_trace_never_widens_uncertainty():
    t_short, t_long = 0.05 * np.arange(500), 0.05 * np.arange(1000)
    short = spectral.peak_from_samples(np.cos(2.9 * t_short), 0.05)
    long = spectral.peak_from_samples(np.cos(2.9 * t_long), 0.05)
    assert long.peak_uncertainty <= short.peak_uncertainty
