"""
从 <sigma_x^L>(tau) 曲线中提取有效频率：去均值、补零 rfft、
峰值附近三点对数幅度二次插值。
"""
import logging
import math
from dataclasses import dataclass
from functools import partial
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import SPECTRAL_DEFAULTS, resolve_workers
from qec_sense import closedform
from qec_sense.errors import GridError, ParameterError
from qec_sense.lindblad import ExpectationTrace, SensorParams

logger = logging.getLogger(__name__)

WINDOWS = ("rect", "hann")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """角频率轴上的幅度谱，peak_freq 为插值后的峰位"""
    freqs: np.ndarray
    magnitudes: np.ndarray
    peak_freq: float
    peak_uncertainty: float
    peak_index: int
    n_samples: int

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def _interpolate_peak(magnitudes: np.ndarray, k: int) -> float:
    """返回相对第 k 个频点的亚格点偏移，范围 [-0.5, 0.5]"""
    if k == 0 or k == magnitudes.size - 1:
        return 0.0
    tiny = np.finfo(float).tiny
    y_minus, y0, y_plus = np.log(np.maximum(magnitudes[k - 1:k + 2], tiny))
    curvature = y_minus - 2.0 * y0 + y_plus
    if curvature >= 0:
        return 0.0
    return float(np.clip(0.5 * (y_minus - y_plus) / curvature, -0.5, 0.5))


def peak_from_samples(values: Sequence[float], dt: float,
                      zero_pad_factor: int = SPECTRAL_DEFAULTS["zero_pad_factor"],
                      window: str = SPECTRAL_DEFAULTS["window"]) -> Spectrum:
    """对等间隔采样序列求幅度谱与主峰"""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < SPECTRAL_DEFAULTS["min_samples"]:
        raise GridError(f"spectrum needs >= {SPECTRAL_DEFAULTS['min_samples']} samples, got {n}")
    if not dt > 0:
        raise GridError(f"sampling step must be > 0, got {dt}")
    if zero_pad_factor < 1:
        raise ParameterError(f"zero_pad_factor must be >= 1, got {zero_pad_factor}")
    if window not in WINDOWS:
        raise ParameterError(f"unknown window {window!r}; known: {', '.join(WINDOWS)}")

    x = values - np.mean(values)
    if window == "hann":
        x = x * np.hanning(n)
    n_fft = n * zero_pad_factor
    magnitudes = np.abs(np.fft.rfft(x, n=n_fft))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(n_fft, d=dt)

    k = int(np.argmax(magnitudes))
    bin_width = float(freqs[1] - freqs[0])
    peak = float(freqs[k] + _interpolate_peak(magnitudes, k) * bin_width)
    return Spectrum(freqs=freqs, magnitudes=magnitudes, peak_freq=peak,
                    peak_uncertainty=0.5 * bin_width, peak_index=k, n_samples=n)


def spectrum(trace: ExpectationTrace,
             zero_pad_factor: int = SPECTRAL_DEFAULTS["zero_pad_factor"],
             window: str = SPECTRAL_DEFAULTS["window"]) -> Spectrum:
    """ExpectationTrace 的幅度谱；要求均匀网格"""
    if len(trace) < SPECTRAL_DEFAULTS["min_samples"]:
        raise GridError(f"spectrum needs >= {SPECTRAL_DEFAULTS['min_samples']} samples, got {len(trace)}")
    if not trace.is_uniform():
        raise GridError("spectrum needs a uniform tau grid")
    return peak_from_samples(trace.values, trace.dt, zero_pad_factor, window)


def effective_frequency_from_trace(trace: ExpectationTrace, **kwargs) -> Tuple[float, float]:
    """(omega_eff, 不确定度) = 峰位 / 3"""
    spec = spectrum(trace, **kwargs)
    return spec.peak_freq / 3.0, spec.peak_uncertainty / 3.0


# ------------------------------
# 自动延长与扫描
# ------------------------------
def full_solution_values(p: SensorParams, taus: np.ndarray) -> np.ndarray:
    return np.asarray(closedform.expectation_full(p, taus))


def auto_extended_spectrum(trace_fn: Callable[[SensorParams, np.ndarray], np.ndarray],
                           p: SensorParams, dt: float = 0.05, t_min: float = 20.0,
                           target: float = SPECTRAL_DEFAULTS["target_uncertainty"],
                           max_samples: int = SPECTRAL_DEFAULTS["max_samples"],
                           zero_pad_factor: int = SPECTRAL_DEFAULTS["zero_pad_factor"],
                           window: str = SPECTRAL_DEFAULTS["window"]) -> Spectrum:
    """
    采样时长从 t_min 起逐次加倍，直到 peak_uncertainty / 3 < target * omega，
    或采样点数达到 max_samples。
    谱峰位于 3 omega_eff，比较的量 peak_uncertainty / 3 是 omega_eff 的不确定度。
    """
    duration = t_min
    while True:
        n = int(round(duration / dt)) + 1
        taus = dt * np.arange(n)
        spec = peak_from_samples(trace_fn(p, taus), dt, zero_pad_factor, window)
        if spec.peak_uncertainty / 3.0 < target * p.omega:
            return spec
        if 2 * n > max_samples:
            logger.warning("[Spectrum] sample cap reached at T=%.4g, uncertainty=%.3g",
                           duration, spec.peak_uncertainty / 3.0)
            return spec
        duration *= 2.0


def effective_frequency_point(p: SensorParams, dt: float = 0.05, t_min: float = 20.0,
                              target: float = SPECTRAL_DEFAULTS["target_uncertainty"]) -> Tuple[float, float]:
    spec = auto_extended_spectrum(full_solution_values, p, dt=dt, t_min=t_min, target=target)
    logger.debug("[Spectrum] gamma_qec=%s omega_eff=%.6f +- %.2g (n=%d)",
                 p.gamma_qec, spec.peak_freq / 3.0, spec.peak_uncertainty / 3.0, spec.n_samples)
    return spec.peak_freq / 3.0, spec.peak_uncertainty / 3.0


def effective_frequency_sweep(p_base: SensorParams, gamma_qec_values: Sequence[float],
                              dt: float = 0.05, t_min: float = 20.0,
                              target: float = SPECTRAL_DEFAULTS["target_uncertainty"],
                              workers: Optional[int] = None) -> List[Tuple[float, float]]:
    """沿 gamma_qec 扫描，返回 [(gamma_qec, omega_eff_measured), ...]，按输入顺序；workers 缺省取 CPU 数"""
    points = [p_base.replace(gamma_qec=float(gq)) for gq in gamma_qec_values]
    worker = partial(effective_frequency_point, dt=dt, t_min=t_min, target=target)
    workers = resolve_workers(workers)
    if workers == 1 or len(points) < 2:
        results = [worker(p) for p in points]
    else:
        with Pool(processes=min(workers, len(points))) as pool:
            results = list(pool.imap(worker, points))
    return [(p.gamma_qec, omega_eff) for p, (omega_eff, _) in zip(points, results)]
