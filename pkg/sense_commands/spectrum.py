import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from qec_sense import closedform, lindblad, spectral
from qec_sense.errors import ConfigError
from sense_commands.common import Rows, Summary, make_params, prepare_config, write_output

logger = logging.getLogger(__name__)

COMMAND = "spectrum"
MODELS = ("ideal", "uncorrected", "corrected", "conjectured")
COLUMNS = ("freq",) + MODELS
DEFAULTS = {
    "gamma_err": 0.1,
    "gamma_qec": 5.0,
    "t_max": 200.0,
    "n_points": 4001,
    "zero_pad_factor": 8,
    "window": "rect",
    "freq_max": 6.0,
    "corrected_source": "analytic",
}


def _traces(config: Dict[str, Any]) -> Dict[str, lindblad.ExpectationTrace]:
    p = make_params(config)
    taus = lindblad.time_grid(float(config["t_max"]), int(config["n_points"]))
    if config["corrected_source"] == "simulated":
        corrected = lindblad.ramsey_trace(p, taus)
    elif config["corrected_source"] == "analytic":
        corrected = closedform.analytic_trace(p, taus, "full")
    else:
        raise ConfigError(f"corrected_source must be 'analytic' or 'simulated', got {config['corrected_source']!r}")
    return {
        "ideal": closedform.analytic_trace(p, taus, "ideal"),
        "uncorrected": closedform.analytic_trace(p.replace(gamma_qec=0.0), taus, "uncorrected"),
        "corrected": corrected,
        "conjectured": closedform.analytic_trace(p, taus, "conjectured"),
    }


def collect_spectrum(config: Dict[str, Any]) -> Tuple[Rows, Summary]:
    """
    四种模型曲线的幅度谱及主峰位置
    :param config: 已解析的运行配置
    :return: (频率轴上的行, 峰位汇总)
    """
    p = make_params(config)
    spectra = {}
    for name, trace in _traces(config).items():
        spectra[name] = spectral.spectrum(trace, int(config["zero_pad_factor"]), config["window"])
        logger.info("[Spectrum] %s 峰位: %.6f +- %.2g", name, spectra[name].peak_freq,
                    spectra[name].peak_uncertainty)

    freqs = spectra["ideal"].freqs
    keep = freqs <= float(config["freq_max"])
    rows = [{"freq": float(f), **{name: float(spectra[name].magnitudes[i]) for name in MODELS}}
            for i, f in enumerate(freqs) if keep[i]]

    peaks = {name: {"peak_freq": s.peak_freq, "peak_uncertainty": s.peak_uncertainty,
                    "omega_eff": s.peak_freq / 3.0}
             for name, s in spectra.items()}
    predictions = {}
    if p.gamma_qec > 0:
        for order in (1, 2, 3):
            predictions[f"order_{order}"] = 3.0 * closedform.effective_params(p, order).omega_eff
    summary = {
        "peaks": peaks,
        "predicted_peaks": predictions,
        "uncorrected_predicted_peak": 3.0 * closedform.omega_err(p.replace(gamma_qec=0.0)),
        "corrected_below_ideal": bool(peaks["corrected"]["peak_freq"] < peaks["ideal"]["peak_freq"]),
        "uncorrected_below_ideal": bool(peaks["uncorrected"]["peak_freq"] < peaks["ideal"]["peak_freq"]),
        "bin_width": float(np.diff(freqs[:2])[0]),
    }
    return rows, summary


def main(config: Optional[Dict[str, Any]] = None, output_dir: Optional[str] = None) -> str:
    """
    计算频谱并写入结果文件
    :param config: 显式参数（可含 recipe / config_path）
    :param output_dir: 输出目录
    """
    config = prepare_config(COMMAND, DEFAULTS, config)
    rows, summary = collect_spectrum(config)
    path = write_output(config, rows, summary, COLUMNS, output_dir)
    logger.info("[Spectrum] 结果已导出到 %s", path)
    return path


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    main()
