"""
解析式与数值模拟、解析式与其近似之间的误差随 gamma_qec 的变化：
  sim_full                  数值积分 vs 精确解 2 Re q
  full_reduced              精确解 vs 有效参数模型（1~3 阶）
  sensitivity_sim_full      |delta omega|：模拟（差分求导）vs 精确解
  sensitivity_full_reduced  |delta omega|：精确解 vs 有效参数公式（1~3 阶）
  effective_frequency       FFT 有效频率与 1~3 阶有效频率的相对偏差

|delta omega| 在节点处发散，比较时用 SQL 归一化的效率 (9 N tau^2)^{-1/2} / |delta omega| ∈ [0, 1]。
"""
import logging
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from qec_sense import closedform, inference, lindblad, spectral
from qec_sense.errors import ConfigError
from qec_sense.lindblad import SensorParams
from sense_commands.common import Rows, Summary, make_params, prepare_config, run_pool, write_output

logger = logging.getLogger(__name__)

COMMAND = "compare"
METRICS = ("sim_full", "full_reduced", "sensitivity_sim_full", "sensitivity_full_reduced", "effective_frequency")
ORDERS = (1, 2, 3)
TRACE_KINDS = ("simulated",) + closedform.ANALYTIC_KINDS
DEFAULTS = {
    "gamma_err": 0.1,
    "gamma_qec_values": [1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
    "t_max": 20.0,
    "n_points": 2000,
    "metrics": list(METRICS),
    "models": None,
    "fd_step": 1e-4,
}


def metric_columns(metrics: Sequence[str], models: Optional[Sequence[str]] = None) -> Tuple[str, ...]:
    columns = ["gamma_qec", "valid"]
    if "sim_full" in metrics:
        columns.append("rmse_sim_full")
    if "full_reduced" in metrics:
        columns += [f"rmse_full_reduced_o{k}" for k in ORDERS]
    if "sensitivity_sim_full" in metrics:
        columns.append("rmse_efficiency_sim_full")
    if "sensitivity_full_reduced" in metrics:
        columns += [f"rmse_efficiency_full_reduced_o{k}" for k in ORDERS]
    if "effective_frequency" in metrics:
        columns.append("omega_eff_fft")
        columns += [f"omega_eff_deviation_o{k}" for k in ORDERS]
    if models:
        columns.append(f"rmse_{models[0]}_{models[1]}")
    return tuple(columns)


def _check_metrics(metrics: Sequence[str], models: Optional[Sequence[str]]):
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise ConfigError(f"unknown comparison metric(s) {unknown}; known: {', '.join(METRICS)}")
    if models:
        if len(models) != 2:
            raise ConfigError(f"models must name exactly two traces, got {models}")
        bad = [m for m in models if m not in TRACE_KINDS]
        if bad:
            raise ConfigError(f"unknown model id(s) {bad}; known: {', '.join(TRACE_KINDS)}")


# ------------------------------
# 单点指标
# ------------------------------
def _rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def sensitivity_efficiency(values: np.ndarray, derivative: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """sqrt(I(omega)) / (3 tau)，即 SQL / |delta omega|"""
    denom = np.clip((1.0 + values) * (1.0 - values), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.abs(derivative) / (3.0 * taus * np.sqrt(denom))
    return np.where(np.isfinite(eta), eta, 1.0)


def _reduced_efficiency(p: SensorParams, taus: np.ndarray, order: int) -> np.ndarray:
    n_shots = 1
    dw = inference.min_detectable_signal("proposed_reduced", p, taus, n_shots,
                                         ep=closedform.effective_params(p, order))
    return np.where(np.isfinite(dw), inference.standard_quantum_limit(taus, n_shots) / dw, 0.0)


def _trace_values(kind: str, p: SensorParams, taus: np.ndarray) -> np.ndarray:
    if kind == "simulated":
        return lindblad.ramsey_trace(p, taus).values
    if kind == "uncorrected":
        p = p.replace(gamma_qec=0.0)
    return closedform.analytic_trace(p, taus, kind).values


def compare_point(p: SensorParams, taus: np.ndarray, metrics: Sequence[str],
                  models: Optional[Sequence[str]], fd_step: float) -> Dict[str, Any]:
    """单个 gamma_qec 点上的所有指标"""
    row: Dict[str, Any] = {"gamma_qec": p.gamma_qec, "valid": closedform.validity_check(p).valid}
    full = np.asarray(closedform.expectation_full(p, taus))
    inner = taus[1:]

    simulated = None
    if "sim_full" in metrics or "sensitivity_sim_full" in metrics:
        simulated = lindblad.ramsey_trace(p, taus).values
    if "sim_full" in metrics:
        row["rmse_sim_full"] = _rmse(simulated, full)
    if "full_reduced" in metrics:
        for k in ORDERS:
            reduced = closedform.expectation_reduced(closedform.effective_params(p, k), taus)
            row[f"rmse_full_reduced_o{k}"] = _rmse(full, reduced)

    if "sensitivity_sim_full" in metrics or "sensitivity_full_reduced" in metrics:
        d_full, _ = closedform.expectation_full_gradient(p, inner)
        eta_full = sensitivity_efficiency(full[1:], np.asarray(d_full), inner)
    if "sensitivity_sim_full" in metrics:
        h = fd_step * p.omega
        upper = lindblad.ramsey_trace(p.replace(omega=p.omega + h), taus).values
        lower = lindblad.ramsey_trace(p.replace(omega=p.omega - h), taus).values
        d_sim = (upper - lower)[1:] / (2.0 * h)
        eta_sim = sensitivity_efficiency(simulated[1:], d_sim, inner)
        row["rmse_efficiency_sim_full"] = _rmse(eta_sim, eta_full)
    if "sensitivity_full_reduced" in metrics:
        for k in ORDERS:
            row[f"rmse_efficiency_full_reduced_o{k}"] = _rmse(eta_full, _reduced_efficiency(p, inner, k))

    if "effective_frequency" in metrics:
        measured, _ = spectral.effective_frequency_point(p)
        row["omega_eff_fft"] = measured
        for k in ORDERS:
            predicted = closedform.effective_params(p, k).omega_eff
            row[f"omega_eff_deviation_o{k}"] = abs(predicted - measured) / measured

    if models:
        a = _trace_values(models[0], p, taus)
        b = _trace_values(models[1], p, taus)
        row[f"rmse_{models[0]}_{models[1]}"] = _rmse(a, b)

    logger.info("[Compare] gamma_qec=%s 完成", p.gamma_qec)
    return row


def collect_compare(config: Dict[str, Any]) -> Tuple[Rows, Summary]:
    """
    沿 gamma_qec 扫描计算误差曲线
    :param config: 已解析的运行配置
    :return: (每个 gamma_qec 一行, 汇总)
    """
    metrics = list(config["metrics"])
    models = config.get("models")
    _check_metrics(metrics, models)
    taus = lindblad.time_grid(float(config["t_max"]), int(config["n_points"]))
    points = [make_params(config, gamma_qec=float(gq)) for gq in config["gamma_qec_values"]]

    worker = partial(compare_point, taus=taus, metrics=metrics, models=models, fd_step=float(config["fd_step"]))
    rows: List[Dict[str, Any]] = run_pool(worker, points, config.get("workers"))
    columns = metric_columns(metrics, models)
    rows = [{c: r.get(c) for c in columns} for r in rows]

    summary: Summary = {}
    for column in columns[2:]:
        values = [r[column] for r in rows if r["valid"]]
        if values:
            summary[f"max_{column}_in_validity"] = max(values)
    return rows, summary


def main(config: Optional[Dict[str, Any]] = None, output_dir: Optional[str] = None) -> str:
    """
    计算误差曲线并写入结果文件
    :param config: 显式参数（可含 recipe / config_path）
    :param output_dir: 输出目录
    """
    config = prepare_config(COMMAND, DEFAULTS, config)
    rows, summary = collect_compare(config)
    columns = metric_columns(config["metrics"], config.get("models"))
    path = write_output(config, rows, summary, columns, output_dir)
    logger.info("[Compare] 结果已导出到 %s", path)
    return path


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    main()
