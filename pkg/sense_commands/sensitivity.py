import logging
import math
from typing import Any, Dict, Optional, Tuple

import numpy as np

from qec_sense import inference
from sense_commands.common import Rows, Summary, make_params, prepare_config, write_output

logger = logging.getLogger(__name__)

COMMAND = "sensitivity"
COLUMNS = ("tau", "naive", "proposed", "proposed_reduced_full", "proposed_full", "sql")
DEFAULTS = {
    "gamma_err": 0.2,
    "gamma_qec": 16.6,
    # 缺省取 (omega, gamma_err)
    "omega_est": None,
    "gamma_est": None,
    "n_shots": 10 ** 4,
    "order": 1,
    "tau_min": 0.005,
    "tau_max": 100.0,
    "n_points": 20000,
}


def _argmin(taus: np.ndarray, values: np.ndarray) -> float:
    return float(taus[int(np.argmin(values))])


def collect_sensitivity(config: Dict[str, Any]) -> Tuple[Rows, Summary]:
    """
    以同一组估计值 (omega_est, gamma_est) 计算朴素与有效参数两条 |delta omega|(tau) 曲线，
    附精确解曲线和 SQL，并比对最优感测时间与各曲线最小值位置
    :param config: 已解析的运行配置
    :return: (逐时刻的行, 汇总)
    """
    p = make_params(config)
    n_shots = int(config["n_shots"])
    order = int(config["order"])
    omega_est = p.omega if config.get("omega_est") is None else float(config["omega_est"])
    gamma_est = p.gamma_err if config.get("gamma_est") is None else float(config["gamma_est"])
    taus = np.linspace(float(config["tau_min"]), float(config["tau_max"]), int(config["n_points"]))
    step = float(taus[1] - taus[0])

    curves = inference.sensitivity_curves(p, taus, n_shots, order=order,
                                          omega_est=omega_est, gamma_est=gamma_est)
    curves["proposed"] = curves.pop("proposed_reduced")
    rows = [{name: float(curves[name][i]) for name in COLUMNS} for i in range(len(taus))]

    tau_opt, k_opt = inference.optimal_sensing_time(omega_est, gamma_est)
    tau_eff, k_eff = inference.optimal_sensing_time_effective(p, order)
    argmins = {name: _argmin(taus, curves[name])
               for name in ("naive", "proposed", "proposed_reduced_full", "proposed_full")}
    matches = [name for name, t in argmins.items() if math.isfinite(tau_opt) and abs(t - tau_opt) <= step]
    if "proposed" not in matches:
        logger.warning("[Sensitivity] proposed argmin %.6g is more than one step from tau_opt=%.6g",
                       argmins["proposed"], tau_opt)

    sql = curves["sql"]
    summary = {
        "n_shots": n_shots,
        "grid_step": step,
        "omega_est": omega_est,
        "gamma_est": gamma_est,
        "tau_opt": tau_opt,
        "k_opt": k_opt,
        "tau_opt_effective": tau_eff,
        "k_opt_effective": k_eff,
        "argmin": argmins,
        "matches_tau_opt": matches,
        "sensitivity_ratio": inference.sensitivity_ratio(p, order),
        "naive_over_proposed_min": float(np.min(curves["naive"]) / np.min(curves["proposed"])),
        "sql_respected": {
            name: bool(np.all(curves[name] >= sql * (1.0 - 1e-9)))
            for name in ("naive", "proposed", "proposed_full")
        },
    }
    logger.info("[Sensitivity] tau_opt=%.6g (k=%s) | argmin naive=%.6g proposed=%.6g | matches=%s",
                tau_opt, k_opt, argmins["naive"], argmins["proposed"], ",".join(matches))
    return rows, summary


def main(config: Optional[Dict[str, Any]] = None, output_dir: Optional[str] = None) -> str:
    """
    计算最小可探测信号曲线并写入结果文件
    :param config: 显式参数（可含 recipe / config_path）
    :param output_dir: 输出目录
    """
    config = prepare_config(COMMAND, DEFAULTS, config)
    rows, summary = collect_sensitivity(config)
    path = write_output(config, rows, summary, COLUMNS, output_dir)
    logger.info("[Sensitivity] 结果已导出到 %s", path)
    return path


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    main()
