import logging
from typing import Any, Dict, Optional, Tuple

from qec_sense import closedform, lindblad
from sense_commands.common import Rows, Summary, make_params, prepare_config, write_output

logger = logging.getLogger(__name__)

COMMAND = "ramsey"
COLUMNS = ("tau", "ideal", "uncorrected", "corrected_sim", "corrected_analytic", "conjectured")
DEFAULTS = {
    "gamma_err": 0.1,
    "gamma_qec": 5.0,
    "t_max": 20.0,
    "n_points": 2000,
}


def collect_ramsey(config: Dict[str, Any]) -> Tuple[Rows, Summary]:
    """
    理想、未纠错、纠错（数值积分与解析解）与朴素模型的 <sigma_x^L>(tau)
    :param config: 已解析的运行配置
    :return: (逐时刻的行, 汇总)
    """
    p = make_params(config)
    taus = lindblad.time_grid(float(config["t_max"]), int(config["n_points"]))

    simulated = lindblad.ramsey_trace(p, taus)
    analytic = closedform.analytic_trace(p, taus, "full")
    uncorrected = closedform.expectation_uncorrected(p.replace(gamma_qec=0.0), taus)
    columns = {
        "tau": taus,
        "ideal": closedform.expectation_ideal(p.omega, taus),
        "uncorrected": uncorrected,
        "corrected_sim": simulated.values,
        "corrected_analytic": analytic.values,
        "conjectured": closedform.expectation_conjectured(p, taus),
    }
    rows = [{name: float(columns[name][i]) for name in COLUMNS} for i in range(len(taus))]

    summary = {
        "n_points": len(taus),
        "rmse_sim_analytic": simulated.rmse(analytic),
        "max_abs_sim_analytic": simulated.max_abs(analytic),
        "validity_margin": closedform.validity_check(p).margin,
    }
    logger.info("[Ramsey] gamma_err=%s gamma_qec=%s | RMSE(sim, analytic)=%.3e",
                p.gamma_err, p.gamma_qec, summary["rmse_sim_analytic"])
    return rows, summary


def main(config: Optional[Dict[str, Any]] = None, output_dir: Optional[str] = None) -> str:
    """
    计算 Ramsey 曲线并写入结果文件
    :param config: 显式参数（可含 recipe / config_path）
    :param output_dir: 输出目录
    """
    config = prepare_config(COMMAND, DEFAULTS, config)
    rows, summary = collect_ramsey(config)
    path = write_output(config, rows, summary, COLUMNS, output_dir)
    logger.info("[Ramsey] 结果已导出到 %s", path)
    return path


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    main()
