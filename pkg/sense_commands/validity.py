import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from qec_sense import closedform
from sense_commands.common import Rows, Summary, make_params, prepare_config, write_output

logger = logging.getLogger(__name__)

COMMAND = "validity"
COLUMNS = ("gamma_err", "gamma_qec", "margin", "upper_margin", "valid")
DEFAULTS = {
    "gamma_err_min": 0.0,
    "gamma_err_max": 0.5,
    "gamma_err_points": 51,
    "gamma_qec_min": 0.1,
    "gamma_qec_max": 20.0,
    "gamma_qec_points": 200,
}


def _sign_flips(margins: np.ndarray) -> int:
    signs = np.sign(margins)
    signs = signs[signs != 0]
    return int(np.count_nonzero(np.diff(signs)))


def collect_validity(config: Dict[str, Any]) -> Tuple[Rows, Summary]:
    """
    (gamma_err, gamma_qec) 网格上展开式收敛条件的取值
    :param config: 已解析的运行配置
    :return: (网格点行, 每个 gamma_err 切片的边界与符号变化次数)
    """
    gamma_errs = np.linspace(float(config["gamma_err_min"]), float(config["gamma_err_max"]),
                             int(config["gamma_err_points"]))
    gamma_qecs = np.linspace(float(config["gamma_qec_min"]), float(config["gamma_qec_max"]),
                             int(config["gamma_qec_points"]))
    rows: Rows = []
    boundaries = []
    for ge in gamma_errs:
        margins = []
        for gq in gamma_qecs:
            check = closedform.validity_check(make_params(config, gamma_err=float(ge), gamma_qec=float(gq)))
            margins.append(check.margin)
            rows.append({"gamma_err": float(ge), "gamma_qec": float(gq), "margin": check.margin,
                         "upper_margin": check.upper_margin, "valid": check.valid})
        boundaries.append({
            "gamma_err": float(ge),
            "boundary": closedform.validity_boundary(float(ge), gamma_qecs),
            "sign_flips": _sign_flips(np.asarray(margins)),
        })
    summary = {
        "boundaries": boundaries,
        "valid_fraction": sum(r["valid"] for r in rows) / len(rows),
    }
    logger.info("[Validity] %d 个网格点，有效比例 %.3f", len(rows), summary["valid_fraction"])
    return rows, summary


def main(config: Optional[Dict[str, Any]] = None, output_dir: Optional[str] = None) -> str:
    """
    计算有效区域并写入结果文件
    :param config: 显式参数（可含 recipe / config_path）
    :param output_dir: 输出目录
    """
    config = prepare_config(COMMAND, DEFAULTS, config)
    rows, summary = collect_validity(config)
    path = write_output(config, rows, summary, COLUMNS, output_dir)
    logger.info("[Validity] 结果已导出到 %s", path)
    return path


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    main()
