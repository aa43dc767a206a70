import logging
from typing import Any, Dict, Optional, Tuple

from config import settings
from qec_sense import inference
from sense_commands.common import Rows, Summary, make_params, prepare_config, write_output

logger = logging.getLogger(__name__)

COMMAND = "fit"
COLUMNS = ("tau", "model", "omega_mean", "gamma_mean", "var_omega", "var_gamma",
           "var_total", "crb_rhs", "tolerance", "violated", "bias_stat")
DEFAULTS = {
    "gamma_err": 0.2,
    "gamma_qec": 16.6,
    "taus": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0],
    "fit_models": ["conjectured", "proposed_full"],
    "generating_model": "proposed_full",
    "order": 1,
    "profile": None,
}


def _summarize(rows: Rows, models) -> Summary:
    summary: Summary = {}
    for name in models:
        mine = [r for r in rows if r["model"] == name]
        summary[f"{name}_violation_fraction"] = sum(r["violated"] for r in mine) / max(len(mine), 1)
    if len(models) == 2:
        first, second = models
        paired = zip([r for r in rows if r["model"] == first], [r for r in rows if r["model"] == second])
        wins = [b["bias_stat"] < a["bias_stat"] for a, b in paired]
        summary[f"{second}_lower_bias_fraction"] = sum(wins) / max(len(wins), 1)
    return summary


def collect_fit(config: Dict[str, Any]) -> Tuple[Rows, Summary]:
    """
    每个 tau 点重复 Monte Carlo 采样与两种模型的拟合，检查 Cramér-Rao 下界与偏差
    :param config: 已解析的运行配置
    :return: (每个 tau 点每个模型一行, 汇总)
    """
    profile = settings.get_inference_config(config.get("profile"))
    for key, value in profile.items():
        config.setdefault(key, value)
    p = make_params(config)
    models = list(config["fit_models"])

    rows = inference.run_crb_experiment(
        p, [float(t) for t in config["taus"]],
        n_shots=int(config["n_shots"]),
        repetitions=int(config["repetitions"]),
        window=int(config["window"]),
        seed=int(config["seed"]),
        fit_models=models,
        generating=config["generating_model"],
        order=int(config["order"]),
        omega_scale=config["omega_scale"],
        gamma_scale=config["gamma_scale"],
        grid_omega=int(config["grid_omega"]),
        grid_gamma=int(config["grid_gamma"]),
        workers=config.get("workers"),
    )
    rows = [{c: r[c] for c in COLUMNS} for r in rows]
    summary = _summarize(rows, models)
    logger.info("[Fit] %s", summary)
    return rows, summary


def main(config: Optional[Dict[str, Any]] = None, output_dir: Optional[str] = None) -> str:
    """
    运行 CRB 实验并写入结果文件
    :param config: 显式参数（可含 recipe / config_path）
    :param output_dir: 输出目录
    """
    config = prepare_config(COMMAND, DEFAULTS, config)
    rows, summary = collect_fit(config)
    path = write_output(config, rows, summary, COLUMNS, output_dir)
    logger.info("[Fit] 结果已导出到 %s", path)
    return path


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    main()
