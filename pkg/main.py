import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from config import settings
from qec_sense.errors import (
    ConfigError,
    DimensionError,
    GridError,
    InsufficientDataError,
    ParameterError,
    QecSenseError,
)
from sense_commands.common import COMMAND_MODULES, OUTPUT_DIR, run_command

logger = logging.getLogger(__name__)

# 参数类错误返回 2，其余运行期错误返回 1
USAGE_ERRORS = (ParameterError, ConfigError, InsufficientDataError, GridError, DimensionError)


def _float_list(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", dest="config_path", help="YAML 配置文件")
    common.add_argument("--recipe", help="从图表配方读取参数")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="输出目录，或以 .csv/.json 结尾的文件路径")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", type=int, help="进程数，缺省为 CPU 数，1 表示单进程")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("--list-recipes", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="qec-sense", parents=[common],
                                     description="纠错量子传感中的频率偏差：模拟、解析解与统计推断")
    sub = parser.add_subparsers(dest="command")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, argument_default=argparse.SUPPRESS)
        return p

    def rates(p: argparse.ArgumentParser):
        p.add_argument("--gamma-err", dest="gamma_err", type=float)
        p.add_argument("--gamma-qec", dest="gamma_qec", type=float)

    p = add("ramsey", "Ramsey 曲线：理想 / 未纠错 / 纠错 / 朴素模型")
    rates(p)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--n-points", dest="n_points", type=int)

    p = add("spectrum", "各模型曲线的频谱与峰位")
    rates(p)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--zero-pad-factor", dest="zero_pad_factor", type=int)
    p.add_argument("--window", choices=("rect", "hann"))
    p.add_argument("--corrected-source", dest="corrected_source", choices=("analytic", "simulated"))

    p = add("sensitivity", "最小可探测信号曲线与最优感测时间")
    rates(p)
    p.add_argument("--n-shots", dest="n_shots", type=int)
    p.add_argument("--omega-est", dest="omega_est", type=float, help="估计频率，缺省为 omega")
    p.add_argument("--gamma-est", dest="gamma_est", type=float, help="估计错误率，缺省为 gamma_err")
    p.add_argument("--order", type=int, choices=(1, 2, 3))
    p.add_argument("--tau-max", dest="tau_max", type=float)
    p.add_argument("--n-points", dest="n_points", type=int)

    p = add("fit", "Monte Carlo 拟合与 Cramér-Rao 下界检查")
    rates(p)
    p.add_argument("--n-shots", dest="n_shots", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--window", type=int, help="每个 tau 点的采样时刻数")
    p.add_argument("--taus", type=_float_list)
    p.add_argument("--profile", choices=sorted(settings.INFERENCE_PROFILES))

    p = add("validity", "展开式有效区域网格")
    p.add_argument("--gamma-err-max", dest="gamma_err_max", type=float)
    p.add_argument("--gamma-err-points", dest="gamma_err_points", type=int)
    p.add_argument("--gamma-qec-max", dest="gamma_qec_max", type=float)
    p.add_argument("--gamma-qec-points", dest="gamma_qec_points", type=int)

    p = add("compare", "解析式、模拟与近似之间的误差曲线")
    p.add_argument("--gamma-err", dest="gamma_err", type=float)
    p.add_argument("--gamma-qec-values", dest="gamma_qec_values", type=_float_list)
    p.add_argument("--metrics", type=_str_list)
    p.add_argument("--models", type=_str_list)

    p = add("discrete", "离散纠错周期的 Ramsey 曲线")
    p.add_argument("--noise-model", dest="noise_model", choices=("optimal", "realistic"))
    p.add_argument("--p", type=float)
    p.add_argument("--delta-tau", dest="delta_tau", type=float)
    p.add_argument("--c-max", dest="c_max", type=int)
    p.add_argument("--no-verify", dest="verify_binomial", action="store_false", help="跳过二项式展开的对易检查")

    add("recipes", "运行全部图表配方")
    return parser


def configure_logging(args: Dict[str, Any]) -> None:
    level = logging.INFO
    if args.get("verbose"):
        level = logging.DEBUG
    elif args.get("quiet"):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s [%(levelname)s] %(message)s")


def split_output(out: Optional[str]) -> Dict[str, Any]:
    """--out 为文件路径时拆成目录、名称与格式"""
    if not out:
        return {"output_dir": OUTPUT_DIR}
    stem, ext = os.path.splitext(out)
    if ext in (".csv", ".json"):
        return {"output_dir": os.path.dirname(os.path.abspath(out)),
                "name": os.path.basename(stem), "format": ext[1:]}
    return {"output_dir": out}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    configure_logging(args)

    if args.pop("list_recipes", False):
        for name, recipe in settings.load_recipes().items():
            print(f"{name}\t{recipe.get('command')}")
        return 0

    command = args.pop("command", None)
    if not command:
        parser.print_help(sys.stderr)
        return 2
    for key in ("verbose", "quiet"):
        args.pop(key, None)
    out = split_output(args.pop("out", None))
    output_dir = out.pop("output_dir")
    args.update(out)

    try:
        if command == "recipes":
            import run_figures
            failures = run_figures.run_all_recipes(output_dir, workers=args.get("workers"))
            return 1 if failures else 0
        if command not in COMMAND_MODULES:
            raise ConfigError(f"unknown command {command!r}")
        path = run_command(command, args, output_dir)
        print(path)
        return 0
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except QecSenseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception("[CLI] 命令 %s 执行失败", command)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
