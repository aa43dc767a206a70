"""
命令模块共用的配置解析、参数构造、输出写入与进程池封装。

配置优先级：显式参数 > --config 文件 > 配方 > 模块默认值。
"""
import importlib
import logging
import os
from multiprocessing import Pool
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

from config import settings
from config.export_results import FORMATS, build_metadata, export_results
from qec_sense.errors import ConfigError
from qec_sense.lindblad import SensorParams

logger = logging.getLogger(__name__)

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUTPUT_DIR = os.path.join(PROJECT_ROOT, "results")

# 命令名 -> 模块
COMMAND_MODULES = {
    "ramsey": "sense_commands.ramsey",
    "spectrum": "sense_commands.spectrum",
    "sensitivity": "sense_commands.sensitivity",
    "fit": "sense_commands.fit",
    "validity": "sense_commands.validity",
    "compare": "sense_commands.compare",
    "discrete": "sense_commands.discrete_trace",
}

# 所有命令共有的字段
BASE_DEFAULTS = {
    "format": "csv",
    "workers": None,
    "seed": None,
}

Rows = List[Dict[str, Any]]
Summary = Dict[str, Any]


def get_command_module(command: str):
    """ 根据命令名导入对应模块 """
    if command not in COMMAND_MODULES:
        raise ConfigError(f"unknown command {command!r}; known: {', '.join(COMMAND_MODULES)}")
    return importlib.import_module(COMMAND_MODULES[command])


def resolve_config(command: str, defaults: Dict[str, Any], recipe: Optional[str] = None,
                   config_path: Optional[str] = None,
                   overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """ 合并默认值、配方、配置文件与显式参数，得到完整运行配置 """
    config: Dict[str, Any] = dict(BASE_DEFAULTS)
    config.update(defaults)
    if recipe:
        item = settings.get_recipe(recipe)
        if item.get("command", command) != command:
            raise ConfigError(f"recipe {recipe!r} belongs to command {item.get('command')!r}, not {command!r}")
        config.update({k: v for k, v in item.items() if k != "command"})
    if config_path:
        config.update(settings.load_yaml(config_path))
    if overrides:
        config.update({k: v for k, v in overrides.items() if v is not None})
    config["command"] = command
    config.setdefault("name", command)
    if config["seed"] is None:
        config["seed"] = settings.get_default_seed()
    if config["format"] not in FORMATS:
        raise ConfigError(f"unknown output format {config['format']!r}; expected one of {FORMATS}")
    return config


def prepare_config(command: str, defaults: Dict[str, Any],
                   overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """ overrides 中可带 recipe / config_path 两个特殊键 """
    overrides = dict(overrides or {})
    recipe = overrides.pop("recipe", None)
    config_path = overrides.pop("config_path", None)
    return resolve_config(command, defaults, recipe, config_path, overrides)


def make_params(config: Dict[str, Any], **changes) -> SensorParams:
    """ omega 固定为 1，速率以 omega 为单位 """
    values = {
        "n": 3,
        "omega": 1.0,
        "gamma_err": float(config.get("gamma_err", 0.0)),
        "gamma_qec": float(config.get("gamma_qec", 0.0)),
    }
    values.update(changes)
    return SensorParams(**values)


def write_output(config: Dict[str, Any], rows: Rows, summary: Summary, columns: Sequence[str],
                 output_dir: Optional[str] = None) -> str:
    """ 结果与完整配置、种子、列名、汇总一起写入 output_dir/<name>.<format> """
    output_dir = output_dir or OUTPUT_DIR
    metadata = build_metadata(config, config.get("seed"), columns, summary)
    return export_results(rows, output_dir, config["name"], config["format"], metadata)


def run_pool(func: Callable, items: Iterable, workers: Optional[int] = None) -> List[Any]:
    """ 按输入顺序返回结果；workers 缺省取 CPU 数，为 1 时在当前进程内执行 """
    items = list(items)
    workers = settings.resolve_workers(workers)
    if workers == 1 or len(items) < 2:
        return [func(item) for item in items]
    with Pool(processes=min(workers, len(items))) as pool:
        return list(pool.imap(func, items))


def run_command(command: str, config: Dict[str, Any], output_dir: Optional[str] = None) -> str:
    """ 调用命令模块的 main()，返回输出文件路径 """
    module = get_command_module(command)
    return module.main(config, output_dir)