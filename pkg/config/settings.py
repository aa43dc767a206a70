# settings.py
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

import yaml

from qec_sense.errors import ConfigError

CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))
RECIPES_PATH = os.path.join(CONFIG_DIR, "figure_recipes.yaml")

PROJECT_SEED = 20240917


@dataclass(frozen=True)
class Tolerances:
    """ 数值容差，所有模块共用同一份 """
    construction: float = 1e-12   # Hermitian / 迹 / 保迹
    psd: float = 1e-10            # 最小本征值下限
    trace_integration: float = 1e-8
    commutator: float = 1e-10
    clip_soft: float = 1e-9       # 超出 [-1, 1] 时截断并告警
    clip_hard: float = 1e-3       # 超出则报错
    trace_bound: float = 1e-6     # ExpectationTrace 数值范围


TOLERANCES = Tolerances()

# 连续演化（Lindblad 积分）默认配置
SIMULATION_DEFAULTS = {
    "method": "DOP853",
    "rtol": 1e-10,
    "atol": 1e-12,
    "t_max": 20.0,
    "n_points": 2000,
}

# 频谱分析默认配置
SPECTRAL_DEFAULTS = {
    "zero_pad_factor": 8,
    "window": "rect",
    "target_uncertainty": 0.002,
    "max_samples": 10 ** 6,
    "min_samples": 64,
}

# 统计推断配置，按 profile 区分；*_scale 为拟合括号相对种子值的倍数
INFERENCE_PROFILES = {
    "desk": {
        "n_shots": 10 ** 4,
        "repetitions": 100,
        "grid_omega": 61,
        "grid_gamma": 41,
        "window": 8,
        "omega_scale": [0.5, 1.5],
        "gamma_scale": [0.0, 5.0],
    },
    "full": {
        "n_shots": 10 ** 4,
        "repetitions": 200,
        "grid_omega": 200,
        "grid_gamma": 200,
        "window": 10,
        "omega_scale": [0.5, 1.5],
        "gamma_scale": [0.0, 5.0],
    },
}


def get_profile_name() -> str:
    """ 根据环境变量 QEC_SENSE_PROFILE 选择推断配置，默认 full """
    return os.getenv("QEC_SENSE_PROFILE", "full")


def get_inference_config(profile: Optional[str] = None) -> Dict[str, Any]:
    """ 根据 profile 获取推断配置 """
    profile = profile or get_profile_name()
    if profile not in INFERENCE_PROFILES:
        raise ConfigError(f"unknown inference profile: {profile!r}")
    return dict(INFERENCE_PROFILES[profile])


def get_default_seed() -> int:
    """ 读取 QEC_SENSE_SEED，未设置时使用项目默认种子 """
    raw = os.getenv("QEC_SENSE_SEED")
    if raw is None or raw.strip() == "":
        return PROJECT_SEED
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"QEC_SENSE_SEED must be an integer, got {raw!r}") from e


def resolve_workers(workers: Optional[int] = None) -> int:
    """ 进程数：None 或 0 取 os.cpu_count()，1 为单进程 """
    if workers is not None and workers < 0:
        raise ConfigError(f"workers must be >= 0, got {workers}")
    return workers or os.cpu_count() or 1


def load_yaml(path: str) -> Dict[str, Any]:
    """ 读取 YAML 配置文件 """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return data


def load_recipes(path: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    """ 读取所有图表配方，返回 {name: recipe} """
    data = load_yaml(path or RECIPES_PATH)
    recipes = {}
    for item in data.get("recipes", []):
        recipes[item["name"]] = item
    return recipes


def get_recipe(name: str, path: Optional[str] = None) -> Dict[str, Any]:
    """ 根据名称获取单个配方 """
    recipes = load_recipes(path)
    if name not in recipes:
        raise ConfigError(f"unknown recipe {name!r}; known: {', '.join(sorted(recipes))}")
    return recipes[name]


if __name__ == "__main__":
    print(f"Current Profile: {get_profile_name()}")
    print("Inference Config:", get_inference_config())
    print("Seed:", get_default_seed())
    print("Recipes:", sorted(load_recipes()))
