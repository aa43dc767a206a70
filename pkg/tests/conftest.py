import numpy as np
import pytest

from qec_sense.lindblad import SensorParams


@pytest.fixture
def example_params() -> SensorParams:
    """Ramsey 曲线示例参数：gamma_err = 0.1, gamma_qec = 5"""
    return SensorParams(omega=1.0, gamma_err=0.1, gamma_qec=5.0)


@pytest.fixture
def sensing_params() -> SensorParams:
    """灵敏度与拟合实验参数：gamma_err = 0.2, gamma_qec = 16.6"""
    return SensorParams(omega=1.0, gamma_err=0.2, gamma_qec=16.6)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    # 环境变量会改变默认种子与推断配置
    monkeypatch.delenv("QEC_SENSE_SEED", raising=False)
    monkeypatch.delenv("QEC_SENSE_PROFILE", raising=False)
