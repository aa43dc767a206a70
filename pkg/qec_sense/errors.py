"""qec_sense 异常体系"""


class QecSenseError(Exception):
    """所有项目内异常的基类"""


class ParameterError(QecSenseError, ValueError):
    """物理参数或数值参数非法"""


class DimensionError(QecSenseError, ValueError):
    """矩阵维度不匹配，或 Pauli 标签非法"""


class InvariantError(QecSenseError):
    """构造出的对象违反 Hermitian / 迹 / 保迹等不变量"""


class IntegrationError(QecSenseError):
    """ODE 积分失败，tau 为失败时刻"""

    def __init__(self, message: str, tau: float):
        super().__init__(f"{message} (tau={tau:.6g})")
        self.tau = tau


class CommutationError(QecSenseError):
    """二项式展开的对易前提不成立"""

    def __init__(self, message: str, norm: float):
        super().__init__(f"{message} (commutator norm={norm:.3e})")
        self.norm = norm


class InsufficientDataError(QecSenseError, ValueError):
    """数据量不足：记录为空、tau 点过少、重复次数不足、区间退化"""


class GridError(QecSenseError, ValueError):
    """时间网格不均匀或采样点过少"""


class ConfigError(QecSenseError):
    """未知的配方 / 命令 / 模型，或配置文件无法读取"""
