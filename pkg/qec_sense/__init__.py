"""误差校正量子传感中的偏差：模拟、解析解、离散信道模型与参数估计"""

__version__ = "0.3.0"
