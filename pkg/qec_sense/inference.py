"""
统计推断层：
  - Monte Carlo 投影测量采样（±1 结果）
  - (omega, gamma) 两参数最小二乘拟合：粗网格扫描 + 局部精修
  - 经典 Fisher 信息与 Cramér-Rao 下界检查、偏差统计
  - 最小可探测信号 |delta omega|(tau) 与最优感测时间

信号模型统一为 f(omega, gamma; tau) = <sigma_x^L>，gamma 即 gamma_err，
gamma_qec 视为已知常数。
"""
import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from config.settings import TOLERANCES, resolve_workers
from qec_sense import closedform
from qec_sense.closedform import EffectiveParams, effective_params, effective_params_derivatives
from qec_sense.errors import ConfigError, InsufficientDataError, ParameterError
from qec_sense.lindblad import SensorParams

logger = logging.getLogger(__name__)

MIN_REPETITIONS = 100
PARAMETERS = ("omega", "gamma")


# ------------------------------
# 信号模型
# ------------------------------
class SignalModel:
    """<sigma_x^L>(tau) 关于 (omega, gamma) 的参数化模型"""

    name = "base"
    analytic_gradient = False

    def __init__(self, gamma_qec: float = 0.0, n: int = 3):
        self.gamma_qec = float(gamma_qec)
        self.n = n

    def params(self, omega: float, gamma: float) -> SensorParams:
        return SensorParams(n=self.n, omega=float(omega), gamma_err=float(gamma), gamma_qec=self.gamma_qec)

    def value(self, omega: float, gamma: float, taus) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, omega: float, gamma: float, taus) -> Tuple[np.ndarray, np.ndarray]:
        """中心差分，步长 h = 1e-6 omega；gamma < h 时对 gamma 改用前向差分"""
        taus = np.asarray(taus, dtype=float)
        h = 1e-6 * omega
        d_omega = (self.value(omega + h, gamma, taus) - self.value(omega - h, gamma, taus)) / (2.0 * h)
        if gamma >= h:
            d_gamma = (self.value(omega, gamma + h, taus) - self.value(omega, gamma - h, taus)) / (2.0 * h)
        else:
            d_gamma = (self.value(omega, gamma + h, taus) - self.value(omega, gamma, taus)) / h
        return d_omega, d_gamma

    def grid_values(self, omegas: np.ndarray, gammas: np.ndarray, taus: np.ndarray) -> np.ndarray:
        """返回形状 (len(omegas), len(gammas), len(taus)) 的模型值"""
        out = np.empty((len(omegas), len(gammas), len(taus)))
        for i, w in enumerate(omegas):
            for j, g in enumerate(gammas):
                out[i, j] = self.value(w, g, taus)
        return out

    def at(self, omega: float, gamma: float) -> Callable[[float], float]:
        """固定参数后的期望函数 tau -> <sigma_x^L>，供 sample_shots 使用"""
        return _BoundModel(self, float(omega), float(gamma))

    def __repr__(self):
        return f"{type(self).__name__}(gamma_qec={self.gamma_qec})"


class _BoundModel:
    def __init__(self, model: SignalModel, omega: float, gamma: float):
        self.model, self.omega, self.gamma = model, omega, gamma

    def __call__(self, tau):
        return self.model.value(self.omega, self.gamma, tau)


class IdealModel(SignalModel):
    name = "ideal"
    analytic_gradient = True

    def value(self, omega, gamma, taus):
        return np.cos(3.0 * omega * np.asarray(taus, dtype=float))

    def gradient(self, omega, gamma, taus):
        taus = np.asarray(taus, dtype=float)
        return -3.0 * taus * np.sin(3.0 * omega * taus), np.zeros_like(taus)


class ConjecturedModel(SignalModel):
    """朴素模型 e^{-3 gamma tau} cos(3 omega tau)"""

    name = "conjectured"
    analytic_gradient = True

    def value(self, omega, gamma, taus):
        taus = np.asarray(taus, dtype=float)
        return np.exp(-3.0 * gamma * taus) * np.cos(3.0 * omega * taus)

    def gradient(self, omega, gamma, taus):
        taus = np.asarray(taus, dtype=float)
        envelope = np.exp(-3.0 * gamma * taus)
        return (-3.0 * taus * envelope * np.sin(3.0 * omega * taus),
                -3.0 * taus * envelope * np.cos(3.0 * omega * taus))

    def grid_values(self, omegas, gammas, taus):
        w = np.asarray(omegas, dtype=float)[:, None, None]
        g = np.asarray(gammas, dtype=float)[None, :, None]
        t = np.asarray(taus, dtype=float)[None, None, :]
        return np.exp(-3.0 * g * t) * np.cos(3.0 * w * t)


class ProposedFullModel(SignalModel):
    """精确解 2 Re q(tau)，梯度经由 D, lambda+-, C+- 的链式法则"""

    name = "proposed_full"
    analytic_gradient = True

    def value(self, omega, gamma, taus):
        return np.asarray(closedform.expectation_full(self.params(omega, gamma), np.asarray(taus, dtype=float)))

    def gradient(self, omega, gamma, taus):
        d_omega, d_gamma = closedform.expectation_full_gradient(
            self.params(omega, gamma), np.asarray(taus, dtype=float))
        return np.asarray(d_omega), np.asarray(d_gamma)


class ProposedReducedModel(SignalModel):
    """有效参数模型 e^{-3 gamma_eff tau} cos(3 omega_eff tau)，有效参数按 order 截断"""

    name = "proposed_reduced"
    analytic_gradient = True

    def __init__(self, gamma_qec: float = 0.0, n: int = 3, order: int = 1):
        super().__init__(gamma_qec, n)
        if order not in (1, 2, 3):
            raise ParameterError(f"effective-parameter order must be 1, 2 or 3, got {order}")
        self.order = order

    def value(self, omega, gamma, taus):
        ep = effective_params(self.params(omega, gamma), self.order)
        return np.asarray(closedform.expectation_reduced(ep, np.asarray(taus, dtype=float)))

    def gradient(self, omega, gamma, taus):
        taus = np.asarray(taus, dtype=float)
        p = self.params(omega, gamma)
        ep = effective_params(p, self.order)
        d = effective_params_derivatives(p, self.order)
        envelope = -3.0 * taus * np.exp(-3.0 * ep.gamma_eff * taus)
        cos_t = np.cos(3.0 * ep.omega_eff * taus)
        sin_t = np.sin(3.0 * ep.omega_eff * taus)
        d_omega = envelope * (d.dgamma_eff_domega * cos_t + d.domega_eff_domega * sin_t)
        d_gamma = envelope * (d.dgamma_eff_dgamma_err * cos_t + d.domega_eff_dgamma_err * sin_t)
        return d_omega, d_gamma

    def __repr__(self):
        return f"{type(self).__name__}(gamma_qec={self.gamma_qec}, order={self.order})"


MODELS = {
    "ideal": IdealModel,
    "conjectured": ConjecturedModel,
    "proposed_full": ProposedFullModel,
    "proposed_reduced": ProposedReducedModel,
}


def get_model(name: str, gamma_qec: float = 0.0, order: int = 1) -> SignalModel:
    """ 根据名称构造信号模型 """
    if name not in MODELS:
        raise ConfigError(f"unknown signal model {name!r}; known: {', '.join(MODELS)}")
    if name == "proposed_reduced":
        return ProposedReducedModel(gamma_qec, order=order)
    return MODELS[name](gamma_qec)


# ------------------------------
# 采样
# ------------------------------
@dataclass(frozen=True, eq=False)
class ShotRecord:
    """单个 tau 点的 N 次 ±1 测量结果"""
    tau: float
    outcomes: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.outcomes) == 0:
            raise InsufficientDataError("a shot record needs at least one outcome")
        if not np.all(np.abs(self.outcomes) == 1):
            raise ParameterError("shot outcomes must be +1 or -1")

    @property
    def n_shots(self) -> int:
        return len(self.outcomes)

    @property
    def mean(self) -> float:
        return float(np.mean(self.outcomes))


def spawn_seeds(seed: int, n: int) -> List[int]:
    """由 (seed, 任务序号) 派生互相独立的 64 位整数种子"""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(child.generate_state(1, np.uint64)[0]) for child in children]


def _clip_expectation(value: float, tau: float) -> float:
    excess = abs(value) - 1.0
    if excess > TOLERANCES.clip_hard:
        raise ParameterError(f"model value {value:.6g} at tau={tau:.6g} lies outside [-1, 1]")
    if excess > TOLERANCES.clip_soft:
        logger.warning("[Sample] model value %.12g at tau=%.6g clipped to [-1, 1]", value, tau)
    return float(np.clip(value, -1.0, 1.0))


def sample_shots(model: Callable[[float], float], tau: float, n_shots: int, seed: int) -> ShotRecord:
    """ 以 P(+1) = (f + 1) / 2 抽取 n_shots 次测量结果，Philox 生成器，给定种子完全确定 """
    if n_shots < 1:
        raise ParameterError(f"n_shots must be positive, got {n_shots}")
    value = _clip_expectation(float(model(tau)), tau)
    rng = np.random.Generator(np.random.Philox(seed))
    outcomes = np.where(rng.random(n_shots) < 0.5 * (value + 1.0), 1, -1).astype(np.int8)
    return ShotRecord(tau=float(tau), outcomes=outcomes, seed=int(seed))


# ------------------------------
# 最小二乘拟合
# ------------------------------
@dataclass(frozen=True)
class FitResult:
    omega_hat: float
    gamma_hat: float
    model: str
    residual_sum: float
    variance_omega: float = 0.0
    variance_gamma: float = 0.0
    bias_stat: float = float("nan")


# 默认括号为种子值的倍数
OMEGA_SCALE = (0.5, 1.5)
GAMMA_SCALE = (0.0, 5.0)


def _check_bracket(bracket: Sequence[float], label: str) -> Tuple[float, float]:
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise InsufficientDataError(f"degenerate {label} bracket [{lo}, {hi}]")
    return lo, hi


def seed_bracket(seed_value: float, scale: Sequence[float], fallback: float = 1.0) -> Tuple[float, float]:
    """scale * seed_value；seed_value 为 0 时以 fallback 为参考"""
    ref = float(seed_value) if seed_value > 0 else float(fallback)
    return ref * float(scale[0]), ref * float(scale[1])


def fit_means(taus: Sequence[float], means: Sequence[float], model: SignalModel,
              omega_seed: float = 1.0, gamma_seed: float = 1.0,
              omega_bracket: Optional[Sequence[float]] = None,
              gamma_bracket: Optional[Sequence[float]] = None,
              grid_omega: int = 200, grid_gamma: int = 200) -> FitResult:
    """
    最小化 sum_tau [X_tau - f(tau; omega, gamma)]^2。
    未给出括号时取 OMEGA_SCALE * omega_seed 与 GAMMA_SCALE * gamma_seed（gamma_seed 为 0 时参考 omega_seed）。
    目标函数在 omega 方向振荡，先做全网格扫描再从最优格点出发用 least_squares 精修，
    取两者中残差更小者。
    """
    taus = np.asarray(taus, dtype=float)
    means = np.asarray(means, dtype=float)
    if taus.size == 0:
        raise InsufficientDataError("no shot records to fit")
    if np.unique(taus).size < 2:
        raise InsufficientDataError("least-squares fit needs at least 2 distinct tau values")
    if omega_bracket is None:
        omega_bracket = seed_bracket(omega_seed, OMEGA_SCALE)
    if gamma_bracket is None:
        gamma_bracket = seed_bracket(gamma_seed, GAMMA_SCALE, fallback=omega_seed)
    w_lo, w_hi = _check_bracket(omega_bracket, "omega")
    g_lo, g_hi = _check_bracket(gamma_bracket, "gamma")
    if w_lo <= 0 or g_lo < 0:
        raise ParameterError("omega bracket must be positive and gamma bracket non-negative")

    omegas = np.linspace(w_lo, w_hi, grid_omega)
    gammas = np.linspace(g_lo, g_hi, grid_gamma)
    landscape = np.sum((model.grid_values(omegas, gammas, taus) - means) ** 2, axis=-1)
    i, j = np.unravel_index(np.argmin(landscape), landscape.shape)
    best = np.array([omegas[i], gammas[j]])
    best_cost = float(landscape[i, j])

    def residuals(x):
        return means - model.value(x[0], x[1], taus)

    def jacobian(x):
        d_omega, d_gamma = model.gradient(x[0], x[1], taus)
        return -np.column_stack([d_omega, d_gamma])

    try:
        refined = least_squares(residuals, best, jac=jacobian, bounds=([w_lo, g_lo], [w_hi, g_hi]),
                                method="trf", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
        refined_cost = float(np.sum(residuals(refined.x) ** 2))
        if refined_cost <= best_cost:
            best, best_cost = refined.x, refined_cost
    except (ValueError, ArithmeticError) as e:
        logger.warning("[Fit] local refinement failed for %s, keeping grid optimum: %s", model.name, e)

    return FitResult(omega_hat=float(best[0]), gamma_hat=float(best[1]), model=model.name,
                     residual_sum=float(np.sum(residuals(best) ** 2)))


def least_squares_fit(records: Sequence[ShotRecord], model: SignalModel,
                      omega_seed: float = 1.0, gamma_seed: float = 1.0,
                      omega_bracket: Optional[Sequence[float]] = None,
                      gamma_bracket: Optional[Sequence[float]] = None,
                      grid_omega: int = 200, grid_gamma: int = 200) -> FitResult:
    """ 对 ShotRecord 列表的经验均值做两参数拟合，gamma_qec 由 model 固定 """
    if not records:
        raise InsufficientDataError("no shot records to fit")
    taus = [r.tau for r in records]
    means = [r.mean for r in records]
    return fit_means(taus, means, model, omega_seed, gamma_seed, omega_bracket, gamma_bracket,
                     grid_omega, grid_gamma)


# ------------------------------
# Fisher 信息与 Cramér-Rao 下界
# ------------------------------
def _param_index(param: str) -> int:
    if param not in PARAMETERS:
        raise ParameterError(f"parameter must be one of {PARAMETERS}, got {param!r}")
    return PARAMETERS.index(param)


def fisher_information(model: SignalModel, param: str, omega: float, gamma: float, taus):
    """
    单次二值测量的 Fisher 信息 I = (df/dlambda)^2 / ((1 + f)(1 - f))。
    |f| = 1 处返回 +inf。
    """
    scalar = np.ndim(taus) == 0
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    f = model.value(omega, gamma, taus)
    derivative = model.gradient(omega, gamma, taus)[_param_index(param)]
    denom = (1.0 + f) * (1.0 - f)
    with np.errstate(divide="ignore", invalid="ignore"):
        info = np.where(denom > 0, derivative ** 2 / np.where(denom > 0, denom, 1.0), math.inf)
    return float(info[0]) if scalar else info


def fisher_matrix(model: SignalModel, omega: float, gamma: float, taus, n_shots: int) -> np.ndarray:
    """每个采样时刻 N 次测量的 2x2 Fisher 矩阵之和"""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    f = model.value(omega, gamma, taus)
    grad = np.vstack(model.gradient(omega, gamma, taus))
    denom = (1.0 + f) * (1.0 - f)
    if np.any(denom <= 0):
        return np.full((2, 2), math.inf)
    return n_shots * (grad / denom) @ grad.T


def experiment_times(tau: float, window: int) -> np.ndarray:
    """名义时间 tau 的一次实验所采样的时刻 tau * j / window, j = 1..window"""
    if not tau > 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    return tau * np.arange(1, window + 1) / window


@dataclass(frozen=True)
class BoundReport:
    tau: float
    fisher_omega: float
    fisher_gamma: float
    crb_rhs: float
    total_variance: float
    violated: bool
    tolerance: float = 0.0
    repetitions: int = 0


def _estimates(fits, attr: str) -> np.ndarray:
    return np.array([getattr(f, attr) for f in fits], dtype=float)


def _inverse(x: float) -> float:
    return 1.0 / x if x > 0 else math.inf


def crb_audit(fits: Sequence[FitResult], model: SignalModel, p_true: SensorParams, tau: float,
              n_shots: int, window: int = 1) -> BoundReport:
    """
    总方差 Var(omega_hat) + Var(gamma_hat) 与 (1/I(omega) + 1/I(gamma)) / N 比较。
    I 取数据生成模型在真实参数处、对本次实验所有采样时刻求和的值。
    容差 3 crb sqrt(2 / (R - 1)) 为样本方差的统计涨落。
    """
    repetitions = len(fits)
    if repetitions < MIN_REPETITIONS:
        raise InsufficientDataError(
            f"CRB audit needs >= {MIN_REPETITIONS} fit repetitions, got {repetitions}")
    total = float(np.var(_estimates(fits, "omega_hat"), ddof=1) + np.var(_estimates(fits, "gamma_hat"), ddof=1))
    times = experiment_times(tau, window)
    i_omega = float(np.sum(fisher_information(model, "omega", p_true.omega, p_true.gamma_err, times)))
    i_gamma = float(np.sum(fisher_information(model, "gamma", p_true.omega, p_true.gamma_err, times)))
    crb = (_inverse(i_omega) + _inverse(i_gamma)) / n_shots
    tolerance = 3.0 * crb * math.sqrt(2.0 / (repetitions - 1))
    return BoundReport(tau=float(tau), fisher_omega=i_omega, fisher_gamma=i_gamma, crb_rhs=crb,
                       total_variance=total, violated=bool(total < crb - tolerance),
                       tolerance=tolerance, repetitions=repetitions)


def bias_statistic(fits, omega_true: float) -> float:
    """b(omega) = E[(omega - omega_hat)^2] - Var(omega_hat)；fits 可为 FitResult 列表或估计值数组"""
    if len(fits) and isinstance(fits[0], FitResult):
        estimates = _estimates(fits, "omega_hat")
    else:
        estimates = np.asarray(fits, dtype=float)
    if estimates.size < MIN_REPETITIONS:
        raise InsufficientDataError(
            f"bias statistic needs >= {MIN_REPETITIONS} repetitions, got {estimates.size}")
    return float(np.mean((estimates - omega_true) ** 2) - np.var(estimates, ddof=1))


# ------------------------------
# 最小可探测信号
# ------------------------------
SENSITIVITY_MODELS = ("naive", "proposed_reduced", "proposed_reduced_full", "proposed_full")


def _ramsey_sensitivity(omega: float, gamma: float, taus: np.ndarray, n_shots: int,
                        slope: np.ndarray) -> np.ndarray:
    """sqrt((1 - e^{-6 gamma tau} cos^2) / (N 9 tau^2 e^{-6 gamma tau} slope^2))，节点处 +inf"""
    decay = np.exp(-6.0 * gamma * taus)
    num = 1.0 - decay * np.cos(3.0 * omega * taus) ** 2
    den = n_shots * 9.0 * taus ** 2 * decay * slope ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, np.sqrt(np.abs(num) / np.where(den > 0, den, 1.0)), math.inf)


def min_detectable_signal(model: str, p: SensorParams, tau, n_shots: int,
                          ep: Optional[EffectiveParams] = None):
    """
    |delta omega|(tau)：
      naive                  朴素模型，参数取 (p.omega, p.gamma_err)
      proposed_reduced       有效参数模型，参数取 ep，斜率因子 d omega_eff / d omega 在 p 处求值
      proposed_reduced_full  另含 d gamma_eff / d omega 项
      proposed_full          1 / sqrt(N I(omega))，I 取自 p 处的精确解
    ep 缺省时由 p 按一阶展开得到。
    """
    scalar = np.ndim(tau) == 0
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if model == "naive":
        out = _ramsey_sensitivity(p.omega, p.gamma_err, taus, n_shots, np.sin(3.0 * p.omega * taus))
    elif model in ("proposed_reduced", "proposed_reduced_full"):
        ep = ep or effective_params(p, 1)
        d = effective_params_derivatives(p, ep.order)
        slope = d.domega_eff_domega * np.sin(3.0 * ep.omega_eff * taus)
        if model == "proposed_reduced_full":
            slope = slope + d.dgamma_eff_domega * np.cos(3.0 * ep.omega_eff * taus)
        out = _ramsey_sensitivity(ep.omega_eff, ep.gamma_eff, taus, n_shots, slope)
    elif model == "proposed_full":
        info = fisher_information(ProposedFullModel(p.gamma_qec), "omega", p.omega, p.gamma_err, taus)
        with np.errstate(divide="ignore"):
            out = np.where(info > 0, 1.0 / np.sqrt(n_shots * info), math.inf)
    else:
        raise ConfigError(f"unknown sensitivity model {model!r}; known: {', '.join(SENSITIVITY_MODELS)}")
    return float(out[0]) if scalar else out


def standard_quantum_limit(tau, n_shots: int):
    """(9 N tau^2)^{-1/2}"""
    taus = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(9.0 * n_shots * taus ** 2)


def sensitivity_curves(p: SensorParams, taus, n_shots: int, order: int = 1,
                       omega_est: Optional[float] = None,
                       gamma_est: Optional[float] = None) -> Dict[str, np.ndarray]:
    """
    朴素与有效参数曲线使用同一组估计值 (omega_est, gamma_est)：
    朴素模型把它们当作 (omega, gamma_err)，有效参数模型把它们当作 (omega_eff, gamma_eff)。
    估计值缺省为 (p.omega, p.gamma_err)；精确解曲线始终在 p 处求值。
    """
    taus = np.asarray(taus, dtype=float)
    omega_est = p.omega if omega_est is None else float(omega_est)
    gamma_est = p.gamma_err if gamma_est is None else float(gamma_est)
    if not omega_est > 0 or gamma_est < 0:
        raise ParameterError(f"estimates need omega_est > 0 and gamma_est >= 0, got ({omega_est}, {gamma_est})")
    naive_p = SensorParams(n=p.n, omega=omega_est, gamma_err=gamma_est, gamma_qec=p.gamma_qec)
    ep = EffectiveParams(omega_eff=omega_est, gamma_eff=gamma_est, order=order)

    curves = {"tau": taus, "naive": min_detectable_signal("naive", naive_p, taus, n_shots)}
    for name in ("proposed_reduced", "proposed_reduced_full"):
        curves[name] = min_detectable_signal(name, p, taus, n_shots, ep=ep)
    curves["proposed_full"] = min_detectable_signal("proposed_full", p, taus, n_shots)
    curves["sql"] = standard_quantum_limit(taus, n_shots)
    return curves


def sensitivity_ratio(p: SensorParams, order: int = 1) -> float:
    """相同 (omega_hat, gamma_hat) 下 naive / proposed_reduced = |d omega_eff / d omega|"""
    return abs(effective_params_derivatives(p, order).domega_eff_domega)


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def optimal_sensing_time(omega_est: float, gamma_est: float) -> Tuple[float, Optional[int]]:
    """
    k_opt = round((2/pi) omega / gamma)，tau_opt = (pi/2) k_opt / (3 omega)，
    约等于 1 / (3 gamma)。gamma = 0 时不存在有限最优，返回 (inf, None)。
    """
    if not omega_est > 0:
        raise ParameterError(f"omega_est must be > 0, got {omega_est}")
    if gamma_est < 0:
        raise ParameterError(f"gamma_est must be >= 0, got {gamma_est}")
    if gamma_est == 0:
        return math.inf, None
    k_opt = _round_half_away((2.0 / math.pi) * omega_est / gamma_est)
    return (math.pi / 2.0) * k_opt / (3.0 * omega_est), k_opt


def optimal_sensing_time_effective(p: SensorParams, order: int = 1) -> Tuple[float, Optional[int]]:
    """以有效频率与有效错误率代入的最优感测时间"""
    ep = effective_params(p, order)
    return optimal_sensing_time(ep.omega_eff, ep.gamma_eff)


# ------------------------------
# CRB 实验（Monte Carlo + 拟合）
# ------------------------------
@dataclass(frozen=True)
class CrbTask:
    tau: float
    seed: int
    p_true: SensorParams
    generating: str
    fit_models: Tuple[str, ...]
    order: int
    n_shots: int
    repetitions: int
    window: int
    omega_scale: Tuple[float, float]
    gamma_scale: Tuple[float, float]
    grid_omega: int
    grid_gamma: int


def run_crb_point(task: CrbTask) -> List[Dict]:
    """单个 tau 点：重复 R 次采样 + 拟合，对每个拟合模型给出一行统计结果"""
    p = task.p_true
    generator = get_model(task.generating, p.gamma_qec, task.order)
    truth = generator.at(p.omega, p.gamma_err)
    models = [get_model(name, p.gamma_qec, task.order) for name in task.fit_models]
    times = experiment_times(task.tau, task.window)
    seeds = spawn_seeds(task.seed, task.repetitions * task.window)
    # 括号以真实参数为种子
    omega_bracket = seed_bracket(p.omega, task.omega_scale)
    gamma_bracket = seed_bracket(p.gamma_err, task.gamma_scale, fallback=p.omega)

    fits = {m.name: [] for m in models}
    for rep in range(task.repetitions):
        records = [sample_shots(truth, t, task.n_shots, seeds[rep * task.window + j])
                   for j, t in enumerate(times)]
        for m in models:
            fits[m.name].append(least_squares_fit(records, m, omega_bracket=omega_bracket,
                                                  gamma_bracket=gamma_bracket,
                                                  grid_omega=task.grid_omega, grid_gamma=task.grid_gamma))

    rows = []
    for m in models:
        report = crb_audit(fits[m.name], generator, p, task.tau, task.n_shots, task.window)
        omegas = _estimates(fits[m.name], "omega_hat")
        gammas = _estimates(fits[m.name], "gamma_hat")
        row = {
            "tau": task.tau,
            "model": m.name,
            "omega_mean": float(np.mean(omegas)),
            "gamma_mean": float(np.mean(gammas)),
            "var_omega": float(np.var(omegas, ddof=1)),
            "var_gamma": float(np.var(gammas, ddof=1)),
            "var_total": report.total_variance,
            "crb_rhs": report.crb_rhs,
            "tolerance": report.tolerance,
            "violated": report.violated,
            "bias_stat": bias_statistic(omegas, p.omega),
        }
        logger.info("[Fit] tau=%.4g model=%s var_total=%.3e crb=%.3e violated=%s bias=%.3e",
                    task.tau, m.name, row["var_total"], row["crb_rhs"], row["violated"], row["bias_stat"])
        rows.append(row)
    return rows


def run_crb_experiment(p_true: SensorParams, taus: Sequence[float], n_shots: int = 10 ** 4,
                       repetitions: int = 200, window: int = 8, seed: int = 0,
                       fit_models: Sequence[str] = ("conjectured", "proposed_full"),
                       generating: str = "proposed_full", order: int = 1,
                       omega_scale: Sequence[float] = OMEGA_SCALE,
                       gamma_scale: Sequence[float] = GAMMA_SCALE,
                       grid_omega: int = 200, grid_gamma: int = 200,
                       workers: Optional[int] = None) -> List[Dict]:
    """
    各 tau 点相互独立，按 (seed, tau 序号) 派生种子后可并行；
    结果按 tau 顺序组装，同一种子下逐位可复现。
    """
    if repetitions < MIN_REPETITIONS:
        raise InsufficientDataError(
            f"CRB experiment needs >= {MIN_REPETITIONS} repetitions, got {repetitions}")
    point_seeds = spawn_seeds(seed, len(taus))
    tasks = [
        CrbTask(tau=float(tau), seed=s, p_true=p_true, generating=generating,
                fit_models=tuple(fit_models), order=order, n_shots=n_shots,
                repetitions=repetitions, window=window,
                omega_scale=tuple(omega_scale), gamma_scale=tuple(gamma_scale),
                grid_omega=grid_omega, grid_gamma=grid_gamma)
        for tau, s in zip(taus, point_seeds)
    ]
    workers = resolve_workers(workers)
    logger.info("[Fit] CRB experiment: %d tau points x %d repetitions, workers=%d",
                len(tasks), repetitions, workers)
    if workers == 1:
        results = [run_crb_point(t) for t in tasks]
    else:
        with Pool(processes=min(workers, len(tasks))) as pool:
            results = list(pool.imap(run_crb_point, tasks))
    return [row for rows in results for row in rows]
