"""
解析表达式：纠错 Ramsey 信号的精确解 q(tau)、大 gamma_qec 展开、
有效参数（1~3 阶）、未纠错解、朴素模型以及展开收敛区域判断。

所有函数对 tau 向量化：传入标量返回标量，传入数组返回数组。
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from qec_sense.errors import ParameterError
from qec_sense.lindblad import ExpectationTrace, Provenance, SensorParams, reduced_matrix

logger = logging.getLogger(__name__)

TauLike = Union[float, Sequence[float], np.ndarray]


def _taus(tau: TauLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(tau, dtype=float)
    return arr, arr.ndim == 0


def _out(values: np.ndarray, scalar: bool):
    return np.asarray(values).item() if scalar else values


# ------------------------------
# 精确解
# ------------------------------
@dataclass(frozen=True)
class EigenSolution:
    """
    约化 2x2 系统 (q, e) 的本征解。
    q(tau) = C+ exp(lambda+ tau) - C- exp(lambda- tau)
    """
    discriminant: complex
    sqrt_discriminant: complex
    lambda_plus: complex
    lambda_minus: complex
    c_plus: complex
    c_minus: complex
    omega: float
    gamma_err: float
    gamma_qec: float

    def _v_q(self, sign: float) -> Optional[complex]:
        if self.gamma_err == 0:
            return None
        return (self.gamma_qec - 2j * self.omega + sign * self.sqrt_discriminant) / (6.0 * self.gamma_err)

    @property
    def v_plus_q(self) -> Optional[complex]:
        """本征向量 v+ 的 q 分量（e 分量归一为 1）"""
        return self._v_q(1.0)

    @property
    def v_minus_q(self) -> Optional[complex]:
        return self._v_q(-1.0)


def discriminant(p: SensorParams) -> complex:
    """D = gq^2 + 12 gq ge + 12 ge^2 - 4i gq w - 4 w^2"""
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    d = complex(gq ** 2 + 12 * gq * ge + 12 * ge ** 2 - 4 * w ** 2, -4 * gq * w)
    # -0.0 的虚部会让主值平方根落到割线另一侧
    return complex(d.real, d.imag + 0.0)


def eigen_solution(p: SensorParams) -> EigenSolution:
    d = discriminant(p)
    s = complex(np.sqrt(d))
    if s == 0:
        raise ParameterError("discriminant vanishes, eigenvalues are degenerate")
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    base = -0.5 * gq - 3.0 * ge - 2j * w
    amp = (gq - 2j * w) / (4.0 * s)
    return EigenSolution(
        discriminant=d,
        sqrt_discriminant=s,
        lambda_plus=base + 0.5 * s,
        lambda_minus=base - 0.5 * s,
        c_plus=amp + 0.25,
        c_minus=amp - 0.25,
        omega=w,
        gamma_err=ge,
        gamma_qec=gq,
    )


def q_full(p: SensorParams, tau: TauLike):
    """q(tau) = C+ e^{lambda+ tau} - C- e^{lambda- tau}，复数"""
    taus, scalar = _taus(tau)
    sol = eigen_solution(p)
    q = sol.c_plus * np.exp(sol.lambda_plus * taus) - sol.c_minus * np.exp(sol.lambda_minus * taus)
    return _out(q, scalar)


def expectation_full(p: SensorParams, tau: TauLike):
    """<sigma_x^L> = 2 Re q(tau)"""
    taus, scalar = _taus(tau)
    return _out(2.0 * np.real(q_full(p, taus)), scalar)


def q_full_derivatives(p: SensorParams, tau: TauLike):
    """
    链式法则求 dq/domega 与 dq/dgamma_err（经由 D, lambda+-, C+-）。
    返回 (dq_domega, dq_dgamma_err)。
    """
    taus, scalar = _taus(tau)
    sol = eigen_solution(p)
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    d, s = sol.discriminant, sol.sqrt_discriminant
    d32 = d * s
    num = gq - 2j * w

    e_plus = np.exp(sol.lambda_plus * taus)
    e_minus = np.exp(sol.lambda_minus * taus)

    def combine(dd, dlam_base, dc_base):
        dlam_p = dlam_base + 0.25 * dd / s
        dlam_m = dlam_base - 0.25 * dd / s
        dc = dc_base - num * dd / (8.0 * d32)
        return (dc * e_plus + sol.c_plus * taus * dlam_p * e_plus
                - (dc * e_minus + sol.c_minus * taus * dlam_m * e_minus))

    d_omega = combine(-4j * gq - 8.0 * w, -2j, -2j / (4.0 * s))
    d_gamma = combine(12.0 * gq + 24.0 * ge, -3.0, 0.0)
    return _out(d_omega, scalar), _out(d_gamma, scalar)


def expectation_full_gradient(p: SensorParams, tau: TauLike):
    """(d<sigma_x^L>/domega, d<sigma_x^L>/dgamma_err)"""
    d_omega, d_gamma = q_full_derivatives(p, tau)
    return 2.0 * np.real(d_omega), 2.0 * np.real(d_gamma)


# ------------------------------
# 有效参数
# ------------------------------
@dataclass(frozen=True)
class EffectiveParams:
    omega_eff: float
    gamma_eff: float
    order: int = 1

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ParameterError(f"effective-parameter order must be 1, 2 or 3, got {self.order}")


def _check_order_and_qec(p: SensorParams, order: int):
    if order not in (1, 2, 3):
        raise ParameterError(f"effective-parameter order must be 1, 2 or 3, got {order}")
    if not p.gamma_qec > 0:
        raise ParameterError("effective parameters need gamma_qec > 0")


def effective_params(p: SensorParams, order: int = 1) -> EffectiveParams:
    """
    omega_eff / omega = 1 - 2r + 16 r^2 - 141 r^3 + 8 ge w^2 / gq^3
    gamma_eff = 2 r ge - 12 r^2 ge + 4 w^2 ge / gq^2 + 84 r^3 ge - 68 ge w^2 ge / gq^3
    r = ge / gq，按阶截断。
    """
    _check_order_and_qec(p, order)
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    r = ge / gq
    scale = 1.0 - 2.0 * r
    gamma_eff = 2.0 * r * ge
    if order >= 2:
        scale += 16.0 * r ** 2
        gamma_eff += -12.0 * r ** 2 * ge + 4.0 * w ** 2 * ge / gq ** 2
    if order >= 3:
        scale += -141.0 * r ** 3 + 8.0 * ge * w ** 2 / gq ** 3
        gamma_eff += 84.0 * r ** 3 * ge - 68.0 * ge * w ** 2 * ge / gq ** 3
    return EffectiveParams(omega_eff=w * scale, gamma_eff=gamma_eff, order=order)


class EffectiveDerivatives(NamedTuple):
    domega_eff_domega: float
    dgamma_eff_domega: float
    domega_eff_dgamma_err: float
    dgamma_eff_dgamma_err: float


def effective_params_derivatives(p: SensorParams, order: int = 1) -> EffectiveDerivatives:
    """有效参数对 omega 与 gamma_err 的偏导"""
    _check_order_and_qec(p, order)
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    r = ge / gq

    dwe_dw = 1.0 - 2.0 * r
    dge_dw = 0.0
    dwe_dge = -2.0 * w / gq
    dge_dge = 4.0 * ge / gq
    if order >= 2:
        dwe_dw += 16.0 * r ** 2
        dge_dw += 8.0 * w * ge / gq ** 2
        dwe_dge += 32.0 * w * ge / gq ** 2
        dge_dge += -36.0 * ge ** 2 / gq ** 2 + 4.0 * w ** 2 / gq ** 2
    if order >= 3:
        dwe_dw += -141.0 * r ** 3 + 24.0 * ge * w ** 2 / gq ** 3
        dge_dw += -136.0 * ge ** 2 * w / gq ** 3
        dwe_dge += -423.0 * w * ge ** 2 / gq ** 3 + 8.0 * w ** 3 / gq ** 3
        dge_dge += 336.0 * ge ** 3 / gq ** 3 - 136.0 * ge * w ** 2 / gq ** 3
    return EffectiveDerivatives(dwe_dw, dge_dw, dwe_dge, dge_dge)


# ------------------------------
# 展开式与简化模型
# ------------------------------
class ValidityResult(NamedTuple):
    valid: bool
    margin: float
    upper_margin: float


def validity_check(p: SensorParams) -> ValidityResult:
    """
    展开收敛条件：
      (12 gq ge + 12 ge^2 - 4 w^2)^2 + 16 gq^2 w^2 - gq^4 < 0
      (12 gq ge + 12 ge^2 - 4 w^2)^2 + 16 gq^2 w^2 + gq^4 > 0
    margin 为第一式左端（负值表示有效）。
    """
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    a = 12 * gq * ge + 12 * ge ** 2 - 4 * w ** 2
    base = a ** 2 + 16 * gq ** 2 * w ** 2
    margin = base - gq ** 4
    upper = base + gq ** 4
    return ValidityResult(bool(margin < 0 and upper > 0), float(margin), float(upper))


def validity_boundary(gamma_err: float, gamma_qec_values: Sequence[float],
                      omega: float = 1.0) -> Optional[float]:
    """沿固定 gamma_err 的竖直切片，返回 margin 首次变负的 gamma_qec；不存在时返回 None"""
    for gq in sorted(gamma_qec_values):
        p = SensorParams(omega=omega, gamma_err=gamma_err, gamma_qec=gq)
        if validity_check(p).valid:
            return float(gq)
    return None


def simplified_transient(p: SensorParams, tau: TauLike):
    """展开式第二项：以约 gamma_qec 速率衰减的快瞬态"""
    if not p.gamma_qec > 0:
        raise ParameterError("the large-gamma_qec expansion needs gamma_qec > 0")
    taus, scalar = _taus(tau)
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    r = ge / gq
    c_minus = -1.5 * r
    envelope = np.exp(-(gq + 6 * ge - 6 * ge ** 2 / gq) * taus)
    return _out(-2.0 * c_minus * envelope * np.cos(w * (1 + 6 * r) * taus), scalar)


def expectation_simplified(p: SensorParams, tau: TauLike, order: int = 1, with_flag: bool = False):
    """
    大 gamma_qec 展开的两项表达式，C+ = 1/2 - 3/2 r, C- = -3/2 r。
    order > 1 时主项使用对应阶的有效参数。
    参数落在收敛区域外时记录 warning；with_flag=True 时额外返回是否有效。
    """
    check = validity_check(p)
    if not check.valid:
        logger.warning("[ClosedForm] expansion outside validity region: gamma_err=%s gamma_qec=%s margin=%.4g",
                       p.gamma_err, p.gamma_qec, check.margin)
    taus, scalar = _taus(tau)
    ep = effective_params(p, order)
    r = p.gamma_err / p.gamma_qec
    c_plus = 0.5 - 1.5 * r
    leading = 2.0 * c_plus * np.exp(-3.0 * ep.gamma_eff * taus) * np.cos(3.0 * ep.omega_eff * taus)
    values = _out(leading + simplified_transient(p, taus), scalar)
    if with_flag:
        return values, check.valid
    return values


def expectation_reduced(ep: EffectiveParams, tau: TauLike):
    """e^{-3 gamma_eff tau} cos(3 omega_eff tau)"""
    taus, scalar = _taus(tau)
    return _out(np.exp(-3.0 * ep.gamma_eff * taus) * np.cos(3.0 * ep.omega_eff * taus), scalar)


def expectation_conjectured(p: SensorParams, tau: TauLike):
    """朴素模型 e^{-3 gamma_err tau} cos(3 omega tau)"""
    taus, scalar = _taus(tau)
    return _out(np.exp(-3.0 * p.gamma_err * taus) * np.cos(3.0 * p.omega * taus), scalar)


def expectation_ideal(omega: float, tau: TauLike):
    taus, scalar = _taus(tau)
    return _out(np.cos(3.0 * omega * taus), scalar)


# ------------------------------
# 未纠错
# ------------------------------
def _check_uncorrected(p: SensorParams):
    if p.gamma_qec != 0:
        raise ParameterError(f"uncorrected solution requires gamma_qec = 0, got {p.gamma_qec}")
    if p.gamma_err >= p.omega:
        raise ParameterError(
            f"uncorrected solution is derived for gamma_err < omega only, got {p.gamma_err} >= {p.omega}")


def omega_err(p: SensorParams) -> float:
    """未纠错时的频率：omega (1 - gamma_err^2 / (2 omega^2))"""
    return p.omega * (1.0 - 0.5 * p.gamma_err ** 2 / p.omega ** 2)


def expectation_uncorrected(p: SensorParams, tau: TauLike, reduced: bool = False):
    """
    无纠错时的精确解，D = w^2 - ge^2：
      (w^2/D) e^{-3 ge tau} cos(3 sqrt(D) tau)
        - (ge^2 / D^{3/2}) e^{-3 ge tau} (sqrt(D) cos^3(sqrt(D) tau) - ge sin^3(sqrt(D) tau))
    reduced=True 时返回 e^{-3 ge tau} cos(3 omega_err tau)。
    """
    _check_uncorrected(p)
    taus, scalar = _taus(tau)
    w, ge = p.omega, p.gamma_err
    decay = np.exp(-3.0 * ge * taus)
    if reduced:
        return _out(decay * np.cos(3.0 * omega_err(p) * taus), scalar)
    d = w ** 2 - ge ** 2
    s = np.sqrt(d)
    phase = s * taus
    values = (w ** 2 / d) * decay * np.cos(3.0 * phase) \
        - (ge ** 2 / d ** 1.5) * decay * (s * np.cos(phase) ** 3 - ge * np.sin(phase) ** 3)
    return _out(values, scalar)


def uncorrected_matrix_solution(p: SensorParams, tau: TauLike):
    """对保留交叉项的 4x4 约化矩阵直接求指数，作为闭式解的独立校验"""
    _check_uncorrected(p)
    taus, scalar = _taus(tau)
    matrix = reduced_matrix(p, keep_coupling=True)
    y0 = np.array([0.5, 0.0, 0.0, 0.5], dtype=complex)
    values = np.array([2.0 * (expm(matrix * t) @ y0)[0].real for t in np.atleast_1d(taus)])
    return values[0] if scalar else values


# ------------------------------
# 生成 ExpectationTrace
# ------------------------------
ANALYTIC_KINDS = ("ideal", "full", "simplified", "reduced", "conjectured", "uncorrected")


def analytic_trace(p: SensorParams, taus: Sequence[float], kind: str = "full", order: int = 1) -> ExpectationTrace:
    """按名称在时间网格上求值解析模型"""
    taus = np.asarray(taus, dtype=float)
    if kind == "ideal":
        values, prov = expectation_ideal(p.omega, taus), Provenance.ANALYTIC_FULL
    elif kind == "full":
        values, prov = expectation_full(p, taus), Provenance.ANALYTIC_FULL
    elif kind == "simplified":
        values, prov = expectation_simplified(p, taus, order=order), Provenance.ANALYTIC_REDUCED
    elif kind == "reduced":
        values, prov = expectation_reduced(effective_params(p, order), taus), Provenance.ANALYTIC_REDUCED
    elif kind == "conjectured":
        values, prov = expectation_conjectured(p, taus), Provenance.CONJECTURED
    elif kind == "uncorrected":
        values, prov = expectation_uncorrected(p, taus), Provenance.UNCORRECTED
    else:
        raise ParameterError(f"unknown analytic model {kind!r}; known: {', '.join(ANALYTIC_KINDS)}")
    label = f"{kind}_o{order}" if kind in ("simplified", "reduced") else kind
    return ExpectationTrace(taus, values, prov, p, label)
