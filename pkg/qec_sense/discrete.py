"""
离散周期模型：每个周期依次作用 噪声 N、感知 U(dtau)、检测纠错 C。

  rho(tau) = [C ∘ U ∘ N]^c (rho_0),  tau = c * dtau
  N = p_I * id + p_N * N'

在本项目的约定下（q = <0_L|rho|1_L>），C ∘ U ∘ N' ∘ U^-1 把逻辑相干乘以 e^{+2i w dtau}，
因此 q(tau) = 1/2 e^{-3i w tau} E[e^{2i w dtau X}], X ~ Bin(c, p_N)。
"""
import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import binom

from config.settings import TOLERANCES
from qec_sense.closedform import EffectiveParams
from qec_sense.errors import CommutationError, DimensionError, ParameterError
from qec_sense.lindblad import SensorParams
from qec_sense.qcore import (
    Channel,
    DensityMatrix,
    Operator,
    Superoperator,
    compose_channels,
    logical_basis,
    logical_states,
    logical_x,
    mixture_channel,
    ramsey_state,
    single_qubit_op,
    unitary_channel,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)


class NoiseModel(str, enum.Enum):
    OPTIMAL = "optimal"
    REALISTIC = "realistic"


def realistic_total_probability(p_flip: float) -> float:
    """p_N = 3p + 3p^2 + p^3"""
    return 3 * p_flip + 3 * p_flip ** 2 + p_flip ** 3


def _check_probability(value: float, what: str):
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{what} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class CycleSpec:
    """
    c: 周期数
    delta_tau: 每个周期的时长
    p_noise: 总出错概率 p_N
    p_flip: realistic 模型下单比特翻转概率 p
    """
    c: int
    delta_tau: float
    p_noise: float
    noise_model: NoiseModel = NoiseModel.OPTIMAL
    p_flip: Optional[float] = None

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 0:
            raise ParameterError(f"cycle count must be a non-negative integer, got {self.c}")
        if self.delta_tau < 0:
            raise ParameterError(f"delta_tau must be >= 0, got {self.delta_tau}")
        _check_probability(self.p_noise, "p_noise")
        object.__setattr__(self, "noise_model", NoiseModel(self.noise_model))
        if self.noise_model is NoiseModel.REALISTIC:
            if self.p_flip is None:
                raise ParameterError("realistic noise needs the per-qubit flip probability p_flip")
            _check_probability(self.p_flip, "p_flip")
            expected = realistic_total_probability(self.p_flip)
            if abs(expected - self.p_noise) > TOLERANCES.construction:
                raise ParameterError(f"p_noise={self.p_noise} inconsistent with 3p+3p^2+p^3={expected}")

    @classmethod
    def optimal(cls, c: int, delta_tau: float, p_noise: float) -> "CycleSpec":
        return cls(c=c, delta_tau=delta_tau, p_noise=p_noise)

    @classmethod
    def realistic(cls, c: int, delta_tau: float, p_flip: float) -> "CycleSpec":
        return cls(c=c, delta_tau=delta_tau, p_noise=realistic_total_probability(p_flip),
                   noise_model=NoiseModel.REALISTIC, p_flip=p_flip)

    @property
    def p_ideal(self) -> float:
        return 1.0 - self.p_noise

    @property
    def tau(self) -> float:
        return self.c * self.delta_tau

    def with_cycles(self, c: int) -> "CycleSpec":
        return CycleSpec(c, self.delta_tau, self.p_noise, self.noise_model, self.p_flip)


@dataclass(frozen=True)
class BiasReport:
    commutator_norm: float
    delta_observable: Optional[float]
    is_biased: bool
    tolerance: float = TOLERANCES.commutator


# ------------------------------
# 信道
# ------------------------------
def _error_terms(spec: CycleSpec, n: int):
    """出错部分的 (权重, 算符) 列表，权重之和为 p_N"""
    flips = [single_qubit_op(n, j, "X").matrix for j in range(1, n + 1)]
    if spec.noise_model is NoiseModel.OPTIMAL:
        return [(spec.p_noise / n, x) for x in flips]
    if n != 3:
        raise ParameterError(f"realistic noise is defined for n = 3 only, got n = {n}")
    p = spec.p_flip
    pairs = [flips[a] @ flips[b] for a in range(3) for b in range(a + 1, 3)]
    return ([(p, x) for x in flips] + [(p ** 2, x) for x in pairs]
            + [(p ** 3, logical_x(3).matrix)])


def noise_channel(spec: CycleSpec, n: int = 3) -> Channel:
    """N = p_I * id + 错误项"""
    eye = np.eye(2 ** n, dtype=complex)
    terms = [(spec.p_ideal, eye)] + _error_terms(spec, n)
    return mixture_channel(terms, f"N_{spec.noise_model.value}")


def erroneous_part(spec: CycleSpec, n: int = 3) -> Channel:
    """归一化的出错部分 N'，权重 c_k' = c_k / p_N；p_N = 0 时按最优模型的形状返回"""
    if spec.p_noise == 0:
        flips = [single_qubit_op(n, j, "X").matrix for j in range(1, n + 1)]
        return mixture_channel([(1.0 / n, x) for x in flips], "N'")
    terms = [(w / spec.p_noise, op) for w, op in _error_terms(spec, n)]
    return mixture_channel(terms, f"N'_{spec.noise_model.value}")


def correction_channel(n: int = 3) -> Channel:
    """C(rho) = P0 rho P0 + sum_j X_j P_j rho P_j X_j"""
    if n != 3:
        raise ParameterError(f"correction channel is defined for n = 3 only, got n = {n}")
    zero, one = logical_states(3)
    p0 = np.outer(zero, zero.conj()) + np.outer(one, one.conj())
    kraus = [p0]
    for j in (1, 2, 3):
        x = single_qubit_op(3, j, "X").matrix
        # X_j P_j = X_j (X_j P0 X_j) = P0 X_j
        kraus.append(p0 @ x)
    return Channel(tuple(kraus), "C")


def sensing_unitary(omega: float, delta_tau: float, n: int = 3) -> np.ndarray:
    """U(dtau) = exp(-i (w/2) dtau sum_j Z_j)，在计算基下对角"""
    z_sum = sum(np.real(np.diag(single_qubit_op(n, j, "Z").matrix)) for j in range(1, n + 1))
    return np.diag(np.exp(-0.5j * omega * delta_tau * z_sum))


def sensing_channel(p: SensorParams, delta_tau: float, inverse: bool = False) -> Channel:
    u = sensing_unitary(p.omega, delta_tau, p.n)
    if inverse:
        return unitary_channel(u.conj().T, "U^-1")
    return unitary_channel(u, "U")


def channel_power(superop: Superoperator, k: int) -> Superoperator:
    """超算符 k 次幂（平方倍增）"""
    return superop.power(k)


def cycle_superoperator(spec: CycleSpec, p: SensorParams, corrected: bool = True) -> Superoperator:
    """单个周期 C ∘ U ∘ N；corrected=False 时为 U ∘ N"""
    step = sensing_channel(p, spec.delta_tau).superoperator @ noise_channel(spec, p.n).superoperator
    if corrected:
        step = correction_channel(p.n).superoperator @ step
    return step


def interaction_noise(spec: CycleSpec, p: SensorParams) -> Superoperator:
    """N~ = U ∘ N' ∘ U^-1"""
    return (sensing_channel(p, spec.delta_tau).superoperator
            @ erroneous_part(spec, p.n).superoperator
            @ sensing_channel(p, spec.delta_tau, inverse=True).superoperator)


def _state(matrix: np.ndarray) -> DensityMatrix:
    return DensityMatrix(matrix, atol=TOLERANCES.trace_integration)


def iterate_cycles(spec: CycleSpec, p: SensorParams, rho0: DensityMatrix) -> DensityMatrix:
    """[C ∘ U ∘ N]^c (rho0)，精确超算符乘积"""
    if rho0.dim != p.dim:
        raise DimensionError(f"initial state dimension {rho0.dim} != 2^{p.n}")
    total = channel_power(cycle_superoperator(spec, p), spec.c)
    return _state(total.apply(rho0))


def noiseless_state(spec: CycleSpec, p: SensorParams, rho0: DensityMatrix) -> DensityMatrix:
    """rho_tau = U_tau(rho0)"""
    return _state(sensing_channel(p, spec.tau).apply(rho0))


# ------------------------------
# 二项式展开与对易条件
# ------------------------------
def _max_entry_norm(superop: Superoperator, basis: Sequence[np.ndarray]) -> float:
    return max(float(np.max(np.abs(superop.apply(b)))) for b in basis)


def binomial_commutator_norm(spec: CycleSpec, p: SensorParams) -> float:
    """[C ∘ U, C ∘ U ∘ N'] 在逻辑算符基上的范数"""
    c_op = correction_channel(p.n).superoperator
    cu = c_op @ sensing_channel(p, spec.delta_tau).superoperator
    cun = cu @ erroneous_part(spec, p.n).superoperator
    comm = Superoperator(cu.matrix @ cun.matrix - cun.matrix @ cu.matrix, "[CU, CUN']")
    return _max_entry_norm(comm, logical_basis(p.n))


def binomial_form(spec: CycleSpec, p: SensorParams, rho_tau: DensityMatrix, verify: bool = False) -> DensityMatrix:
    """
    sum_k C(c,k) p_I^{c-k} p_N^k [C ∘ U ∘ N' ∘ U^-1]^k (rho_tau)
    verify=True 时先检查二项式定理所需的对易条件。
    """
    if verify:
        norm = binomial_commutator_norm(spec, p)
        if norm > TOLERANCES.commutator:
            raise CommutationError("binomial expansion requires commuting cycle maps", norm)
    step = (correction_channel(p.n).superoperator @ interaction_noise(spec, p)).matrix
    weights = binom.pmf(np.arange(spec.c + 1), spec.c, spec.p_noise)
    current = vec(rho_tau)
    total = np.zeros_like(current)
    for k, weight in enumerate(weights):
        if k:
            current = step @ current
        total = total + weight * current
    return _state(unvec(total, rho_tau.dim))


def biasedness_check(sensing: Channel, noise_err_part: Channel,
                     basis: Optional[Sequence[np.ndarray]] = None,
                     tolerance: float = TOLERANCES.commutator) -> BiasReport:
    """
    [U ∘ N', U^-1](rho_L) = U N' U^-1 - N'，在逻辑基 {|i>_L<j|_L} 上取逐元素最大模。
    """
    if sensing.dim != noise_err_part.dim:
        raise DimensionError("sensing and noise channels must share the dimension")
    n = int(round(np.log2(sensing.dim)))
    basis = logical_basis(n) if basis is None else basis
    s_u = sensing.superoperator.matrix
    s_inv = channel_to_inverse_unitary(sensing).superoperator.matrix
    s_n = noise_err_part.superoperator.matrix
    comm = Superoperator(s_u @ s_n @ s_inv - s_inv @ s_u @ s_n, "[UN', U^-1]")
    norm = _max_entry_norm(comm, basis)
    logger.debug("[Discrete] biasedness commutator norm %.3e", norm)
    return BiasReport(commutator_norm=norm, delta_observable=None, is_biased=norm > tolerance,
                      tolerance=tolerance)


def channel_to_inverse_unitary(ch: Channel) -> Channel:
    if len(ch.kraus_ops) != 1:
        raise ParameterError(f"channel {ch.label!r} is not unitary, no inverse")
    return unitary_channel(ch.kraus_ops[0].conj().T, f"{ch.label}^-1")


# ------------------------------
# 无偏重构与偏差
# ------------------------------
def expansion_center(spec: CycleSpec, rule: str = "mean") -> int:
    """mean: round(c p_N)（0.5 远离零取整）；mode: floor((c+1) p_N)"""
    if rule == "mean":
        return int(math.floor(spec.c * spec.p_noise + 0.5))
    if rule == "mode":
        return int(math.floor((spec.c + 1) * spec.p_noise))
    raise ParameterError(f"unknown expansion center rule {rule!r}; use 'mean' or 'mode'")


def unbiased_reconstruction(spec: CycleSpec, p: SensorParams, rho_tau: DensityMatrix,
                            rule: str = "mean") -> DensityMatrix:
    """(C ∘ N~)^beta (rho_tau)，beta 为取整后的展开中心"""
    beta = expansion_center(spec, rule)
    step = correction_channel(p.n).superoperator @ interaction_noise(spec, p)
    return _state(channel_power(step, beta).apply(rho_tau))


def bias_of_observable(spec: CycleSpec, p: SensorParams, observable: Operator,
                       rho_tau: DensityMatrix, rule: str = "mean") -> float:
    """Delta_O = Tr(O rho(tau)) - Tr(O rho_tau)，rho(tau) 取无偏重构"""
    rho = unbiased_reconstruction(spec, p, rho_tau, rule)
    return rho.expectation(observable) - rho_tau.expectation(observable)


def bias_report(spec: CycleSpec, p: SensorParams, observable: Optional[Operator] = None,
                rule: str = "mean") -> BiasReport:
    """对易范数 + Ramsey 初态下 <O_L> 的偏差"""
    report = biasedness_check(sensing_channel(p, spec.delta_tau), erroneous_part(spec, p.n))
    observable = observable or logical_x(p.n)
    rho_tau = noiseless_state(spec, p, ramsey_state(p.n))
    delta = bias_of_observable(spec, p, observable, rho_tau, rule)
    return BiasReport(report.commutator_norm, delta, report.is_biased, report.tolerance)


# ------------------------------
# 闭式结果
# ------------------------------
def characteristic_coherence(spec: CycleSpec, p: SensorParams) -> complex:
    """q = 1/2 e^{-3i w tau} sum_k Bin(k; c, p_N) e^{2i w dtau k}"""
    k = np.arange(spec.c + 1)
    weights = binom.pmf(k, spec.c, spec.p_noise)
    char = np.sum(weights * np.exp(2j * p.omega * spec.delta_tau * k))
    return complex(0.5 * np.exp(-3j * p.omega * spec.tau) * char)


def expectation_discrete_exact(spec: CycleSpec, p: SensorParams) -> float:
    return 2.0 * characteristic_coherence(spec, p).real


def normal_regime_ok(spec: CycleSpec, threshold: float = 5.0) -> bool:
    """正态近似的经验适用条件 c p_N >= 5 且 c p_I >= 5"""
    return spec.c * spec.p_noise >= threshold and spec.c * spec.p_ideal >= threshold


def expectation_discrete_normal(spec: CycleSpec, p: SensorParams, tau=None):
    """e^{-2 p_N p_I w^2 dtau tau} cos(3 w (1 - 2/3 p_N) tau)"""
    if not normal_regime_ok(spec):
        logger.warning("[Discrete] normal approximation outside its regime: c p_N=%.3g, c p_I=%.3g",
                       spec.c * spec.p_noise, spec.c * spec.p_ideal)
    taus = np.asarray(spec.tau if tau is None else tau, dtype=float)
    w = p.omega
    values = (np.exp(-2.0 * spec.p_noise * spec.p_ideal * w ** 2 * spec.delta_tau * taus)
              * np.cos(3.0 * w * (1.0 - 2.0 / 3.0 * spec.p_noise) * taus))
    return values.item() if values.ndim == 0 else values


def discrete_effective_params(spec: CycleSpec, p: SensorParams) -> EffectiveParams:
    """omega_eff = w (1 - 2/3 p_N)，gamma_eff = 2/3 p_N p_I w^2 dtau"""
    w = p.omega
    return EffectiveParams(omega_eff=w * (1.0 - 2.0 / 3.0 * spec.p_noise),
                           gamma_eff=2.0 / 3.0 * spec.p_noise * spec.p_ideal * w ** 2 * spec.delta_tau,
                           order=1)


def correction_defect(p_flip: float) -> float:
    """realistic 噪声下未被纠正的概率 eps = 3p^2 + p^3"""
    _check_probability(p_flip, "p_flip")
    return 3 * p_flip ** 2 + p_flip ** 3


def defect_channel(n: int = 3) -> Channel:
    """N_eps(rho) = X_L rho X_L"""
    return unitary_channel(logical_x(n).matrix, "N_eps")


def logical_defect(correction: Channel, noise: Channel) -> float:
    """max_{rho_L} |C ∘ N (rho_L) - rho_L|（逻辑基上逐元素）"""
    combined = compose_channels(correction, noise)
    n = int(round(np.log2(combined.dim)))
    return max(float(np.max(np.abs(combined.apply(b) - b))) for b in logical_basis(n))


# ------------------------------
# 逐周期曲线
# ------------------------------
DISCRETE_COLUMNS = ("tau", "ideal", "uncorrected", "corrected", "unbiased_reconstruction")


def cycle_trace(spec: CycleSpec, p: SensorParams, rho0: Optional[DensityMatrix] = None,
                c_max: Optional[int] = None, rule: str = "mean") -> Dict[str, np.ndarray]:
    """
    c = 0..c_max 每个周期末的 <sigma_x^L>：
    理想演化、不纠错 (U ∘ N)^c、纠错 (C ∘ U ∘ N)^c、无偏重构 (C ∘ N~)^beta (rho_tau)。
    """
    rho0 = rho0 or ramsey_state(p.n)
    c_max = spec.c if c_max is None else c_max
    x_l = logical_x(p.n).matrix

    corrected_step = cycle_superoperator(spec, p, corrected=True).matrix
    uncorrected_step = cycle_superoperator(spec, p, corrected=False).matrix
    recon_step = (correction_channel(p.n).superoperator @ interaction_noise(spec, p))
    u_step = sensing_channel(p, spec.delta_tau).superoperator.matrix

    def expect(v: np.ndarray) -> float:
        return float(np.real(np.trace(x_l @ unvec(v, p.dim))))

    powers: Dict[int, np.ndarray] = {}
    rows: Dict[str, List[float]] = {name: [] for name in DISCRETE_COLUMNS}
    corr = uncorr = ideal = vec(rho0)
    for c in range(c_max + 1):
        if c:
            corr = corrected_step @ corr
            uncorr = uncorrected_step @ uncorr
            ideal = u_step @ ideal
        beta = expansion_center(spec.with_cycles(c), rule)
        if beta not in powers:
            powers[beta] = channel_power(recon_step, beta).matrix
        rows["tau"].append(c * spec.delta_tau)
        rows["ideal"].append(expect(ideal))
        rows["uncorrected"].append(expect(uncorr))
        rows["corrected"].append(expect(corr))
        rows["unbiased_reconstruction"].append(expect(powers[beta] @ ideal))
    logger.info("[Discrete] %s noise: %d cycles, p_N=%.6g, dtau=%.4g",
                spec.noise_model.value, c_max, spec.p_noise, spec.delta_tau)
    return {name: np.asarray(values) for name, values in rows.items()}
