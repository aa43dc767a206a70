"""
连续时间演化：构造传感器 Liouvillian 并积分得到 <sigma_x^L>(tau)，
以及相干分量的约化方程组（4 维和 8 维）。

相干分量约定（n = 3）：
  q  = <000|rho|111>
  e1 = <100|rho|011>, e2 = <010|rho|101>, e3 = <001|rho|110>, e = e1 + e2 + e3
<sigma_x^L> = 2 Re(q)。
"""
import enum
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from config.settings import SIMULATION_DEFAULTS, TOLERANCES
from qec_sense.errors import DimensionError, IntegrationError, ParameterError
from qec_sense.qcore import (
    DensityMatrix,
    Superoperator,
    commutator_superop,
    dissipator_superop,
    pauli_string,
    ramsey_state,
    single_qubit_op,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)


class Provenance(str, enum.Enum):
    SIMULATED = "simulated"
    ANALYTIC_FULL = "analytic_full"
    ANALYTIC_REDUCED = "analytic_reduced"
    CONJECTURED = "conjectured"
    UNCORRECTED = "uncorrected"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class SensorParams:
    """
    传感器物理参数。
    omega: 组合能隙 omega = omega_q + 2 xi V
    gamma_err: 单比特翻转速率
    gamma_qec: 纠错速率，0 表示不纠错
    """
    n: int = 3
    omega: float = 1.0
    gamma_err: float = 0.0
    gamma_qec: float = 0.0
    omega_q: Optional[float] = None
    xi: Optional[float] = None
    v_signal: Optional[float] = None

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise ParameterError(f"qubit count must be odd and >= 3, got {self.n}")
        if not self.omega > 0:
            raise ParameterError(f"omega must be > 0, got {self.omega}")
        if self.gamma_err < 0 or self.gamma_qec < 0:
            raise ParameterError(
                f"rates must be >= 0, got gamma_err={self.gamma_err}, gamma_qec={self.gamma_qec}")
        parts = (self.omega_q, self.xi, self.v_signal)
        if all(x is not None for x in parts):
            combined = self.omega_q + 2.0 * self.xi * self.v_signal
            if abs(combined - self.omega) > TOLERANCES.construction:
                raise ParameterError(
                    f"omega={self.omega} inconsistent with omega_q + 2 xi V = {combined}")

    @classmethod
    def from_signal(cls, omega_q: float, xi: float, v_signal: float, **rates) -> "SensorParams":
        """由零场劈裂、耦合强度和信号幅度构造"""
        return cls(omega=omega_q + 2.0 * xi * v_signal, omega_q=omega_q, xi=xi,
                   v_signal=v_signal, **rates)

    def replace(self, **changes) -> "SensorParams":
        # 改动 omega 时丢弃记账字段，避免不一致
        if "omega" in changes:
            changes.setdefault("omega_q", None)
            changes.setdefault("xi", None)
            changes.setdefault("v_signal", None)
        return replace(self, **changes)

    @property
    def dim(self) -> int:
        return 2 ** self.n

    def as_dict(self) -> dict:
        return {
            "n": self.n, "omega": self.omega, "gamma_err": self.gamma_err,
            "gamma_qec": self.gamma_qec, "omega_q": self.omega_q, "xi": self.xi,
            "v_signal": self.v_signal,
        }


@dataclass(frozen=True, eq=False)
class ExpectationTrace:
    """采样曲线 tau -> <sigma_x^L>(tau)"""
    taus: np.ndarray
    values: np.ndarray
    provenance: Provenance
    params: SensorParams
    label: str = field(default="")

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.shape != values.shape or taus.ndim != 1:
            raise DimensionError(f"taus {taus.shape} and values {values.shape} must be equal 1-d arrays")
        if taus.size > 1 and np.any(np.diff(taus) <= 0):
            raise ParameterError("trace times must be strictly increasing")
        worst = float(np.max(np.abs(values))) if values.size else 0.0
        if worst > 1.0 + TOLERANCES.trace_bound:
            raise ParameterError(f"expectation value {worst:.9f} outside [-1, 1]")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def __len__(self) -> int:
        return self.taus.size

    @property
    def dt(self) -> float:
        return float(self.taus[1] - self.taus[0])

    def is_uniform(self, rtol: float = 1e-6) -> bool:
        if self.taus.size < 2:
            return False
        steps = np.diff(self.taus)
        return bool(np.all(np.abs(steps - steps[0]) <= rtol * abs(steps[0])))

    def rmse(self, other: "ExpectationTrace") -> float:
        self._check_same_grid(other)
        return float(np.sqrt(np.mean((self.values - other.values) ** 2)))

    def max_abs(self, other: "ExpectationTrace") -> float:
        self._check_same_grid(other)
        return float(np.max(np.abs(self.values - other.values)))

    def _check_same_grid(self, other: "ExpectationTrace"):
        if self.taus.shape != other.taus.shape or not np.allclose(self.taus, other.taus):
            raise DimensionError("traces are sampled on different time grids")


def time_grid(t_max: float = SIMULATION_DEFAULTS["t_max"],
              n_points: int = SIMULATION_DEFAULTS["n_points"], omega: float = 1.0) -> np.ndarray:
    """[0, t_max/omega] 上的均匀网格"""
    if n_points < 2 or t_max <= 0:
        raise ParameterError(f"time grid needs t_max > 0 and >= 2 points, got {t_max}, {n_points}")
    return np.linspace(0.0, t_max / omega, n_points)


def hamiltonian(p: SensorParams) -> np.ndarray:
    """H = sum_j (omega/2) sigma_z^(j)"""
    return sum(0.5 * p.omega * single_qubit_op(p.n, j, "Z").matrix for j in range(1, p.n + 1))


def error_jump_operators(p: SensorParams) -> List[np.ndarray]:
    """L_err^(j) = sqrt(gamma_err) sigma_x^(j)"""
    return [np.sqrt(p.gamma_err) * single_qubit_op(p.n, j, "X").matrix for j in range(1, p.n + 1)]


def qec_jump_operators(p: SensorParams) -> List[np.ndarray]:
    """
    L_qec^(j) = sqrt(gamma_qec) sigma_x^(j) (1 - Z_j Z_k)/2 (1 - Z_j Z_l)/2
    只在比特 j 与另外两个比特都不一致时翻转它。
    """
    if p.n != 3:
        raise ParameterError(f"continuous QEC jump operators are defined for n = 3 only, got n = {p.n}")
    eye = np.eye(p.dim, dtype=complex)
    ops = []
    for j in (1, 2, 3):
        k, l = [m for m in (1, 2, 3) if m != j]
        zz_k = pauli_string(3, ["Z" if m in (j, k) else "I" for m in (1, 2, 3)]).matrix
        zz_l = pauli_string(3, ["Z" if m in (j, l) else "I" for m in (1, 2, 3)]).matrix
        flip = single_qubit_op(3, j, "X").matrix
        ops.append(np.sqrt(p.gamma_qec) * flip @ (0.5 * (eye - zz_k)) @ (0.5 * (eye - zz_l)))
    return ops


@lru_cache(maxsize=64)
def build_liouvillian(p: SensorParams) -> Superoperator:
    """-i[H, .] + sum_j D[L_err^(j)] + sum_j D[L_qec^(j)]，4^n x 4^n"""
    if p.gamma_qec > 0 and p.n != 3:
        raise ParameterError(f"gamma_qec > 0 requires n = 3, got n = {p.n}")
    generator = commutator_superop(hamiltonian(p))
    if p.gamma_err > 0:
        for L in error_jump_operators(p):
            generator = generator + dissipator_superop(L)
    if p.gamma_qec > 0:
        for L in qec_jump_operators(p):
            generator = generator + dissipator_superop(L)
    return Superoperator(generator, "L")


def _check_grid(taus: np.ndarray) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size < 1:
        raise ParameterError("time grid must be a non-empty 1-d array")
    if taus[0] != 0.0:
        raise ParameterError(f"time grid must start at 0, got {taus[0]}")
    if taus.size > 1 and np.any(np.diff(taus) <= 0):
        raise ParameterError("time grid must be strictly increasing")
    return taus


def _integrate(matrix: np.ndarray, y0: np.ndarray, taus: np.ndarray, rtol: float, atol: float,
               max_step: float, method: str) -> np.ndarray:
    """dy/dtau = M y，返回形状 (len(taus), dim) 的复数解"""
    if taus.size == 1:
        return y0[np.newaxis, :].astype(complex)

    def rhs(_t, y):
        return matrix @ y

    sol = solve_ivp(rhs, (taus[0], taus[-1]), y0.astype(complex), method=method, t_eval=taus,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status < 0:
        failed_at = float(sol.t[-1]) if sol.t.size else float(taus[0])
        raise IntegrationError(f"integration failed: {sol.message}", tau=failed_at)
    return sol.y.T


def evolve(p: SensorParams, rho0: DensityMatrix, taus: Sequence[float],
           rtol: float = SIMULATION_DEFAULTS["rtol"], atol: float = SIMULATION_DEFAULTS["atol"],
           max_step: float = np.inf, method: str = SIMULATION_DEFAULTS["method"]) -> List[DensityMatrix]:
    """积分主方程，返回每个 tau 上的密度矩阵"""
    taus = _check_grid(taus)
    if rho0.dim != p.dim:
        raise DimensionError(f"initial state dimension {rho0.dim} != 2^{p.n}")
    generator = build_liouvillian(p).matrix
    states = _integrate(generator, vec(rho0), taus, rtol, atol, max_step, method)
    logger.debug("[Lindblad] integrated %d points up to tau=%.4g", taus.size, taus[-1])
    return [DensityMatrix(unvec(y, p.dim), atol=TOLERANCES.trace_integration) for y in states]


def logical_coherence(rho: DensityMatrix) -> complex:
    """q = <0_L|rho|1_L>"""
    return complex(rho.matrix[0, rho.dim - 1])


def ramsey_trace(p: SensorParams, taus: Sequence[float], **solver) -> ExpectationTrace:
    """制备 (|0>_L + |1>_L)/sqrt(2)，演化后取 <sigma_x^L> = 2 Re(q)"""
    states = evolve(p, ramsey_state(p.n), taus, **solver)
    values = np.array([2.0 * logical_coherence(rho).real for rho in states])
    return ExpectationTrace(np.asarray(taus, dtype=float), values, Provenance.SIMULATED, p, "lindblad")


def reduced_matrix(p: SensorParams, keep_coupling: bool = True) -> np.ndarray:
    """
    (q, e, e*, q*) 的 4x4 演化矩阵。
    keep_coupling=False 时去掉 e 与 e* 之间的 2 gamma_err 交叉项。
    """
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    c = 2.0 * ge if keep_coupling else 0.0
    return np.array([
        [-3j * w - 3 * ge, ge + gq, 0, 0],
        [3 * ge, -1j * w - 3 * ge - gq, c, 0],
        [0, c, 1j * w - 3 * ge - gq, 3 * ge],
        [0, 0, ge + gq, 3j * w - 3 * ge],
    ], dtype=complex)


def reduced_rhs(p: SensorParams, state: Sequence[complex], keep_coupling: bool = True) -> np.ndarray:
    """约化方程右端项"""
    state = np.asarray(state, dtype=complex)
    if state.shape != (4,):
        raise DimensionError(f"reduced state must have 4 components, got {state.shape}")
    return reduced_matrix(p, keep_coupling) @ state


def coherence_matrix(p: SensorParams, keep_coupling: bool = True) -> np.ndarray:
    """(q, e1, e2, e3, e1*, e2*, e3*, q*) 的 8x8 演化矩阵"""
    w, ge, gq = p.omega, p.gamma_err, p.gamma_qec
    c = ge if keep_coupling else 0.0
    m = np.zeros((8, 8), dtype=complex)
    m[0, 0] = -3j * w - 3 * ge
    m[0, 1:4] = ge + gq
    m[7, 7] = 3j * w - 3 * ge
    m[7, 4:7] = ge + gq
    for j in range(3):
        e, ec = 1 + j, 4 + j
        m[e, 0] = ge
        m[e, e] = -1j * w - 3 * ge - gq
        m[ec, 7] = ge
        m[ec, ec] = 1j * w - 3 * ge - gq
        for k in range(3):
            if k != j:
                m[e, 4 + k] = c
                m[ec, 1 + k] = c
    return m


def coherence_rhs(p: SensorParams, state: Sequence[complex], keep_coupling: bool = True) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape != (8,):
        raise DimensionError(f"coherence state must have 8 components, got {state.shape}")
    return coherence_matrix(p, keep_coupling) @ state


# 8 个相干分量在 8x8 密度矩阵中的位置
COHERENCE_INDICES = ((0, 7), (4, 3), (2, 5), (1, 6), (3, 4), (5, 2), (6, 1), (7, 0))


def coherence_components(rho: DensityMatrix) -> np.ndarray:
    if rho.dim != 8:
        raise DimensionError(f"coherence projection is defined for 3 qubits, got dim {rho.dim}")
    return np.array([rho.matrix[i, j] for i, j in COHERENCE_INDICES], dtype=complex)


def reduce_components(state8: Sequence[complex]) -> np.ndarray:
    """8 分量 -> (q, e, e*, q*)"""
    s = np.asarray(state8, dtype=complex)
    return np.array([s[0], s[1:4].sum(), s[4:7].sum(), s[7]])


def integrate_reduced(p: SensorParams, taus: Sequence[float], keep_coupling: bool = True,
                      n_components: int = 4, rtol: float = SIMULATION_DEFAULTS["rtol"],
                      atol: float = SIMULATION_DEFAULTS["atol"], max_step: float = np.inf,
                      method: str = SIMULATION_DEFAULTS["method"]) -> np.ndarray:
    """从 q(0) = q*(0) = 1/2 出发积分约化方程，返回 (len(taus), n_components)"""
    taus = _check_grid(taus)
    if n_components == 4:
        matrix = reduced_matrix(p, keep_coupling)
    elif n_components == 8:
        matrix = coherence_matrix(p, keep_coupling)
    else:
        raise ParameterError(f"n_components must be 4 or 8, got {n_components}")
    y0 = np.zeros(n_components, dtype=complex)
    y0[0] = y0[-1] = 0.5
    return _integrate(matrix, y0, taus, rtol, atol, max_step, method)


def ramsey_trace_reduced(p: SensorParams, taus: Sequence[float], keep_coupling: bool = True,
                         **solver) -> ExpectationTrace:
    states = integrate_reduced(p, taus, keep_coupling, **solver)
    label = "reduced" if keep_coupling else "reduced_uncoupled"
    return ExpectationTrace(np.asarray(taus, dtype=float), 2.0 * states[:, 0].real,
                            Provenance.SIMULATED, p, label)
