"""
n 比特稠密算符代数：Pauli 串、张量积、密度矩阵、Kraus 信道与超算符表示。

约定：
  - 比特 1 是最左侧的张量因子（最高位），|100> 对应下标 4；
  - 向量化采用列堆叠，vec(A X B) = (B^T ⊗ A) vec(X)。
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from config.settings import TOLERANCES
from qec_sense.errors import DimensionError, InvariantError, ParameterError

logger = logging.getLogger(__name__)

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

ArrayLike = Union[np.ndarray, "Operator", "DensityMatrix"]


def _frozen(matrix) -> np.ndarray:
    arr = np.array(matrix, dtype=complex)
    arr.setflags(write=False)
    return arr


def as_array(obj: ArrayLike) -> np.ndarray:
    """Operator / DensityMatrix / ndarray 统一成复数矩阵"""
    if isinstance(obj, (Operator, DensityMatrix)):
        return obj.matrix
    return np.asarray(obj, dtype=complex)


def vec(matrix: ArrayLike) -> np.ndarray:
    """列堆叠向量化"""
    return as_array(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vector).reshape((dim, dim), order="F")


def _check_square(matrix: np.ndarray, what: str) -> int:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"{what} must be a square matrix, got shape {matrix.shape}")
    return matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Operator:
    """稠密复数算符；哈密顿量单位为角频率，跳跃算符单位为 sqrt(rate)"""
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = _frozen(self.matrix)
        _check_square(arr, "Operator")
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, f"{self.label}†")

    def __matmul__(self, other: "Operator") -> "Operator":
        return Operator(self.matrix @ as_array(other), f"{self.label}{getattr(other, 'label', '')}")

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(scalar * self.matrix, self.label)

    __rmul__ = __mul__

    def is_hermitian(self, atol: float = TOLERANCES.construction) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) < atol)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """密度矩阵：构造时检查 Hermitian 与单位迹，半正定按需检查"""
    matrix: np.ndarray
    atol: float = field(default=TOLERANCES.construction, repr=False, compare=False)

    def __post_init__(self):
        arr = _frozen(self.matrix)
        dim = _check_square(arr, "DensityMatrix")
        if dim & (dim - 1):
            raise DimensionError(f"DensityMatrix dimension must be a power of two, got {dim}")
        herm = float(np.max(np.abs(arr - arr.conj().T)))
        if herm >= self.atol:
            raise InvariantError(f"density matrix not Hermitian: max|rho - rho^dag| = {herm:.3e}")
        trace_err = abs(np.trace(arr) - 1.0)
        if trace_err >= self.atol:
            raise InvariantError(f"density matrix trace deviates from 1 by {trace_err:.3e}")
        object.__setattr__(self, "matrix", arr)

    @classmethod
    def from_state(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dim)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.matrix)))

    def is_psd(self, tol: float = TOLERANCES.psd) -> bool:
        return self.min_eigenvalue() >= -tol

    def expectation(self, op: ArrayLike) -> float:
        """Tr(O rho) 的实部（O 为 Hermitian 时即期望值）"""
        return float(np.real(np.trace(as_array(op) @ self.matrix)))


def pauli_string(n: int, spec: Union[str, Sequence[str]]) -> Operator:
    """
    构造 n 比特 Pauli 串。
    :param n: 比特数
    :param spec: 每个比特的标签，取值 I/X/Y/Z，例如 "XXI" 或 ["Z", "Z", "I"]
    """
    if n < 1:
        raise ParameterError(f"qubit count must be >= 1, got {n}")
    labels = [s.upper() for s in spec]
    if len(labels) != n:
        raise DimensionError(f"Pauli spec {''.join(labels)!r} has length {len(labels)}, expected {n}")
    unknown = [s for s in labels if s not in PAULI_MATRICES]
    if unknown:
        raise DimensionError(f"unknown Pauli labels: {unknown}")
    matrix = reduce(np.kron, (PAULI_MATRICES[s] for s in labels))
    return Operator(matrix, "".join(labels))


def single_qubit_op(n: int, j: int, label: str) -> Operator:
    """在第 j 个比特（从 1 开始）上作用单比特 Pauli，其余为恒等"""
    if not 1 <= j <= n:
        raise ParameterError(f"qubit index {j} outside 1..{n}")
    spec = ["I"] * n
    spec[j - 1] = label
    return pauli_string(n, spec)


def logical_states(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """重复码的逻辑基矢 |0...0> 与 |1...1>"""
    if n < 3 or n % 2 == 0:
        raise ParameterError(f"repetition code needs odd n >= 3, got {n}")
    dim = 2 ** n
    zero = np.zeros(dim, dtype=complex)
    one = np.zeros(dim, dtype=complex)
    zero[0] = 1.0
    one[dim - 1] = 1.0
    return zero, one


def ramsey_state(n: int = 3) -> DensityMatrix:
    """Ramsey 初态 (|0>_L + |1>_L)/sqrt(2)"""
    zero, one = logical_states(n)
    return DensityMatrix.from_state((zero + one) / np.sqrt(2.0))


def logical_x(n: int = 3) -> Operator:
    return pauli_string(n, "X" * n)


def logical_basis(n: int = 3) -> List[np.ndarray]:
    """逻辑子空间算符基 {|i>_L <j|_L}"""
    states = logical_states(n)
    return [np.outer(a, b.conj()) for a in states for b in states]


def dissipator(L: ArrayLike, rho: ArrayLike) -> np.ndarray:
    """D[L](rho) = L rho L^dag - (L^dag L rho + rho L^dag L)/2"""
    L = as_array(L)
    rho = as_array(rho)
    if L.shape != rho.shape:
        raise DimensionError(f"jump operator {L.shape} and state {rho.shape} do not match")
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def left_superop(A: ArrayLike) -> np.ndarray:
    """X -> A X"""
    A = as_array(A)
    return np.kron(np.eye(A.shape[0]), A)


def right_superop(B: ArrayLike) -> np.ndarray:
    """X -> X B"""
    B = as_array(B)
    return np.kron(B.T, np.eye(B.shape[0]))


def commutator_superop(H: ArrayLike) -> np.ndarray:
    """X -> -i[H, X]"""
    H = as_array(H)
    return -1j * (left_superop(H) - right_superop(H))


def dissipator_superop(L: ArrayLike) -> np.ndarray:
    L = as_array(L)
    LdL = L.conj().T @ L
    return np.kron(L.conj(), L) - 0.5 * left_superop(LdL) - 0.5 * right_superop(LdL)


@dataclass(frozen=True, eq=False)
class Superoperator:
    """作用在列堆叠密度矩阵上的 dim^2 x dim^2 矩阵"""
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = _frozen(self.matrix)
        size = _check_square(arr, "Superoperator")
        dim = int(round(np.sqrt(size)))
        if dim * dim != size:
            raise DimensionError(f"superoperator size {size} is not a square of a dimension")
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho: ArrayLike) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        """self ∘ other：先作用 other"""
        return Superoperator(self.matrix @ other.matrix, f"{self.label}∘{other.label}")

    def power(self, k: int) -> "Superoperator":
        """k 次幂，numpy 内部按平方倍增计算"""
        if k < 0:
            raise ParameterError(f"channel power must be >= 0, got {k}")
        return Superoperator(np.linalg.matrix_power(self.matrix, k), f"({self.label})^{k}")

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.matrix))))


@dataclass(frozen=True, eq=False)
class Channel:
    """Kraus 形式的 CPTP 信道"""
    kraus_ops: Tuple[np.ndarray, ...]
    label: str = ""
    atol: float = field(default=TOLERANCES.construction, repr=False, compare=False)

    def __post_init__(self):
        ops = tuple(_frozen(as_array(k)) for k in self.kraus_ops)
        if not ops:
            raise DimensionError("channel needs at least one Kraus operator")
        dim = _check_square(ops[0], "Kraus operator")
        if any(k.shape != (dim, dim) for k in ops):
            raise DimensionError("Kraus operators have inconsistent shapes")
        object.__setattr__(self, "kraus_ops", ops)
        err = self.trace_preservation_error()
        if err >= self.atol:
            raise InvariantError(f"channel {self.label!r} not trace preserving: {err:.3e}")

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def trace_preservation_error(self) -> float:
        total = sum(k.conj().T @ k for k in self.kraus_ops)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def apply(self, rho: ArrayLike) -> np.ndarray:
        rho = as_array(rho)
        if rho.shape != (self.dim, self.dim):
            raise DimensionError(f"state {rho.shape} does not match channel dimension {self.dim}")
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def __call__(self, rho: ArrayLike) -> np.ndarray:
        return self.apply(rho)

    @cached_property
    def superoperator(self) -> Superoperator:
        return channel_to_superoperator(self)


def channel_to_superoperator(ch: Channel) -> Superoperator:
    """Kraus -> 超算符：vec(K rho K^dag) = (K^* ⊗ K) vec(rho)"""
    matrix = sum(np.kron(k.conj(), k) for k in ch.kraus_ops)
    return Superoperator(matrix, ch.label)


def identity_channel(dim: int) -> Channel:
    return Channel((np.eye(dim, dtype=complex),), "I")


def unitary_channel(U: ArrayLike, label: str = "U") -> Channel:
    return Channel((as_array(U),), label)


def mixture_channel(weighted_ops: Iterable[Tuple[float, ArrayLike]], label: str = "") -> Channel:
    """sum_k w_k K_k rho K_k^dag，K_k 为幺正，权重为概率"""
    ops = []
    for weight, op in weighted_ops:
        if weight < 0:
            raise ParameterError(f"negative channel weight {weight}")
        if weight > 0:
            ops.append(np.sqrt(weight) * as_array(op))
    return Channel(tuple(ops), label)


def compose_channels(outer: Channel, inner: Channel) -> Channel:
    """outer ∘ inner 的 Kraus 表示：{A_i B_j}"""
    if outer.dim != inner.dim:
        raise DimensionError("cannot compose channels of different dimension")
    ops = tuple(a @ b for a in outer.kraus_ops for b in inner.kraus_ops)
    return Channel(ops, f"{outer.label}∘{inner.label}")


def matrix_unit_basis(dim: int) -> List[np.ndarray]:
    """{|i><j|} 矩阵单位基"""
    basis = []
    for j in range(dim):
        for i in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[i, j] = 1.0
            basis.append(unit)
    return basis


def random_density_matrix(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Ginibre 随机混态，测试用"""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho))
