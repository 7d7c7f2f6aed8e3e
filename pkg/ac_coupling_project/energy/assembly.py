"""
稀疏能量装配

所有模型能量都写成 E(y) = Σ_k c_k φ(|(L y)_k|)，L 为从自由度取值到键向量/方向导数的
稀疏线性映射。梯度为 Lᵀ(c φ′(|z|) z/|z|)，累加次序由装配顺序固定
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy import sparse

from ac_coupling_project.errors import PotentialDomainError
from ac_coupling_project.potentials.pair_potentials import PairPotential


@dataclass(frozen=True, eq=False)
class TermSet:
    """一组能量项：算子 L (n_terms × n_dofs) 与系数 c"""
    operator: sparse.csr_matrix
    coefficients: np.ndarray

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    @classmethod
    def empty(cls, n_dofs: int) -> "TermSet":
        return cls(sparse.csr_matrix((0, n_dofs)), np.zeros(0))

    def evaluate(self, positions: np.ndarray, potential: PairPotential) -> Tuple[float, np.ndarray]:
        """
        能量与全部自由度上的梯度

        Args:
            positions: (n_dofs, 2) 物理位置
            potential: 两体势

        Returns:
            (E, (n_dofs, 2) 梯度)
        """
        if self.n_terms == 0:
            return 0.0, np.zeros_like(positions)
        z = self.operator @ positions
        norm = np.linalg.norm(z, axis=1)
        if np.any(norm == 0.0):
            raise PotentialDomainError("存在长度为零的键向量(原子重合)")
        value, d1, _ = potential.evaluate(norm)
        energy = float(self.coefficients @ value)
        weights = (self.coefficients * d1 / norm)[:, None] * z
        return energy, np.asarray(self.operator.T @ weights)

    def evaluate_scalar(self, values: np.ndarray, potential: PairPotential) -> Tuple[float, np.ndarray]:
        """一维版本：z = L y 必须为正(链单调)"""
        if self.n_terms == 0:
            return 0.0, np.zeros_like(values)
        z = self.operator @ values
        value, d1, _ = potential.evaluate(z)
        return float(self.coefficients @ value), np.asarray(self.operator.T @ (self.coefficients * d1))


class TermAssembler:
    """按顺序收集能量项的 COO 数据"""

    def __init__(self, n_dofs: int):
        self.n_dofs = n_dofs
        self._coeffs: List[np.ndarray] = []
        self._rows: List[np.ndarray] = []
        self._cols: List[np.ndarray] = []
        self._vals: List[np.ndarray] = []
        self._n_terms = 0

    @property
    def n_terms(self) -> int:
        return self._n_terms

    def add_block(self, coefficients: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> None:
        """
        批量加入项，每项的线性组合宽度相同

        Args:
            coefficients: (M,)
            cols: (M, w) 自由度编号
            vals: (M, w) 组合系数
        """
        coefficients = np.asarray(coefficients, dtype=float)
        m = len(coefficients)
        if m == 0:
            return
        cols = np.asarray(cols, dtype=np.int64).reshape(m, -1)
        vals = np.asarray(vals, dtype=float).reshape(m, -1)
        rows = np.repeat(np.arange(self._n_terms, self._n_terms + m), cols.shape[1])
        self._coeffs.append(coefficients)
        self._rows.append(rows)
        self._cols.append(cols.ravel())
        self._vals.append(vals.ravel())
        self._n_terms += m

    def add_term(self, coefficient: float, combination: Dict[int, float]) -> None:
        combination = {k: v for k, v in combination.items() if v != 0.0}
        cols = np.fromiter(combination.keys(), dtype=np.int64, count=len(combination))
        vals = np.fromiter(combination.values(), dtype=float, count=len(combination))
        self._coeffs.append(np.array([coefficient], dtype=float))
        self._rows.append(np.full(len(cols), self._n_terms, dtype=np.int64))
        self._cols.append(cols)
        self._vals.append(vals)
        self._n_terms += 1

    def build(self) -> TermSet:
        if self._n_terms == 0:
            return TermSet.empty(self.n_dofs)
        matrix = sparse.coo_matrix(
            (np.concatenate(self._vals), (np.concatenate(self._rows), np.concatenate(self._cols))),
            shape=(self._n_terms, self.n_dofs),
        ).tocsr()
        matrix.sum_duplicates()
        return TermSet(matrix, np.concatenate(self._coeffs))


def combine(*weights: Tuple[float, Dict[int, float]]) -> Dict[int, float]:
    """线性组合 Σ s_k · w_k"""
    out: Dict[int, float] = {}
    for scale, w in weights:
        for k, v in w.items():
            out[k] = out.get(k, 0.0) + scale * v
    return out
