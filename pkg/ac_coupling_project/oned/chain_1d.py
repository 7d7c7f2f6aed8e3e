"""
一维参考实现

原子链 I = (−N−R, N+R) ∩ Z，连续介质区域 Ω_c = (a, b)(默认 (0, N))，I_D = {N ≤ |i|}。
提供 Atomistic、Cauchy-Born、QCE、ECC、ACC(含 ã 变体)能量，D_ω 算子与 QCE 鬼力闭式解
"""
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import floor
from typing import Callable, Dict, Iterable, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ac_coupling_project.energy.assembly import TermAssembler, TermSet, combine
from ac_coupling_project.errors import DofLayoutError, PotentialDomainError, UnsupportedClosedFormError
from ac_coupling_project.potentials.pair_potentials import PairPotential

ChainVariant = Literal["atomistic", "cauchy-born", "qce", "ecc", "acc", "acc-tilde"]
Number = Union[int, Fraction]


class Chain1D(BaseModel):
    """一维链几何"""
    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1, description="Dirichlet 层起始位置 N")
    R: int = Field(..., ge=1, description="相互作用范围 R")
    interface: Optional[Tuple[int, int]] = Field(None, description="连续介质区间 (a, b)，默认 (0, N)")
    nodes: Optional[Tuple[int, ...]] = Field(None, description="网格节点，默认 a..b 全部格点")

    @model_validator(mode="after")
    def _check(self) -> "Chain1D":
        a, b = self.continuum
        if not -self.N < a < b <= self.N:
            raise ValueError(f"连续介质区间 ({a}, {b}) 必须满足 −N < a < b ≤ N")
        if self.nodes is not None:
            nodes = self.nodes
            if list(nodes) != sorted(set(nodes)) or nodes[0] != a or nodes[-1] != b:
                raise ValueError("网格节点必须严格递增且包含区间端点")
        return self

    @property
    def continuum(self) -> Tuple[int, int]:
        return self.interface if self.interface is not None else (0, self.N)

    @property
    def mesh_nodes(self) -> Tuple[int, ...]:
        a, b = self.continuum
        return self.nodes if self.nodes is not None else tuple(range(a, b + 1))

    @property
    def sites(self) -> Tuple[int, ...]:
        return tuple(range(-self.N - self.R + 1, self.N + self.R))

    @property
    def gamma(self) -> Tuple[int, int]:
        return self.continuum

    def is_dirichlet(self, i: int) -> bool:
        return abs(i) >= self.N

    @property
    def atomistic_sites(self) -> Tuple[int, ...]:
        """I_a：不在 [a, b] 中的原子"""
        a, b = self.continuum
        return tuple(i for i in self.sites if i < a or i > b)

    def bonds(self) -> List[Tuple[int, int]]:
        """全部键 (i, r)，1 ≤ r ≤ R"""
        site_set = set(self.sites)
        return [(i, r) for i in self.sites for r in range(1, self.R + 1) if i + r in site_set]

    def bond_in_continuum(self, i: int, r: int) -> bool:
        a, b = self.continuum
        return a <= i and i + r <= b


@dataclass(frozen=True)
class Subset1D:
    """互不相交的开区间并 ω = ∪ (l_m, r_m)"""
    intervals: Tuple[Tuple[Fraction, Fraction], ...]

    def __post_init__(self) -> None:
        items = tuple(sorted((Fraction(l), Fraction(r)) for l, r in self.intervals))
        if not items:
            raise ValueError("ω 不能为空")
        for l, r in items:
            if not l < r:
                raise ValueError(f"区间 ({l}, {r}) 为空")
        for (_, r0), (l1, _) in zip(items, items[1:]):
            if l1 < r0:
                raise ValueError("区间相交")
        object.__setattr__(self, "intervals", items)

    @property
    def length(self) -> Fraction:
        return sum((r - l for l, r in self.intervals), Fraction(0))


def d_omega(omega: Subset1D, y: Callable[[Fraction], float]) -> float:
    """D_ω y = Σ_m (y(r_m) − y(l_m))"""
    return float(sum(y(r) - y(l) for l, r in omega.intervals))


@dataclass(frozen=True, eq=False)
class ChainLayout:
    """一维自由度布局：原子与网格节点的稠密编号"""
    chain: Chain1D
    sites: Tuple[int, ...]
    fixed: np.ndarray
    nodes: Tuple[int, ...]

    @cached_property
    def index(self) -> Dict[int, int]:
        return {p: k for k, p in enumerate(self.sites)}

    @cached_property
    def free_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)

    @property
    def n_dofs(self) -> int:
        return len(self.sites)

    def point_weights(self, t: Number) -> Dict[int, float]:
        """任意点处取值的自由度权重；连续介质内部由分片线性插值给出"""
        t = Fraction(t)
        if t.denominator == 1 and int(t) in self.index:
            return {self.index[int(t)]: 1.0}
        if self.nodes and self.nodes[0] <= t <= self.nodes[-1]:
            k = min(bisect_right(self.nodes, t), len(self.nodes) - 1)
            p, q = self.nodes[k - 1], self.nodes[k]
            lam = (t - p) / (q - p)
            return {self.index[p]: float(1 - lam), self.index[q]: float(lam)}
        raise DofLayoutError(f"点 {t} 没有取值")

    def evaluator(self, values: np.ndarray) -> Callable[[Fraction], float]:
        values = np.asarray(values, dtype=float)
        return lambda t: float(sum(w * values[k] for k, w in self.point_weights(t).items()))

    def connectivity(self) -> np.ndarray:
        return np.array([(k, k + 1) for k in range(self.n_dofs - 1)], dtype=np.int64).reshape(-1, 2)


def _layout(chain: Chain1D, variant: str) -> ChainLayout:
    nodes = chain.mesh_nodes
    if variant == "atomistic":
        sites = chain.sites
        return ChainLayout(chain, sites, np.array([chain.is_dirichlet(i) for i in sites]), ())
    if variant == "cauchy-born":
        fixed = np.array([p in chain.gamma for p in nodes])
        return ChainLayout(chain, nodes, fixed, nodes)
    sites = tuple(sorted(set(chain.atomistic_sites) | set(nodes)))
    return ChainLayout(chain, sites, np.array([chain.is_dirichlet(i) for i in sites]), nodes)


def _pair(asm: TermAssembler, layout: ChainLayout, p: Number, q: Number, coefficient: float) -> None:
    asm.add_term(coefficient, combine((1.0, layout.point_weights(q)), (-1.0, layout.point_weights(p))))


def _gradient_terms(
    asm: TermAssembler,
    layout: ChainLayout,
    lo: Fraction,
    hi: Fraction,
    directions: Iterable[int],
    scale: Fraction,
) -> None:
    """Σ_e Σ_r scale·|e ∩ (lo, hi)|·φ(r y′|_e)"""
    nodes = layout.nodes
    for p, q in zip(nodes, nodes[1:]):
        overlap = min(Fraction(q), hi) - max(Fraction(p), lo)
        if overlap <= 0:
            continue
        for r in directions:
            slope = r / (q - p)
            asm.add_term(float(scale * overlap), {layout.index[q]: slope, layout.index[p]: -slope})


def _continuum_piece(chain: Chain1D, i: int, r: int) -> Optional[Tuple[Fraction, Fraction]]:
    a, b = chain.continuum
    lo, hi = max(i, a), min(i + r, b)
    return (Fraction(lo), Fraction(hi)) if hi > lo else None


def _atomistic_pieces(chain: Chain1D, i: int, r: int) -> List[Tuple[Fraction, Fraction]]:
    """b ∩ Ω_a 的各个区间"""
    a, b = chain.continuum
    pieces = []
    if i < a:
        pieces.append((Fraction(i), Fraction(min(i + r, a))))
    if i + r > b:
        pieces.append((Fraction(max(i, b)), Fraction(i + r)))
    return pieces


def _continuum_bond(asm: TermAssembler, layout: ChainLayout, i: int, r: int, sign: float) -> None:
    piece = _continuum_piece(layout.chain, i, r)
    if piece is not None:
        _gradient_terms(asm, layout, piece[0], piece[1], (r,), Fraction(1, r) * int(sign))


def _atomistic_bond(asm: TermAssembler, layout: ChainLayout, i: int, r: int) -> None:
    """a_b = W φ(W⁻¹ D_{b∩Ω_a} y)，W = |b ∩ Ω_a| / r"""
    pieces = _atomistic_pieces(layout.chain, i, r)
    total = sum((hi - lo for lo, hi in pieces), Fraction(0)) / r
    if total == 0:
        return
    parts = []
    for lo, hi in pieces:
        parts.append((float(1 / total), layout.point_weights(hi)))
        parts.append((float(-1 / total), layout.point_weights(lo)))
    asm.add_term(float(total), combine(*parts))


def _atomistic_bond_tilde(asm: TermAssembler, layout: ChainLayout, i: int, r: int) -> None:
    """ã_b = Σ_ω (|ω|/r) φ(r D_ω y / |ω|)，ω 取 b ∩ Ω_a 的各个区间"""
    for lo, hi in _atomistic_pieces(layout.chain, i, r):
        length = hi - lo
        scale = float(r / length)
        asm.add_term(
            float(length / r),
            combine((scale, layout.point_weights(hi)), (-scale, layout.point_weights(lo))),
        )


@dataclass(frozen=True, eq=False)
class ChainModel1D:
    """装配好的一维模型；能量 = Σ c_k φ(z_k)，z = L y 必须为正"""
    variant: str
    chain: Chain1D
    potential: PairPotential
    layout: ChainLayout
    terms: TermSet
    ecc_form: str = "bond-split"

    def uniform(self, F: float = 1.0) -> np.ndarray:
        return F * np.asarray(self.layout.sites, dtype=float)

    def full_gradient(
        self,
        values: np.ndarray,
        forces: Optional[np.ndarray] = None,
    ) -> Tuple[float, np.ndarray]:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.layout.n_dofs,):
            raise DofLayoutError(f"取值长度 {values.shape} 与布局 {self.layout.n_dofs} 不一致")
        if np.any(np.diff(values) <= 0):
            raise PotentialDomainError("一维变形必须严格单调递增")
        energy, grad = self.terms.evaluate_scalar(values, self.potential)
        if forces is not None:
            energy -= float(forces @ values)
            grad = grad - forces
        return energy, grad

    def energy(self, values: np.ndarray, forces: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
        """能量与自由自由度上的梯度"""
        energy, grad = self.full_gradient(values, forces)
        return energy, grad[self.layout.free_indices]

    def site_gradient(self, values: np.ndarray) -> Dict[int, float]:
        _, grad = self.full_gradient(values)
        return dict(zip(self.layout.sites, grad.tolist()))

    def force_vector(self, forces: Mapping[int, float]) -> np.ndarray:
        """按原子给出的外力映射到本布局"""
        vec = np.zeros(self.layout.n_dofs)
        for i, f in forces.items():
            if i not in self.layout.index:
                raise DofLayoutError(f"原子 {i} 不是自由度，不能施加外力")
            vec[self.layout.index[i]] = f
        return vec

    def objective(self, values: np.ndarray, forces: Optional[np.ndarray] = None) -> "ChainObjective":
        return ChainObjective(self, np.asarray(values, dtype=float), forces)


@dataclass(frozen=True, eq=False)
class ChainObjective:
    """限制在自由自由度上的一维目标函数"""
    model: ChainModel1D
    values: np.ndarray
    forces: Optional[np.ndarray] = None

    def to_values(self, x: np.ndarray) -> np.ndarray:
        values = self.values.copy()
        values[self.model.layout.free_indices] = x
        return values

    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        return self.model.energy(self.to_values(x), self.forces)


def build_chain_model(
    variant: ChainVariant,
    chain: Chain1D,
    potential: PairPotential,
    ecc_form: Literal["bond-split", "definition"] = "bond-split",
) -> ChainModel1D:
    """
    装配一维模型

    Args:
        variant: atomistic / cauchy-born / qce / ecc / acc / acc-tilde
        chain: 链几何
        potential: 两体势
        ecc_form: ECC 的装配形式，bond-split 为 Σ(e_b − c_b) + E_c，definition 为
            Σ_{b⊄Ω_c} e_b + Σ_{b⊂Ω_c} c_b
    """
    layout = _layout(chain, variant)
    asm = TermAssembler(layout.n_dofs)
    a, b = (Fraction(v) for v in chain.continuum)
    directions = range(1, chain.R + 1)
    outside = [(i, r) for i, r in chain.bonds() if not chain.bond_in_continuum(i, r)]

    if variant == "atomistic":
        for i, r in chain.bonds():
            _pair(asm, layout, i, i + r, 1.0)
    elif variant == "cauchy-born":
        _gradient_terms(asm, layout, a, b, directions, Fraction(1))
    elif variant == "qce":
        site_set = set(chain.sites)
        owners = [i for i in chain.sites if i <= a or i >= b]
        for i in owners:
            for r in directions:
                for q in (i + r, i - r):
                    if q in site_set:
                        _pair(asm, layout, min(i, q), max(i, q), 0.5)
        _gradient_terms(asm, layout, a + Fraction(1, 2), b - Fraction(1, 2), directions, Fraction(1))
    elif variant == "ecc":
        if ecc_form == "bond-split":
            for i, r in outside:
                _pair(asm, layout, i, i + r, 1.0)
                _continuum_bond(asm, layout, i, r, -1.0)
            _gradient_terms(asm, layout, a, b, directions, Fraction(1))
        elif ecc_form == "definition":
            for i, r in chain.bonds():
                if chain.bond_in_continuum(i, r):
                    _continuum_bond(asm, layout, i, r, 1.0)
                else:
                    _pair(asm, layout, i, i + r, 1.0)
        else:
            raise ValueError(f"未知的 ECC 装配形式: {ecc_form}")
    elif variant in ("acc", "acc-tilde"):
        bond_term = _atomistic_bond if variant == "acc" else _atomistic_bond_tilde
        for i, r in outside:
            bond_term(asm, layout, i, r)
        _gradient_terms(asm, layout, a, b, directions, Fraction(1))
    else:
        raise ValueError(f"未知的一维模型: {variant}")

    terms = asm.build()
    logger.debug(f"一维 {variant} 模型: N={chain.N}, R={chain.R}, {terms.n_terms} 项")
    return ChainModel1D(variant, chain, potential, layout, terms, ecc_form)


def energy_1d(
    variant: ChainVariant,
    chain: Chain1D,
    values: np.ndarray,
    potential: PairPotential,
    ecc_form: Literal["bond-split", "definition"] = "bond-split",
) -> Tuple[float, np.ndarray]:
    """装配并求值：返回能量与自由自由度上的梯度"""
    return build_chain_model(variant, chain, potential, ecc_form).energy(values)


def continuum_bond_value(model: ChainModel1D, values: np.ndarray, i: int, r: int) -> float:
    """c_b(y) = (1/r) ∫_{b∩Ω_c} φ(r y′) dx"""
    asm = TermAssembler(model.layout.n_dofs)
    _continuum_bond(asm, model.layout, i, r, 1.0)
    return asm.build().evaluate_scalar(np.asarray(values, dtype=float), model.potential)[0]


def bond_gradient_1d(
    model: ChainModel1D,
    values: np.ndarray,
    i: int,
    r: int,
    kind: Literal["exact", "continuum", "atomistic"],
) -> np.ndarray:
    """单条键的 e_b、c_b 或 a_b 在全部自由度上的梯度"""
    asm = TermAssembler(model.layout.n_dofs)
    if kind == "exact":
        _pair(asm, model.layout, i, i + r, 1.0)
    elif kind == "continuum":
        _continuum_bond(asm, model.layout, i, r, 1.0)
    else:
        _atomistic_bond(asm, model.layout, i, r)
    return asm.build().evaluate_scalar(np.asarray(values, dtype=float), model.potential)[1]


def qce_ghost_closed_form(F: float, potential: PairPotential, R: int = 2) -> Dict[int, float]:
    """
    R = 2 时 QCE 在 y = F x 处界面附近的鬼力

    Returns:
        原子 2, 1, 0, −1 上的梯度 (+c, −c, −c, +c)，c = φ′(2F)/2

    Raises:
        UnsupportedClosedFormError: R ≠ 2
    """
    if R != 2:
        raise UnsupportedClosedFormError(f"只有 R = 2 的闭式解 (给定 R = {R})")
    _, d1, _ = potential.evaluate(np.array([2.0 * F]))
    c = float(d1[0]) / 2.0
    return {2: c, 1: -c, 0: -c, -1: c}


def chain_bond_density(r: int, x: Number) -> Fraction:
    """Σ_i (1/r) χ_{(i,i+r)}(x)，非整数 x 处恒为 1"""
    if r < 1:
        raise ValueError("r 必须为正整数")
    x = Fraction(x)
    base = floor(x)
    count = sum(1 for i in range(base - r + 1, base + 1) if i < x < i + r)
    return Fraction(count, r)


def w1inf_error_1d(
    model: ChainModel1D,
    values: np.ndarray,
    reference: ChainModel1D,
    ref_values: np.ndarray,
) -> float:
    """全部单位区间 [i, i+1] 上应变差的最大值"""
    y = model.layout.evaluator(values)
    y_ref = reference.layout.evaluator(ref_values)
    sites = model.chain.sites
    return max(
        abs((y(i + 1) - y(i)) - (y_ref(i + 1) - y_ref(i))) for i in sites[:-1]
    )


def dipole_forces(magnitude: float, left: int = -1) -> Dict[int, float]:
    """拉伸键 (left, left+1) 的力偶极"""
    return {left: -magnitude, left + 1: magnitude}


def sample_monotone(chain_model: ChainModel1D, F: float, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """均匀变形加小扰动(保持单调)的随机状态，Dirichlet 项不变"""
    values = chain_model.uniform(F)
    free = chain_model.layout.free_indices
    values[free] += amplitude * rng.uniform(-1.0, 1.0, size=len(free))
    return values


__all__ = [
    "Chain1D",
    "ChainLayout",
    "ChainModel1D",
    "ChainObjective",
    "Subset1D",
    "bond_gradient_1d",
    "build_chain_model",
    "chain_bond_density",
    "continuum_bond_value",
    "d_omega",
    "dipole_forces",
    "energy_1d",
    "qce_ghost_closed_form",
    "sample_monotone",
    "w1inf_error_1d",
]
