"""
实验运行器模块 - 收敛性实验、鬼力检验、键密度检验与一维实验的统一入口
"""
import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from loguru import logger
from tqdm import tqdm

from ac_coupling_project.energy.dof_layout import DeformationState
from ac_coupling_project.energy.energy_models import (
    EnergyModel,
    ModelVariant,
    build_energy_model,
    ghost_force_residual,
)
from ac_coupling_project.errors import CouplingError, SolverFailure
from ac_coupling_project.experiments.hexagon_problem import HexagonProblem, build_hexagon_problem
from ac_coupling_project.experiments.run_recorder import RunRecorder, failed_record
from ac_coupling_project.fem.mesh import LatticeTriangleSet, write_mesh
from ac_coupling_project.geometry.bond_geometry import verify_bond_density
from ac_coupling_project.models.config_models import ExperimentConfig, PatchTestRow, RunRecord
from ac_coupling_project.oned.chain_1d import (
    Chain1D,
    ChainModel1D,
    build_chain_model,
    dipole_forces,
    w1inf_error_1d,
)
from ac_coupling_project.potentials.pair_potentials import PairPotential
from ac_coupling_project.solver.minimizer import (
    LaplacePreconditioner,
    MinimizeOptions,
    MinimizeResult,
    minimize,
    w1inf_error,
)

PATCH_TOLERANCE = 1e-10
REFERENCE_BAND = (0.1, 10.0)


def resolve_threads() -> int:
    """并发线程数：.env 或环境变量 AC_COUPLING_THREADS，默认 min(4, CPU 数)"""
    load_dotenv()
    value = os.environ.get("AC_COUPLING_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning(f"AC_COUPLING_THREADS={value!r} 不是整数，使用默认值")
    return min(4, os.cpu_count() or 1)


def random_deformations(count: int, rng: np.random.Generator) -> List[np.ndarray]:
    """交替生成对角与剪切变形梯度，对角元取自 [0.9, 1.1]，剪切分量取自 [−0.1, 0.1]"""
    out = []
    for k in range(count):
        a, d = rng.uniform(0.9, 1.1, size=2)
        s = rng.uniform(-0.1, 0.1) if k % 2 else 0.0
        out.append(np.array([[a, s], [0.0, d]]))
    return out


def format_matrix(F: np.ndarray) -> str:
    return "[[{:.6f},{:.6f}],[{:.6f},{:.6f}]]".format(*np.asarray(F, dtype=float).ravel())


@dataclass
class ReferenceSolution:
    """纯原子参考解"""
    model: EnergyModel
    result: MinimizeResult

    @property
    def state(self) -> DeformationState:
        return self.result.state


@dataclass
class RunOutcome:
    """单次运行：结果行与(成功时)极小化状态"""
    record: RunRecord
    model: Optional[EnergyModel] = None
    result: Optional[MinimizeResult] = None

    @property
    def state(self) -> Optional[DeformationState]:
        return self.result.state if self.result is not None else None


@dataclass
class PatchTestReport:
    rows: pd.DataFrame
    tolerance: float

    @property
    def passed(self) -> bool:
        """只有 ECC 与 ACC 受阈值约束，QCE 的鬼力只报告"""
        checked = self.rows[self.rows["method"].isin(["ecc", "acc"])]
        return bool(checked["passed"].all())


@dataclass
class BondDensityReport:
    rows: pd.DataFrame

    @property
    def passed(self) -> bool:
        return bool(self.rows["equal"].all())


@dataclass
class OnedReport:
    method: str
    energy: float
    max_ghost_force: float
    gradients: pd.DataFrame


class ExperimentRunner:
    """实验运行器类，管理六边形问题上的各类实验"""

    def __init__(self, results_dir: Union[str, Path] = "results", threads: Optional[int] = None):
        """
        初始化实验运行器

        Args:
            results_dir: 结果保存目录
            threads: 并发线程数，默认由 resolve_threads 决定
        """
        self.results_dir = Path(results_dir)
        self.threads = threads
        self.recorder = RunRecorder(self.results_dir)
        logger.debug(f"实验运行器初始化完成，结果目录: {self.results_dir}")

    def _threads(self) -> int:
        return self.threads if self.threads is not None else resolve_threads()

    def reference_solution(self, cfg: ExperimentConfig, problem: Optional[HexagonProblem] = None) -> ReferenceSolution:
        """
        纯原子能量的局部极小值，作为初值与参考解

        Raises:
            SolverFailure: 参考解未收敛
        """
        problem = problem or build_hexagon_problem(cfg, with_mesh=False)
        model = build_energy_model(ModelVariant.ATOMISTIC, problem.geometry, cfg.potential)
        logger.info(f"计算原子参考解: {model.layout.n_free} 个自由原子")
        result = minimize(model, problem.initial_state(model.layout), cfg.solver)
        if not result.converged:
            raise SolverFailure(f"原子参考解未收敛: {result.status.value}", result)
        return ReferenceSolution(model, result)

    def run_single(
        self,
        cfg: ExperimentConfig,
        method: Union[ModelVariant, str],
        K: int,
        reference: ReferenceSolution,
        problem: Optional[HexagonProblem] = None,
    ) -> RunOutcome:
        """
        单个 (method, K) 运行：从原子参考解出发极小化耦合能量并计算误差

        求解失败与几何错误记为失败行，不抛出
        """
        method = ModelVariant(method)
        interface = problem.interface if problem is not None else cfg.interface
        started = time.perf_counter()
        try:
            problem = problem or build_hexagon_problem(cfg, K)
            model = build_energy_model(method, problem.geometry, cfg.potential, cfg.ecc_form)
            y0 = DeformationState(model.layout, reference.state.site_values(model.layout.sites))
            result = minimize(model, y0, cfg.solver)
        except CouplingError as exc:
            logger.error(f"{method.value} K={K} 运行出错: {exc}")
            wall_ms = 1000.0 * (time.perf_counter() - started)
            return RunOutcome(failed_record(method.value, K, interface, cfg.potential.kind, "error", wall_ms))
        wall_ms = 1000.0 * (time.perf_counter() - started)
        if not result.converged:
            record = failed_record(method.value, K, interface, cfg.potential.kind, result.status.value, wall_ms)
            return RunOutcome(record, model, result)
        error = w1inf_error(result.state, reference.state, problem.triangles)
        record = RunRecord(
            method=method.value,
            K=K,
            w1inf_error=error,
            energy=result.energy,
            iterations=result.iterations,
            wall_ms=wall_ms,
            failed=False,
            interface=interface,
            potential=cfg.potential.kind,
            status=result.status.value,
        )
        return RunOutcome(record, model, result)

    def run_convergence(
        self,
        cfg: ExperimentConfig,
        interfaces: Optional[Sequence[str]] = None,
        reference: Optional[ReferenceSolution] = None,
        show_progress: bool = True,
        dump_state: Optional[Path] = None,
        dump_mesh: Optional[Path] = None,
    ) -> Tuple[pd.DataFrame, Dict[Tuple[str, str, int], RunOutcome]]:
        """
        收敛性实验：参考解只计算一次，(interface, K) 问题并发求解

        Returns:
            (按 CSV 列顺序的结果表, (method, interface, K) -> 运行结果)
        """
        interfaces = list(interfaces or [cfg.interface])
        reference = reference or self.reference_solution(cfg)
        self.recorder.reset()
        outcomes: Dict[Tuple[str, str, int], RunOutcome] = {}

        def solve_problem(interface: str, K: int) -> List[RunOutcome]:
            try:
                problem = build_hexagon_problem(cfg, K, interface)
            except CouplingError as exc:
                logger.error(f"K={K} ({interface}) 问题构造失败: {exc}")
                self.recorder.record_error(f"{interface}/K={K}", str(exc))
                return [
                    RunOutcome(failed_record(m.value, K, interface, cfg.potential.kind, "error"))
                    for m in cfg.methods
                ]
            if dump_mesh is not None and problem.mesh is not None:
                write_mesh(problem.mesh, Path(dump_mesh) / f"mesh_{interface}_K{K}.txt")
            return [self.run_single(cfg, m, K, reference, problem) for m in cfg.methods]

        jobs = [(interface, K) for interface in interfaces for K in cfg.K]
        with ThreadPoolExecutor(max_workers=self._threads()) as pool:
            futures = {pool.submit(solve_problem, interface, K): (interface, K) for interface, K in jobs}
            iterator = as_completed(futures)
            if show_progress:
                iterator = tqdm(iterator, total=len(futures), desc="收敛性实验")
            for future in iterator:
                for outcome in future.result():
                    self.recorder.record_run(outcome.record)
                    rec = outcome.record
                    outcomes[(rec.method, rec.interface, rec.K)] = outcome
                    if dump_state is not None and outcome.state is not None:
                        write_state_csv(
                            outcome.state,
                            Path(dump_state) / f"state_{rec.method}_{rec.interface}_K{rec.K}.csv",
                        )
        self.recorder.write_csv(cfg.output)
        return self.recorder.to_dataframe(), outcomes

    def run_patch_test(
        self,
        cfg: ExperimentConfig,
        methods: Sequence[str] = ("qce", "ecc", "acc"),
        interfaces: Sequence[str] = ("aligned", "nonaligned"),
        potentials: Optional[Sequence[PairPotential]] = None,
        n_random: int = 20,
        tolerance: float = PATCH_TOLERANCE,
        output: Optional[Path] = None,
    ) -> PatchTestReport:
        """
        鬼力检验：在完好晶体上计算 y = F x 处的鬼力残差

        对配置中的每个 K 与每种界面检验；F 取配置中的外加变形加 n_random 个随机变形
        """
        potentials = list(potentials or [cfg.potential])
        rng = np.random.default_rng(cfg.seed)
        deformations = [cfg.F] + random_deformations(n_random, rng)
        perfect = cfg.model_copy(update={"defect": []})
        rows = []
        for interface, K in itertools.product(interfaces, cfg.K):
            problem = build_hexagon_problem(perfect, K, interface)
            for method in methods:
                base = build_energy_model(method, problem.geometry, potentials[0], cfg.ecc_form)
                for potential in potentials:
                    model = base.with_potential(potential)
                    for F in deformations:
                        residual = ghost_force_residual(model, F)
                        row = PatchTestRow(
                            method=ModelVariant(method).value,
                            interface=interface,
                            K=K,
                            potential=potential.kind,
                            F=format_matrix(F),
                            residual=residual,
                            passed=residual <= tolerance,
                        )
                        rows.append(row)
                        self.recorder.record_patch(row)
                logger.info(f"鬼力检验 {method}/{interface}/K={K} 完成")
        report = PatchTestReport(pd.DataFrame([r.model_dump() for r in rows]), tolerance)
        if output is not None:
            self.recorder.write_patch_csv(output)
        if not report.passed:
            logger.error("ECC/ACC 鬼力残差超过阈值")
        return report

    def bond_density_check(
        self,
        n_triangles: int = 100,
        extent: int = 5,
        max_direction: int = 4,
        seed: int = 0,
    ) -> BondDensityReport:
        """随机格点三角形与方向上的键密度恒等式，精确有理数比较"""
        rng = np.random.default_rng(seed)
        rows = []
        while len(rows) < n_triangles:
            verts = rng.integers(-extent, extent + 1, size=(3, 2))
            (ax, ay), (bx, by), (cx, cy) = verts.tolist()
            if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) == 0:
                continue
            r = tuple(rng.integers(-max_direction, max_direction + 1, size=2).tolist())
            if r == (0, 0):
                continue
            tri = ((ax, ay), (bx, by), (cx, cy))
            lhs, area = verify_bond_density(tri, r)
            rows.append({"triangle": str(tri), "r": str(r), "lhs": str(lhs), "area": str(area), "equal": lhs == area})
        report = BondDensityReport(pd.DataFrame(rows))
        log = logger.info if report.passed else logger.error
        log(f"键密度检验: {len(rows)} 个三角形, 全部相等={report.passed}")
        return report

    def check_reference_distance(
        self,
        reference: ReferenceSolution,
        triangles: LatticeTriangleSet,
        band: Tuple[float, float] = REFERENCE_BAND,
    ) -> Tuple[float, bool]:
        """原子参考解到参考格点构型的 W^{1,∞} 距离及其是否落在合理区间内"""
        undeformed = DeformationState.uniform(reference.model.layout)
        distance = w1inf_error(reference.state, undeformed, triangles)
        ok = band[0] <= distance <= band[1]
        (logger.info if ok else logger.warning)(f"参考解距离参考构型 {distance:.4f}，区间 {band}: {ok}")
        return distance, ok

    def run_oned(
        self,
        method: str,
        N: int,
        R: int,
        F: float,
        potential: PairPotential,
    ) -> OnedReport:
        """一维链在 y = F x 处的能量、最大鬼力与逐原子梯度"""
        model = build_chain_model(method, Chain1D(N=N, R=R), potential)
        values = model.uniform(F)
        energy, grad = model.full_gradient(values)
        free = model.layout.free_indices
        table = pd.DataFrame({
            "site": np.asarray(model.layout.sites)[free],
            "gradient": grad[free],
        })
        ghost = float(np.max(np.abs(grad[free]))) if len(free) else 0.0
        return OnedReport(method, energy, ghost, table)

    def run_oned_convergence(
        self,
        potential: Optional[PairPotential] = None,
        sizes: Sequence[int] = (2, 4, 6),
        N: int = 20,
        R: int = 3,
        dipole: float = 0.05,
        methods: Sequence[str] = ("qce", "ecc", "acc"),
        options: Optional[MinimizeOptions] = None,
    ) -> pd.DataFrame:
        """
        一维收敛性实验：力偶极拉伸键 (−1, 0)，连续介质区间 (K, N) 随 K 增大而后移

        Returns:
            列为 method, K, w1inf_error, energy, iterations 的结果表
        """
        potential = potential or PairPotential.morse(alpha=1.5)
        options = options or MinimizeOptions(tol=1e-10)
        forces = dipole_forces(dipole)
        reference = build_chain_model("atomistic", Chain1D(N=N, R=R), potential)
        ref_values = self._solve_chain(reference, reference.uniform(1.0), forces, options)
        rows = []
        for K in sizes:
            for method in methods:
                model = build_chain_model(method, Chain1D(N=N, R=R, interface=(K, N)), potential)
                start = np.array([ref_values[reference.layout.index[i]] for i in model.layout.sites])
                values, result = self._solve_chain(model, start, forces, options, with_result=True)
                rows.append({
                    "method": method,
                    "K": K,
                    "w1inf_error": w1inf_error_1d(model, values, reference, ref_values),
                    "energy": result.energy,
                    "iterations": result.iterations,
                })
        df = pd.DataFrame(rows, columns=["method", "K", "w1inf_error", "energy", "iterations"])
        logger.info(f"一维收敛性实验完成: {len(df)} 行")
        return df

    @staticmethod
    def _solve_chain(
        model: ChainModel1D,
        start: np.ndarray,
        forces: Dict[int, float],
        options: MinimizeOptions,
        with_result: bool = False,
    ):
        objective = model.objective(start, model.force_vector(forces))
        precond = LaplacePreconditioner(model.layout.connectivity(), ~model.layout.fixed)
        result = minimize(objective, start[model.layout.free_indices], options, precond)
        if not result.converged:
            raise SolverFailure(f"一维 {model.variant} 极小化未收敛: {result.status.value}", result)
        values = objective.to_values(result.x)
        return (values, result) if with_result else values


def write_state_csv(state: DeformationState, path: Union[str, Path]) -> Path:
    """变形状态写为 site_x,site_y,y_x,y_y"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sites = np.asarray(state.layout.sites, dtype=np.int64).reshape(-1, 2)
    pd.DataFrame({
        "site_x": sites[:, 0],
        "site_y": sites[:, 1],
        "y_x": state.positions[:, 0],
        "y_y": state.positions[:, 1],
    }).to_csv(path, index=False)
    logger.debug(f"状态已写出: {path}")
    return path


# 创建实验运行器单例实例
experiment_runner = ExperimentRunner()
