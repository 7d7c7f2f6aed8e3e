"""
命令行界面

提供鬼力检验、收敛性实验、键密度检验与一维模型的命令行入口
"""
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from ac_coupling_project import __version__
from ac_coupling_project.errors import CouplingError, SolverFailure
from ac_coupling_project.experiments.experiment_runner import (
    PATCH_TOLERANCE,
    experiment_runner,
    write_state_csv,
)
from ac_coupling_project.experiments.hexagon_problem import build_hexagon_problem
from ac_coupling_project.fem.mesh import write_mesh
from ac_coupling_project.models.config_models import ExperimentConfig
from ac_coupling_project.potentials.pair_potentials import PairPotential
from ac_coupling_project.utils.logging_utils import add_log_file, setup_logging

EXIT_INVARIANT = 1
EXIT_SOLVER = 2
EXIT_INTERRUPT = 130

# 创建Typer应用
app = typer.Typer(
    name="ac-coupling",
    help="原子/连续介质能量耦合分子静力学工具",
    add_completion=False,
)

# 创建Rich控制台实例
console = Console()


def _spinner() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[bold blue]{task.description}"),
        TimeElapsedColumn(),
        console=console,
    )


def _parse_potential(name: str, alpha: float = 3.0, cutoff: float = 3.1) -> PairPotential:
    if name in ("lj", "lennard-jones"):
        return PairPotential.lennard_jones(cutoff)
    if name == "morse":
        return PairPotential.morse(alpha, cutoff)
    raise typer.BadParameter(f"未知的势函数: {name} (可选 lennard-jones, morse)")


def _load_config(config: Optional[Path], overrides: Dict[str, Any]) -> ExperimentConfig:
    """读取 JSON 配置并应用命令行覆盖项"""
    data: Dict[str, Any] = {}
    if config is not None:
        data = json.loads(config.read_text(encoding="utf-8"))
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.model_validate(data)


def _fail(message: str, code: int) -> None:
    console.print(f"[bold red]{message}[/bold red]")
    sys.exit(code)


def _run_guarded(action):
    """统一的异常到退出码映射"""
    try:
        return action()
    except KeyboardInterrupt:
        console.print("\n[bold yellow]运行被用户中断[/bold yellow]")
        sys.exit(EXIT_INTERRUPT)
    except SolverFailure as e:
        logger.error(f"求解失败: {e}")
        _fail(f"求解失败: {e}", EXIT_SOLVER)
    except (CouplingError, ValidationError, ValueError) as e:
        logger.error(f"配置或几何错误: {e}")
        _fail(f"配置或几何错误: {e}", EXIT_INVARIANT)


@app.callback()
def main(
    log_level: str = typer.Option("INFO", "--log-level", help="控制台日志级别"),
    log_dir: Optional[Path] = typer.Option(None, "--log-dir", help="日志目录(默认 AC_COUPLING_LOG_DIR 或 logs/)"),
) -> None:
    """原子/连续介质耦合实验"""
    setup_logging(log_dir=log_dir, console_level=log_level.upper())


@app.command("version")
def version() -> None:
    """显示版本号"""
    console.print(f"ac-coupling {__version__}")


@app.command("patch-test")
def patch_test(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    n_random: int = typer.Option(20, "--n-random", "-n", help="随机变形梯度个数"),
    interfaces: List[str] = typer.Option(["aligned", "nonaligned"], "--interface", "-i", help="界面类型"),
    both_potentials: bool = typer.Option(False, "--both-potentials", help="同时检验 LJ 与 Morse(α=3)"),
    tolerance: float = typer.Option(PATCH_TOLERANCE, "--tolerance", help="ECC/ACC 残差阈值"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="检验结果 CSV"),
) -> None:
    """
    鬼力检验：ECC 与 ACC 的残差超过阈值时退出码为 1，QCE 只报告
    """
    cfg = _run_guarded(lambda: _load_config(config, {}))
    potentials = [PairPotential.lennard_jones(), PairPotential.morse()] if both_potentials else [cfg.potential]
    console.print(Panel(
        f"[bold blue]鬼力检验[/bold blue]\n\n"
        f"六边形边长: [yellow]{cfg.side}[/yellow]\n"
        f"K: [yellow]{', '.join(map(str, cfg.K))}[/yellow]\n"
        f"界面: [yellow]{', '.join(interfaces)}[/yellow]\n"
        f"势函数: [yellow]{', '.join(p.kind for p in potentials)}[/yellow]\n"
        f"随机变形: [yellow]{n_random}[/yellow]",
        title="检验配置",
    ))
    with _spinner() as progress:
        task = progress.add_task("计算鬼力残差...", total=None)
        report = _run_guarded(lambda: experiment_runner.run_patch_test(
            cfg,
            interfaces=interfaces,
            potentials=potentials,
            n_random=n_random,
            tolerance=tolerance,
            output=output,
        ))
        progress.update(task, completed=1, total=1)

    table = Table(title="最大鬼力残差")
    for column in ("方法", "界面", "K", "势函数", "最大残差", "结论"):
        table.add_column(column)
    grouped = report.rows.groupby(["method", "interface", "K", "potential"], sort=True)["residual"].max()
    for (method, interface, K, potential), residual in grouped.items():
        if method == "qce":
            verdict = "[yellow]预期存在鬼力[/yellow]"
        elif residual <= tolerance:
            verdict = "[green]通过[/green]"
        else:
            verdict = "[red]失败[/red]"
        table.add_row(method, interface, str(K), potential, f"{residual:.3e}", verdict)
    console.print(table)
    if not report.passed:
        _fail("ECC/ACC 鬼力残差超过阈值", EXIT_INVARIANT)


@app.command("convergence")
def convergence(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    K: Optional[List[int]] = typer.Option(None, "--K", "-k", help="原子区域大小(可重复)"),
    methods: Optional[List[str]] = typer.Option(None, "--method", "-m", help="耦合方法(可重复)"),
    interfaces: Optional[List[str]] = typer.Option(None, "--interface", "-i", help="界面类型(可重复)"),
    full_scale: bool = typer.Option(False, "--full-scale", help="使用 n = 129 的完整规模"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="结果 CSV 路径"),
    dump_mesh: Optional[Path] = typer.Option(None, "--dump-mesh", help="网格输出目录"),
    dump_state: Optional[Path] = typer.Option(None, "--dump-state", help="极小化状态输出目录"),
) -> None:
    """
    收敛性实验：先计算原子参考解，再对每个 (method, K) 极小化耦合能量
    """
    overrides = {
        "K": K or None,
        "methods": methods or None,
        "full_scale": full_scale or None,
        "output": output,
    }
    cfg = _run_guarded(lambda: _load_config(config, overrides))
    interfaces = interfaces or [cfg.interface]
    console.print(Panel(
        f"[bold blue]收敛性实验[/bold blue]\n\n"
        f"六边形边长: [yellow]{cfg.side}[/yellow]\n"
        f"K: [yellow]{cfg.K}[/yellow]\n"
        f"方法: [yellow]{', '.join(m.value for m in cfg.methods)}[/yellow]\n"
        f"界面: [yellow]{', '.join(interfaces)}[/yellow]\n"
        f"势函数: [yellow]{cfg.potential.kind}[/yellow]\n"
        f"输出: [yellow]{cfg.output}[/yellow]",
        title="实验配置",
    ))

    # 单次实验日志在失败退出时也要移除
    run_log = add_log_file(cfg.output.with_suffix(".log"))
    try:
        with _spinner() as progress:
            task = progress.add_task("计算原子参考解...", total=None)
            problem = _run_guarded(lambda: build_hexagon_problem(cfg, with_mesh=False))
            reference = _run_guarded(lambda: experiment_runner.reference_solution(cfg, problem))
            progress.update(task, completed=1, total=1)
        distance, in_band = experiment_runner.check_reference_distance(reference, problem.triangles)
        console.print(f"参考解到参考构型的距离: [yellow]{distance:.4f}[/yellow]"
                      + ("" if in_band else " [red](超出合理区间)[/red]"))

        df, _ = _run_guarded(lambda: experiment_runner.run_convergence(
            cfg,
            interfaces=interfaces,
            reference=reference,
            dump_state=dump_state,
            dump_mesh=dump_mesh,
        ))
    finally:
        logger.remove(run_log)

    table = Table(title="W^{1,∞} 误差")
    for column in ("方法", "界面", "K", "误差", "能量", "迭代", "耗时(ms)"):
        table.add_column(column)
    for row in df.itertuples(index=False):
        error = "[red]失败[/red]" if row.failed else f"{row.w1inf_error:.3e}"
        energy = "-" if math.isnan(row.energy) else f"{row.energy:.10g}"
        table.add_row(row.method, row.interface, str(row.K), error, energy, str(row.iterations), f"{row.wall_ms:.0f}")
    console.print(table)
    console.print(f"[bold green]结果已保存:[/bold green] {cfg.output}")
    if bool(df["failed"].any()):
        _fail(f"{int(df['failed'].sum())} 次运行求解失败", EXIT_SOLVER)


@app.command("single-run")
def single_run(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    method: str = typer.Option("ecc", "--method", "-m", help="耦合方法"),
    K: int = typer.Option(4, "--K", "-k", help="原子区域大小"),
    interface: Optional[str] = typer.Option(None, "--interface", "-i", help="界面类型"),
    dump_mesh: Optional[Path] = typer.Option(None, "--dump-mesh", help="网格输出文件"),
    dump_state: Optional[Path] = typer.Option(None, "--dump-state", help="极小化状态输出文件"),
) -> None:
    """
    单个 (method, K) 运行
    """
    cfg = _run_guarded(lambda: _load_config(config, {"K": [K], "methods": [method], "interface": interface}))
    with _spinner() as progress:
        task = progress.add_task(f"运行 {method}, K={K}...", total=None)
        reference = _run_guarded(lambda: experiment_runner.reference_solution(cfg))
        problem = _run_guarded(lambda: build_hexagon_problem(cfg, K))
        outcome = experiment_runner.run_single(cfg, method, K, reference, problem)
        progress.update(task, completed=1, total=1)

    rec = outcome.record
    if dump_mesh is not None and problem.mesh is not None:
        write_mesh(problem.mesh, dump_mesh)
    if dump_state is not None and outcome.state is not None:
        write_state_csv(outcome.state, dump_state)
    console.print(Panel(
        f"方法: [yellow]{rec.method}[/yellow]  K: [yellow]{rec.K}[/yellow]  界面: [yellow]{rec.interface}[/yellow]\n"
        f"状态: [yellow]{rec.status}[/yellow]\n"
        f"W^{{1,∞}} 误差: [yellow]{rec.w1inf_error:.6e}[/yellow]\n"
        f"能量: [yellow]{rec.energy:.12g}[/yellow]\n"
        f"迭代次数: [yellow]{rec.iterations}[/yellow]  耗时: [yellow]{rec.wall_ms:.0f}[/yellow] ms",
        title="运行结果",
    ))
    if rec.failed:
        _fail("求解失败", EXIT_SOLVER)


@app.command("bond-density-check")
def bond_density_check(
    samples: int = typer.Option(100, "--samples", "-n", help="随机三角形个数"),
    seed: int = typer.Option(0, "--seed", "-s", help="随机种子"),
) -> None:
    """
    键密度恒等式的精确检验
    """
    report = _run_guarded(lambda: experiment_runner.bond_density_check(n_triangles=samples, seed=seed))
    exact = int(report.rows["equal"].sum())
    # 有理数差值的最大绝对值
    max_diff = max(
        (abs(Fraction(lhs) - Fraction(area)) for lhs, area in zip(report.rows["lhs"], report.rows["area"])),
        default=Fraction(0),
    )
    console.print(f"max |lhs − |T|| = [yellow]{max_diff}[/yellow]")
    console.print(f"精确相等: [yellow]{exact}/{len(report.rows)}[/yellow]")
    if not report.passed:
        _fail("键密度恒等式不成立", EXIT_INVARIANT)


@app.command("oned")
def oned(
    method: str = typer.Option("ecc", "--method", "-m", help="atomistic, cauchy-born, qce, ecc, acc, acc-tilde"),
    N: int = typer.Option(10, "--N", help="链半长"),
    R: int = typer.Option(2, "--R", help="相互作用范围"),
    F: float = typer.Option(1.0, "--F", help="均匀变形梯度"),
    potential: str = typer.Option("lennard-jones", "--potential", "-p", help="lennard-jones 或 morse"),
    alpha: float = typer.Option(3.0, "--alpha", help="Morse 参数"),
) -> None:
    """
    一维链在 y = F x 处的能量、最大鬼力与逐原子梯度
    """
    pot = _parse_potential(potential, alpha)
    report = _run_guarded(lambda: experiment_runner.run_oned(method, N, R, F, pot))
    console.print(Panel(
        f"方法: [yellow]{report.method}[/yellow]\n"
        f"能量: [yellow]{report.energy:.15g}[/yellow]\n"
        f"最大鬼力: [yellow]{report.max_ghost_force:.6e}[/yellow]",
        title="一维模型",
    ))
    table = Table(title="逐原子梯度")
    table.add_column("原子")
    table.add_column("梯度")
    for row in report.gradients.itertuples(index=False):
        table.add_row(str(row.site), f"{row.gradient:+.6e}")
    console.print(table)


@app.command("oned-convergence")
def oned_convergence(
    sizes: List[int] = typer.Option([2, 4, 6], "--K", "-k", help="原子区域右端(可重复)"),
    N: int = typer.Option(20, "--N", help="链半长"),
    R: int = typer.Option(3, "--R", help="相互作用范围"),
    dipole: float = typer.Option(0.05, "--dipole", help="力偶极大小"),
    potential: str = typer.Option("morse", "--potential", "-p", help="lennard-jones 或 morse"),
    alpha: float = typer.Option(1.5, "--alpha", help="Morse 参数"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="结果 CSV 路径"),
) -> None:
    """
    一维收敛性实验
    """
    pot = _parse_potential(potential, alpha)
    with _spinner() as progress:
        task = progress.add_task("一维收敛性实验...", total=None)
        df = _run_guarded(lambda: experiment_runner.run_oned_convergence(pot, sizes=sizes, N=N, R=R, dipole=dipole))
        progress.update(task, completed=1, total=1)
    table = Table(title="一维 W^{1,∞} 误差")
    for column in ("方法", "K", "误差", "迭代"):
        table.add_column(column)
    for row in df.itertuples(index=False):
        table.add_row(row.method, str(row.K), f"{row.w1inf_error:.3e}", str(row.iterations))
    console.print(table)
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(output, index=False)
        console.print(f"[bold green]结果已保存:[/bold green] {output}")


if __name__ == "__main__":
    app()
