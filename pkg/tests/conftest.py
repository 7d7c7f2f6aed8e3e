"""
测试公共夹具：势函数、小规模六边形问题与一维链
"""
import numpy as np
import pytest
from loguru import logger

from ac_coupling_project.experiments.hexagon_problem import build_hexagon_problem
from ac_coupling_project.models.config_models import ExperimentConfig
from ac_coupling_project.potentials.pair_potentials import PairPotential

# n = 10 的六边形：271 个格点，原子区域半径 3，连续介质环宽 3
SMALL_SIDE = 10


@pytest.fixture(autouse=True)
def _quiet_logger():
    """测试期间关闭日志输出，结束后移除 CLI 测试添加的处理器"""
    logger.remove()
    yield
    logger.remove()


@pytest.fixture(scope="session")
def lj() -> PairPotential:
    return PairPotential.lennard_jones()


@pytest.fixture(scope="session")
def morse() -> PairPotential:
    return PairPotential.morse(alpha=3.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_config() -> ExperimentConfig:
    """带默认 8 原子空洞的小规模配置"""
    return ExperimentConfig(hexagon_side=SMALL_SIDE, K=[4])


@pytest.fixture(scope="session")
def perfect_config() -> ExperimentConfig:
    """不含缺陷的小规模配置，用于鬼力检验"""
    return ExperimentConfig(hexagon_side=SMALL_SIDE, K=[4], defect=[])


@pytest.fixture(scope="session")
def aligned_problem(perfect_config):
    return build_hexagon_problem(perfect_config, interface="aligned")


@pytest.fixture(scope="session")
def nonaligned_problem(perfect_config):
    return build_hexagon_problem(perfect_config, interface="nonaligned")


@pytest.fixture(scope="session")
def defect_problem(small_config):
    return build_hexagon_problem(small_config)


@pytest.fixture
def perturb(rng):
    """在自由自由度上加均匀随机扰动，Dirichlet 项保持不变"""

    def apply(state, amplitude: float = 0.03):
        x = state.free_vector()
        return state.with_free(x + amplitude * rng.uniform(-1.0, 1.0, size=x.shape))

    return apply
