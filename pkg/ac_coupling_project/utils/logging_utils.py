"""
日志配置工具
统一配置控制台与文件日志，日志目录可由 AC_COUPLING_LOG_DIR 覆盖
"""
import os
import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

CONSOLE_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>"
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}"


def default_log_dir() -> Path:
    return Path(os.environ.get("AC_COUPLING_LOG_DIR", "logs"))


def setup_logging(
    log_dir: Optional[Union[str, Path]] = None,
    console_level: str = "INFO",
    file_level: str = "DEBUG",
    run_name: Optional[str] = None,
    rotation: str = "100 MB",
    retention: str = "1 week",
    add_details_file: bool = False,
) -> Path:
    """
    配置日志系统

    Args:
        log_dir: 日志文件目录，默认 AC_COUPLING_LOG_DIR 或 logs/
        console_level: 控制台日志级别
        file_level: 文件日志级别
        run_name: 运行名称，用于日志文件命名
        rotation: 日志文件轮转条件
        retention: 日志保留时间
        add_details_file: 是否额外写一份带颜色标记的详细日志

    Returns:
        实际使用的日志目录
    """
    log_dir = Path(log_dir) if log_dir is not None else default_log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)

    logger.remove()
    logger.add(sys.stdout, level=console_level, format=CONSOLE_FORMAT)

    file_prefix = f"{run_name}_" if run_name else "ac_coupling_"
    logger.add(
        log_dir / f"{file_prefix}{{time}}.log",
        level=file_level,
        rotation=rotation,
        retention=retention,
        compression="zip",
        format=FILE_FORMAT,
    )

    if add_details_file:
        logger.add(
            log_dir / f"{file_prefix}details_{{time}}.txt",
            level=file_level,
            rotation=rotation,
            retention=retention,
            format="<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
                   "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        )

    logger.info(f"日志系统已配置，主日志文件保存在: {log_dir}")
    return log_dir


def add_log_file(
    filepath: Union[str, Path],
    level: str = "DEBUG",
    format_str: Optional[str] = None,
) -> int:
    """
    为单次运行添加日志文件

    Returns:
        处理器ID，可用 logger.remove(id) 移除
    """
    Path(filepath).parent.mkdir(parents=True, exist_ok=True)
    handler_id = logger.add(filepath, level=level, format=format_str or FILE_FORMAT)
    logger.info(f"已添加新日志文件: {filepath}")
    return handler_id
