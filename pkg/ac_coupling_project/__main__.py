"""
主入口模块

使包可以作为模块直接运行：python -m ac_coupling_project
"""
import sys

from ac_coupling_project.cli import app


if __name__ == "__main__":
    sys.exit(app())
