from setuptools import find_packages, setup

setup(
    name="ac-coupling-statics",
    version="0.1.0",
    description="原子/连续介质能量耦合分子静力学工具",
    packages=find_packages(include=["ac_coupling_project", "ac_coupling_project.*"]),
    python_requires=">=3.10",
    install_requires=[
        "pandas>=2.1.4",
        "numpy>=1.26.3",
        "scipy>=1.11.4",
        "triangle>=20230923",
        "typer>=0.9.0",
        "loguru>=0.7.2",
        "pydantic>=2.5.3",
        "tqdm>=4.66.1",
        "python-dotenv>=1.0.1",
        "rich>=13.0.0",
    ],
    extras_require={"dev": ["pytest>=7.4.3", "pytest-cov>=4.1.0"]},
    entry_points={"console_scripts": ["ac-coupling=ac_coupling_project.cli:app"]},
)
