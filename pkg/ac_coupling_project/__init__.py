"""
原子/连续介质能量耦合分子静力学工具包

实现两体势下的一致耦合方法(ECC、ACC)、QCE基准方法、一维参考模型，
以及精确键几何装配、解析梯度、能量极小化和数值实验框架
"""

__version__ = "0.1.0"
