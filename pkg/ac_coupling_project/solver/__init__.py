"""
非线性共轭梯度极小化
"""
