"""
连续介质三角网格与 P1 插值
"""
