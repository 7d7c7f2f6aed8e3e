"""
一维参考模型
"""
