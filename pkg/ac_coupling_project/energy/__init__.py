"""
能量模型装配
"""
