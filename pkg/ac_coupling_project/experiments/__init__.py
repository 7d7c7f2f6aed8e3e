"""
六边形晶体实验与结果记录
"""
