"""
配置与结果数据模型
"""
