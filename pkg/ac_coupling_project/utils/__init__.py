"""
工具模块包
日志配置等通用辅助函数
"""
