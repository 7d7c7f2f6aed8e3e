"""
格点、邻居集与区域分解
"""
