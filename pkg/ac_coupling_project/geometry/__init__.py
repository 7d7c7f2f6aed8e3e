"""
精确有理数几何：多边形、区域与键的分段
"""
