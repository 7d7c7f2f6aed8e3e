"""
两体势
"""
