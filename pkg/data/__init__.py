"""
Data layer: domain types, dataset files and synthetic generators
"""
