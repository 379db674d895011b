# tests/__init__.py
"""
Test suite for subspace-mapper
"""
