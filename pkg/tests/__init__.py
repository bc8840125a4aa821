"""
Tests package for meshcast.
"""
