"""
Test package for Hydrobell.
"""
