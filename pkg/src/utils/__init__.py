"""
Utility Functions Module

Contains constants and error types shared by the numerical modules.
"""
