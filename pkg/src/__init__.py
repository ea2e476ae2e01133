"""
Python package initializer for the src module.
"""

__version__ = "1.0.0"
