"""
Simulator defaults, solver tolerances and the shipped experiment files.

Package version lives in src.__version__.
"""
