"""
Fractional Orlicz Lab
Numerical experiments on fractional Sobolev–Orlicz spaces on periodic grids.
"""

__version__ = "0.1.0"
